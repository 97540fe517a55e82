#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rainfuse/rainfuse.h"

namespace {

int report(rf_status s, const char* what) {
  if (s == RF_OK) return 0;
  std::fprintf(stderr, "rainfuse %s: %s: %s\n", what, rf_status_string(s), rf_last_error());
  return static_cast<int>(s);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gage and radar rainfall fusion with a Bayesian hierarchical model"};
  app.footer(std::string("\nRAINFUSE_THREADS caps the number of worker threads.\n\n") +
             rf_config_help());
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string preset;
  std::vector<std::string> sets;

  struct Sub {
    const char* name;
    const char* doc;
    rf_command command;
  };
  const Sub subs[] = {
      {"simulate", "Write a synthetic dataset and its truth", RF_CMD_SIMULATE},
      {"fit", "Run Stage 0, screening and MCMC; write traces, report and DIC", RF_CMD_FIT},
      {"predict", "Write rain and zero-probability maps from a trace", RF_CMD_PREDICT},
      {"validate", "Score hold-out coverage for every repetition", RF_CMD_VALIDATE},
  };
  std::optional<rf_command> chosen;
  for (const Sub& s : subs) {
    CLI::App* sub = app.add_subcommand(s.name, s.doc);
    sub->add_option("--config", config_path, "Configuration file")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "Seed for simulation, sampling and hold-out (overrides config)");
    sub->add_option("--preset", preset, "Model variant model1..model5 (overrides config)");
    sub->add_option("--set", sets, "Override a key: section.key=value (repeatable)");
    const rf_command c = s.command;
    sub->callback([&chosen, c] { chosen = c; });
  }

  CLI11_PARSE(app, argc, argv);

  rf_config* cfg = nullptr;
  if (int rc = report(rf_config_load(config_path.c_str(), &cfg), "config")) return rc;
  int rc = 0;
  for (const std::string& kv : sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      std::fprintf(stderr, "rainfuse: --set expects key=value, got '%s'\n", kv.c_str());
      rc = RF_ERR_INVALID_ARGUMENT;
      break;
    }
    const std::string key = kv.substr(0, eq), value = kv.substr(eq + 1);
    if ((rc = report(rf_config_set(cfg, key.c_str(), value.c_str()), "--set"))) break;
  }
  if (!rc && seed) rc = report(rf_config_override_seed(cfg, *seed), "--seed");
  if (!rc && !preset.empty()) rc = report(rf_config_override_preset(cfg, preset.c_str()), "--preset");
  if (!rc) rc = report(rf_cmd_run(cfg, *chosen), "run");
  rf_config_free(cfg);
  return rc;
}
