#include "rainfuse/rainfuse.h"

#include <cmath>
#include <exception>
#include <filesystem>
#include <new>
#include <string>

#include "rainfuse/commands.hpp"
#include "rainfuse/config.hpp"
#include "rainfuse/csv.hpp"
#include "rainfuse/hier_model.hpp"
#include "rainfuse/io_ingest.hpp"
#include "rainfuse/products.hpp"

struct rf_config {
  rainfuse::RunConfig config;
};

struct rf_observations {
  rainfuse::ObservationSet obs;
  rainfuse::Grid grid;
};

namespace {

thread_local std::string last_error;

rf_status fail(rf_status s, const std::string& message) {
  last_error = message;
  return s;
}

// Maps the active exception onto a status code.
rf_status translate() {
  try {
    throw;
  } catch (const rainfuse::ConfigError& e) {
    return fail(RF_ERR_CONFIG, e.what());
  } catch (const rainfuse::IngestError& e) {
    return fail(RF_ERR_INGEST, e.what());
  } catch (const rainfuse::csv::IoError& e) {
    return fail(RF_ERR_IO, e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(RF_ERR_IO, e.what());
  } catch (const std::invalid_argument& e) {
    return fail(RF_ERR_INVALID_ARGUMENT, e.what());
  } catch (const std::bad_alloc&) {
    return fail(RF_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(RF_ERR_RUNTIME, e.what());
  } catch (...) {
    return fail(RF_ERR_INTERNAL, "unknown error");
  }
}

template <class F>
rf_status guarded(F&& f) {
  try {
    f();
    last_error.clear();
    return RF_OK;
  } catch (...) {
    return translate();
  }
}

rainfuse::Command to_command(rf_command c) {
  switch (c) {
    case RF_CMD_SIMULATE: return rainfuse::Command::kSimulate;
    case RF_CMD_FIT: return rainfuse::Command::kFit;
    case RF_CMD_PREDICT: return rainfuse::Command::kPredict;
    case RF_CMD_VALIDATE: return rainfuse::Command::kValidate;
  }
  throw std::invalid_argument("unknown command " + std::to_string(static_cast<int>(c)));
}

}  // namespace

extern "C" {

const char* rf_last_error(void) { return last_error.c_str(); }

const char* rf_status_string(rf_status status) {
  switch (status) {
    case RF_OK: return "ok";
    case RF_ERR_INVALID_ARGUMENT: return "invalid argument";
    case RF_ERR_CONFIG: return "configuration error";
    case RF_ERR_INGEST: return "ingest error";
    case RF_ERR_IO: return "i/o error";
    case RF_ERR_RUNTIME: return "runtime error";
    case RF_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* rf_version(void) { return "1.0.0"; }

rf_status rf_config_new(rf_config** out) {
  if (!out) return fail(RF_ERR_INVALID_ARGUMENT, "rf_config_new: out is null");
  *out = nullptr;
  return guarded([&] { *out = new rf_config(); });
}

rf_status rf_config_load(const char* path, rf_config** out) {
  if (!path || !out) return fail(RF_ERR_INVALID_ARGUMENT, "rf_config_load: null argument");
  *out = nullptr;
  return guarded([&] { *out = new rf_config{rainfuse::load_config(path)}; });
}

rf_status rf_config_parse(const char* text, rf_config** out) {
  if (!text || !out) return fail(RF_ERR_INVALID_ARGUMENT, "rf_config_parse: null argument");
  *out = nullptr;
  return guarded([&] { *out = new rf_config{rainfuse::parse_config(text)}; });
}

void rf_config_free(rf_config* config) { delete config; }

rf_status rf_config_set(rf_config* config, const char* key, const char* value) {
  if (!config || !key || !value) return fail(RF_ERR_INVALID_ARGUMENT, "rf_config_set: null argument");
  return guarded([&] { config->config.set(key, value); });
}

rf_status rf_config_override_seed(rf_config* config, uint64_t seed) {
  if (!config) return fail(RF_ERR_INVALID_ARGUMENT, "rf_config_override_seed: null config");
  return guarded([&] { config->config.override_seed(seed); });
}

rf_status rf_config_override_preset(rf_config* config, const char* preset) {
  if (!config || !preset)
    return fail(RF_ERR_INVALID_ARGUMENT, "rf_config_override_preset: null argument");
  return guarded([&] { config->config.override_preset(preset); });
}

rf_status rf_config_validate(const rf_config* config, rf_command command) {
  if (!config) return fail(RF_ERR_INVALID_ARGUMENT, "rf_config_validate: null config");
  return guarded([&] { rainfuse::validate(config->config, to_command(command)); });
}

const char* rf_config_help(void) {
  static const std::string help = rainfuse::config_help();
  return help.c_str();
}

rf_status rf_cmd_run(const rf_config* config, rf_command command) {
  if (!config) return fail(RF_ERR_INVALID_ARGUMENT, "null config");
  return guarded([&] {
    switch (to_command(command)) {
      case rainfuse::Command::kSimulate: rainfuse::cmd_simulate(config->config); break;
      case rainfuse::Command::kFit: rainfuse::cmd_fit(config->config); break;
      case rainfuse::Command::kPredict: rainfuse::cmd_predict(config->config); break;
      case rainfuse::Command::kValidate: rainfuse::cmd_validate(config->config); break;
    }
  });
}

rf_status rf_cmd_simulate(const rf_config* config) { return rf_cmd_run(config, RF_CMD_SIMULATE); }
rf_status rf_cmd_fit(const rf_config* config) { return rf_cmd_run(config, RF_CMD_FIT); }
rf_status rf_cmd_predict(const rf_config* config) { return rf_cmd_run(config, RF_CMD_PREDICT); }
rf_status rf_cmd_validate(const rf_config* config) { return rf_cmd_run(config, RF_CMD_VALIDATE); }

rf_status rf_observations_load(const rf_config* config, rf_observations** out) {
  if (!config || !out) return fail(RF_ERR_INVALID_ARGUMENT, "rf_observations_load: null argument");
  *out = nullptr;
  return guarded([&] {
    const auto& c = config->config;
    rainfuse::InputPaths in;
    in.gage = c.gage_path();
    in.radar = c.radar_path();
    if (std::filesystem::exists(c.aws_path())) in.aws = c.aws_path();
    if (std::filesystem::exists(c.dem_path())) in.dem = c.dem_path();
    *out = new rf_observations{rainfuse::load_observations(in, c.grid, c.T), c.grid};
  });
}

void rf_observations_free(rf_observations* obs) { delete obs; }

rf_status rf_observations_screen(rf_observations* obs, int* flagged) {
  if (!obs) return fail(RF_ERR_INVALID_ARGUMENT, "rf_observations_screen: null handle");
  return guarded([&] {
    rainfuse::ScreenResult r = rainfuse::screen_gage_zeros(obs->obs, obs->grid);
    obs->obs = std::move(r.obs);
    if (flagged) *flagged = r.flagged;
  });
}

rf_status rf_observations_counts(const rf_observations* obs, int* time_steps, int* gage_records,
                                 int* gage_present, int* radar_present) {
  if (!obs) return fail(RF_ERR_INVALID_ARGUMENT, "rf_observations_counts: null handle");
  int gp = 0, rp = 0;
  for (const auto& g : obs->obs.gages) gp += g.rain.has_value();
  for (const auto& field : obs->obs.radar)
    for (const auto& v : field) rp += v.has_value();
  if (time_steps) *time_steps = obs->obs.T;
  if (gage_records) *gage_records = static_cast<int>(obs->obs.gages.size());
  if (gage_present) *gage_present = gp;
  if (radar_present) *radar_present = rp;
  last_error.clear();
  return RF_OK;
}

double rf_standard_zr(double rain_mm_h) {
  try {
    return rainfuse::standard_zr(rain_mm_h);
  } catch (...) {
    translate();
    return std::nan("");
  }
}

double rf_logistic_zero_prob(double a, double b, double y) {
  return rainfuse::logistic_zero_prob(a, b, y);
}

rf_status rf_dic(double d_bar, double d_at_mean, double* dic, double* p_d) {
  if (!dic || !p_d) return fail(RF_ERR_INVALID_ARGUMENT, "rf_dic: null output");
  return guarded([&] {
    const rainfuse::DicResult r = rainfuse::dic_from(d_bar, d_at_mean);
    *dic = r.dic;
    *p_d = r.p_d;
  });
}

}  // extern "C"
