#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

#include "rainfuse/grid.hpp"
#include "rainfuse/hier_model.hpp"
#include "rainfuse/mcmc.hpp"
#include "rainfuse/simulator.hpp"

namespace rainfuse {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  Grid grid = make_grid(20, 20, 2.0, 126.0, 37.0, 10.0);
  int T = 3;

  struct Paths {
    std::filesystem::path data_dir = "data";
    std::filesystem::path gage, radar, aws, dem;  // default: data_dir/<name>.csv
    std::filesystem::path covariates;             // optional Stage 0 bypass
    std::filesystem::path output_dir = "out";
    std::filesystem::path trace;  // default: output_dir/trace.csv
  } paths;

  std::string preset = "model4";
  std::optional<bool> bias_spatial, shift_spatial;
  std::optional<int> basis_k_bias, basis_k_shift;
  Priors priors;
  bool screen_gages = true;

  SamplerConfig sampler;

  struct Holdout {
    double fraction = 0.0;
    std::uint64_t seed = 1;
    int repetitions = 1;
    double level = 0.95;
    double log_floor = -2.0;
    int sims_per_draw = 4;
  } holdout;

  struct Simulate {
    int n_gages = 12;
    int n_stations = 12;
    WindScenario wind = WindScenario::kRotating;
    double wind_speed = 8.0;
    double wind_direction = 45.0;
    double wind_rotation = 30.0;
    double wind_roughness = 2.0;
    std::filesystem::path wind_file;
    bool force_rain = false;
    std::uint64_t seed = 1;
    // Truth overrides; unset values come from default_truth.
    std::optional<double> c2, alpha_shift, a_r, b_r, a_g, b_g, sigma2_g, sigma2_r, rho, rho_Y,
        tau2_Y, tau2_eps;
  } simulate;

  /// Directory relative paths are resolved against (the config file's).
  std::filesystem::path base_dir = ".";

  /// Model variant after applying the preset and explicit flags.
  ModelConfig model() const;

  std::filesystem::path resolve(const std::filesystem::path& p) const;
  std::filesystem::path gage_path() const;
  std::filesystem::path radar_path() const;
  std::filesystem::path aws_path() const;
  std::filesystem::path dem_path() const;
  std::filesystem::path covariates_path() const;  // empty when unset
  std::filesystem::path output_dir() const;
  std::filesystem::path trace_path() const;

  ScenarioSpec scenario() const;

  /// Sets "section.key" from its text form. Throws ConfigError for unknown
  /// keys or unparseable values.
  void set(const std::string& key, const std::string& value);

  /// Applies the --seed override to every seeded stage.
  void override_seed(std::uint64_t seed);
  void override_preset(const std::string& preset);
};

/// Parses a sectioned key = value file. '#' starts a comment. Throws
/// ConfigError with file:line for unknown sections or keys.
RunConfig load_config(const std::filesystem::path& path);
RunConfig parse_config(const std::string& text, const std::string& origin = "<config>");

enum class Command { kSimulate, kFit, kPredict, kValidate };

/// Checks values and that every input the command reads exists. Throws
/// ConfigError naming the field.
void validate(const RunConfig& config, Command command);

/// Documentation of every key (printed by --help).
std::string config_help();

}  // namespace rainfuse
