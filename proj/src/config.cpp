#include "rainfuse/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <vector>

namespace rainfuse {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto* end = v.data() + v.size();
  const auto r = std::from_chars(v.data(), end, out);
  if (r.ec != std::errc() || r.ptr != end || !std::isfinite(out))
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  return out;
}

long long to_int(const std::string& key, const std::string& v) {
  long long out = 0;
  const auto* end = v.data() + v.size();
  const auto r = std::from_chars(v.data(), end, out);
  if (r.ec != std::errc() || r.ptr != end)
    throw ConfigError(key + ": expected an integer, got '" + v + "'");
  return out;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto* end = v.data() + v.size();
  const auto r = std::from_chars(v.data(), end, out);
  if (r.ec != std::errc() || r.ptr != end)
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

struct KeySpec {
  const char* key;
  const char* fallback;
  const char* doc;
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
};

#define RF_DOUBLE(field) [](RunConfig& c, const std::string& k, const std::string& v) { c.field = to_double(k, v); }
#define RF_INT(field) \
  [](RunConfig& c, const std::string& k, const std::string& v) { c.field = static_cast<int>(to_int(k, v)); }
#define RF_U64(field) [](RunConfig& c, const std::string& k, const std::string& v) { c.field = to_u64(k, v); }
#define RF_BOOL(field) [](RunConfig& c, const std::string& k, const std::string& v) { c.field = to_bool(k, v); }
#define RF_PATH(field) [](RunConfig& c, const std::string&, const std::string& v) { c.field = v; }

const std::vector<KeySpec>& key_table() {
  static const std::vector<KeySpec> table = {
      {"grid.nx", "20", "cells east-west (>= 2)", RF_INT(grid.nx)},
      {"grid.ny", "20", "cells north-south (>= 2)", RF_INT(grid.ny)},
      {"grid.cell_size_km", "2", "cell edge length in km", RF_DOUBLE(grid.cell_size_km)},
      {"grid.origin_lon", "126", "longitude of the south-west corner", RF_DOUBLE(grid.origin_lon)},
      {"grid.origin_lat", "37", "latitude of the south-west corner", RF_DOUBLE(grid.origin_lat)},
      {"grid.dt_minutes", "10", "minutes between time steps", RF_DOUBLE(grid.dt_minutes)},
      {"grid.T", "3", "number of time steps", RF_INT(T)},

      {"paths.data_dir", "data", "dataset directory (simulate output, fit input)", RF_PATH(paths.data_dir)},
      {"paths.gage", "<data_dir>/gage.csv", "gage records", RF_PATH(paths.gage)},
      {"paths.radar", "<data_dir>/radar.csv", "radar reflectivity", RF_PATH(paths.radar)},
      {"paths.aws", "<data_dir>/aws.csv", "weather-station records for Stage 0", RF_PATH(paths.aws)},
      {"paths.dem", "<data_dir>/dem.csv", "elevation per cell (optional)", RF_PATH(paths.dem)},
      {"paths.covariates", "", "gridded covariates.csv; when set, Stage 0 is skipped", RF_PATH(paths.covariates)},
      {"paths.output_dir", "out", "directory for traces, reports and maps", RF_PATH(paths.output_dir)},
      {"paths.trace", "<output_dir>/trace.csv", "trace read by predict", RF_PATH(paths.trace)},

      {"model.preset", "model4", "model1..model5", [](RunConfig& c, const std::string& k, const std::string& v) {
         try {
           (void)ModelConfig::preset(v);
         } catch (const std::exception& e) {
           throw ConfigError(k + ": " + e.what());
         }
         c.preset = v;
       }},
      {"model.bias_spatial", "<preset>", "spline bias surface c1", RF_BOOL(bias_spatial)},
      {"model.shift_spatial", "<preset>", "spline shift surfaces", RF_BOOL(shift_spatial)},
      {"model.basis_k_bias", "<preset>", "bias basis functions per dimension", RF_INT(basis_k_bias)},
      {"model.basis_k_shift", "<preset>", "shift basis functions per dimension", RF_INT(basis_k_shift)},
      {"model.tau2_shape", "0.5", "Gamma shape for tau2_Y, tau2_eps", RF_DOUBLE(priors.tau2_shape)},
      {"model.tau2_rate", "0.005", "Gamma rate for tau2_Y, tau2_eps", RF_DOUBLE(priors.tau2_rate)},
      {"model.obs_prec_shape", "0.5", "Gamma shape for 1/sigma2_g, 1/sigma2_r", RF_DOUBLE(priors.obs_prec_shape)},
      {"model.obs_prec_rate", "0.005", "Gamma rate for 1/sigma2_g, 1/sigma2_r", RF_DOUBLE(priors.obs_prec_rate)},
      {"model.c2_shape", "1", "Gamma shape for c2", RF_DOUBLE(priors.c2_shape)},
      {"model.c2_rate", "1", "Gamma rate for c2", RF_DOUBLE(priors.c2_rate)},
      {"model.logistic_var", "100", "prior variance of a_g, b_g, a_r, b_r", RF_DOUBLE(priors.logistic_var)},
      {"model.coef_var", "100", "prior variance of regression, bias and shift coefficients", RF_DOUBLE(priors.coef_var)},
      {"model.screen_gages", "true", "relabel implausible zero gages as missing", RF_BOOL(screen_gages)},

      {"sampler.n_iter", "20000", "iterations per chain", RF_INT(sampler.n_iter)},
      {"sampler.burn_in", "10000", "discarded iterations", RF_INT(sampler.burn_in)},
      {"sampler.thin", "10", "keep every thin-th draw after burn-in", RF_INT(sampler.thin)},
      {"sampler.seed", "1", "random seed", RF_U64(sampler.seed)},
      {"sampler.adapt_window", "50", "iterations per tuning round", RF_INT(sampler.adapt_window)},
      {"sampler.adapt_end", "10000", "last tuning iteration (<= burn_in)", RF_INT(sampler.adapt_end)},
      {"sampler.target_rate", "0.4", "target acceptance rate", RF_DOUBLE(sampler.target_rate)},
      {"sampler.adapt_kappa", "1", "tuning gain", RF_DOUBLE(sampler.adapt_kappa)},
      {"sampler.latent_scale", "0.3", "initial latent proposal sd", RF_DOUBLE(sampler.latent_scale)},
      {"sampler.scalar_scale", "0.1", "initial scalar proposal sd", RF_DOUBLE(sampler.scalar_scale)},
      {"sampler.vector_scale", "0.05", "initial vector proposal sd", RF_DOUBLE(sampler.vector_scale)},
      {"sampler.joint_scale", "0.02", "initial sd of the joint moves", RF_DOUBLE(sampler.joint_scale)},
      {"sampler.joint_moves", "true", "enable level, scale, shift and rho joint moves", RF_BOOL(sampler.joint_moves)},
      {"sampler.hyper_every", "4", "sweeps between hyperparameter moves (0 = off)", RF_INT(sampler.hyper_every)},
      {"sampler.chains", "1", "independent chains (pooled in chain order)", RF_INT(sampler.chains)},

      {"holdout.fraction", "0", "fraction of gage and radar records withheld per repetition", RF_DOUBLE(holdout.fraction)},
      {"holdout.seed", "1", "seed for the hold-out split and predictive draws", RF_U64(holdout.seed)},
      {"holdout.repetitions", "1", "independent hold-out repetitions", RF_INT(holdout.repetitions)},
      {"holdout.level", "0.95", "prediction interval level", RF_DOUBLE(holdout.level)},
      {"holdout.log_floor", "-2", "log value used for zeros and small amounts", RF_DOUBLE(holdout.log_floor)},
      {"holdout.sims_per_draw", "4", "predictive simulations per posterior draw", RF_INT(holdout.sims_per_draw)},

      {"simulate.n_gages", "12", "gages placed in distinct random cells", RF_INT(simulate.n_gages)},
      {"simulate.n_stations", "12", "weather stations written to aws.csv", RF_INT(simulate.n_stations)},
      {"simulate.wind", "rotating", "constant, rotating or file", [](RunConfig& c, const std::string& k, const std::string& v) {
         try {
           c.simulate.wind = parse_wind_scenario(v);
         } catch (const std::exception& e) {
           throw ConfigError(k + ": " + e.what());
         }
       }},
      {"simulate.wind_speed", "8", "mean wind speed, m/s", RF_DOUBLE(simulate.wind_speed)},
      {"simulate.wind_direction", "45", "direction blown toward, degrees from east", RF_DOUBLE(simulate.wind_direction)},
      {"simulate.wind_rotation", "30", "degrees per step (rotating)", RF_DOUBLE(simulate.wind_rotation)},
      {"simulate.wind_roughness", "2", "sd of smooth spatial wind variation, m/s", RF_DOUBLE(simulate.wind_roughness)},
      {"simulate.wind_file", "", "t,u,v rows (file)", RF_PATH(simulate.wind_file)},
      {"simulate.force_rain", "false", "no zeros in simulated data", RF_BOOL(simulate.force_rain)},
      {"simulate.seed", "1", "simulation seed", RF_U64(simulate.seed)},
      {"simulate.c2", "1.05", "true multiplicative bias", RF_DOUBLE(simulate.c2)},
      {"simulate.alpha_shift", "0.39", "true wind coefficient", RF_DOUBLE(simulate.alpha_shift)},
      {"simulate.a_r", "-2.81", "true radar logistic intercept", RF_DOUBLE(simulate.a_r)},
      {"simulate.b_r", "-1.69", "true radar logistic slope", RF_DOUBLE(simulate.b_r)},
      {"simulate.a_g", "-0.23", "true gage logistic intercept", RF_DOUBLE(simulate.a_g)},
      {"simulate.b_g", "-0.17", "true gage logistic slope", RF_DOUBLE(simulate.b_g)},
      {"simulate.sigma2_g", "0.3", "true gage error variance (>= 0)", RF_DOUBLE(simulate.sigma2_g)},
      {"simulate.sigma2_r", "0.2", "true radar error variance (>= 0)", RF_DOUBLE(simulate.sigma2_r)},
      {"simulate.rho", "0.8", "true temporal dependence", RF_DOUBLE(simulate.rho)},
      {"simulate.rho_Y", "0.9", "true spatial dependence", RF_DOUBLE(simulate.rho_Y)},
      {"simulate.tau2_Y", "4", "true initial precision", RF_DOUBLE(simulate.tau2_Y)},
      {"simulate.tau2_eps", "4", "true innovation precision (all steps)", RF_DOUBLE(simulate.tau2_eps)},
  };
  return table;
}

#undef RF_DOUBLE
#undef RF_INT
#undef RF_U64
#undef RF_BOOL
#undef RF_PATH

}  // namespace

ModelConfig RunConfig::model() const {
  ModelConfig m = ModelConfig::preset(preset);
  if (bias_spatial) m.bias_spatial = *bias_spatial;
  if (shift_spatial) m.shift_spatial = *shift_spatial;
  if (basis_k_bias) m.basis_k_bias = *basis_k_bias;
  if (basis_k_shift) m.basis_k_shift = *basis_k_shift;
  m.priors = priors;
  return m;
}

std::filesystem::path RunConfig::resolve(const std::filesystem::path& p) const {
  if (p.empty() || p.is_absolute()) return p;
  return base_dir / p;
}

std::filesystem::path RunConfig::gage_path() const {
  return paths.gage.empty() ? resolve(paths.data_dir) / "gage.csv" : resolve(paths.gage);
}
std::filesystem::path RunConfig::radar_path() const {
  return paths.radar.empty() ? resolve(paths.data_dir) / "radar.csv" : resolve(paths.radar);
}
std::filesystem::path RunConfig::aws_path() const {
  return paths.aws.empty() ? resolve(paths.data_dir) / "aws.csv" : resolve(paths.aws);
}
std::filesystem::path RunConfig::dem_path() const {
  return paths.dem.empty() ? resolve(paths.data_dir) / "dem.csv" : resolve(paths.dem);
}
std::filesystem::path RunConfig::covariates_path() const { return resolve(paths.covariates); }
std::filesystem::path RunConfig::output_dir() const { return resolve(paths.output_dir); }
std::filesystem::path RunConfig::trace_path() const {
  return paths.trace.empty() ? output_dir() / "trace.csv" : resolve(paths.trace);
}

ScenarioSpec RunConfig::scenario() const {
  ScenarioSpec s;
  s.grid = grid;
  s.T = T;
  s.config = model();
  s.n_gages = simulate.n_gages;
  s.n_stations = simulate.n_stations;
  s.wind = simulate.wind;
  s.wind_speed = simulate.wind_speed;
  s.wind_direction = simulate.wind_direction;
  s.wind_rotation = simulate.wind_rotation;
  s.wind_roughness = simulate.wind_roughness;
  s.wind_file = resolve(simulate.wind_file);
  s.force_rain = simulate.force_rain;
  s.seed = simulate.seed;
  ModelState truth = default_truth(s.config, grid, T, simulate.seed);
  const auto& o = simulate;
  if (o.c2) truth.c2 = *o.c2;
  if (o.alpha_shift) truth.alpha_shift = *o.alpha_shift;
  if (o.a_r) truth.a_r = *o.a_r;
  if (o.b_r) truth.b_r = *o.b_r;
  if (o.a_g) truth.a_g = *o.a_g;
  if (o.b_g) truth.b_g = *o.b_g;
  if (o.sigma2_g) truth.sigma2_g = *o.sigma2_g;
  if (o.sigma2_r) truth.sigma2_r = *o.sigma2_r;
  if (o.rho) truth.rho = *o.rho;
  if (o.rho_Y) truth.rho_Y = *o.rho_Y;
  if (o.tau2_Y) truth.tau2_Y = *o.tau2_Y;
  if (o.tau2_eps)
    for (double& v : truth.tau2_eps) v = *o.tau2_eps;
  s.truth = truth;
  return s;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  for (const auto& k : key_table())
    if (key == k.key) {
      k.set(*this, key, trim(value));
      return;
    }
  throw ConfigError("unknown key '" + key + "'");
}

void RunConfig::override_seed(std::uint64_t seed) {
  sampler.seed = seed;
  simulate.seed = seed;
  holdout.seed = seed;
}

void RunConfig::override_preset(const std::string& p) { set("model.preset", p); }

RunConfig parse_config(const std::string& text, const std::string& origin) {
  RunConfig cfg;
  std::set<std::string> sections;
  for (const auto& k : key_table()) {
    const std::string key = k.key;
    sections.insert(key.substr(0, key.find('.')));
  }
  std::istringstream in(text);
  std::string line, section;
  std::set<std::string> seen;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = origin + ":" + std::to_string(line_no) + ": ";
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + "malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      if (!sections.count(section)) throw ConfigError(where + "unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected key = value");
    std::string key = trim(line.substr(0, eq));
    if (key.find('.') == std::string::npos) {
      if (section.empty()) throw ConfigError(where + "key '" + key + "' outside any section");
      key = section + "." + key;
    }
    if (!seen.insert(key).second) throw ConfigError(where + "duplicate key '" + key + "'");
    try {
      cfg.set(key, line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  RunConfig cfg = parse_config(ss.str(), path.string());
  cfg.base_dir = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
  return cfg;
}

void validate(const RunConfig& c, Command command) {
  auto fail = [](const std::string& m) { throw ConfigError(m); };
  try {
    validate(c.grid);
  } catch (const std::exception& e) {
    fail(e.what());
  }
  if (c.T < 1) fail("grid.T must be >= 1");
  ModelConfig m;
  try {
    m = c.model();
  } catch (const std::exception& e) {
    fail(std::string("model.preset: ") + e.what());
  }
  if (m.basis_k_bias < 1) fail("model.basis_k_bias must be >= 1");
  if (m.basis_k_shift < 1) fail("model.basis_k_shift must be >= 1");
  const Priors& p = c.priors;
  for (auto [name, v] : {std::pair{"model.tau2_shape", p.tau2_shape}, {"model.tau2_rate", p.tau2_rate},
                         {"model.obs_prec_shape", p.obs_prec_shape}, {"model.obs_prec_rate", p.obs_prec_rate},
                         {"model.c2_shape", p.c2_shape}, {"model.c2_rate", p.c2_rate},
                         {"model.logistic_var", p.logistic_var}, {"model.coef_var", p.coef_var}})
    if (!(v > 0.0)) fail(std::string(name) + " must be positive");
  try {
    c.sampler.validate();
  } catch (const std::exception& e) {
    fail(e.what());
  }
  if (!(c.holdout.fraction >= 0.0 && c.holdout.fraction < 1.0))
    fail("holdout.fraction must lie in [0, 1)");
  if (c.holdout.repetitions < 1) fail("holdout.repetitions must be >= 1");
  if (!(c.holdout.level > 0.0 && c.holdout.level < 1.0)) fail("holdout.level must lie in (0, 1)");
  if (c.holdout.sims_per_draw < 1) fail("holdout.sims_per_draw must be >= 1");

  namespace fs = std::filesystem;
  auto need = [&](const fs::path& path, const char* key) {
    if (!fs::exists(path)) fail(std::string(key) + ": file not found: " + path.string());
  };
  switch (command) {
    case Command::kSimulate:
      try {
        c.scenario().validate();
      } catch (const std::exception& e) {
        fail(std::string("simulate: ") + e.what());
      }
      if (c.simulate.sigma2_g && *c.simulate.sigma2_g < 0.0) fail("simulate.sigma2_g must be >= 0");
      if (c.simulate.sigma2_r && *c.simulate.sigma2_r < 0.0) fail("simulate.sigma2_r must be >= 0");
      if (c.simulate.wind == WindScenario::kFile) need(c.resolve(c.simulate.wind_file), "simulate.wind_file");
      break;
    case Command::kFit:
    case Command::kPredict:
    case Command::kValidate:
      need(c.gage_path(), "paths.gage");
      need(c.radar_path(), "paths.radar");
      if (!c.paths.covariates.empty())
        need(c.covariates_path(), "paths.covariates");
      else
        need(c.aws_path(), "paths.aws");
      if (!c.paths.dem.empty()) need(c.dem_path(), "paths.dem");
      if (command == Command::kPredict) need(c.trace_path(), "paths.trace");
      if (command == Command::kValidate) {
        if (!(c.holdout.fraction > 0.0)) fail("holdout.fraction must be > 0 for validate");
        for (int k = 0; k < c.holdout.repetitions; ++k) {
          need(c.output_dir() / ("holdout_" + std::to_string(k) + ".csv"), "holdout files");
          need(c.output_dir() / ("trace_" + std::to_string(k) + ".csv"), "trace files");
        }
      }
      break;
  }
}

std::string config_help() {
  std::string out =
      "Configuration file: [section] headers followed by key = value lines; '#' starts a\n"
      "comment. Keys may also be written as section.key. Unknown keys are errors.\n"
      "Relative paths are resolved against the config file's directory.\n\n";
  std::string section;
  for (const auto& k : key_table()) {
    const std::string key = k.key;
    const std::string sec = key.substr(0, key.find('.'));
    if (sec != section) {
      section = sec;
      out += "[" + section + "]\n";
    }
    std::string line = "  " + key.substr(key.find('.') + 1);
    line.resize(std::max<std::size_t>(line.size() + 1, 20), ' ');
    line += std::string("(default ") + (k.fallback[0] ? k.fallback : "unset") + ") " + k.doc;
    out += line + "\n";
  }
  return out;
}

}  // namespace rainfuse
