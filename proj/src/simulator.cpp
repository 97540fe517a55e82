#include "rainfuse/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>
#include <random>
#include <stdexcept>

#include "rainfuse/car_gmrf.hpp"
#include "rainfuse/csv.hpp"
#include "rainfuse/spline_basis.hpp"

namespace rainfuse {

WindScenario parse_wind_scenario(const std::string& name) {
  if (name == "constant") return WindScenario::kConstant;
  if (name == "rotating") return WindScenario::kRotating;
  if (name == "file") return WindScenario::kFile;
  throw std::invalid_argument("unknown wind scenario '" + name + "' (constant, rotating, file)");
}

std::string wind_scenario_name(WindScenario w) {
  switch (w) {
    case WindScenario::kConstant: return "constant";
    case WindScenario::kRotating: return "rotating";
    case WindScenario::kFile: return "file";
  }
  return "?";
}

void ScenarioSpec::validate() const {
  rainfuse::validate(grid);
  if (T < 1) throw std::invalid_argument("scenario.T must be >= 1");
  if (n_gages < 0 || n_gages > grid.n())
    throw std::invalid_argument("scenario.n_gages must lie in [0, number of cells]");
  if (n_stations < 0) throw std::invalid_argument("scenario.n_stations must be >= 0");
  if (!(wind_speed >= 0.0)) throw std::invalid_argument("scenario.wind_speed must be >= 0");
  if (!(wind_roughness >= 0.0)) throw std::invalid_argument("scenario.wind_roughness must be >= 0");
  if (wind == WindScenario::kFile && wind_file.empty())
    throw std::invalid_argument("scenario.wind_file is required for the file wind scenario");
  if (!truth.Y.empty()) {
    ModelState probe = truth;
    // Observation variances may be zero in simulation.
    if (probe.sigma2_g == 0.0) probe.sigma2_g = 1.0;
    if (probe.sigma2_r == 0.0) probe.sigma2_r = 1.0;
    rainfuse::validate(probe, config, grid.n());
    if (probe.T() != T) throw std::invalid_argument("scenario truth has the wrong number of time steps");
  }
}

namespace {

Eigen::VectorXd smooth_surface(const TensorBasis& basis, std::mt19937_64& rng) {
  std::normal_distribution<double> norm(0.0, 1.0);
  Eigen::VectorXd coef(basis.columns());
  for (Eigen::Index j = 0; j < coef.size(); ++j) coef[j] = norm(rng);
  return basis.surface(coef);
}

std::vector<std::pair<double, double>> read_wind_file(const std::filesystem::path& path, int T) {
  csv::Reader reader(path, {"t", "u", "v"});
  std::map<long, std::pair<double, double>> rows;
  std::vector<std::string_view> f;
  while (reader.next(f)) {
    if (f.size() != 3)
      throw std::runtime_error(path.string() + ":" + std::to_string(reader.line()) + ": expected 3 fields");
    rows[csv::parse_long(f[0])] = {csv::parse_double(f[1]), csv::parse_double(f[2])};
  }
  std::vector<std::pair<double, double>> out;
  for (int t = 0; t < T; ++t) {
    const auto it = rows.find(t);
    if (it == rows.end())
      throw std::runtime_error(path.string() + ": no wind row for t=" + std::to_string(t));
    out.push_back(it->second);
  }
  return out;
}

}  // namespace

ModelState default_truth(const ModelConfig& config, const Grid& grid, int T, std::uint64_t seed) {
  ModelState s = make_state(config, grid.n(), T);
  std::mt19937_64 rng(seed ^ 0x5eed7a11ULL);
  std::normal_distribution<double> norm(0.0, 1.0);
  s.beta1_mean << 0.5, 0.2, -0.1, 0.1;
  s.beta_dyn << 0.1, 0.05, 0.1, -0.05;
  s.rho_Y = 0.9;
  s.rho = 0.8;
  s.tau2_Y = 4.0;
  for (double& v : s.tau2_eps) v = 4.0;
  s.a_g = -0.23;
  s.b_g = -0.17;
  s.a_r = -2.81;
  s.b_r = -1.69;
  s.c2 = 1.05;
  s.sigma2_g = 0.3;
  s.sigma2_r = 0.2;
  s.alpha_shift = 0.39;
  const double c1_base = std::log(200.0);
  for (Eigen::Index j = 0; j < s.c1_gamma.size(); ++j)
    s.c1_gamma[j] = c1_base + (s.c1_gamma.size() > 1 ? 0.5 * norm(rng) : 0.0);
  for (int t = 0; t + 1 < T; ++t) {
    for (Eigen::Index j = 0; j < s.beta_shift1[t].size(); ++j) s.beta_shift1[t][j] = 0.5 * norm(rng);
    for (Eigen::Index j = 0; j < s.beta_shift2[t].size(); ++j) s.beta_shift2[t][j] = 0.5 * norm(rng);
  }
  return s;
}

SimulatedData simulate_dataset(const ScenarioSpec& spec) {
  spec.validate();
  const Grid& grid = spec.grid;
  const int n = grid.n();
  const int T = spec.T;
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> norm(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  SimulatedData out;
  out.truth = spec.truth.Y.empty() ? default_truth(spec.config, grid, T, spec.seed) : spec.truth;
  ModelState& s = out.truth;

  // Covariate surfaces.
  const TensorBasis smooth = tensor_basis(grid, 3);
  const TensorBasis rough = tensor_basis(grid, 6);
  const Eigen::VectorXd s_temp = smooth_surface(smooth, rng);
  const Eigen::VectorXd s_dtemp = smooth_surface(smooth, rng);
  const Eigen::VectorXd s_rh = smooth_surface(smooth, rng);
  const Eigen::VectorXd s_drh = smooth_surface(smooth, rng);
  const Eigen::VectorXd s_elev = smooth_surface(smooth, rng);
  std::vector<Eigen::VectorXd> temp(T), rh(T), wu(T), wv(T);
  Eigen::VectorXd elev = (300.0 + 150.0 * s_elev.array()).max(0.0).matrix();
  std::vector<std::pair<double, double>> file_wind;
  if (spec.wind == WindScenario::kFile) file_wind = read_wind_file(spec.wind_file, T);
  for (int t = 0; t < T; ++t) {
    temp[t] = (15.0 + 3.0 * s_temp.array() + 0.5 * t * s_dtemp.array()).matrix();
    rh[t] = (75.0 + 8.0 * s_rh.array() + 2.0 * t * s_drh.array()).max(1.0).min(100.0).matrix();
    double u0, v0;
    if (spec.wind == WindScenario::kFile) {
      u0 = file_wind[t].first;
      v0 = file_wind[t].second;
    } else {
      double deg = spec.wind_direction;
      if (spec.wind == WindScenario::kRotating) deg += spec.wind_rotation * t;
      const double rad = deg * std::numbers::pi / 180.0;
      u0 = spec.wind_speed * std::cos(rad);
      v0 = spec.wind_speed * std::sin(rad);
    }
    const Eigen::VectorXd su = smooth_surface(rough, rng);
    const Eigen::VectorXd sv = smooth_surface(rough, rng);
    wu[t] = (u0 + spec.wind_roughness * su.array()).matrix();
    wv[t] = (v0 + spec.wind_roughness * sv.array()).matrix();
  }
  out.cov = assemble_covariates(temp, rh, wu, wv, elev);

  // Latent fields.
  const CarModel car(grid);
  const TensorBasis shift_basis = tensor_basis(grid, spec.config.shift_k());
  s.Y.assign(T, Eigen::VectorXd::Zero(n));
  s.Y[0] = car.sample(rng, out.cov.design_initial() * s.beta1_mean, {s.rho_Y, s.tau2_Y});
  for (int t = 1; t < T; ++t) {
    const Eigen::VectorXd mean = dynamics_mean(t, s.Y[t - 1], grid, out.cov, shift_basis, s);
    s.Y[t] = car.sample(rng, mean, {s.rho_Y, s.tau2_eps[t - 1]});
  }

  // Observations.
  const TensorBasis bias_basis = tensor_basis(grid, spec.config.bias_k());
  const Eigen::VectorXd c1 = bias_basis.surface(s.c1_gamma);
  ObservationSet& obs = out.obs;
  obs.T = T;
  obs.elevation.assign(elev.data(), elev.data() + n);
  obs.radar = empty_radar(grid, T);
  const double sg = std::sqrt(s.sigma2_g), sr = std::sqrt(s.sigma2_r);
  for (int t = 0; t < T; ++t)
    for (int i = 0; i < n; ++i) {
      const double y = s.Y[t][i];
      const double u = unif(rng);
      const double z = norm(rng);
      const bool zero = !spec.force_rain && u < logistic_zero_prob(s.a_r, s.b_r, y);
      obs.radar[t][i] = zero ? 0.0 : std::exp(c1[i] + s.c2 * y + sr * z);
    }

  std::vector<int> cells(n);
  for (int i = 0; i < n; ++i) cells[i] = i;
  std::shuffle(cells.begin(), cells.end(), rng);
  for (int g = 0; g < spec.n_gages; ++g) {
    const int cell = cells[g];
    const auto [lon, lat] = cell_center_lonlat(grid, cell);
    char id[16];
    std::snprintf(id, sizeof id, "G%03d", g + 1);
    for (int t = 0; t < T; ++t) {
      const double y = s.Y[t][cell];
      const double u = unif(rng);
      const double z = norm(rng);
      const bool zero = !spec.force_rain && u < logistic_zero_prob(s.a_g, s.b_g, y);
      GageRecord r;
      r.station_id = id;
      r.lon = lon;
      r.lat = lat;
      r.t = t;
      r.rain = zero ? 0.0 : std::exp(y + sg * z);
      r.cell = cell;
      obs.gages.push_back(r);
    }
  }

  std::shuffle(cells.begin(), cells.end(), rng);
  for (int k = 0; k < spec.n_stations; ++k) {
    const int cell = cells[k % n];
    const auto [lon, lat] = cell_center_lonlat(grid, cell);
    char id[16];
    std::snprintf(id, sizeof id, "S%03d", k + 1);
    for (int t = 0; t < T; ++t) {
      StationRecord r;
      r.station_id = id;
      r.lon = lon;
      r.lat = lat;
      r.t = t;
      r.temp_c = temp[t][cell];
      r.rh_pct = rh[t][cell];
      r.wind_u = wu[t][cell];
      r.wind_v = wv[t][cell];
      obs.stations.push_back(r);
    }
  }
  return out;
}

CovarianceSpec covariance_spec(const ScenarioSpec& spec, const CovariateFields& cov) {
  const ModelState truth =
      spec.truth.Y.empty() ? default_truth(spec.config, spec.grid, spec.T, spec.seed) : spec.truth;
  CovarianceSpec c;
  c.grid = spec.grid;
  c.rho = truth.rho;
  c.rho_Y = truth.rho_Y;
  c.tau2_Y = truth.tau2_Y;
  c.tau2_eps = truth.tau2_eps;
  const TensorBasis shift_basis = tensor_basis(spec.grid, spec.config.shift_k());
  for (int t = 1; t < spec.T; ++t) {
    const auto d = displacement_field(t, cov, shift_basis, truth);
    std::vector<int> src(spec.grid.n());
    for (int i = 0; i < spec.grid.n(); ++i) src[i] = shifted_index(spec.grid, i, d[i]);
    c.sources.push_back(std::move(src));
  }
  return c;
}

CovarianceEstimate jackknife_covariance(const std::vector<double>& a, const std::vector<double>& b) {
  const std::size_t n = a.size();
  if (n != b.size() || n < 3) throw std::invalid_argument("jackknife_covariance: need >= 3 paired values");
  double ma = 0.0, mb = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    ma += a[k];
    mb += b[k];
  }
  ma /= n;
  mb /= n;
  double sx = 0.0, sy = 0.0, sxy = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double x = a[k] - ma, y = b[k] - mb;
    sx += x;
    sy += y;
    sxy += x * y;
  }
  CovarianceEstimate out;
  out.estimate = (sxy - sx * sy / n) / (n - 1);
  std::vector<double> loo(n);
  double mean_loo = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double x = a[k] - ma, y = b[k] - mb;
    loo[k] = (sxy - x * y - (sx - x) * (sy - y) / (n - 1)) / (n - 2);
    mean_loo += loo[k];
  }
  mean_loo /= n;
  double ss = 0.0;
  for (double v : loo) ss += (v - mean_loo) * (v - mean_loo);
  out.se = std::sqrt((n - 1.0) / n * ss);
  return out;
}

std::vector<CovarianceEstimate> empirical_covariance(const CovarianceSpec& spec, int n_real,
                                                     const std::vector<CovarianceProbe>& probes,
                                                     std::uint64_t seed) {
  if (n_real < 100) throw std::invalid_argument("empirical_covariance: n_real must be >= 100");
  spec.validate();
  const int T = spec.T();
  std::vector<int> targets;
  for (const auto& p : probes) {
    if (p.t < 0 || p.tau < 0 || p.t + p.tau >= T)
      throw std::out_of_range("empirical_covariance: probe time outside the series");
    const int j = offset_cell(spec.grid, p.cell, p.h);
    if (j < 0) throw std::out_of_range("empirical_covariance: probe offset leaves the grid");
    targets.push_back(j);
  }
  const CarModel car(spec.grid);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(spec.grid.n());
  std::mt19937_64 rng(seed);
  std::vector<std::vector<double>> a(probes.size()), b(probes.size());
  std::vector<Eigen::VectorXd> y(T);
  for (int r = 0; r < n_real; ++r) {
    y[0] = car.sample(rng, zero, {spec.rho_Y, spec.tau2_Y});
    for (int t = 1; t < T; ++t) {
      Eigen::VectorXd mean(spec.grid.n());
      for (int i = 0; i < spec.grid.n(); ++i) mean[i] = spec.rho * y[t - 1][spec.sources[t - 1][i]];
      y[t] = car.sample(rng, mean, {spec.rho_Y, spec.tau2_eps[t - 1]});
    }
    for (std::size_t p = 0; p < probes.size(); ++p) {
      a[p].push_back(y[probes[p].t][probes[p].cell]);
      b[p].push_back(y[probes[p].t + probes[p].tau][targets[p]]);
    }
  }
  std::vector<CovarianceEstimate> out;
  for (std::size_t p = 0; p < probes.size(); ++p) out.push_back(jackknife_covariance(a[p], b[p]));
  return out;
}

void write_truth(const ModelState& truth, const Grid& grid, const std::filesystem::path& dir) {
  std::string s = "x,y,t,y\n";
  for (int t = 0; t < truth.T(); ++t)
    for (int i = 0; i < grid.n(); ++i) {
      s += std::to_string(grid.x_of(i)) + "," + std::to_string(grid.y_of(i)) + "," +
           std::to_string(t) + ",";
      csv::append_double(s, truth.Y[t][i]);
      s += '\n';
    }
  csv::write_file(dir / "truth_Y.csv", s);
  std::string p = "name,value\n";
  ModelState copy = truth;
  for (const auto& slot : parameter_slots(copy)) {
    p += slot.name + ",";
    csv::append_double(p, *slot.value);
    p += '\n';
  }
  csv::write_file(dir / "truth_params.csv", p);
}

std::vector<Eigen::VectorXd> read_truth_Y(const std::filesystem::path& path, const Grid& grid, int T) {
  csv::Reader reader(path, {"x", "y", "t", "y"});
  std::vector<Eigen::VectorXd> out(T, Eigen::VectorXd::Constant(grid.n(), std::nan("")));
  std::vector<std::string_view> f;
  while (reader.next(f)) {
    if (f.size() != 4) throw std::runtime_error(path.string() + ": expected 4 fields");
    const long x = csv::parse_long(f[0]), y = csv::parse_long(f[1]), t = csv::parse_long(f[2]);
    if (x < 0 || y < 0 || x >= grid.nx || y >= grid.ny || t < 0 || t >= T)
      throw std::runtime_error(path.string() + ":" + std::to_string(reader.line()) + ": index outside grid");
    out[t][grid.index(x, y)] = csv::parse_double(f[3]);
  }
  return out;
}

std::vector<std::pair<std::string, double>> read_truth_params(const std::filesystem::path& path) {
  csv::Reader reader(path, {"name", "value"});
  std::vector<std::pair<std::string, double>> out;
  std::vector<std::string_view> f;
  while (reader.next(f)) {
    if (f.size() != 2) throw std::runtime_error(path.string() + ": expected 2 fields");
    out.emplace_back(std::string(f[0]), csv::parse_double(f[1]));
  }
  return out;
}

}  // namespace rainfuse
