#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rainfuse/covariates.hpp"
#include "rainfuse/grid.hpp"
#include "rainfuse/hier_model.hpp"
#include "rainfuse/io_ingest.hpp"
#include "rainfuse/products.hpp"

namespace rainfuse {

enum class WindScenario { kConstant, kRotating, kFile };

WindScenario parse_wind_scenario(const std::string& name);
std::string wind_scenario_name(WindScenario w);

struct ScenarioSpec {
  Grid grid = make_grid(20, 20, 2.0, 126.0, 37.0, 10.0);
  int T = 3;
  ModelConfig config = ModelConfig::preset(4);
  ModelState truth;  // filled by default_truth when left empty

  int n_gages = 12;
  int n_stations = 12;  // AWS records written alongside the gages
  WindScenario wind = WindScenario::kRotating;
  double wind_speed = 8.0;       // m/s
  double wind_direction = 45.0;  // degrees, direction the wind blows toward, from east
  double wind_rotation = 30.0;   // degrees per step for kRotating
  double wind_roughness = 2.0;   // m/s of smooth spatial variation
  std::filesystem::path wind_file;  // t,u,v rows for kFile
  bool force_rain = false;       // zero probabilities forced to 0
  std::uint64_t seed = 1;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

/// Truth values for a scenario: published medians for c2, alpha and the
/// radar/gage logistic coefficients, plus moderate values elsewhere.
/// Spline coefficients are drawn from `seed`.
ModelState default_truth(const ModelConfig& config, const Grid& grid, int T, std::uint64_t seed);

struct SimulatedData {
  ObservationSet obs;
  CovariateFields cov;
  ModelState truth;  // truth.Y holds the latent fields
};

/// Forward simulation. Deterministic given spec.seed. Zero observation
/// variances are allowed and give exact observations.
SimulatedData simulate_dataset(const ScenarioSpec& spec);

/// Fixed-shift covariance parameters implied by the scenario truth.
CovarianceSpec covariance_spec(const ScenarioSpec& spec, const CovariateFields& cov);

struct CovarianceProbe {
  int cell = 0;
  Displacement h;
  int t = 0;
  int tau = 0;
};

struct CovarianceEstimate {
  double estimate = 0.0;
  double se = 0.0;  // delete-one jackknife
};

/// Monte Carlo covariance of the latent recursion at each probe over
/// n_real independent replications. Throws for n_real < 100.
std::vector<CovarianceEstimate> empirical_covariance(const CovarianceSpec& spec, int n_real,
                                                     const std::vector<CovarianceProbe>& probes,
                                                     std::uint64_t seed);

/// Jackknife covariance estimate of paired samples.
CovarianceEstimate jackknife_covariance(const std::vector<double>& a, const std::vector<double>& b);

/// truth_Y.csv (x,y,t,y) and truth_params.csv (name,value).
void write_truth(const ModelState& truth, const Grid& grid, const std::filesystem::path& dir);
std::vector<Eigen::VectorXd> read_truth_Y(const std::filesystem::path& path, const Grid& grid, int T);
std::vector<std::pair<std::string, double>> read_truth_params(const std::filesystem::path& path);

}  // namespace rainfuse
