#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rainfuse/car_gmrf.hpp"
#include "rainfuse/covariates.hpp"
#include "rainfuse/grid.hpp"
#include "rainfuse/io_ingest.hpp"
#include "rainfuse/spline_basis.hpp"

namespace rainfuse {

/// Prior hyperparameters. Gamma distributions are shape/rate.
struct Priors {
  double tau2_shape = 0.5, tau2_rate = 0.005;          // tau2_Y, tau2_eps(t)
  double obs_prec_shape = 0.5, obs_prec_rate = 0.005;  // 1/sigma2_g, 1/sigma2_r
  double c2_shape = 1.0, c2_rate = 1.0;
  double logistic_var = 100.0;  // a_g, b_g, a_r, b_r
  double coef_var = 100.0;      // regression, bias and shift coefficients
};

/// Model variant. The five presets reproduce the constant/spatial bias and
/// shift combinations compared by DIC.
struct ModelConfig {
  bool bias_spatial = true;
  bool shift_spatial = true;
  int basis_k_bias = 3;
  int basis_k_shift = 3;
  Priors priors;

  /// model1 .. model5. Throws std::invalid_argument for other values.
  static ModelConfig preset(int model);
  static ModelConfig preset(const std::string& name);

  int bias_k() const { return bias_spatial ? basis_k_bias : 1; }
  int shift_k() const { return shift_spatial ? basis_k_shift : 1; }
};

inline constexpr int kNumRegressors = 4;  // intercept + three covariates

/// Every unknown of the hierarchical model. Time is 0-based; transition
/// quantities (tau2_eps, beta_shift*) are indexed by t - 1 for step t >= 1.
struct ModelState {
  std::vector<Eigen::VectorXd> Y;  // [t] latent log rain, per cell
  Eigen::VectorXd beta1_mean = Eigen::VectorXd::Zero(kNumRegressors);  // (1, temp, rh, elev)
  Eigen::VectorXd beta_dyn = Eigen::VectorXd::Zero(kNumRegressors);    // (1, elev, dtemp, drh)
  double rho_Y = 0.5;
  double rho = 0.5;
  double tau2_Y = 1.0;
  std::vector<double> tau2_eps;  // [t - 1]
  double a_g = 0.0, b_g = 0.0;
  double a_r = 0.0, b_r = 0.0;
  Eigen::VectorXd c1_gamma;  // bias spline coefficients
  double c2 = 1.0;
  double sigma2_g = 1.0;
  double sigma2_r = 1.0;
  double alpha_shift = 0.0;
  std::vector<Eigen::VectorXd> beta_shift1, beta_shift2;  // [t - 1]

  int T() const { return static_cast<int>(Y.size()); }
};

/// Zero-filled state with the right dimensions for a configuration.
ModelState make_state(const ModelConfig& config, int n_cells, int T);

/// Throws std::invalid_argument when a constraint or dimension is violated.
void validate(const ModelState& state, const ModelConfig& config, int n_cells);

enum class Transform { kIdentity, kLog, kLogit };

/// Named scalar slot inside a ModelState (latent fields excluded).
struct ParamSlot {
  std::string name;
  Transform transform = Transform::kIdentity;
  double* value = nullptr;
};

std::vector<ParamSlot> parameter_slots(ModelState& state);

/// Immutable model inputs shared by the sampler and the products.
class Model {
 public:
  Model(Grid grid, ObservationSet obs, CovariateFields cov, ModelConfig config);

  const Grid& grid() const { return grid_; }
  const ObservationSet& obs() const { return obs_; }
  const CovariateFields& covariates() const { return cov_; }
  const ModelConfig& config() const { return config_; }
  const CarModel& car() const { return *car_; }
  const TensorBasis& bias_basis() const { return bias_basis_; }
  const TensorBasis& shift_basis() const { return shift_basis_; }
  const Eigen::MatrixXd& design_initial() const { return x_initial_; }
  const Eigen::MatrixXd& design_dynamic(int t) const { return x_dynamic_[t]; }
  int T() const { return obs_.T; }
  int n() const { return grid_.n(); }

  /// Indices into obs().gages of non-missing records at (t, cell).
  const std::vector<int>& gages_at(int t, int cell) const {
    return gage_index_[static_cast<std::size_t>(t) * n() + cell];
  }

 private:
  Grid grid_;
  ObservationSet obs_;
  CovariateFields cov_;
  ModelConfig config_;
  std::shared_ptr<CarModel> car_;
  TensorBasis bias_basis_, shift_basis_;
  Eigen::MatrixXd x_initial_;
  std::vector<Eigen::MatrixXd> x_dynamic_;
  std::vector<std::vector<int>> gage_index_;
};

/// inverse-logit(a + b y) without overflow.
double logistic_zero_prob(double a, double b, double y);
double log_sigmoid(double eta);

/// Normal log density of x with the given mean and variance.
double normal_logpdf(double x, double mean, double var);

/// Zero-inflated log-normal gage term; densities are over log(rain).
double gage_loglik(double rain, double y_cell, const ModelState& state);
double gage_loglik(const GageRecord& record, double y_cell, const ModelState& state);

/// Zero-inflated radar term with log Ze ~ N(c1_i + c2 y, sigma2_r).
double radar_loglik(double ze, double y_cell, double c1_i, const ModelState& state);
double radar_loglik(const RadarRecord& record, double y_cell, double c1_i,
                    const ModelState& state);

/// Rounds half away from zero.
int round_shift(double delta);

/// Integer displacement per cell for step t >= 1.
std::vector<Displacement> displacement_field(int t, const CovariateFields& cov,
                                             const TensorBasis& shift_basis,
                                             const ModelState& state);

/// Source cell per cell for step t >= 1 (displacement + boundary clamp).
std::vector<int> source_cells(int t, const Model& model, const ModelState& state);

/// rho * y_prev[source(i)] + X_i(t) beta_dyn.
Eigen::VectorXd dynamics_mean(int t, const Eigen::VectorXd& y_prev, const Grid& grid,
                              const CovariateFields& cov, const TensorBasis& shift_basis,
                              const ModelState& state);

/// Bias surface c1 at every cell.
Eigen::VectorXd bias_surface(const Model& model, const ModelState& state);

struct LogPosteriorTerms {
  double gage = 0.0;
  double radar = 0.0;
  double latent = 0.0;
  double prior = 0.0;

  double observation() const { return gage + radar; }
  double total() const { return gage + radar + latent + prior; }
};

double log_prior(const ModelState& state, const ModelConfig& config);

/// Unnormalised log posterior split into its parts. Throws
/// std::runtime_error naming a non-finite term.
LogPosteriorTerms log_posterior_terms(const ModelState& state, const Model& model);
double log_posterior(const ModelState& state, const Model& model);

/// -2 * (gage + radar log-likelihood).
double deviance(const ModelState& state, const Model& model);

}  // namespace rainfuse
