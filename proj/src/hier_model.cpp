#include "rainfuse/hier_model.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace rainfuse {

namespace {

double gamma_logpdf(double x, double shape, double rate) {
  if (!(x > 0.0)) return -std::numeric_limits<double>::infinity();
  return shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(x) - rate * x;
}

/// Density of a variance whose precision carries a Gamma prior.
double inv_gamma_var_logpdf(double var, double shape, double rate) {
  if (!(var > 0.0)) return -std::numeric_limits<double>::infinity();
  return gamma_logpdf(1.0 / var, shape, rate) - 2.0 * std::log(var);
}

double normal0_logpdf(const Eigen::VectorXd& v, double var) {
  return -0.5 * v.size() * std::log(2.0 * std::numbers::pi * var) - 0.5 * v.squaredNorm() / var;
}

}  // namespace

ModelConfig ModelConfig::preset(int model) {
  ModelConfig c;
  switch (model) {
    case 1: c.bias_spatial = false; c.shift_spatial = false; break;
    case 2: c.bias_spatial = false; c.shift_spatial = true; break;
    case 3: c.bias_spatial = true; c.shift_spatial = false; break;
    case 4: c.bias_spatial = true; c.shift_spatial = true; break;
    case 5:
      c.bias_spatial = true;
      c.shift_spatial = true;
      c.basis_k_bias = 5;
      c.basis_k_shift = 5;
      break;
    default:
      throw std::invalid_argument("unknown model preset " + std::to_string(model) +
                                  " (expected 1..5)");
  }
  return c;
}

ModelConfig ModelConfig::preset(const std::string& name) {
  if (name.size() == 6 && name.rfind("model", 0) == 0 && name[5] >= '1' && name[5] <= '5')
    return preset(name[5] - '0');
  throw std::invalid_argument("unknown model preset '" + name + "' (expected model1..model5)");
}

ModelState make_state(const ModelConfig& config, int n_cells, int T) {
  ModelState s;
  s.Y.assign(T, Eigen::VectorXd::Zero(n_cells));
  s.tau2_eps.assign(std::max(0, T - 1), 1.0);
  const int kb = config.bias_k() * config.bias_k();
  const int ks = config.shift_k() * config.shift_k();
  s.c1_gamma = Eigen::VectorXd::Zero(kb);
  s.beta_shift1.assign(std::max(0, T - 1), Eigen::VectorXd::Zero(ks));
  s.beta_shift2.assign(std::max(0, T - 1), Eigen::VectorXd::Zero(ks));
  return s;
}

void validate(const ModelState& s, const ModelConfig& config, int n_cells) {
  const int T = s.T();
  if (T < 1) throw std::invalid_argument("state has no time steps");
  for (const auto& y : s.Y)
    if (y.size() != n_cells || !y.allFinite())
      throw std::invalid_argument("latent field has wrong size or non-finite values");
  auto in01 = [](double v) { return v > 0.0 && v < 1.0; };
  if (!in01(s.rho_Y)) throw std::invalid_argument("rho_Y must lie in (0, 1)");
  if (!in01(s.rho)) throw std::invalid_argument("rho must lie in (0, 1)");
  if (!(s.tau2_Y > 0.0)) throw std::invalid_argument("tau2_Y must be positive");
  if (static_cast<int>(s.tau2_eps.size()) != T - 1)
    throw std::invalid_argument("tau2_eps must have T - 1 entries");
  for (double v : s.tau2_eps)
    if (!(v > 0.0)) throw std::invalid_argument("tau2_eps must be positive");
  if (!(s.c2 > 0.0)) throw std::invalid_argument("c2 must be positive");
  if (!(s.sigma2_g > 0.0)) throw std::invalid_argument("sigma2_g must be positive");
  if (!(s.sigma2_r > 0.0)) throw std::invalid_argument("sigma2_r must be positive");
  const int kb = config.bias_k() * config.bias_k();
  const int ks = config.shift_k() * config.shift_k();
  if (s.c1_gamma.size() != kb) throw std::invalid_argument("c1_gamma has wrong length");
  if (static_cast<int>(s.beta_shift1.size()) != T - 1 ||
      static_cast<int>(s.beta_shift2.size()) != T - 1)
    throw std::invalid_argument("beta_shift vectors must have T - 1 entries");
  for (int t = 0; t + 1 < T; ++t)
    if (s.beta_shift1[t].size() != ks || s.beta_shift2[t].size() != ks)
      throw std::invalid_argument("beta_shift coefficient vector has wrong length");
  if (s.beta1_mean.size() != kNumRegressors || s.beta_dyn.size() != kNumRegressors)
    throw std::invalid_argument("regression coefficient vectors must have 4 entries");
}

std::vector<ParamSlot> parameter_slots(ModelState& s) {
  using enum Transform;
  std::vector<ParamSlot> out;
  auto vec = [&](const std::string& base, Eigen::VectorXd& v, Transform tr) {
    for (Eigen::Index j = 0; j < v.size(); ++j)
      out.push_back({base + "[" + std::to_string(j) + "]", tr, &v[j]});
  };
  out.push_back({"rho_Y", kLogit, &s.rho_Y});
  out.push_back({"rho", kLogit, &s.rho});
  out.push_back({"tau2_Y", kLog, &s.tau2_Y});
  for (std::size_t t = 0; t < s.tau2_eps.size(); ++t)
    out.push_back({"tau2_eps[" + std::to_string(t + 1) + "]", kLog, &s.tau2_eps[t]});
  vec("beta1_mean", s.beta1_mean, kIdentity);
  vec("beta_dyn", s.beta_dyn, kIdentity);
  out.push_back({"a_g", kIdentity, &s.a_g});
  out.push_back({"b_g", kIdentity, &s.b_g});
  out.push_back({"a_r", kIdentity, &s.a_r});
  out.push_back({"b_r", kIdentity, &s.b_r});
  vec("c1_gamma", s.c1_gamma, kIdentity);
  out.push_back({"c2", kLog, &s.c2});
  out.push_back({"sigma2_g", kLog, &s.sigma2_g});
  out.push_back({"sigma2_r", kLog, &s.sigma2_r});
  out.push_back({"alpha_shift", kIdentity, &s.alpha_shift});
  for (std::size_t t = 0; t < s.beta_shift1.size(); ++t) {
    vec("beta_shift1[" + std::to_string(t + 1) + "]", s.beta_shift1[t], kIdentity);
    vec("beta_shift2[" + std::to_string(t + 1) + "]", s.beta_shift2[t], kIdentity);
  }
  return out;
}

Model::Model(Grid grid, ObservationSet obs, CovariateFields cov, ModelConfig config)
    : grid_(grid), obs_(std::move(obs)), cov_(std::move(cov)), config_(config) {
  validate(grid_);
  if (obs_.T < 1) throw std::invalid_argument("model needs at least one time step");
  if (cov_.T != obs_.T || cov_.n != grid_.n())
    throw std::invalid_argument("covariate dimensions do not match the observations");
  if (static_cast<int>(obs_.radar.size()) != obs_.T)
    throw std::invalid_argument("radar cube does not match T");
  car_ = std::make_shared<CarModel>(grid_);
  bias_basis_ = tensor_basis(grid_, config_.bias_k());
  shift_basis_ = tensor_basis(grid_, config_.shift_k());
  x_initial_ = cov_.design_initial();
  x_dynamic_.resize(obs_.T);
  for (int t = 1; t < obs_.T; ++t) x_dynamic_[t] = cov_.design_dynamic(t);
  gage_index_.assign(static_cast<std::size_t>(obs_.T) * grid_.n(), {});
  for (int g = 0; g < static_cast<int>(obs_.gages.size()); ++g) {
    const auto& rec = obs_.gages[g];
    if (!rec.rain) continue;
    if (rec.t < 0 || rec.t >= obs_.T || rec.cell < 0 || rec.cell >= grid_.n())
      throw std::invalid_argument("gage record outside the model's grid/time axis");
    gage_index_[static_cast<std::size_t>(rec.t) * grid_.n() + rec.cell].push_back(g);
  }
}

double log_sigmoid(double eta) {
  // log(1 / (1 + e^{-eta}))
  return eta >= 0.0 ? -std::log1p(std::exp(-eta)) : eta - std::log1p(std::exp(eta));
}

double logistic_zero_prob(double a, double b, double y) {
  const double eta = a + b * y;
  if (eta >= 0.0) return 1.0 / (1.0 + std::exp(-eta));
  const double e = std::exp(eta);
  return e / (1.0 + e);
}

double normal_logpdf(double x, double mean, double var) {
  const double d = x - mean;
  return -0.5 * std::log(2.0 * std::numbers::pi * var) - 0.5 * d * d / var;
}

double gage_loglik(double rain, double y_cell, const ModelState& s) {
  if (rain < 0.0) throw std::domain_error("gage_loglik: negative rain");
  const double eta = s.a_g + s.b_g * y_cell;
  if (rain == 0.0) return log_sigmoid(eta);
  return log_sigmoid(-eta) + normal_logpdf(std::log(rain), y_cell, s.sigma2_g);
}

double gage_loglik(const GageRecord& record, double y_cell, const ModelState& s) {
  if (!record.rain) return 0.0;
  return gage_loglik(*record.rain, y_cell, s);
}

double radar_loglik(double ze, double y_cell, double c1_i, const ModelState& s) {
  if (ze < 0.0) throw std::domain_error("radar_loglik: negative reflectivity");
  const double eta = s.a_r + s.b_r * y_cell;
  if (ze == 0.0) return log_sigmoid(eta);
  return log_sigmoid(-eta) + normal_logpdf(std::log(ze), c1_i + s.c2 * y_cell, s.sigma2_r);
}

double radar_loglik(const RadarRecord& record, double y_cell, double c1_i,
                    const ModelState& s) {
  if (!record.ze) return 0.0;
  return radar_loglik(*record.ze, y_cell, c1_i, s);
}

int round_shift(double delta) { return static_cast<int>(std::round(delta)); }

std::vector<Displacement> displacement_field(int t, const CovariateFields& cov,
                                             const TensorBasis& shift_basis,
                                             const ModelState& s) {
  if (t < 1 || t >= cov.T) throw std::out_of_range("displacement_field: t outside [1, T)");
  const Eigen::VectorXd s1 = shift_basis.B * s.beta_shift1[t - 1];
  const Eigen::VectorXd s2 = shift_basis.B * s.beta_shift2[t - 1];
  std::vector<Displacement> out(cov.n);
  for (int i = 0; i < cov.n; ++i) {
    out[i].dx = round_shift(s.alpha_shift * cov.wind_u[t][i] + s1[i]);
    out[i].dy = round_shift(s.alpha_shift * cov.wind_v[t][i] + s2[i]);
  }
  return out;
}

std::vector<int> source_cells(int t, const Model& model, const ModelState& s) {
  const auto d = displacement_field(t, model.covariates(), model.shift_basis(), s);
  std::vector<int> src(model.n());
  for (int i = 0; i < model.n(); ++i) src[i] = shifted_index(model.grid(), i, d[i]);
  return src;
}

Eigen::VectorXd dynamics_mean(int t, const Eigen::VectorXd& y_prev, const Grid& grid,
                              const CovariateFields& cov, const TensorBasis& shift_basis,
                              const ModelState& s) {
  const auto d = displacement_field(t, cov, shift_basis, s);
  Eigen::VectorXd mean = cov.design_dynamic(t) * s.beta_dyn;
  for (int i = 0; i < grid.n(); ++i) mean[i] += s.rho * y_prev[shifted_index(grid, i, d[i])];
  return mean;
}

Eigen::VectorXd bias_surface(const Model& model, const ModelState& s) {
  return model.bias_basis().B * s.c1_gamma;
}

double log_prior(const ModelState& s, const ModelConfig& config) {
  const Priors& p = config.priors;
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  if (!(s.rho_Y > 0.0 && s.rho_Y < 1.0) || !(s.rho > 0.0 && s.rho < 1.0)) return kNegInf;
  double lp = 0.0;
  lp += gamma_logpdf(s.tau2_Y, p.tau2_shape, p.tau2_rate);
  for (double v : s.tau2_eps) lp += gamma_logpdf(v, p.tau2_shape, p.tau2_rate);
  lp += inv_gamma_var_logpdf(s.sigma2_g, p.obs_prec_shape, p.obs_prec_rate);
  lp += inv_gamma_var_logpdf(s.sigma2_r, p.obs_prec_shape, p.obs_prec_rate);
  lp += gamma_logpdf(s.c2, p.c2_shape, p.c2_rate);
  for (double v : {s.a_g, s.b_g, s.a_r, s.b_r}) lp += normal_logpdf(v, 0.0, p.logistic_var);
  lp += normal0_logpdf(s.beta1_mean, p.coef_var);
  lp += normal0_logpdf(s.beta_dyn, p.coef_var);
  lp += normal0_logpdf(s.c1_gamma, p.coef_var);
  lp += normal_logpdf(s.alpha_shift, 0.0, p.coef_var);
  for (const auto& b : s.beta_shift1) lp += normal0_logpdf(b, p.coef_var);
  for (const auto& b : s.beta_shift2) lp += normal0_logpdf(b, p.coef_var);
  return lp;
}

LogPosteriorTerms log_posterior_terms(const ModelState& s, const Model& model) {
  const int T = model.T();
  const int n = model.n();
  if (s.T() != T) throw std::invalid_argument("state T does not match the model");
  LogPosteriorTerms terms;

  for (const auto& g : model.obs().gages) {
    if (!g.rain) continue;
    terms.gage += gage_loglik(*g.rain, s.Y[g.t][g.cell], s);
  }
  const Eigen::VectorXd c1 = bias_surface(model, s);
  for (int t = 0; t < T; ++t)
    for (int i = 0; i < n; ++i) {
      const auto& ze = model.obs().radar[t][i];
      if (ze) terms.radar += radar_loglik(*ze, s.Y[t][i], c1[i], s);
    }

  if (!(s.rho_Y > 0.0 && s.rho_Y < 1.0))
    throw std::runtime_error("log_posterior: rho_Y outside (0, 1)");
  const CarModel& car = model.car();
  terms.latent += car.logdensity(s.Y[0], model.design_initial() * s.beta1_mean,
                                 {s.rho_Y, s.tau2_Y});
  for (int t = 1; t < T; ++t) {
    const Eigen::VectorXd mean = dynamics_mean(t, s.Y[t - 1], model.grid(), model.covariates(),
                                               model.shift_basis(), s);
    terms.latent += car.logdensity(s.Y[t], mean, {s.rho_Y, s.tau2_eps[t - 1]});
  }
  terms.prior = log_prior(s, model.config());

  if (!std::isfinite(terms.gage)) throw std::runtime_error("log_posterior: non-finite gage term");
  if (!std::isfinite(terms.radar)) throw std::runtime_error("log_posterior: non-finite radar term");
  if (!std::isfinite(terms.latent))
    throw std::runtime_error("log_posterior: non-finite latent field term");
  if (!std::isfinite(terms.prior)) throw std::runtime_error("log_posterior: non-finite prior term");
  return terms;
}

double log_posterior(const ModelState& s, const Model& model) {
  return log_posterior_terms(s, model).total();
}

double deviance(const ModelState& s, const Model& model) {
  double ll = 0.0;
  for (const auto& g : model.obs().gages)
    if (g.rain) ll += gage_loglik(*g.rain, s.Y[g.t][g.cell], s);
  const Eigen::VectorXd c1 = bias_surface(model, s);
  for (int t = 0; t < model.T(); ++t)
    for (int i = 0; i < model.n(); ++i) {
      const auto& ze = model.obs().radar[t][i];
      if (ze) ll += radar_loglik(*ze, s.Y[t][i], c1[i], s);
    }
  return -2.0 * ll;
}

}  // namespace rainfuse
