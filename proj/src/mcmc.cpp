#include "rainfuse/mcmc.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <thread>

#include <Eigen/SparseCholesky>
#include <boost/math/distributions/gamma.hpp>

namespace rainfuse {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
const double kLog2Pi = std::log(2.0 * std::numbers::pi);

enum class ObsKind : signed char { kMissing = -1, kZero = 0, kPositive = 1 };

double gamma_median(double shape, double rate) {
  return boost::math::median(boost::math::gamma_distribution<double>(shape, 1.0 / rate));
}

}  // namespace

std::string block_kind_name(BlockKind kind) {
  switch (kind) {
    case BlockKind::kLatent: return "Y";
    case BlockKind::kRhoY: return "rho_Y";
    case BlockKind::kRho: return "rho";
    case BlockKind::kTau2Y: return "tau2_Y";
    case BlockKind::kTau2Eps: return "tau2_eps";
    case BlockKind::kAg: return "a_g";
    case BlockKind::kBg: return "b_g";
    case BlockKind::kAr: return "a_r";
    case BlockKind::kBr: return "b_r";
    case BlockKind::kC2: return "c2";
    case BlockKind::kSigma2g: return "sigma2_g";
    case BlockKind::kSigma2r: return "sigma2_r";
    case BlockKind::kAlpha: return "alpha_shift";
    case BlockKind::kBeta1: return "beta1_mean";
    case BlockKind::kBetaDyn: return "beta_dyn";
    case BlockKind::kC1: return "c1_gamma";
    case BlockKind::kShift1: return "beta_shift1";
    case BlockKind::kShift2: return "beta_shift2";
    case BlockKind::kLevel: return "level_move";
    case BlockKind::kScale: return "scale_move";
    case BlockKind::kShiftRidge: return "shift_move";
    case BlockKind::kRhoCarry: return "rho_move";
    case BlockKind::kNoiseMove: return "noise_move";
    case BlockKind::kHyperMove: return "hyper_move";
  }
  return "?";
}

BlockKind parse_block_kind(const std::string& name) {
  for (int k = 0; k <= static_cast<int>(BlockKind::kHyperMove); ++k)
    if (block_kind_name(static_cast<BlockKind>(k)) == name) return static_cast<BlockKind>(k);
  throw std::invalid_argument("unknown sampler block '" + name + "'");
}

void SamplerConfig::validate() const {
  if (n_iter <= 0) throw std::invalid_argument("sampler.n_iter must be positive");
  if (burn_in < 0) throw std::invalid_argument("sampler.burn_in must be >= 0");
  if (burn_in >= n_iter) throw std::invalid_argument("sampler.burn_in must be < n_iter");
  if (thin < 1) throw std::invalid_argument("sampler.thin must be >= 1");
  if (adapt_window < 1) throw std::invalid_argument("sampler.adapt_window must be >= 1");
  if (adapt_end < 0 || adapt_end > burn_in)
    throw std::invalid_argument("sampler.adapt_end must lie in [0, burn_in]");
  if (!(target_rate > 0.0 && target_rate < 1.0))
    throw std::invalid_argument("sampler.target_rate must lie in (0, 1)");
  if (!(latent_scale > 0.0) || !(scalar_scale > 0.0) || !(vector_scale > 0.0) ||
      !(joint_scale > 0.0))
    throw std::invalid_argument("sampler proposal scales must be positive");
  if (chains < 1) throw std::invalid_argument("sampler.chains must be >= 1");
  if (hyper_every < 0) throw std::invalid_argument("sampler.hyper_every must be >= 0");
}

double adapt_scale(double scale, double observed_rate, double target, double kappa) {
  return scale * std::exp(kappa * (observed_rate - target));
}

double to_unconstrained(double x, Transform tr) {
  switch (tr) {
    case Transform::kLog: return std::log(x);
    case Transform::kLogit: return std::log(x) - std::log1p(-x);
    case Transform::kIdentity: break;
  }
  return x;
}

double from_unconstrained(double u, Transform tr) {
  switch (tr) {
    case Transform::kLog: return std::exp(u);
    case Transform::kLogit: return u >= 0.0 ? 1.0 / (1.0 + std::exp(-u)) : std::exp(u) / (1.0 + std::exp(u));
    case Transform::kIdentity: break;
  }
  return u;
}

double log_jacobian(double x, Transform tr) {
  switch (tr) {
    case Transform::kLog: return std::log(x);
    case Transform::kLogit: return std::log(x) + std::log1p(-x);
    case Transform::kIdentity: break;
  }
  return 0.0;
}

bool metropolis_step(Eigen::VectorXd& u, double& logp, double scale, std::mt19937_64& rng,
                     const std::function<double(const Eigen::VectorXd&)>& log_target) {
  std::normal_distribution<double> norm(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Eigen::VectorXd prop = u;
  for (Eigen::Index j = 0; j < prop.size(); ++j) prop[j] += scale * norm(rng);
  const double lp = log_target(prop);
  const double draw = unif(rng);
  if (!std::isfinite(lp)) return false;
  const double log_ratio = lp - logp;
  if (log_ratio >= 0.0 || std::log(draw) < log_ratio) {
    u = std::move(prop);
    logp = lp;
    return true;
  }
  return false;
}

std::vector<Eigen::VectorXd> radar_inversion(const ObservationSet& obs, const Grid& grid) {
  const int n = grid.n();
  const double c1 = std::log(200.0);
  const double c2 = 1.6;
  std::vector<Eigen::VectorXd> out;
  for (int t = 0; t < obs.T; ++t) {
    Eigen::VectorXd y = Eigen::VectorXd::Zero(n);
    std::vector<char> known(n, 0);
    int n_known = 0;
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      const auto& ze = obs.radar[t][i];
      if (ze && *ze > 0.0) {
        y[i] = (std::log(*ze) - c1) / c2;
        known[i] = 1;
        ++n_known;
        total += y[i];
      }
    }
    const double fallback = n_known > 0 ? total / n_known : 0.0;
    while (n_known < n) {
      std::vector<std::pair<int, double>> fills;
      for (int i = 0; i < n; ++i) {
        if (known[i]) continue;
        double sum = 0.0;
        int cnt = 0;
        for (int k : neighbors(grid, i))
          if (known[k]) {
            sum += y[k];
            ++cnt;
          }
        if (cnt > 0) fills.emplace_back(i, sum / cnt);
      }
      if (fills.empty()) {
        for (int i = 0; i < n; ++i)
          if (!known[i]) y[i] = fallback;
        break;
      }
      for (const auto& [i, v] : fills) {
        y[i] = v;
        known[i] = 1;
        ++n_known;
      }
    }
    out.push_back(y);
  }
  return out;
}

ModelState initial_state(const Model& model) {
  const ModelConfig& cfg = model.config();
  ModelState s = make_state(cfg, model.n(), model.T());
  s.Y = radar_inversion(model.obs(), model.grid());
  const double c1_init = std::log(200.0);
  const double c2_init = 1.6;

  const Priors& p = cfg.priors;
  s.rho_Y = 0.5;
  s.rho = 0.5;
  s.tau2_Y = gamma_median(p.tau2_shape, p.tau2_rate);
  for (double& v : s.tau2_eps) v = s.tau2_Y;
  s.sigma2_g = 1.0 / gamma_median(p.obs_prec_shape, p.obs_prec_rate);
  s.sigma2_r = s.sigma2_g;
  s.c1_gamma.setConstant(c1_init);
  s.c2 = c2_init;
  return s;
}

// ---------------------------------------------------------------------------

// Coordinates of the hyperparameter move with their transforms.
std::vector<std::pair<double*, Transform>> hyper_slots(ModelState& s) {
  std::vector<std::pair<double*, Transform>> v = {
      {&s.sigma2_r, Transform::kLog}, {&s.sigma2_g, Transform::kLog}, {&s.tau2_Y, Transform::kLog}};
  for (double& e : s.tau2_eps) v.emplace_back(&e, Transform::kLog);
  v.emplace_back(&s.rho_Y, Transform::kLogit);
  if (!s.tau2_eps.empty()) v.emplace_back(&s.rho, Transform::kLogit);
  v.emplace_back(&s.c2, Transform::kLog);
  return v;
}

struct TimeCache {
  Eigen::VectorXd mean, resid;
  double diag = 0.0, cross = 0.0;
  std::vector<int> src;                     // t >= 1
  std::vector<int> inv_offsets, inv_cells;  // cells at t fed by each cell at t - 1
};

struct Sampler::Impl {
  const Model& model;
  ModelState s;
  Eigen::VectorXd c1;
  std::vector<TimeCache> tc;
  double logdet = 0.0;
  double gage_sum = 0.0, radar_sum = 0.0;

  std::vector<ObsKind> radar_kind;  // [t * n + i]
  std::vector<double> radar_log;
  std::vector<ObsKind> gage_kind;  // per gage record
  std::vector<double> gage_log;
  mutable std::vector<char> mark;

  Impl(const Model& m, ModelState init) : model(m), s(std::move(init)) {
    const int n = m.n(), T = m.T();
    radar_kind.assign(static_cast<std::size_t>(n) * T, ObsKind::kMissing);
    radar_log.assign(static_cast<std::size_t>(n) * T, 0.0);
    for (int t = 0; t < T; ++t)
      for (int i = 0; i < n; ++i) {
        const auto& ze = m.obs().radar[t][i];
        if (!ze) continue;
        const std::size_t k = static_cast<std::size_t>(t) * n + i;
        radar_kind[k] = *ze > 0.0 ? ObsKind::kPositive : ObsKind::kZero;
        if (*ze > 0.0) radar_log[k] = std::log(*ze);
      }
    const auto& gages = m.obs().gages;
    gage_kind.assign(gages.size(), ObsKind::kMissing);
    gage_log.assign(gages.size(), 0.0);
    for (std::size_t g = 0; g < gages.size(); ++g) {
      if (!gages[g].rain) continue;
      gage_kind[g] = *gages[g].rain > 0.0 ? ObsKind::kPositive : ObsKind::kZero;
      if (*gages[g].rain > 0.0) gage_log[g] = std::log(*gages[g].rain);
    }
    mark.assign(n, 0);
    tc.resize(T);
  }

  int n() const { return model.n(); }
  int T() const { return model.T(); }

  double tau2_at(const ModelState& st, int t) const {
    return t == 0 ? st.tau2_Y : st.tau2_eps[t - 1];
  }

  double car_term(double diag, double cross, double rho_y, double ld, double tau2) const {
    return 0.5 * (n() * std::log(tau2) + ld) - 0.5 * n() * kLog2Pi -
           0.5 * tau2 * (diag - rho_y * cross);
  }

  double car_term(int t) const {
    return car_term(tc[t].diag, tc[t].cross, s.rho_Y, logdet, tau2_at(s, t));
  }

  void quads(TimeCache& c) const {
    const Adjacency& adj = model.car().adjacency();
    double diag = 0.0, cross = 0.0;
    for (int i = 0; i < n(); ++i) {
      const double r = c.resid[i];
      diag += adj.degree(i) * r * r;
      double sum = 0.0;
      for (const int* k = adj.begin(i); k != adj.end(i); ++k) sum += c.resid[*k];
      cross += r * sum;
    }
    c.diag = diag;
    c.cross = cross;
  }

  void build_time(const ModelState& st, int t, TimeCache& c) const {
    if (t == 0) {
      c.mean = model.design_initial() * st.beta1_mean;
    } else {
      c.src = source_cells(t, model, st);
      c.mean = model.design_dynamic(t) * st.beta_dyn;
      const Eigen::VectorXd& prev = st.Y[t - 1];
      for (int i = 0; i < n(); ++i) c.mean[i] += st.rho * prev[c.src[i]];
      c.inv_offsets.assign(n() + 1, 0);
      for (int j = 0; j < n(); ++j) ++c.inv_offsets[c.src[j] + 1];
      for (int i = 0; i < n(); ++i) c.inv_offsets[i + 1] += c.inv_offsets[i];
      c.inv_cells.assign(n(), 0);
      std::vector<int> fill(c.inv_offsets.begin(), c.inv_offsets.end() - 1);
      for (int j = 0; j < n(); ++j) c.inv_cells[fill[c.src[j]]++] = j;
    }
    c.resid = st.Y[t] - c.mean;
    quads(c);
  }

  double gage_term(const ModelState& st, std::size_t g, double y) const {
    const double eta = st.a_g + st.b_g * y;
    if (gage_kind[g] == ObsKind::kZero) return log_sigmoid(eta);
    const double d = gage_log[g] - y;
    return log_sigmoid(-eta) - 0.5 * (kLog2Pi + std::log(st.sigma2_g)) -
           0.5 * d * d / st.sigma2_g;
  }

  double radar_term(const ModelState& st, std::size_t k, double y, double c1i,
                    double log_norm) const {
    const double eta = st.a_r + st.b_r * y;
    if (radar_kind[k] == ObsKind::kZero) return log_sigmoid(eta);
    const double d = radar_log[k] - c1i - st.c2 * y;
    return log_sigmoid(-eta) - log_norm - 0.5 * d * d / st.sigma2_r;
  }

  double compute_gage_sum(const ModelState& st) const {
    double sum = 0.0;
    const auto& gages = model.obs().gages;
    for (std::size_t g = 0; g < gages.size(); ++g)
      if (gage_kind[g] != ObsKind::kMissing) sum += gage_term(st, g, st.Y[gages[g].t][gages[g].cell]);
    return sum;
  }

  double compute_radar_sum(const ModelState& st, const Eigen::VectorXd& c1v) const {
    const double log_norm = 0.5 * (kLog2Pi + std::log(st.sigma2_r));
    double sum = 0.0;
    for (int t = 0; t < T(); ++t) {
      const Eigen::VectorXd& y = st.Y[t];
      const std::size_t base = static_cast<std::size_t>(t) * n();
      for (int i = 0; i < n(); ++i)
        if (radar_kind[base + i] != ObsKind::kMissing)
          sum += radar_term(st, base + i, y[i], c1v[i], log_norm);
    }
    return sum;
  }

  void refresh() {
    c1 = bias_surface(model, s);
    for (int t = 0; t < T(); ++t) build_time(s, t, tc[t]);
    logdet = model.car().logdet_structure(s.rho_Y);
    gage_sum = compute_gage_sum(s);
    radar_sum = compute_radar_sum(s, c1);
  }

  // Observation log-likelihood at (t, i) for latent value y.
  void cell_obs(int t, int i, double y, double& gage, double& radar) const {
    gage = 0.0;
    for (int g : model.gages_at(t, i)) gage += gage_term(s, g, y);
    radar = 0.0;
    const std::size_t k = static_cast<std::size_t>(t) * n() + i;
    if (radar_kind[k] != ObsKind::kMissing)
      radar = radar_term(s, k, y, c1[i], 0.5 * (kLog2Pi + std::log(s.sigma2_r)));
  }

  struct LatentDelta {
    double gage = 0.0, radar = 0.0;
    double ddiag = 0.0, dcross = 0.0;    // time t
    double ddiag2 = 0.0, dcross2 = 0.0;  // time t + 1
    double log_ratio = 0.0;
  };

  LatentDelta latent_delta(int t, int i, double v) const {
    LatentDelta out;
    const Adjacency& adj = model.car().adjacency();
    const double y0 = s.Y[t][i];
    const double d = v - y0;

    double g0, r0, g1, r1;
    cell_obs(t, i, y0, g0, r0);
    cell_obs(t, i, v, g1, r1);
    out.gage = g1 - g0;
    out.radar = r1 - r0;

    const TimeCache& c = tc[t];
    const double r = c.resid[i];
    double nsum = 0.0;
    for (const int* k = adj.begin(i); k != adj.end(i); ++k) nsum += c.resid[*k];
    out.ddiag = adj.degree(i) * (2.0 * r * d + d * d);
    out.dcross = 2.0 * d * nsum;
    double lr = out.gage + out.radar -
                0.5 * tau2_at(s, t) * (out.ddiag - s.rho_Y * out.dcross);

    if (t + 1 < T()) {
      const TimeCache& c2 = tc[t + 1];
      const int* jb = c2.inv_cells.data() + c2.inv_offsets[i];
      const int* je = c2.inv_cells.data() + c2.inv_offsets[i + 1];
      if (jb != je) {
        const double e = -s.rho * d;
        for (const int* j = jb; j != je; ++j) mark[*j] = 1;
        double ssum = 0.0, inner = 0.0, dd = 0.0;
        for (const int* j = jb; j != je; ++j) {
          for (const int* l = adj.begin(*j); l != adj.end(*j); ++l) {
            ssum += c2.resid[*l];
            inner += mark[*l];
          }
          dd += adj.degree(*j) * (2.0 * e * c2.resid[*j] + e * e);
        }
        for (const int* j = jb; j != je; ++j) mark[*j] = 0;
        out.ddiag2 = dd;
        out.dcross2 = 2.0 * e * ssum + e * e * inner;
        lr -= 0.5 * tau2_at(s, t + 1) * (out.ddiag2 - s.rho_Y * out.dcross2);
      }
    }
    out.log_ratio = lr;
    return out;
  }

  void apply_latent(int t, int i, double v, const LatentDelta& delta) {
    const double d = v - s.Y[t][i];
    s.Y[t][i] = v;
    gage_sum += delta.gage;
    radar_sum += delta.radar;
    TimeCache& c = tc[t];
    c.resid[i] += d;
    c.diag += delta.ddiag;
    c.cross += delta.dcross;
    if (t + 1 < T()) {
      TimeCache& c2 = tc[t + 1];
      const double e = -s.rho * d;
      for (int p = c2.inv_offsets[i]; p < c2.inv_offsets[i + 1]; ++p) {
        const int j = c2.inv_cells[p];
        c2.resid[j] += e;
        c2.mean[j] -= e;
      }
      c2.diag += delta.ddiag2;
      c2.cross += delta.dcross2;
    }
  }

  double log_posterior() const {
    double lp = gage_sum + radar_sum + log_prior(s, model.config());
    for (int t = 0; t < T(); ++t) lp += car_term(t);
    return lp;
  }

  // Wind fields projected on the shift basis, per transition.
  std::vector<Eigen::VectorXd> wind_coef_u, wind_coef_v;

  void project_wind() {
    const Eigen::MatrixXd& B = model.shift_basis().B;
    const auto qr = B.colPivHouseholderQr();
    const auto& cov = model.covariates();
    for (int t = 1; t < T(); ++t) {
      wind_coef_u.push_back(qr.solve(cov.wind_u[t]));
      wind_coef_v.push_back(qr.solve(cov.wind_v[t]));
    }
  }

  // Gaussian full conditional of the stacked field (t-major) without the
  // zero-probability terms; exact for positive gage and radar values.
  struct LatentGaussian {
    Eigen::SparseMatrix<double> L;
    Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int> P;
    Eigen::VectorXd mean;
    double half_logdet = 0.0;
  };
  // Symbolic factorisation, reused while the source cells are unchanged.
  mutable Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> gauss_llt;
  mutable std::vector<int> gauss_key;

  bool latent_gaussian(const ModelState& st, LatentGaussian& g) const {
    using SpMat = Eigen::SparseMatrix<double>;
    const int n = model.n(), N = n * T();
    const SpMat S = car_structure(model.grid(), st.rho_Y);
    std::vector<Eigen::Triplet<double>> a, q;
    Eigen::VectorXd offset(N);
    std::vector<int> key;
    for (int t = 0; t < T(); ++t) {
      const double tau2 = tau2_at(st, t);
      for (int k = 0; k < S.outerSize(); ++k)
        for (SpMat::InnerIterator it(S, k); it; ++it)
          q.emplace_back(t * n + it.row(), t * n + it.col(), tau2 * it.value());
      for (int i = 0; i < n; ++i) a.emplace_back(t * n + i, t * n + i, 1.0);
      if (t == 0) {
        offset.head(n) = model.design_initial() * st.beta1_mean;
      } else {
        offset.segment(t * n, n) = model.design_dynamic(t) * st.beta_dyn;
        const std::vector<int> src = source_cells(t, model, st);
        for (int i = 0; i < n; ++i) a.emplace_back(t * n + i, (t - 1) * n + src[i], -st.rho);
        key.insert(key.end(), src.begin(), src.end());
      }
    }
    SpMat A(N, N), Qb(N, N);
    A.setFromTriplets(a.begin(), a.end());
    Qb.setFromTriplets(q.begin(), q.end());
    SpMat Q = SpMat(A.transpose() * Qb * A);
    Eigen::VectorXd b = A.transpose() * (Qb * offset);
    Eigen::VectorXd d = Eigen::VectorXd::Zero(N);
    const Eigen::VectorXd c1s = bias_surface(model, st);
    for (int k = 0; k < N; ++k) {
      if (radar_kind[k] != ObsKind::kPositive) continue;
      d[k] += st.c2 * st.c2 / st.sigma2_r;
      b[k] += st.c2 * (radar_log[k] - c1s[k % n]) / st.sigma2_r;
    }
    const auto& gages = model.obs().gages;
    for (std::size_t r = 0; r < gages.size(); ++r) {
      if (gage_kind[r] != ObsKind::kPositive) continue;
      const int k = gages[r].t * n + gages[r].cell;
      d[k] += 1.0 / st.sigma2_g;
      b[k] += gage_log[r] / st.sigma2_g;
    }
    Q.diagonal() += d;
    if (key != gauss_key || gauss_llt.rows() != N) {
      gauss_llt.analyzePattern(Q);
      gauss_key = std::move(key);
    }
    gauss_llt.factorize(Q);
    if (gauss_llt.info() != Eigen::Success) return false;
    g.L = gauss_llt.matrixL();
    g.P = gauss_llt.permutationP();
    g.mean = gauss_llt.solve(b);
    g.half_logdet = g.L.diagonal().array().log().sum();
    return std::isfinite(g.half_logdet) && g.mean.allFinite();
  }

  struct Snapshot {
    Eigen::VectorXd c1;
    std::vector<TimeCache> tc;
    double gage_sum = 0.0, radar_sum = 0.0;
    double logdet = 0.0;
  };

  // Full log posterior of st with its caches.
  double evaluate(const ModelState& st, Snapshot& snap) const {
    snap.c1 = bias_surface(model, st);
    snap.tc.resize(T());
    double lp = log_prior(st, model.config());
    if (!std::isfinite(lp)) return kNegInf;
    snap.logdet = st.rho_Y == s.rho_Y ? logdet : model.car().logdet_structure(st.rho_Y);
    for (int t = 0; t < T(); ++t) {
      build_time(st, t, snap.tc[t]);
      lp += car_term(snap.tc[t].diag, snap.tc[t].cross, st.rho_Y, snap.logdet, tau2_at(st, t));
    }
    snap.gage_sum = compute_gage_sum(st);
    snap.radar_sum = compute_radar_sum(st, snap.c1);
    return lp + snap.gage_sum + snap.radar_sum;
  }

  void adopt(ModelState st, Snapshot& snap) {
    s = std::move(st);
    c1 = std::move(snap.c1);
    tc = std::move(snap.tc);
    gage_sum = snap.gage_sum;
    radar_sum = snap.radar_sum;
    logdet = snap.logdet;
  }

  // Proposal covariance of the hyperparameter move, learned while adapting.
  Eigen::MatrixXd hyper_chol;
  Eigen::VectorXd hyper_sum;
  Eigen::MatrixXd hyper_outer;
  long hyper_n = 0;
  long sweeps = 0;
};

// ---------------------------------------------------------------------------

Sampler::Sampler(const Model& model, ModelState init, const SamplerConfig& config,
                 std::uint64_t stream)
    : model_(model), config_(config), impl_(nullptr) {
  config_.validate();
  validate(init, model.config(), model.n());
  if (init.T() != model.T()) throw std::invalid_argument("initial state T does not match the model");
  std::seed_seq seq{static_cast<std::uint32_t>(config.seed & 0xffffffffu),
                    static_cast<std::uint32_t>(config.seed >> 32),
                    static_cast<std::uint32_t>(stream & 0xffffffffu),
                    static_cast<std::uint32_t>(stream >> 32)};
  rng_.seed(seq);
  impl_ = new Impl(model, std::move(init));
  impl_->refresh();
  impl_->project_wind();

  auto fixed = [&](BlockKind k) {
    return std::find(config_.fixed_blocks.begin(), config_.fixed_blocks.end(), k) !=
           config_.fixed_blocks.end();
  };
  auto add = [&](BlockKind k, int t, double scale) {
    std::string name = block_kind_name(k);
    if (k == BlockKind::kLatent) name += "[" + std::to_string(t) + "]";
    if (k == BlockKind::kTau2Eps || k == BlockKind::kShift1 || k == BlockKind::kShift2)
      name += "[" + std::to_string(t) + "]";
    blocks_.push_back({k, t, name, scale, fixed(k)});
  };
  auto add_joint = [&](BlockKind k, std::initializer_list<BlockKind> parts) {
    bool any_fixed = fixed(k);
    for (BlockKind p : parts) any_fixed = any_fixed || fixed(p);
    blocks_.push_back({k, 0, block_kind_name(k), config_.joint_scale, any_fixed});
  };
  const int T = model.T();
  for (int t = 0; t < T; ++t) add(BlockKind::kLatent, t, config_.latent_scale);
  add(BlockKind::kRhoY, 0, config_.scalar_scale);
  if (T > 1) add(BlockKind::kRho, 0, config_.scalar_scale);
  add(BlockKind::kTau2Y, 0, config_.scalar_scale);
  for (int t = 1; t < T; ++t) add(BlockKind::kTau2Eps, t, config_.scalar_scale);
  for (BlockKind k : {BlockKind::kAg, BlockKind::kBg, BlockKind::kAr, BlockKind::kBr,
                      BlockKind::kC2, BlockKind::kSigma2g, BlockKind::kSigma2r})
    add(k, 0, config_.scalar_scale);
  if (T > 1) add(BlockKind::kAlpha, 0, config_.scalar_scale);
  add(BlockKind::kBeta1, 0, config_.vector_scale);
  if (T > 1) add(BlockKind::kBetaDyn, 0, config_.vector_scale);
  add(BlockKind::kC1, 0, config_.vector_scale);
  for (int t = 1; t < T; ++t) {
    add(BlockKind::kShift1, t, config_.vector_scale);
    add(BlockKind::kShift2, t, config_.vector_scale);
  }
  if (config_.joint_moves) {
    using enum BlockKind;
    add_joint(kLevel, {kLatent, kC1, kAr, kAg, kBeta1, kBetaDyn});
    add_joint(kScale, {kLatent, kC2, kBr, kBg, kBeta1, kBetaDyn, kTau2Y, kTau2Eps});
    if (T > 1) add_joint(kShiftRidge, {kLatent, kAlpha, kShift1, kShift2});
    if (T > 1) add_joint(kRhoCarry, {kLatent, kRho});
    add_joint(kNoiseMove, {kLatent, kSigma2r});
    add_joint(kHyperMove, {kLatent, kSigma2r, kSigma2g, kTau2Y, kTau2Eps, kRhoY, kRho, kC2});
    blocks_.back().scale = 1.0;
  }
}

Sampler::~Sampler() { delete impl_; }

const ModelState& Sampler::state() const { return impl_->s; }

void Sampler::refresh() { impl_->refresh(); }

double Sampler::latent_log_ratio(int t, int i, double v) const {
  return impl_->latent_delta(t, i, v).log_ratio;
}

double Sampler::cached_log_posterior() const { return impl_->log_posterior(); }

double Sampler::cached_deviance() const { return -2.0 * (impl_->gage_sum + impl_->radar_sum); }

void Sampler::sweep() {
  const bool hyper = config_.hyper_every > 0 && impl_->sweeps % config_.hyper_every == 0;
  ++impl_->sweeps;
  for (int b = 0; b < static_cast<int>(blocks_.size()); ++b) {
    if (blocks_[b].fixed) continue;
    if (blocks_[b].kind == BlockKind::kHyperMove && !hyper) continue;
    update_block(b);
  }
}

void Sampler::adapt() {
  Impl& im = *impl_;
  if (im.hyper_n >= 100) {
    const double n = static_cast<double>(im.hyper_n);
    const Eigen::VectorXd mean = im.hyper_sum / n;
    Eigen::MatrixXd cov = im.hyper_outer / n - mean * mean.transpose();
    cov.diagonal().array() += 1e-6;
    const Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() == Eigen::Success) im.hyper_chol = llt.matrixL();
  }
  for (auto& b : blocks_) {
    if (b.window_proposed > 0) {
      const double rate = static_cast<double>(b.window_accepted) / b.window_proposed;
      b.scale = adapt_scale(b.scale, rate, config_.target_rate, config_.adapt_kappa);
    }
    b.window_proposed = 0;
    b.window_accepted = 0;
  }
}

void Sampler::update_block(int bi) {
  Block& blk = blocks_[bi];
  Impl& im = *impl_;
  ModelState& s = im.s;
  std::normal_distribution<double> norm(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  auto accept = [&](double log_ratio) {
    const double draw = unif(rng_);
    if (!std::isfinite(log_ratio)) return false;
    return log_ratio >= 0.0 || std::log(draw) < log_ratio;
  };
  auto record = [&](bool ok, long count = 1) {
    blk.window_proposed += count;
    blk.proposed += count;
    if (ok) {
      ++blk.window_accepted;
      ++blk.accepted;
    }
  };

  if (blk.kind == BlockKind::kLatent) {
    const int t = blk.t;
    const Grid& g = model_.grid();
    for (int color = 0; color < 2; ++color)
      for (int i = 0; i < g.n(); ++i) {
        if ((g.x_of(i) + g.y_of(i)) % 2 != color) continue;
        const double v = s.Y[t][i] + blk.scale * norm(rng_);
        const auto delta = im.latent_delta(t, i, v);
        const bool ok = accept(delta.log_ratio);
        if (ok) im.apply_latent(t, i, v, delta);
        record(ok);
      }
    return;
  }

  if (blk.kind == BlockKind::kHyperMove) {
    ModelState prop = s;
    const auto cur = hyper_slots(s);
    const auto nxt = hyper_slots(prop);
    const int d = static_cast<int>(cur.size());
    if (im.hyper_chol.rows() != d) {
      im.hyper_chol = 0.1 * Eigen::MatrixXd::Identity(d, d);
      im.hyper_sum = Eigen::VectorXd::Zero(d);
      im.hyper_outer = Eigen::MatrixXd::Zero(d, d);
    }
    Eigen::VectorXd u(d), xi(d);
    for (int j = 0; j < d; ++j) {
      u[j] = to_unconstrained(*cur[j].first, cur[j].second);
      xi[j] = norm(rng_);
    }
    im.hyper_sum += u;
    im.hyper_outer += u * u.transpose();
    ++im.hyper_n;
    const Eigen::VectorXd u_new = u + blk.scale * (im.hyper_chol * xi);
    double log_jac = 0.0;
    for (int j = 0; j < d; ++j) {
      *nxt[j].first = from_unconstrained(u_new[j], nxt[j].second);
      log_jac += log_jacobian(*nxt[j].first, nxt[j].second) - log_jacobian(*cur[j].first, cur[j].second);
    }
    double lp_new = kNegInf;
    Impl::Snapshot snap;
    Impl::LatentGaussian g_old, g_new;
    try {
      if (std::isfinite(log_prior(prop, model_.config())) && im.latent_gaussian(s, g_old) &&
          im.latent_gaussian(prop, g_new)) {
        const int n = model_.n(), T = model_.T();
        Eigen::VectorXd y(static_cast<Eigen::Index>(n) * T);
        for (int t = 0; t < T; ++t) y.segment(t * n, n) = s.Y[t];
        const Eigen::VectorXd w = g_old.L.transpose() * (g_old.P * (y - g_old.mean));
        const Eigen::VectorXd v = g_new.L.transpose().triangularView<Eigen::Upper>().solve(w);
        const Eigen::VectorXd y_new = g_new.mean + g_new.P.transpose() * v;
        for (int t = 0; t < T; ++t) prop.Y[t] = y_new.segment(t * n, n);
        log_jac += g_old.half_logdet - g_new.half_logdet;
        lp_new = im.evaluate(prop, snap);
      }
    } catch (const std::exception&) {
      lp_new = kNegInf;
    }
    const bool ok = accept(lp_new + log_jac - im.log_posterior());
    if (ok) im.adopt(std::move(prop), snap);
    record(ok);
    return;
  }

  if (blk.kind == BlockKind::kLevel || blk.kind == BlockKind::kScale ||
      blk.kind == BlockKind::kShiftRidge || blk.kind == BlockKind::kRhoCarry ||
      blk.kind == BlockKind::kNoiseMove) {
    ModelState prop = s;
    const double z = blk.scale * norm(rng_);
    double log_jac = 0.0;
    const int T = model_.T();
    if (blk.kind == BlockKind::kLevel) {
      // Translation: radar means, zero probabilities and CAR residuals are
      // unchanged; only gage amounts and priors see the move.
      for (auto& y : prop.Y) y.array() += z;
      prop.c1_gamma.array() -= prop.c2 * z;
      prop.a_r -= prop.b_r * z;
      prop.a_g -= prop.b_g * z;
      prop.beta1_mean[0] += z;
      if (T > 1) prop.beta_dyn[0] += (1.0 - prop.rho) * z;
    } else if (blk.kind == BlockKind::kScale) {
      const double lam = std::exp(z);
      for (auto& y : prop.Y) y *= lam;
      prop.c2 /= lam;
      prop.b_r /= lam;
      prop.b_g /= lam;
      prop.beta1_mean *= lam;
      prop.beta_dyn *= lam;
      prop.tau2_Y /= lam * lam;
      for (double& v : prop.tau2_eps) v /= lam * lam;
      const double dims = static_cast<double>(model_.n()) * T + 2.0 * kNumRegressors - 3.0 - 2.0 * T;
      log_jac = dims * z;
    } else if (blk.kind == BlockKind::kNoiseMove) {
      // Radar residuals scale with the noise sd, so their standardised values
      // are unchanged; the CAR and gage terms decide.
      const double lam = std::exp(0.5 * z);
      prop.sigma2_r *= lam * lam;
      long moved = 0;
      for (int t = 0; t < T; ++t)
        for (int i = 0; i < model_.n(); ++i) {
          const std::size_t k = static_cast<std::size_t>(t) * model_.n() + i;
          if (im.radar_kind[k] != ObsKind::kPositive) continue;
          const double implied = (im.radar_log[k] - im.c1[i]) / s.c2;
          prop.Y[t][i] = implied + (s.Y[t][i] - implied) * lam;
          ++moved;
        }
      log_jac = z * (1.0 + 0.5 * static_cast<double>(moved));
    } else {
      if (blk.kind == BlockKind::kShiftRidge) {
        prop.alpha_shift += z;
        for (int t = 1; t < T; ++t) {
          prop.beta_shift1[t - 1] -= z * im.wind_coef_u[t - 1];
          prop.beta_shift2[t - 1] -= z * im.wind_coef_v[t - 1];
        }
      } else {
        prop.rho = from_unconstrained(to_unconstrained(s.rho, Transform::kLogit) + z,
                                      Transform::kLogit);
        log_jac = log_jacobian(prop.rho, Transform::kLogit) -
                  log_jacobian(s.rho, Transform::kLogit);
      }
      // Unit-triangular in Y, so the carried fields add no Jacobian term.
      if (prop.rho > 0.0 && prop.rho < 1.0)
        for (int t = 1; t < T; ++t) {
          const std::vector<int> src = source_cells(t, model_, prop);
          const std::vector<int>& old_src = im.tc[t].src;
          for (int i = 0; i < model_.n(); ++i)
            prop.Y[t][i] += prop.rho * prop.Y[t - 1][src[i]] - s.rho * s.Y[t - 1][old_src[i]];
        }
    }
    Impl::Snapshot snap;
    double lp_new = kNegInf;
    try {
      lp_new = im.evaluate(prop, snap);
    } catch (const std::exception&) {
      lp_new = kNegInf;
    }
    const bool ok = accept(lp_new + log_jac - im.log_posterior());
    if (ok) im.adopt(std::move(prop), snap);
    record(ok);
    return;
  }

  // Parameter blocks: collect the unconstrained coordinates.
  std::vector<double*> slots;
  Transform tr = Transform::kIdentity;
  switch (blk.kind) {
    case BlockKind::kRhoY: slots = {&s.rho_Y}; tr = Transform::kLogit; break;
    case BlockKind::kRho: slots = {&s.rho}; tr = Transform::kLogit; break;
    case BlockKind::kTau2Y: slots = {&s.tau2_Y}; tr = Transform::kLog; break;
    case BlockKind::kTau2Eps: slots = {&s.tau2_eps[blk.t - 1]}; tr = Transform::kLog; break;
    case BlockKind::kAg: slots = {&s.a_g}; break;
    case BlockKind::kBg: slots = {&s.b_g}; break;
    case BlockKind::kAr: slots = {&s.a_r}; break;
    case BlockKind::kBr: slots = {&s.b_r}; break;
    case BlockKind::kC2: slots = {&s.c2}; tr = Transform::kLog; break;
    case BlockKind::kSigma2g: slots = {&s.sigma2_g}; tr = Transform::kLog; break;
    case BlockKind::kSigma2r: slots = {&s.sigma2_r}; tr = Transform::kLog; break;
    case BlockKind::kAlpha: slots = {&s.alpha_shift}; break;
    case BlockKind::kBeta1:
      for (Eigen::Index j = 0; j < s.beta1_mean.size(); ++j) slots.push_back(&s.beta1_mean[j]);
      break;
    case BlockKind::kBetaDyn:
      for (Eigen::Index j = 0; j < s.beta_dyn.size(); ++j) slots.push_back(&s.beta_dyn[j]);
      break;
    case BlockKind::kC1:
      for (Eigen::Index j = 0; j < s.c1_gamma.size(); ++j) slots.push_back(&s.c1_gamma[j]);
      break;
    case BlockKind::kShift1: {
      auto& v = s.beta_shift1[blk.t - 1];
      for (Eigen::Index j = 0; j < v.size(); ++j) slots.push_back(&v[j]);
      break;
    }
    case BlockKind::kShift2: {
      auto& v = s.beta_shift2[blk.t - 1];
      for (Eigen::Index j = 0; j < v.size(); ++j) slots.push_back(&v[j]);
      break;
    }
    default: break;
  }

  const std::size_t dim = slots.size();
  std::vector<double> old_vals(dim), new_vals(dim);
  double jac_old = 0.0, jac_new = 0.0;
  bool finite = true;
  for (std::size_t j = 0; j < dim; ++j) {
    old_vals[j] = *slots[j];
    const double u = to_unconstrained(old_vals[j], tr) + blk.scale * norm(rng_);
    new_vals[j] = from_unconstrained(u, tr);
    jac_old += log_jacobian(old_vals[j], tr);
    if (tr == Transform::kLogit && !(new_vals[j] > 0.0 && new_vals[j] < 1.0)) finite = false;
    if (tr == Transform::kLog && !(new_vals[j] > 0.0 && std::isfinite(new_vals[j]))) finite = false;
  }

  const double prior_old = log_prior(s, model_.config());
  for (std::size_t j = 0; j < dim; ++j) *slots[j] = new_vals[j];
  if (finite)
    for (std::size_t j = 0; j < dim; ++j) jac_new += log_jacobian(new_vals[j], tr);
  const double prior_new = finite ? log_prior(s, model_.config()) : kNegInf;

  // Likelihood-side terms touched by the block.
  double old_part = 0.0, new_part = 0.0;
  double new_gage = im.gage_sum, new_radar = im.radar_sum, new_logdet = im.logdet;
  Eigen::VectorXd new_c1;
  std::vector<std::pair<int, TimeCache>> new_times;

  auto rebuild_times = [&](int t0, int t1) {
    for (int t = t0; t < t1; ++t) {
      TimeCache c;
      im.build_time(s, t, c);
      old_part += im.car_term(t);
      new_part += im.car_term(c.diag, c.cross, s.rho_Y, im.logdet, im.tau2_at(s, t));
      new_times.emplace_back(t, std::move(c));
    }
  };

  if (finite) {
    try {
      switch (blk.kind) {
        case BlockKind::kRhoY: {
          new_logdet = model_.car().logdet_structure(s.rho_Y);
          for (int t = 0; t < im.T(); ++t) {
            const double tau2 = im.tau2_at(s, t);
            old_part += im.car_term(im.tc[t].diag, im.tc[t].cross, old_vals[0], im.logdet, tau2);
            new_part += im.car_term(im.tc[t].diag, im.tc[t].cross, s.rho_Y, new_logdet, tau2);
          }
          break;
        }
        case BlockKind::kTau2Y:
        case BlockKind::kTau2Eps: {
          const int t = blk.kind == BlockKind::kTau2Y ? 0 : blk.t;
          const TimeCache& c = im.tc[t];
          old_part = im.car_term(c.diag, c.cross, s.rho_Y, im.logdet, old_vals[0]);
          new_part = im.car_term(c.diag, c.cross, s.rho_Y, im.logdet, new_vals[0]);
          break;
        }
        case BlockKind::kAg:
        case BlockKind::kBg:
        case BlockKind::kSigma2g:
          old_part = im.gage_sum;
          new_gage = im.compute_gage_sum(s);
          new_part = new_gage;
          break;
        case BlockKind::kAr:
        case BlockKind::kBr:
        case BlockKind::kC2:
        case BlockKind::kSigma2r:
          old_part = im.radar_sum;
          new_radar = im.compute_radar_sum(s, im.c1);
          new_part = new_radar;
          break;
        case BlockKind::kC1:
          old_part = im.radar_sum;
          new_c1 = bias_surface(model_, s);
          new_radar = im.compute_radar_sum(s, new_c1);
          new_part = new_radar;
          break;
        case BlockKind::kBeta1: rebuild_times(0, 1); break;
        case BlockKind::kRho:
        case BlockKind::kBetaDyn:
        case BlockKind::kAlpha: rebuild_times(1, im.T()); break;
        case BlockKind::kShift1:
        case BlockKind::kShift2: rebuild_times(blk.t, blk.t + 1); break;
        default: break;
      }
    } catch (const std::exception&) {
      finite = false;
    }
  }

  const double log_ratio = finite ? (new_part + prior_new + jac_new) -
                                        (old_part + prior_old + jac_old)
                                  : kNegInf;
  const bool ok = accept(log_ratio);
  if (ok) {
    im.gage_sum = new_gage;
    im.radar_sum = new_radar;
    im.logdet = new_logdet;
    if (blk.kind == BlockKind::kC1) im.c1 = std::move(new_c1);
    for (auto& [t, c] : new_times) im.tc[t] = std::move(c);
  } else {
    for (std::size_t j = 0; j < dim; ++j) *slots[j] = old_vals[j];
  }
  record(ok);
}

// ---------------------------------------------------------------------------

int worker_threads() {
  int hw = static_cast<int>(std::thread::hardware_concurrency());
  if (hw <= 0) hw = 1;
  if (const char* env = std::getenv("RAINFUSE_THREADS")) {
    const int cap = std::atoi(env);
    if (cap > 0) return std::min(cap, std::max(hw, cap));
  }
  return hw;
}

namespace {

struct ChainResult {
  std::vector<ModelState> draws;
  std::vector<double> deviance;
  std::vector<int> iterations;
  std::vector<Sampler::Block> blocks;
};

ChainResult run_one_chain(const SamplerConfig& config, const Model& model,
                          const ModelState& init, int chain_id) {
  Sampler sampler(model, init, config, static_cast<std::uint64_t>(chain_id));
  ChainResult out;
  out.draws.reserve(config.kept_draws());
  for (int it = 1; it <= config.n_iter; ++it) {
    sampler.sweep();
    if (it <= config.adapt_end && it % config.adapt_window == 0) sampler.adapt();
    if (it == config.adapt_end)
      for (auto& b : sampler.blocks()) b.proposed = b.accepted = 0;
    if (it > config.burn_in && (it - config.burn_in) % config.thin == 0) {
      sampler.refresh();
      out.draws.push_back(sampler.state());
      out.deviance.push_back(sampler.cached_deviance());
      out.iterations.push_back(it);
    }
  }
  out.blocks = sampler.blocks();
  return out;
}

}  // namespace

PosteriorSamples run_chain(const SamplerConfig& config, const Model& model) {
  return run_chain(config, model, initial_state(model));
}

PosteriorSamples run_chain(const SamplerConfig& config, const Model& model,
                           const ModelState& init) {
  config.validate();
  std::vector<ChainResult> results(config.chains);
  const int workers = std::max(1, std::min(worker_threads(), config.chains));
  if (workers == 1) {
    for (int c = 0; c < config.chains; ++c) results[c] = run_one_chain(config, model, init, c);
  } else {
    std::vector<std::exception_ptr> errors(config.chains);
    for (int start = 0; start < config.chains; start += workers) {
      std::vector<std::thread> pool;
      for (int c = start; c < std::min(config.chains, start + workers); ++c)
        pool.emplace_back([&, c] {
          try {
            results[c] = run_one_chain(config, model, init, c);
          } catch (...) {
            errors[c] = std::current_exception();
          }
        });
      for (auto& th : pool) th.join();
    }
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  PosteriorSamples out;
  for (int c = 0; c < config.chains; ++c) {
    auto& r = results[c];
    for (std::size_t d = 0; d < r.draws.size(); ++d) {
      out.draws.push_back(std::move(r.draws[d]));
      out.deviance.push_back(r.deviance[d]);
      out.iterations.push_back(r.iterations[d]);
      out.chain.push_back(c);
    }
    for (std::size_t b = 0; b < r.blocks.size(); ++b) {
      if (c == 0)
        out.acceptance.push_back({r.blocks[b].name, r.blocks[b].scale, 0, 0});
      out.acceptance[b].proposed += r.blocks[b].proposed;
      out.acceptance[b].accepted += r.blocks[b].accepted;
    }
    for (const auto& b : r.blocks)
      if (!b.fixed && b.proposed > 0 && b.accepted == 0)
        out.warnings.push_back("chain " + std::to_string(c) + ": block " + b.name +
                               " rejected every proposal after adaptation");
  }
  return out;
}

// ---------------------------------------------------------------------------

double empirical_quantile(std::vector<double> v, double p) {
  if (v.empty()) throw std::invalid_argument("empirical_quantile: no values");
  std::sort(v.begin(), v.end());
  const double h = (v.size() - 1) * std::clamp(p, 0.0, 1.0);
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - lo) * (v[hi] - v[lo]);
}

double effective_sample_size(const std::vector<double>& x) {
  const std::size_t n = x.size();
  if (n < 2) return static_cast<double>(n);
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= n;
  auto acov = [&](std::size_t lag) {
    double s = 0.0;
    for (std::size_t j = 0; j + lag < n; ++j) s += (x[j] - mean) * (x[j + lag] - mean);
    return s / n;
  };
  const double c0 = acov(0);
  if (!(c0 > 1e-300)) return static_cast<double>(n);
  double tau = -1.0;
  for (std::size_t m = 0; 2 * m + 1 < n; ++m) {
    const double pair = (acov(2 * m) + acov(2 * m + 1)) / c0;
    if (pair <= 0.0) break;
    tau += 2.0 * pair;
  }
  tau = std::max(tau, 1.0 / n);
  return std::min(static_cast<double>(n) / tau, static_cast<double>(n) * std::log10(static_cast<double>(n)));
}

TraceSummary trace_summary(const std::vector<double>& trace) {
  if (trace.size() < 10) throw std::invalid_argument("trace_summary: need at least 10 draws");
  TraceSummary s;
  s.median = empirical_quantile(trace, 0.5);
  s.q025 = empirical_quantile(trace, 0.025);
  s.q975 = empirical_quantile(trace, 0.975);
  s.ess = effective_sample_size(trace);
  return s;
}

std::vector<double> parameter_trace(const PosteriorSamples& samples, const std::string& param) {
  std::vector<double> out;
  out.reserve(samples.size());
  if (param.rfind("Y[", 0) == 0) {
    int t = 0, i = 0;
    if (std::sscanf(param.c_str(), "Y[%d][%d]", &t, &i) != 2)
      throw std::invalid_argument("bad latent parameter name '" + param + "'");
    for (const auto& d : samples.draws) out.push_back(d.Y.at(t)[i]);
    return out;
  }
  int index = -1;
  for (const auto& d : samples.draws) {
    ModelState copy = d;
    const auto slots = parameter_slots(copy);
    if (index < 0) {
      for (std::size_t j = 0; j < slots.size(); ++j)
        if (slots[j].name == param) index = static_cast<int>(j);
      if (index < 0) throw std::invalid_argument("unknown parameter '" + param + "'");
    }
    out.push_back(*slots[index].value);
  }
  return out;
}

TraceSummary trace_summary(const PosteriorSamples& samples, const std::string& param) {
  return trace_summary(parameter_trace(samples, param));
}

}  // namespace rainfuse
