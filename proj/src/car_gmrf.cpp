#include "rainfuse/car_gmrf.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>

namespace rainfuse {

namespace {

constexpr std::size_t kMaxCachedFactors = 64;

}  // namespace

void validate(const CarSpec& spec) {
  if (!(spec.rho > 0.0 && spec.rho < 1.0))
    throw std::domain_error("CAR rho must lie in (0, 1), got " + std::to_string(spec.rho));
  if (!(spec.tau2 > 0.0) || !std::isfinite(spec.tau2))
    throw std::domain_error("CAR tau2 must be positive, got " + std::to_string(spec.tau2));
}

SparsePrecision car_structure(const Grid& grid, double rho) {
  const int n = grid.n();
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(5 * n);
  for (int i = 0; i < n; ++i) {
    const auto nb = neighbors(grid, i);
    trip.emplace_back(i, i, static_cast<double>(nb.size()));
    for (int k : nb) trip.emplace_back(i, k, -rho);
  }
  SparsePrecision q(n, n);
  q.setFromTriplets(trip.begin(), trip.end());
  return q;
}

SparsePrecision car_precision(const Grid& grid, const CarSpec& spec) {
  validate(spec);
  SparsePrecision q = car_structure(grid, spec.rho);
  q *= spec.tau2;
  return q;
}

struct CarModel::Factor {
  Eigen::SimplicialLLT<SparsePrecision> llt;
  double logdet = 0.0;
};

CarModel::CarModel(const Grid& grid) : grid_(grid), adj_(grid) { validate(grid_); }

std::shared_ptr<const CarModel::Factor> CarModel::factor(double rho) const {
  {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = cache_.find(rho);
    if (it != cache_.end()) return it->second;
  }
  auto f = std::make_shared<Factor>();
  f->llt.compute(car_structure(grid_, rho));
  if (f->llt.info() != Eigen::Success)
    throw std::runtime_error("CAR factorization failed for rho = " + std::to_string(rho));
  const auto& L = f->llt.matrixL();
  double ld = 0.0;
  Eigen::SparseMatrix<double> Lm = L;
  for (int j = 0; j < Lm.outerSize(); ++j) {
    const double d = Lm.coeff(j, j);
    if (!(d > 0.0))
      throw std::runtime_error("CAR factorization produced a non-positive pivot");
    ld += 2.0 * std::log(d);
  }
  f->logdet = ld;

  std::lock_guard<std::mutex> lock(mu_);
  if (cache_.size() >= kMaxCachedFactors) cache_.erase(cache_.begin());
  cache_.emplace(rho, f);
  return f;
}

namespace {
constexpr int kSpectrumMaxCells = 2500;
}

const Eigen::VectorXd* CarModel::spectrum() const {
  if (n() > kSpectrumMaxCells) return nullptr;
  std::call_once(spectrum_once_, [this] {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n(), n());
    double lds = 0.0;
    for (int i = 0; i < n(); ++i) {
      lds += std::log(static_cast<double>(adj_.degree(i)));
      for (const int* k = adj_.begin(i); k != adj_.end(i); ++k)
        m(i, *k) = 1.0 / std::sqrt(static_cast<double>(adj_.degree(i)) * adj_.degree(*k));
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
    spectrum_ = es.eigenvalues();
    log_degree_sum_ = lds;
  });
  return &spectrum_;
}

double CarModel::logdet_structure(double rho) const {
  if (const Eigen::VectorXd* lam = spectrum()) {
    double ld = log_degree_sum_;
    for (Eigen::Index k = 0; k < lam->size(); ++k) ld += std::log1p(-rho * (*lam)[k]);
    if (!std::isfinite(ld)) throw std::runtime_error("CAR structure is not positive definite");
    return ld;
  }
  return factor(rho)->logdet;
}

double CarModel::quad_form(const Eigen::VectorXd& r, double rho) const {
  double diag = 0.0, cross = 0.0;
  for (int i = 0; i < n(); ++i) {
    diag += adj_.degree(i) * r[i] * r[i];
    double s = 0.0;
    for (const int* k = adj_.begin(i); k != adj_.end(i); ++k) s += r[*k];
    cross += r[i] * s;
  }
  return diag - rho * cross;
}

double CarModel::logdensity_from_quad(double quad, const CarSpec& spec) const {
  validate(spec);
  const double nn = n();
  return 0.5 * (nn * std::log(spec.tau2) + logdet_structure(spec.rho)) -
         0.5 * nn * std::log(2.0 * std::numbers::pi) - 0.5 * spec.tau2 * quad;
}

double CarModel::logdensity(const Eigen::VectorXd& y, const Eigen::VectorXd& mean,
                            const CarSpec& spec) const {
  if (y.size() != n() || mean.size() != n())
    throw std::invalid_argument("car_logdensity: field length mismatch");
  return logdensity_from_quad(quad_form(y - mean, spec.rho), spec);
}

Conditional CarModel::full_conditional(int i, const Eigen::VectorXd& y,
                                       const Eigen::VectorXd& mean,
                                       const CarSpec& spec) const {
  const double w = adj_.degree(i);
  double s = 0.0;
  for (const int* k = adj_.begin(i); k != adj_.end(i); ++k) s += y[*k] - mean[*k];
  return {mean[i] + spec.rho * s / w, 1.0 / (spec.tau2 * w)};
}

Eigen::VectorXd CarModel::sample(std::mt19937_64& rng, const Eigen::VectorXd& mean,
                                 const CarSpec& spec) const {
  validate(spec);
  auto f = factor(spec.rho);
  std::normal_distribution<double> norm(0.0, 1.0);
  Eigen::VectorXd z(n());
  for (int i = 0; i < n(); ++i) z[i] = norm(rng);
  // P A P' = L L'  =>  x = P' L^{-T} z has covariance A^{-1}.
  Eigen::VectorXd u = f->llt.matrixU().solve(z);
  Eigen::VectorXd x = f->llt.permutationPinv() * u;
  return mean + x / std::sqrt(spec.tau2);
}

Eigen::VectorXd CarModel::inverse_column(double rho, int j) const {
  auto f = factor(rho);
  Eigen::VectorXd e = Eigen::VectorXd::Zero(n());
  e[j] = 1.0;
  return f->llt.solve(e);
}

double car_logdensity(const Grid& grid, const Eigen::VectorXd& y,
                      const Eigen::VectorXd& mean, const CarSpec& spec) {
  return CarModel(grid).logdensity(y, mean, spec);
}

Conditional car_full_conditional(const Grid& grid, int i, const Eigen::VectorXd& y,
                                 const Eigen::VectorXd& mean, const CarSpec& spec) {
  return CarModel(grid).full_conditional(i, y, mean, spec);
}

Eigen::VectorXd sample_car(std::mt19937_64& rng, const Grid& grid,
                           const Eigen::VectorXd& mean, const CarSpec& spec) {
  return CarModel(grid).sample(rng, mean, spec);
}

}  // namespace rainfuse
