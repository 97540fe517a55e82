#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <random>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "rainfuse/grid.hpp"

namespace rainfuse {

/// Proper CAR prior with joint precision tau2 * (D_w - rho * W).
struct CarSpec {
  double rho = 0.5;   // (0, 1)
  double tau2 = 1.0;  // > 0
};

void validate(const CarSpec& spec);

using SparsePrecision = Eigen::SparseMatrix<double>;

/// tau2 * (D_w - rho * W) on the grid's rook adjacency.
SparsePrecision car_precision(const Grid& grid, const CarSpec& spec);

/// Structure matrix D_w - rho * W (rho may be any real; used by oracles
/// and the rho -> 0, 1 limits).
SparsePrecision car_structure(const Grid& grid, double rho);

struct Conditional {
  double mean = 0.0;
  double var = 0.0;
};

/// Lattice CAR operator for one grid: log-densities, full conditionals and
/// exact draws. Factorizations of D_w - rho W are cached per rho; tau2
/// enters analytically. Safe to share across threads.
class CarModel {
 public:
  explicit CarModel(const Grid& grid);

  const Grid& grid() const { return grid_; }
  const Adjacency& adjacency() const { return adj_; }
  int n() const { return grid_.n(); }

  /// log det(D_w - rho W).
  double logdet_structure(double rho) const;

  /// (y - mean)' (D_w - rho W) (y - mean).
  double quad_form(const Eigen::VectorXd& resid, double rho) const;

  double logdensity(const Eigen::VectorXd& y, const Eigen::VectorXd& mean,
                    const CarSpec& spec) const;

  /// Same density given a precomputed residual quadratic form.
  double logdensity_from_quad(double quad, const CarSpec& spec) const;

  Conditional full_conditional(int i, const Eigen::VectorXd& y,
                               const Eigen::VectorXd& mean,
                               const CarSpec& spec) const;

  Eigen::VectorXd sample(std::mt19937_64& rng, const Eigen::VectorXd& mean,
                         const CarSpec& spec) const;

  /// Column j of (D_w - rho W)^{-1}.
  Eigen::VectorXd inverse_column(double rho, int j) const;

 private:
  struct Factor;
  std::shared_ptr<const Factor> factor(double rho) const;

  // log det(D_w - rho W) = sum log w_i+ + sum log(1 - rho lambda_k), with
  // lambda the eigenvalues of D^-1/2 W D^-1/2; used for small grids.
  const Eigen::VectorXd* spectrum() const;

  Grid grid_;
  Adjacency adj_;
  mutable std::mutex mu_;
  mutable std::map<double, std::shared_ptr<const Factor>> cache_;
  mutable std::once_flag spectrum_once_;
  mutable Eigen::VectorXd spectrum_;
  mutable double log_degree_sum_ = 0.0;
};

// Free-function forms.
double car_logdensity(const Grid& grid, const Eigen::VectorXd& y,
                      const Eigen::VectorXd& mean, const CarSpec& spec);
Conditional car_full_conditional(const Grid& grid, int i, const Eigen::VectorXd& y,
                                 const Eigen::VectorXd& mean, const CarSpec& spec);
Eigen::VectorXd sample_car(std::mt19937_64& rng, const Grid& grid,
                           const Eigen::VectorXd& mean, const CarSpec& spec);

}  // namespace rainfuse
