#pragma once

#include <vector>

#include <Eigen/Dense>

#include "rainfuse/grid.hpp"

namespace rainfuse {

/// Values of the k open-uniform B-spline basis functions (degree
/// min(3, k-1)) at x in [0, 1]. Throws std::domain_error outside.
std::vector<double> bspline_1d(int k, double x);

/// Open-uniform knot vector used by bspline_1d.
std::vector<double> open_uniform_knots(int k);

/// Tensor-product basis evaluated at every cell centre. Column index is
/// bx + k * by. k == 1 gives the constant (single column of ones) basis.
struct TensorBasis {
  int k = 1;
  Eigen::MatrixXd B;  // n_cells x k^2

  int columns() const { return static_cast<int>(B.cols()); }
  Eigen::VectorXd surface(const Eigen::VectorXd& coef) const { return B * coef; }
};

TensorBasis tensor_basis(const Grid& grid, int k);

}  // namespace rainfuse
