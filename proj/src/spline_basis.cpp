#include "rainfuse/spline_basis.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace rainfuse {

namespace {

int degree_for(int k) { return std::min(3, k - 1); }

}  // namespace

std::vector<double> open_uniform_knots(int k) {
  const int p = degree_for(k);
  const int interior = k - p - 1;
  std::vector<double> knots;
  knots.reserve(k + p + 1);
  for (int j = 0; j <= p; ++j) knots.push_back(0.0);
  for (int j = 1; j <= interior; ++j) knots.push_back(static_cast<double>(j) / (interior + 1));
  for (int j = 0; j <= p; ++j) knots.push_back(1.0);
  return knots;
}

std::vector<double> bspline_1d(int k, double x) {
  if (k < 2) throw std::domain_error("bspline_1d: k must be >= 2");
  if (!(x >= 0.0 && x <= 1.0))
    throw std::domain_error("bspline_1d: x = " + std::to_string(x) + " outside [0, 1]");

  const int p = degree_for(k);
  const std::vector<double> t = open_uniform_knots(k);
  std::vector<double> out(k, 0.0);

  // Knot span: the last non-degenerate span owns x = 1.
  int span = p;
  while (span < k - 1 && x >= t[span + 1]) ++span;

  // Cox-de Boor triangle on the p + 1 functions non-zero in the span.
  std::vector<double> N(p + 1, 0.0), left(p + 1, 0.0), right(p + 1, 0.0);
  N[0] = 1.0;
  for (int j = 1; j <= p; ++j) {
    left[j] = x - t[span + 1 - j];
    right[j] = t[span + j] - x;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      const double denom = right[r + 1] + left[j - r];
      const double temp = denom > 0.0 ? N[r] / denom : 0.0;
      N[r] = saved + right[r + 1] * temp;
      saved = left[j - r] * temp;
    }
    N[j] = saved;
  }
  for (int j = 0; j <= p; ++j) out[span - p + j] = N[j];
  return out;
}

TensorBasis tensor_basis(const Grid& grid, int k) {
  if (k < 1) throw std::domain_error("tensor_basis: k must be >= 1");
  TensorBasis tb;
  tb.k = k;
  tb.B.resize(grid.n(), k * k);
  if (k == 1) {
    tb.B.setOnes();
    return tb;
  }
  std::vector<std::vector<double>> bx(grid.nx), by(grid.ny);
  for (int x = 0; x < grid.nx; ++x) bx[x] = bspline_1d(k, (x + 0.5) / grid.nx);
  for (int y = 0; y < grid.ny; ++y) by[y] = bspline_1d(k, (y + 0.5) / grid.ny);
  for (int i = 0; i < grid.n(); ++i) {
    const auto& ux = bx[grid.x_of(i)];
    const auto& uy = by[grid.y_of(i)];
    for (int b = 0; b < k; ++b)
      for (int a = 0; a < k; ++a) tb.B(i, a + k * b) = ux[a] * uy[b];
  }
  return tb;
}

}  // namespace rainfuse
