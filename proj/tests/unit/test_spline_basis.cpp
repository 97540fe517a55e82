#include <doctest.h>

#include <cmath>
#include <random>
#include <stdexcept>

#include "rainfuse/spline_basis.hpp"

using namespace rainfuse;

namespace {

// Cox-de Boor recursion straight from the definition.
double cox_de_boor(const std::vector<double>& t, int j, int p, double x) {
  if (p == 0) {
    const bool last = (x == t.back()) && t[j] < t[j + 1] && t[j + 1] == t.back();
    return ((t[j] <= x && x < t[j + 1]) || last) ? 1.0 : 0.0;
  }
  double v = 0.0;
  if (t[j + p] > t[j]) v += (x - t[j]) / (t[j + p] - t[j]) * cox_de_boor(t, j, p - 1, x);
  if (t[j + p + 1] > t[j + 1])
    v += (t[j + p + 1] - x) / (t[j + p + 1] - t[j + 1]) * cox_de_boor(t, j + 1, p - 1, x);
  return v;
}

std::vector<double> oracle(int k, double x) {
  const int p = std::min(3, k - 1);
  // Open-uniform: p + 1 repeated end knots, k - p - 1 equally spaced interior knots.
  std::vector<double> t(p + 1, 0.0);
  const int interior = k - p - 1;
  for (int j = 1; j <= interior; ++j) t.push_back(static_cast<double>(j) / (interior + 1));
  t.insert(t.end(), p + 1, 1.0);
  std::vector<double> out(k);
  for (int j = 0; j < k; ++j) out[j] = cox_de_boor(t, j, p, x);
  return out;
}

}  // namespace

TEST_CASE("open-uniform endpoint values") {
  for (int k : {2, 3, 4, 5, 7}) {
    const auto v0 = bspline_1d(k, 0.0);
    const auto v1 = bspline_1d(k, 1.0);
    CHECK(v0[0] == doctest::Approx(1.0));
    CHECK(v1[k - 1] == doctest::Approx(1.0));
    for (int j = 1; j < k; ++j) CHECK(v0[j] == doctest::Approx(0.0));
    for (int j = 0; j < k - 1; ++j) CHECK(v1[j] == doctest::Approx(0.0));
  }
}

TEST_CASE("partition of unity and agreement with the recursion") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k : {2, 3, 4, 5, 6, 9}) {
    for (int r = 0; r < 200; ++r) {
      const double x = r < 3 ? 0.5 * r : u(rng);
      const auto v = bspline_1d(k, x);
      const auto ref = oracle(k, x);
      REQUIRE(v.size() == static_cast<std::size_t>(k));
      double sum = 0.0;
      for (int j = 0; j < k; ++j) {
        CHECK(v[j] >= 0.0);
        CHECK(std::abs(v[j] - ref[j]) < 1e-12);
        sum += v[j];
      }
      CHECK(std::abs(sum - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("domain errors") {
  CHECK_THROWS_AS(bspline_1d(3, -1e-9), std::domain_error);
  CHECK_THROWS_AS(bspline_1d(3, 1.0 + 1e-9), std::domain_error);
  CHECK_THROWS_AS(bspline_1d(1, 0.5), std::domain_error);
}

TEST_CASE("tensor basis shape and invariants") {
  const Grid g = make_grid(20, 20, 2.0);
  CHECK(tensor_basis(g, 3).columns() == 9);
  CHECK(tensor_basis(g, 5).columns() == 25);
  CHECK(tensor_basis(g, 1).columns() == 1);
  for (auto [nx, ny, k] : {std::tuple{20, 20, 3}, {7, 5, 5}, {6, 9, 2}, {5, 5, 5}}) {
    const Grid gr = make_grid(nx, ny, 1.0);
    const TensorBasis b = tensor_basis(gr, k);
    CHECK(b.B.rows() == gr.n());
    CHECK(b.B.minCoeff() >= 0.0);
    CHECK((b.B.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);
    for (int c = 0; c < b.columns(); ++c) CHECK(b.B.col(c).maxCoeff() > 0.0);
    // Row i is the outer product of the 1-d evaluations at the cell centre.
    const int i = gr.n() / 2 + 1;
    const auto ux = bspline_1d(k, (gr.x_of(i) + 0.5) / nx);
    const auto uy = bspline_1d(k, (gr.y_of(i) + 0.5) / ny);
    for (int by = 0; by < k; ++by)
      for (int bx = 0; bx < k; ++bx) CHECK(b.B(i, bx + k * by) == doctest::Approx(ux[bx] * uy[by]));
  }
}

TEST_CASE("surface of all-ones coefficients is one and evaluation is linear") {
  const Grid g = make_grid(8, 6, 1.0);
  const TensorBasis b = tensor_basis(g, 3);
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(9);
  CHECK((b.surface(ones).array() - 1.0).abs().maxCoeff() < 1e-12);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> z;
  Eigen::VectorXd g1(9), g2(9);
  for (int j = 0; j < 9; ++j) g1[j] = z(rng), g2[j] = z(rng);
  const Eigen::VectorXd lhs = b.surface(2.5 * g1 - 0.75 * g2);
  const Eigen::VectorXd rhs = 2.5 * b.surface(g1) - 0.75 * b.surface(g2);
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-12);
}
