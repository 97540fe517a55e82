#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rainfuse/grid.hpp"
#include "rainfuse/io_ingest.hpp"

namespace rainfuse {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

/// Low-rank thin-plate spline: affine part plus r^2 log r kernels at m
/// knots, with the kernel weights constrained orthogonal to affine
/// functions on the knots. Coordinates are normalised internally.
struct TpsModel {
  int m = 0;
  double lambda = 0.0;
  std::vector<Point2> knots;  // normalised coordinates
  Eigen::Vector3d affine = Eigen::Vector3d::Zero();
  Eigen::VectorXd kernel_weights;  // length m
  double center_x = 0.0, center_y = 0.0, scale = 1.0;
  double trace_hat = 0.0;  // effective degrees of freedom
  double rss = 0.0;        // residual sum of squares on the fit data
  int n_points = 0;

  double predict(Point2 p) const;
};

/// Farthest-point knot selection starting from the first point.
std::vector<int> farthest_point_subset(const std::vector<Point2>& pts, int m);

/// Penalised least squares fit; the penalty weight is n * lambda.
/// Throws std::invalid_argument for fewer than 3 points, m < 3, m > n, or
/// collinear / rank-deficient designs.
TpsModel tps_fit(const std::vector<Point2>& points, const std::vector<double>& values,
                 int m, double lambda);

/// Evaluates the spline at every cell centre (grid kilometre coordinates).
Eigen::VectorXd tps_predict(const TpsModel& model, const Grid& grid);

struct TpsCandidate {
  int m = 3;
  double lambda = 0.0;
};

std::vector<TpsCandidate> default_tps_candidates();

/// n * RSS / (n - trace(A))^2; +inf when the smoother is saturated.
double gcv_score(const TpsModel& model);

struct GcvResult {
  TpsCandidate best;
  double score = 0.0;
  std::vector<double> scores;  // per candidate, +inf when skipped
  int skipped = 0;
};

/// Candidate minimising GCV. Ties go to smaller m, then smaller lambda.
/// Throws std::runtime_error when every candidate is skipped.
GcvResult gcv_select(const std::vector<Point2>& points, const std::vector<double>& values,
                     const std::vector<TpsCandidate>& candidates);

struct Standardization {
  double mean = 0.0;
  double scale = 1.0;
};

/// Gridded covariates per time step. Regression columns are standardised
/// per time over cells; wind stays in m/s because it drives displacement.
struct CovariateFields {
  enum Column { kTemp = 0, kRh, kElev, kDtemp, kDrh, kNumColumns };
  static constexpr std::array<const char*, kNumColumns> kColumnNames = {"temp", "rh", "elev",
                                                                         "dtemp", "drh"};

  int T = 0;
  int n = 0;
  // [column][t] standardised values, each of length n.
  std::array<std::vector<Eigen::VectorXd>, kNumColumns> z;
  // [column][t] transforms: raw = mean + scale * z.
  std::array<std::vector<Standardization>, kNumColumns> transforms;
  std::vector<Eigen::VectorXd> wind_u, wind_v;  // [t], m/s

  /// n x 4 design for the first time step: (1, temp, rh, elev).
  Eigen::MatrixXd design_initial() const;
  /// n x 4 design for step t >= 1: (1, elev, dtemp, drh).
  Eigen::MatrixXd design_dynamic(int t) const;
};

/// Centres and scales a column; a constant column maps to zeros with
/// scale 1.
Standardization standardize(Eigen::VectorXd& column);

/// Assembles CovariateFields from raw per-time fields.
CovariateFields assemble_covariates(const std::vector<Eigen::VectorXd>& temp,
                                    const std::vector<Eigen::VectorXd>& rh,
                                    const std::vector<Eigen::VectorXd>& wind_u,
                                    const std::vector<Eigen::VectorXd>& wind_v,
                                    const Eigen::VectorXd& elevation);

/// Stage 0: TPS + GCV for temperature, humidity and wind per time step.
CovariateFields build_covariates(const ObservationSet& obs, const Grid& grid,
                                 const std::vector<TpsCandidate>& candidates);

/// covariates.csv (x,y,t,temp,rh,u,v,elev,dtemp,drh) plus transforms.csv.
void write_covariates(const CovariateFields& cov, const Grid& grid,
                      const std::filesystem::path& covariates_csv,
                      const std::filesystem::path& transforms_csv);
CovariateFields read_covariates(const std::filesystem::path& covariates_csv,
                                const Grid& grid, int T);

}  // namespace rainfuse
