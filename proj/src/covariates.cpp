#include "rainfuse/covariates.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <stdexcept>

#include "rainfuse/csv.hpp"

namespace rainfuse {

namespace {

double tps_kernel(double r2) {
  // r^2 log r = 0.5 r^2 log r^2
  return r2 > 0.0 ? 0.5 * r2 * std::log(r2) : 0.0;
}

double dist2(Point2 a, Point2 b) {
  const double dx = a.x - b.x, dy = a.y - b.y;
  return dx * dx + dy * dy;
}

int affine_rank(const std::vector<Point2>& pts) {
  Eigen::MatrixXd T(pts.size(), 3);
  for (std::size_t j = 0; j < pts.size(); ++j) T.row(j) << 1.0, pts[j].x, pts[j].y;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(T);
  qr.setThreshold(1e-10);
  return static_cast<int>(qr.rank());
}

}  // namespace

double TpsModel::predict(Point2 p) const {
  const Point2 q{(p.x - center_x) / scale, (p.y - center_y) / scale};
  double v = affine[0] + affine[1] * q.x + affine[2] * q.y;
  for (int l = 0; l < m; ++l) v += kernel_weights[l] * tps_kernel(dist2(q, knots[l]));
  return v;
}

std::vector<int> farthest_point_subset(const std::vector<Point2>& pts, int m) {
  const int n = static_cast<int>(pts.size());
  std::vector<int> chosen;
  if (n == 0 || m <= 0) return chosen;
  std::vector<double> dmin(n, std::numeric_limits<double>::infinity());
  std::vector<char> used(n, 0);
  int next = 0;
  while (static_cast<int>(chosen.size()) < std::min(m, n)) {
    chosen.push_back(next);
    used[next] = 1;
    int best = -1;
    double best_d = -1.0;
    for (int j = 0; j < n; ++j) {
      dmin[j] = std::min(dmin[j], dist2(pts[j], pts[next]));
      if (!used[j] && dmin[j] > best_d) {
        best_d = dmin[j];
        best = j;
      }
    }
    if (best < 0) break;
    next = best;
  }
  return chosen;
}

TpsModel tps_fit(const std::vector<Point2>& points, const std::vector<double>& values,
                 int m, double lambda) {
  const int n = static_cast<int>(points.size());
  if (n < 3) throw std::invalid_argument("tps_fit: need at least 3 points");
  if (static_cast<int>(values.size()) != n)
    throw std::invalid_argument("tps_fit: points/values length mismatch");
  if (m < 3) throw std::invalid_argument("tps_fit: basis size m must be >= 3");
  if (m > n) throw std::invalid_argument("tps_fit: basis size m exceeds number of points");
  if (!(lambda >= 0.0)) throw std::invalid_argument("tps_fit: lambda must be >= 0");

  TpsModel model;
  model.m = m;
  model.lambda = lambda;
  model.n_points = n;

  double minx = points[0].x, maxx = minx, miny = points[0].y, maxy = miny;
  double sx = 0.0, sy = 0.0;
  for (const auto& p : points) {
    minx = std::min(minx, p.x);
    maxx = std::max(maxx, p.x);
    miny = std::min(miny, p.y);
    maxy = std::max(maxy, p.y);
    sx += p.x;
    sy += p.y;
  }
  model.center_x = sx / n;
  model.center_y = sy / n;
  model.scale = std::max(maxx - minx, maxy - miny);
  if (!(model.scale > 0.0)) throw std::invalid_argument("tps_fit: all points coincide");

  std::vector<Point2> q(n);
  for (int j = 0; j < n; ++j)
    q[j] = {(points[j].x - model.center_x) / model.scale,
            (points[j].y - model.center_y) / model.scale};
  if (affine_rank(q) < 3)
    throw std::invalid_argument("tps_fit: points are collinear (rank-deficient affine part)");

  const std::vector<int> idx = farthest_point_subset(q, m);
  for (int l : idx) model.knots.push_back(q[l]);

  // Null space of the knots' affine design: kernel weights c = Z theta.
  Eigen::MatrixXd Tk(m, 3);
  for (int l = 0; l < m; ++l) Tk.row(l) << 1.0, model.knots[l].x, model.knots[l].y;
  Eigen::HouseholderQR<Eigen::MatrixXd> tqr(Tk);
  const Eigen::MatrixXd Qfull = tqr.householderQ();
  const Eigen::MatrixXd Z = Qfull.rightCols(m - 3);
  if (m > 3 && affine_rank(model.knots) < 3)
    throw std::invalid_argument("tps_fit: knots are collinear");

  Eigen::MatrixXd K(n, m), Omega(m, m);
  for (int j = 0; j < n; ++j)
    for (int l = 0; l < m; ++l) K(j, l) = tps_kernel(dist2(q[j], model.knots[l]));
  for (int a = 0; a < m; ++a)
    for (int b = 0; b < m; ++b) Omega(a, b) = tps_kernel(dist2(model.knots[a], model.knots[b]));

  Eigen::MatrixXd X(n, m);
  for (int j = 0; j < n; ++j) X.row(j).head<3>() << 1.0, q[j].x, q[j].y;
  if (m > 3) X.rightCols(m - 3) = K * Z;

  // Penalty square root: R_S' R_S = blockdiag(0_3, Z' Omega Z).
  const int p = m;
  Eigen::MatrixXd pen_root = Eigen::MatrixXd::Zero(std::max(0, m - 3), p);
  if (m > 3 && lambda > 0.0) {
    Eigen::MatrixXd S = Z.transpose() * Omega * Z;
    S = 0.5 * (S + S.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
    const Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0);
    pen_root.rightCols(m - 3) =
        ev.cwiseSqrt().asDiagonal() * es.eigenvectors().transpose() * std::sqrt(n * lambda);
  }

  const int rows = n + static_cast<int>(pen_root.rows());
  Eigen::MatrixXd Aug(rows, p);
  Aug.topRows(n) = X;
  if (pen_root.rows() > 0) Aug.bottomRows(pen_root.rows()) = pen_root;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(rows);
  for (int j = 0; j < n; ++j) rhs[j] = values[j];

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Aug);
  qr.setThreshold(1e-12);
  if (qr.rank() < p)
    throw std::invalid_argument("tps_fit: rank-deficient design (rank " +
                                std::to_string(qr.rank()) + " < " + std::to_string(p) + ")");
  const Eigen::VectorXd beta = qr.solve(rhs);

  model.affine = beta.head<3>();
  model.kernel_weights = Eigen::VectorXd::Zero(m);
  if (m > 3) model.kernel_weights = Z * beta.tail(m - 3);

  // trace(A) = squared Frobenius norm of the data rows of the thin Q.
  const Eigen::MatrixXd Qthin = qr.householderQ() * Eigen::MatrixXd::Identity(rows, p);
  model.trace_hat = Qthin.topRows(n).squaredNorm();
  const Eigen::VectorXd fitted = X * beta;
  double rss = 0.0;
  for (int j = 0; j < n; ++j) rss += (values[j] - fitted[j]) * (values[j] - fitted[j]);
  model.rss = rss;
  return model;
}

Eigen::VectorXd tps_predict(const TpsModel& model, const Grid& grid) {
  Eigen::VectorXd out(grid.n());
  for (int i = 0; i < grid.n(); ++i) {
    const auto [e, nn] = cell_center_km(grid, i);
    out[i] = model.predict({e, nn});
  }
  return out;
}

std::vector<TpsCandidate> default_tps_candidates() {
  std::vector<TpsCandidate> c;
  for (int m : {9, 16, 25, 36})
    for (double lam : {0.0, 1e-4, 1e-2, 1.0}) c.push_back({m, lam});
  return c;
}

double gcv_score(const TpsModel& model) {
  const double n = model.n_points;
  const double denom = n - model.trace_hat;
  if (!(denom > 1e-8 * n)) return std::numeric_limits<double>::infinity();
  return n * model.rss / (denom * denom);
}

GcvResult gcv_select(const std::vector<Point2>& points, const std::vector<double>& values,
                     const std::vector<TpsCandidate>& candidates) {
  if (candidates.empty()) throw std::invalid_argument("gcv_select: no candidates");
  GcvResult res;
  if (candidates.size() == 1) {
    res.best = candidates.front();
    res.scores.push_back(gcv_score(tps_fit(points, values, res.best.m, res.best.lambda)));
    res.score = res.scores.front();
    return res;
  }

  std::vector<std::size_t> order(candidates.size());
  for (std::size_t j = 0; j < order.size(); ++j) order[j] = j;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (candidates[a].m != candidates[b].m) return candidates[a].m < candidates[b].m;
    return candidates[a].lambda < candidates[b].lambda;
  });

  double ysq = 0.0;
  for (double v : values) ysq += v * v;
  const double tie_tol = 1e-12 * (ysq / values.size()) + 1e-300;

  res.scores.assign(candidates.size(), std::numeric_limits<double>::infinity());
  bool found = false;
  for (std::size_t j : order) {
    double score = std::numeric_limits<double>::infinity();
    try {
      score = gcv_score(tps_fit(points, values, candidates[j].m, candidates[j].lambda));
    } catch (const std::invalid_argument&) {
    }
    res.scores[j] = score;
    if (!std::isfinite(score)) {
      ++res.skipped;
      std::cerr << "warning: GCV candidate (m=" << candidates[j].m
                << ", lambda=" << candidates[j].lambda << ") skipped\n";
      continue;
    }
    if (!found || score < res.score - tie_tol) {
      res.best = candidates[j];
      res.score = score;
      found = true;
    }
  }
  if (!found) throw std::runtime_error("gcv_select: every candidate was skipped");
  return res;
}

Standardization standardize(Eigen::VectorXd& column) {
  const double n = static_cast<double>(column.size());
  const double mean = column.sum() / n;
  column.array() -= mean;
  const double var = column.squaredNorm() / n;
  const double sd = std::sqrt(var);
  if (!(sd > 1e-12 * (1.0 + std::abs(mean)))) {
    column.setZero();
    return {mean, 1.0};
  }
  column /= sd;
  return {mean, sd};
}

Eigen::MatrixXd CovariateFields::design_initial() const {
  Eigen::MatrixXd X(n, 4);
  X.col(0).setOnes();
  X.col(1) = z[kTemp][0];
  X.col(2) = z[kRh][0];
  X.col(3) = z[kElev][0];
  return X;
}

Eigen::MatrixXd CovariateFields::design_dynamic(int t) const {
  Eigen::MatrixXd X(n, 4);
  X.col(0).setOnes();
  X.col(1) = z[kElev][t];
  X.col(2) = z[kDtemp][t];
  X.col(3) = z[kDrh][t];
  return X;
}

CovariateFields assemble_covariates(const std::vector<Eigen::VectorXd>& temp,
                                    const std::vector<Eigen::VectorXd>& rh,
                                    const std::vector<Eigen::VectorXd>& wind_u,
                                    const std::vector<Eigen::VectorXd>& wind_v,
                                    const Eigen::VectorXd& elevation) {
  CovariateFields cov;
  cov.T = static_cast<int>(temp.size());
  cov.n = static_cast<int>(elevation.size());
  cov.wind_u = wind_u;
  cov.wind_v = wind_v;
  for (auto& col : cov.z) col.resize(cov.T);
  for (auto& tr : cov.transforms) tr.resize(cov.T);
  for (int t = 0; t < cov.T; ++t) {
    Eigen::VectorXd dtemp = Eigen::VectorXd::Zero(cov.n);
    Eigen::VectorXd drh = Eigen::VectorXd::Zero(cov.n);
    if (t > 0) {
      dtemp = temp[t] - temp[t - 1];
      drh = rh[t] - rh[t - 1];
    }
    const std::array<Eigen::VectorXd, CovariateFields::kNumColumns> raw = {
        temp[t], rh[t], elevation, dtemp, drh};
    for (int c = 0; c < CovariateFields::kNumColumns; ++c) {
      Eigen::VectorXd col = raw[c];
      cov.transforms[c][t] = standardize(col);
      cov.z[c][t] = std::move(col);
    }
  }
  for (int t = 0; t < cov.T; ++t)
    for (int c = 0; c < CovariateFields::kNumColumns; ++c)
      if (!cov.z[c][t].allFinite())
        throw std::runtime_error("covariate field contains non-finite values");
  return cov;
}

CovariateFields build_covariates(const ObservationSet& obs, const Grid& grid,
                                 const std::vector<TpsCandidate>& candidates) {
  const int T = obs.T;
  std::vector<Eigen::VectorXd> temp(T), rh(T), wu(T), wv(T);
  for (int t = 0; t < T; ++t) {
    std::vector<Point2> pts;
    std::array<std::vector<double>, 4> vals;
    for (const auto& s : obs.stations) {
      if (s.t != t) continue;
      const auto [e, nn] = lonlat_to_km(grid, s.lon, s.lat);
      pts.push_back({e, nn});
      vals[0].push_back(s.temp_c);
      vals[1].push_back(s.rh_pct);
      vals[2].push_back(s.wind_u);
      vals[3].push_back(s.wind_v);
    }
    if (pts.size() < 3)
      throw std::runtime_error("stage 0: time step " + std::to_string(t) + " has " +
                               std::to_string(pts.size()) + " stations (need >= 3)");
    std::vector<TpsCandidate> usable;
    for (const auto& c : candidates)
      if (c.m >= 3 && c.m <= static_cast<int>(pts.size())) usable.push_back(c);
    if (usable.empty()) usable.push_back({3, 0.0});

    std::array<Eigen::VectorXd*, 4> out = {&temp[t], &rh[t], &wu[t], &wv[t]};
    for (int v = 0; v < 4; ++v) {
      const GcvResult sel = gcv_select(pts, vals[v], usable);
      *out[v] = tps_predict(tps_fit(pts, vals[v], sel.best.m, sel.best.lambda), grid);
    }
  }
  Eigen::VectorXd elev = Eigen::Map<const Eigen::VectorXd>(obs.elevation.data(),
                                                           static_cast<Eigen::Index>(obs.elevation.size()));
  if (elev.size() != grid.n()) elev = Eigen::VectorXd::Zero(grid.n());
  return assemble_covariates(temp, rh, wu, wv, elev);
}

void write_covariates(const CovariateFields& cov, const Grid& grid,
                      const std::filesystem::path& covariates_csv,
                      const std::filesystem::path& transforms_csv) {
  using C = CovariateFields;
  std::string s = "x,y,t,temp,rh,u,v,elev,dtemp,drh\n";
  for (int t = 0; t < cov.T; ++t)
    for (int i = 0; i < cov.n; ++i) {
      s += std::to_string(grid.x_of(i)) + "," + std::to_string(grid.y_of(i)) + "," +
           std::to_string(t);
      for (double v : {cov.z[C::kTemp][t][i], cov.z[C::kRh][t][i], cov.wind_u[t][i],
                       cov.wind_v[t][i], cov.z[C::kElev][t][i], cov.z[C::kDtemp][t][i],
                       cov.z[C::kDrh][t][i]}) {
        s += ",";
        csv::append_double(s, v);
      }
      s += "\n";
    }
  csv::write_file(covariates_csv, s);

  s = "column,t,mean,scale\n";
  for (int c = 0; c < C::kNumColumns; ++c)
    for (int t = 0; t < cov.T; ++t) {
      s += std::string(C::kColumnNames[c]) + "," + std::to_string(t) + ",";
      csv::append_double(s, cov.transforms[c][t].mean);
      s += ",";
      csv::append_double(s, cov.transforms[c][t].scale);
      s += "\n";
    }
  csv::write_file(transforms_csv, s);
}

CovariateFields read_covariates(const std::filesystem::path& covariates_csv,
                                const Grid& grid, int T) {
  using C = CovariateFields;
  CovariateFields cov;
  cov.T = T;
  cov.n = grid.n();
  for (auto& col : cov.z) col.assign(T, Eigen::VectorXd::Zero(cov.n));
  for (auto& tr : cov.transforms) tr.assign(T, Standardization{});
  cov.wind_u.assign(T, Eigen::VectorXd::Zero(cov.n));
  cov.wind_v.assign(T, Eigen::VectorXd::Zero(cov.n));
  std::vector<char> seen(static_cast<std::size_t>(T) * cov.n, 0);

  csv::Reader r(covariates_csv, {"x", "y", "t", "temp", "rh", "u", "v", "elev", "dtemp", "drh"});
  std::vector<std::string_view> f;
  std::vector<std::string> errors;
  while (r.next(f)) {
    try {
      if (f.size() != 10) throw std::invalid_argument("expected 10 fields");
      const int x = static_cast<int>(csv::parse_long(f[0]));
      const int y = static_cast<int>(csv::parse_long(f[1]));
      const int t = static_cast<int>(csv::parse_long(f[2]));
      if (x < 0 || x >= grid.nx || y < 0 || y >= grid.ny) throw std::invalid_argument("cell outside grid");
      if (t < 0 || t >= T) throw std::invalid_argument("time index out of range");
      const int i = grid.index(x, y);
      cov.z[C::kTemp][t][i] = csv::parse_double(f[3]);
      cov.z[C::kRh][t][i] = csv::parse_double(f[4]);
      cov.wind_u[t][i] = csv::parse_double(f[5]);
      cov.wind_v[t][i] = csv::parse_double(f[6]);
      cov.z[C::kElev][t][i] = csv::parse_double(f[7]);
      cov.z[C::kDtemp][t][i] = csv::parse_double(f[8]);
      cov.z[C::kDrh][t][i] = csv::parse_double(f[9]);
      seen[static_cast<std::size_t>(t) * cov.n + i] = 1;
    } catch (const std::invalid_argument& e) {
      errors.push_back(covariates_csv.filename().string() + ":" + std::to_string(r.line()) +
                       ": " + e.what());
    }
  }
  const auto missing = std::count(seen.begin(), seen.end(), 0);
  if (missing > 0) errors.push_back(std::to_string(missing) + " cell/time rows missing from " +
                                    covariates_csv.filename().string());
  if (!errors.empty()) throw IngestError(std::move(errors));
  return cov;
}

}  // namespace rainfuse
