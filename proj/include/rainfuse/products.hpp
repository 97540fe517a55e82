#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rainfuse/grid.hpp"
#include "rainfuse/hier_model.hpp"
#include "rainfuse/io_ingest.hpp"
#include "rainfuse/mcmc.hpp"

namespace rainfuse {

/// Cellwise summaries of exp(Y) per time step (mm/h).
struct RainMap {
  std::vector<Eigen::VectorXd> mean, median, q025, q975;  // [t]
  int T() const { return static_cast<int>(mean.size()); }
};

/// Posterior mean zero-rain probabilities. pi_g is NaN away from gage cells.
struct ZeroProbMap {
  std::vector<Eigen::VectorXd> pi_r, pi_g;  // [t]
  std::vector<std::vector<char>> has_gage;  // [t][cell]
  int T() const { return static_cast<int>(pi_r.size()); }
};

/// Throws std::invalid_argument for an empty sample.
RainMap posterior_rain_map(const PosteriorSamples& samples);

/// gage_cells[t] lists cells with a gage at t; pass {} for radar only.
ZeroProbMap zero_prob_map(const PosteriorSamples& samples,
                          const std::vector<std::vector<int>>& gage_cells = {});
ZeroProbMap zero_prob_map(const PosteriorSamples& samples, const Model& model);

/// Parameters of the latent recursion with the displacements held fixed.
/// Time is 0-based; sources[t - 1] maps each cell at step t >= 1 to its
/// source cell at t - 1.
struct CovarianceSpec {
  Grid grid;
  double rho = 0.5;
  double rho_Y = 0.5;
  double tau2_Y = 1.0;
  std::vector<double> tau2_eps;         // [t - 1]
  std::vector<std::vector<int>> sources;  // [t - 1][cell]

  int T() const { return static_cast<int>(sources.size()) + 1; }
  /// Throws std::invalid_argument on inconsistent dimensions or values.
  void validate() const;
};

/// Sources for a uniform displacement (clamped at the boundary) on every
/// transition.
std::vector<std::vector<int>> uniform_sources(const Grid& grid, Displacement d, int T);

/// Exact cov(Y_i(t), Y_j(t + tau)) under the fixed-shift recursion.
class CovarianceEvaluator {
 public:
  explicit CovarianceEvaluator(CovarianceSpec spec);

  /// j given as a cell index. Throws std::out_of_range for bad t/tau.
  double cov(int i, int j, int t, int tau) const;
  /// Covariance at the cell offset h from i; throws std::out_of_range when
  /// i + h leaves the grid.
  double cov(int i, Displacement h, int t, int tau) const;

  const Eigen::MatrixXd& marginal(int t) const { return sigma_[t]; }
  const CovarianceSpec& spec() const { return spec_; }

 private:
  CovarianceSpec spec_;
  std::vector<Eigen::MatrixXd> sigma_;  // Var(Y(t)) per t
};

double latent_covariance(const CovarianceSpec& spec, int i, Displacement h, int t, int tau);

/// Cell reached from i by offset h, or -1 outside the grid.
int offset_cell(const Grid& grid, int i, Displacement h);

struct DicResult {
  double dic = 0.0;
  double d_bar = 0.0;
  double p_d = 0.0;
};

/// DIC from a posterior mean deviance and the deviance at the mean state.
DicResult dic_from(double d_bar, double d_at_mean);

/// Latent fields averaged cellwise; constrained scalars averaged on their
/// unconstrained scale and mapped back.
ModelState posterior_mean_state(const PosteriorSamples& samples);

DicResult dic(const PosteriorSamples& samples, const Model& model);

enum class Stream { kGage, kRadar };
std::string stream_name(Stream s);

struct CoverageRecord {
  std::string id;
  Stream stream = Stream::kGage;
  int t = 0;
  int cell = 0;
  double observed = 0.0;  // floored log value
  double lower = 0.0;
  double upper = 0.0;
  bool inside = false;
};

struct CoverageResult {
  std::vector<CoverageRecord> records;
  int covered(Stream s) const;
  int total(Stream s) const;
  double fraction(Stream s) const;
  double fraction() const;
};

struct CoverageOptions {
  double level = 0.95;
  double log_floor = -2.0;
  int sims_per_draw = 4;
  std::uint64_t seed = 1;
};

/// Posterior-predictive interval check for held-out gage records and radar
/// pixels (only non-missing entries of holdout are scored). Throws
/// std::invalid_argument when nothing is held out.
CoverageResult holdout_coverage(const PosteriorSamples& samples, const Model& model,
                                const ObservationSet& holdout,
                                const CoverageOptions& options = {});

/// Pooled fraction from (covered, total) pairs.
double pooled_fraction(const std::vector<std::pair<int, int>>& counts);

// Files.
void write_rain_maps(const RainMap& map, const Grid& grid, const std::filesystem::path& dir);
void write_prob_maps(const ZeroProbMap& map, const Grid& grid, const std::filesystem::path& dir);

struct PgmScale {
  double min = 0.0;
  double max = 0.0;
  int levels = 255;
};

/// P2 graymap with the north row first; values scaled linearly onto
/// 0..levels. The scale goes to `sidecar` as key=value lines.
PgmScale write_pgm(const Eigen::VectorXd& values, const Grid& grid,
                   const std::filesystem::path& path, const std::filesystem::path& sidecar);
/// Decodes a PGM written by write_pgm back to cell values.
Eigen::VectorXd read_pgm(const std::filesystem::path& path, const std::filesystem::path& sidecar,
                         const Grid& grid);

void write_dic(const DicResult& d, const std::filesystem::path& path);
DicResult read_dic(const std::filesystem::path& path);

void write_coverage(const CoverageResult& c, const std::filesystem::path& path);

/// trace.csv: iter,block,param,value per kept draw, including every latent
/// cell and the draw's deviance.
void write_trace(const PosteriorSamples& samples, const std::filesystem::path& path);
PosteriorSamples read_trace(const std::filesystem::path& path, const ModelConfig& config,
                            int n_cells, int T);

/// Block label used in trace.csv for a parameter name.
std::string trace_block(const std::string& param);

}  // namespace rainfuse
