#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rainfuse/hier_model.hpp"

namespace rainfuse {

enum class BlockKind {
  kLatent,  // Y(t), single-site updates
  kRhoY,
  kRho,
  kTau2Y,
  kTau2Eps,  // per transition
  kAg,
  kBg,
  kAr,
  kBr,
  kC2,
  kSigma2g,
  kSigma2r,
  kAlpha,
  kBeta1,
  kBetaDyn,
  kC1,
  kShift1,  // per transition
  kShift2,  // per transition
  // Joint moves along directions the single blocks traverse slowly.
  kLevel,       // Y + d with compensating bias, intercepts and logistic offsets
  kScale,       // Y * l with compensating slopes, coefficients and precisions
  kShiftRidge,  // alpha + e with beta_shift - e * (wind projected on the basis)
  kRhoCarry,    // rho on the logit scale
  // Both carry Y(t), t >= 1, along the new sources so that every dynamics
  // residual is unchanged.
  kNoiseMove,  // sigma2_r * e^z with Y pulled toward / away from the radar-implied value
  kHyperMove,  // noise, CAR and bias hyperparameters jointly, Y mapped through
               // its Gaussian full conditional (whitened residual kept)
};

std::string block_kind_name(BlockKind kind);
/// Parses names produced by block_kind_name; throws std::invalid_argument.
BlockKind parse_block_kind(const std::string& name);

struct SamplerConfig {
  int n_iter = 20000;
  int burn_in = 10000;
  int thin = 10;
  std::uint64_t seed = 1;
  int adapt_window = 50;
  int adapt_end = 10000;
  double target_rate = 0.40;
  double adapt_kappa = 1.0;
  double latent_scale = 0.3;
  double scalar_scale = 0.1;
  double vector_scale = 0.05;
  double joint_scale = 0.02;
  bool joint_moves = true;
  /// The hyperparameter move runs on every k-th sweep; 0 disables it.
  int hyper_every = 4;
  int chains = 1;
  /// Blocks held at their initial values.
  std::vector<BlockKind> fixed_blocks;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
  int kept_draws() const { return (n_iter - burn_in) / thin; }
};

/// Proposal scale update toward the target acceptance rate.
double adapt_scale(double scale, double observed_rate, double target = 0.40, double kappa = 1.0);

double to_unconstrained(double x, Transform tr);
double from_unconstrained(double u, Transform tr);
/// log |dx/du| at x.
double log_jacobian(double x, Transform tr);

/// One Gaussian random-walk Metropolis step on an unconstrained vector.
/// `logp` holds log_target(u) and is updated on acceptance. Non-finite
/// proposal targets are rejected.
bool metropolis_step(Eigen::VectorXd& u, double& logp, double scale, std::mt19937_64& rng,
                     const std::function<double(const Eigen::VectorXd&)>& log_target);

struct BlockReport {
  std::string name;
  double scale = 0.0;
  long proposed = 0;  // after adaptation
  long accepted = 0;
  double rate() const { return proposed > 0 ? static_cast<double>(accepted) / proposed : 0.0; }
};

struct PosteriorSamples {
  std::vector<ModelState> draws;
  std::vector<double> deviance;
  std::vector<int> iterations;
  std::vector<int> chain;
  std::vector<BlockReport> acceptance;  // summed over chains
  std::vector<std::string> warnings;

  std::size_t size() const { return draws.size(); }
};

/// Radar inversion (log Ze - log 200) / 1.6 per time step, filled from
/// known neighbours (growing outward) where the radar is zero or missing.
std::vector<Eigen::VectorXd> radar_inversion(const ObservationSet& obs, const Grid& grid);

/// Warm start: radar inversion (log Ze - log 200) / 1.6 for the latent
/// fields, local means where the radar is zero or missing, rho = rho_Y =
/// 0.5, bias at (log 200, 1.6) and the remaining scalars at prior medians.
ModelState initial_state(const Model& model);

/// Single-chain adaptive Metropolis sampler with incremental caches.
class Sampler {
 public:
  struct Block {
    BlockKind kind;
    int t = 0;  // time step for latent/per-transition blocks
    std::string name;
    double scale = 0.1;
    bool fixed = false;
    long window_proposed = 0, window_accepted = 0;
    long proposed = 0, accepted = 0;
  };

  Sampler(const Model& model, ModelState init, const SamplerConfig& config,
          std::uint64_t stream = 0);
  ~Sampler();
  Sampler(const Sampler&) = delete;
  Sampler& operator=(const Sampler&) = delete;

  /// One full sweep over every free block in fixed order.
  void sweep();
  /// Adapts scales using the statistics of the last window.
  void adapt();
  /// One Metropolis update of block b (all cells for latent blocks).
  void update_block(int b);

  const ModelState& state() const;
  std::vector<Block>& blocks() { return blocks_; }
  const std::vector<Block>& blocks() const { return blocks_; }
  std::mt19937_64& rng() { return rng_; }

  /// Recomputes every cache from the state.
  void refresh();

  /// Change in log posterior if Y_t(i) were set to v, from local terms only.
  double latent_log_ratio(int t, int i, double v) const;
  /// Log posterior assembled from the caches.
  double cached_log_posterior() const;
  double cached_deviance() const;

 private:
  struct Impl;
  const Model& model_;
  SamplerConfig config_;
  std::mt19937_64 rng_;
  std::vector<Block> blocks_;
  Impl* impl_;
};

/// Runs config.chains chains (concurrently when RAINFUSE_THREADS allows)
/// and pools their kept draws in chain order.
PosteriorSamples run_chain(const SamplerConfig& config, const Model& model);
PosteriorSamples run_chain(const SamplerConfig& config, const Model& model,
                           const ModelState& init);

/// Worker cap from RAINFUSE_THREADS (default: hardware concurrency).
int worker_threads();

struct TraceSummary {
  double median = 0.0;
  double q025 = 0.0;
  double q975 = 0.0;
  double ess = 0.0;
};

/// Linear-interpolation empirical quantile of unsorted values.
double empirical_quantile(std::vector<double> values, double p);
/// Effective sample size by initial-positive-sequence truncation.
double effective_sample_size(const std::vector<double>& trace);
/// Throws std::invalid_argument for fewer than 10 draws.
TraceSummary trace_summary(const std::vector<double>& trace);
TraceSummary trace_summary(const PosteriorSamples& samples, const std::string& param);

/// Values of a named parameter (see parameter_slots) across draws.
std::vector<double> parameter_trace(const PosteriorSamples& samples, const std::string& param);

}  // namespace rainfuse
