#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "rainfuse/config.hpp"
#include "rainfuse/io_ingest.hpp"
#include "rainfuse/mcmc.hpp"
#include "rainfuse/products.hpp"

namespace rainfuse {

/// Observations after ingestion and screening, plus the covariates.
struct PreparedData {
  ObservationSet obs;
  CovariateFields cov;
  int flagged = 0;  // zero gages relabelled missing by screening
};

/// Ingest, screen and build (or read) covariates.
PreparedData prepare_data(const RunConfig& config);

/// One held-out record: a gage reading or a radar pixel.
struct HoldoutEntry {
  Stream stream = Stream::kGage;
  std::string id;  // station id, or x_y for radar
  double lon = 0.0, lat = 0.0;
  int x = 0, y = 0, t = 0;
  double value = 0.0;
};

struct HoldoutSplit {
  ObservationSet fit;      // records available to the sampler
  ObservationSet holdout;  // only the withheld records are non-missing
  std::vector<HoldoutEntry> entries;
};

/// Withholds round(fraction * count) non-missing records of each stream,
/// chosen uniformly at random. Repetition k draws from (seed, k).
HoldoutSplit split_holdout(const ObservationSet& obs, const Grid& grid, double fraction,
                           std::uint64_t seed, int repetition);

/// Rebuilds a split from entries read back from holdout_k.csv. Throws
/// std::runtime_error when an entry has no matching record.
HoldoutSplit apply_holdout(const ObservationSet& obs, const Grid& grid,
                           const std::vector<HoldoutEntry>& entries);

void write_holdout(const std::vector<HoldoutEntry>& entries, const std::filesystem::path& path);
std::vector<HoldoutEntry> read_holdout(const std::filesystem::path& path);

/// report.json: run settings, acceptance per block, scalar summaries, DIC.
std::string fit_report_json(const RunConfig& config, const PosteriorSamples& samples,
                            const DicResult& dic, int flagged);

/// simulate: dataset, covariates and truth files into paths.data_dir.
void cmd_simulate(const RunConfig& config);
/// fit: trace.csv, report.json and dic.txt in the output directory; with
/// holdout.fraction > 0 also holdout_k.csv, trace_k.csv and coverage_k.csv
/// per repetition.
void cmd_fit(const RunConfig& config);
/// predict: rainmap_t{t}.csv, probmap_t{t}.csv and rainmap_t{t}.pgm with
/// its .scale sidecar.
void cmd_predict(const RunConfig& config);
/// validate: coverage_report.csv with per-repetition and pooled coverage.
void cmd_validate(const RunConfig& config);

}  // namespace rainfuse
