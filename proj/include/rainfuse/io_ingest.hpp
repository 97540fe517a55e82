#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "rainfuse/grid.hpp"

namespace rainfuse {

struct GageRecord {
  std::string station_id;
  double lon = 0.0;
  double lat = 0.0;
  int t = 0;
  std::optional<double> rain;  // mm/h; nullopt = missing
  int cell = -1;               // containing grid cell
};

struct RadarRecord {
  int x = 0;
  int y = 0;
  int t = 0;
  std::optional<double> ze;
};

struct StationRecord {
  std::string station_id;
  double lon = 0.0;
  double lat = 0.0;
  int t = 0;
  double temp_c = 0.0;
  double rh_pct = 0.0;
  double wind_u = 0.0;
  double wind_v = 0.0;
};

/// Radar per time step: one optional reflectivity per cell.
using RadarField = std::vector<std::optional<double>>;

struct ObservationSet {
  int T = 0;
  std::vector<GageRecord> gages;
  std::vector<RadarField> radar;  // [t][cell]
  std::vector<StationRecord> stations;
  std::vector<double> elevation;  // metres, per cell
};

struct InputPaths {
  std::filesystem::path gage;
  std::filesystem::path radar;
  std::filesystem::path aws;  // optional
  std::filesystem::path dem;  // optional; elevation 0 when absent
};

/// Raised when one or more rows fail validation; what() lists them all.
class IngestError : public std::runtime_error {
 public:
  explicit IngestError(std::vector<std::string> diagnostics);
  const std::vector<std::string>& diagnostics() const { return diagnostics_; }

 private:
  std::vector<std::string> diagnostics_;
};

/// Reads and validates the four input files. T <= 0 infers the number of
/// time steps from the largest index seen.
ObservationSet load_observations(const InputPaths& paths, const Grid& grid, int T = 0);

/// Writes gage.csv, radar.csv, aws.csv and dem.csv into `dir`.
void write_observations(const ObservationSet& obs, const Grid& grid,
                        const std::filesystem::path& dir);

struct ScreenResult {
  ObservationSet obs;
  int flagged = 0;
};

/// Zero gage readings with >= 3 non-zero pixels in the clamped 3x3 radar
/// block around the gage cell are relabelled missing.
ScreenResult screen_gage_zeros(const ObservationSet& obs, const Grid& grid);

inline constexpr int kScreenNonzeroThreshold = 3;

/// Reference Z-R curve Ze = 200 R^1.6.
double standard_zr(double rain_mm_h);

/// Empty radar cube (all missing) sized for the grid.
std::vector<RadarField> empty_radar(const Grid& grid, int T);

}  // namespace rainfuse
