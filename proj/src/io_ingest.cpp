#include "rainfuse/io_ingest.hpp"

#include <algorithm>
#include <cmath>
#include <string_view>

#include "rainfuse/csv.hpp"

namespace rainfuse {

namespace {

std::string where(const csv::Reader& r) {
  return r.path().filename().string() + ":" + std::to_string(r.line());
}

std::string join_diagnostics(const std::vector<std::string>& d) {
  std::string msg = "ingestion failed (" + std::to_string(d.size()) + " problem" +
                    (d.size() == 1 ? "" : "s") + ")";
  const std::size_t shown = std::min<std::size_t>(d.size(), 20);
  for (std::size_t j = 0; j < shown; ++j) msg += "\n  " + d[j];
  if (shown < d.size()) msg += "\n  ...";
  return msg;
}

}  // namespace

IngestError::IngestError(std::vector<std::string> diagnostics)
    : std::runtime_error(join_diagnostics(diagnostics)), diagnostics_(std::move(diagnostics)) {}

std::vector<RadarField> empty_radar(const Grid& grid, int T) {
  return std::vector<RadarField>(T, RadarField(grid.n()));
}

ObservationSet load_observations(const InputPaths& paths, const Grid& grid, int T) {
  validate(grid);
  std::vector<std::string> errors;
  ObservationSet obs;
  std::vector<std::string_view> f;

  // Gages.
  {
    csv::Reader r(paths.gage, {"station_id", "lon", "lat", "t", "rain"});
    while (r.next(f)) {
      try {
        if (f.size() != 5) throw std::invalid_argument("expected 5 fields");
        GageRecord g;
        g.station_id = std::string(f[0]);
        g.lon = csv::parse_double(f[1]);
        g.lat = csv::parse_double(f[2]);
        g.t = static_cast<int>(csv::parse_long(f[3]));
        g.rain = csv::parse_optional_double(f[4]);
        if (g.t < 0) throw std::invalid_argument("negative time index");
        if (g.rain && *g.rain < 0.0) throw std::invalid_argument("negative rain");
        g.cell = cell_of_lonlat(grid, g.lon, g.lat);
        if (g.cell < 0) throw std::invalid_argument("location outside grid");
        obs.gages.push_back(std::move(g));
      } catch (const std::invalid_argument& e) {
        errors.push_back(where(r) + ": " + e.what());
      }
    }
  }

  // Radar.
  std::vector<RadarRecord> radar;
  {
    csv::Reader r(paths.radar, {"x", "y", "t", "ze"});
    while (r.next(f)) {
      try {
        if (f.size() != 4) throw std::invalid_argument("expected 4 fields");
        RadarRecord rec;
        rec.x = static_cast<int>(csv::parse_long(f[0]));
        rec.y = static_cast<int>(csv::parse_long(f[1]));
        rec.t = static_cast<int>(csv::parse_long(f[2]));
        rec.ze = csv::parse_optional_double(f[3]);
        if (rec.x < 0 || rec.x >= grid.nx || rec.y < 0 || rec.y >= grid.ny)
          throw std::invalid_argument("cell outside grid");
        if (rec.t < 0) throw std::invalid_argument("negative time index");
        if (rec.ze && *rec.ze < 0.0) throw std::invalid_argument("negative reflectivity");
        radar.push_back(rec);
      } catch (const std::invalid_argument& e) {
        errors.push_back(where(r) + ": " + e.what());
      }
    }
  }

  if (!paths.aws.empty()) {
    csv::Reader r(paths.aws, {"station_id", "lon", "lat", "t", "temp_c", "rh_pct",
                              "wind_u", "wind_v"});
    while (r.next(f)) {
      try {
        if (f.size() != 8) throw std::invalid_argument("expected 8 fields");
        StationRecord s;
        s.station_id = std::string(f[0]);
        s.lon = csv::parse_double(f[1]);
        s.lat = csv::parse_double(f[2]);
        s.t = static_cast<int>(csv::parse_long(f[3]));
        s.temp_c = csv::parse_double(f[4]);
        s.rh_pct = csv::parse_double(f[5]);
        s.wind_u = csv::parse_double(f[6]);
        s.wind_v = csv::parse_double(f[7]);
        if (s.t < 0) throw std::invalid_argument("negative time index");
        if (s.rh_pct < 0.0 || s.rh_pct > 100.0)
          throw std::invalid_argument("relative humidity outside [0, 100]");
        obs.stations.push_back(std::move(s));
      } catch (const std::invalid_argument& e) {
        errors.push_back(where(r) + ": " + e.what());
      }
    }
  }

  obs.elevation.assign(grid.n(), 0.0);
  if (!paths.dem.empty()) {
    std::vector<char> seen(grid.n(), 0);
    csv::Reader r(paths.dem, {"x", "y", "elev_m"});
    while (r.next(f)) {
      try {
        if (f.size() != 3) throw std::invalid_argument("expected 3 fields");
        const int x = static_cast<int>(csv::parse_long(f[0]));
        const int y = static_cast<int>(csv::parse_long(f[1]));
        const double e = csv::parse_double(f[2]);
        if (x < 0 || x >= grid.nx || y < 0 || y >= grid.ny)
          throw std::invalid_argument("cell outside grid");
        obs.elevation[grid.index(x, y)] = e;
        seen[grid.index(x, y)] = 1;
      } catch (const std::invalid_argument& e) {
        errors.push_back(where(r) + ": " + e.what());
      }
    }
    const auto missing = std::count(seen.begin(), seen.end(), 0);
    if (missing > 0)
      errors.push_back(paths.dem.filename().string() + ": " + std::to_string(missing) +
                       " grid cells have no elevation row");
  }

  int max_t = -1;
  for (const auto& g : obs.gages) max_t = std::max(max_t, g.t);
  for (const auto& rr : radar) max_t = std::max(max_t, rr.t);
  for (const auto& s : obs.stations) max_t = std::max(max_t, s.t);
  obs.T = T > 0 ? T : max_t + 1;
  if (obs.T <= 0) errors.push_back("no time steps found in the inputs");
  if (T > 0 && max_t >= T)
    errors.push_back("time index " + std::to_string(max_t) + " outside [0, " +
                     std::to_string(T) + ")");

  if (!errors.empty()) throw IngestError(std::move(errors));

  obs.radar = empty_radar(grid, obs.T);
  for (const auto& rr : radar) obs.radar[rr.t][grid.index(rr.x, rr.y)] = rr.ze;
  return obs;
}

void write_observations(const ObservationSet& obs, const Grid& grid,
                        const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::string s = "station_id,lon,lat,t,rain\n";
  for (const auto& g : obs.gages) {
    s += g.station_id + ",";
    csv::append_double(s, g.lon);
    s += ",";
    csv::append_double(s, g.lat);
    s += "," + std::to_string(g.t) + ",";
    if (g.rain) csv::append_double(s, *g.rain);
    s += "\n";
  }
  csv::write_file(dir / "gage.csv", s);

  s = "x,y,t,ze\n";
  for (int t = 0; t < static_cast<int>(obs.radar.size()); ++t) {
    for (int i = 0; i < grid.n(); ++i) {
      s += std::to_string(grid.x_of(i)) + "," + std::to_string(grid.y_of(i)) + "," +
           std::to_string(t) + ",";
      if (obs.radar[t][i]) csv::append_double(s, *obs.radar[t][i]);
      s += "\n";
    }
  }
  csv::write_file(dir / "radar.csv", s);

  s = "station_id,lon,lat,t,temp_c,rh_pct,wind_u,wind_v\n";
  for (const auto& st : obs.stations) {
    s += st.station_id;
    for (double v : {st.lon, st.lat}) {
      s += ",";
      csv::append_double(s, v);
    }
    s += "," + std::to_string(st.t);
    for (double v : {st.temp_c, st.rh_pct, st.wind_u, st.wind_v}) {
      s += ",";
      csv::append_double(s, v);
    }
    s += "\n";
  }
  csv::write_file(dir / "aws.csv", s);

  s = "x,y,elev_m\n";
  for (int i = 0; i < grid.n(); ++i) {
    s += std::to_string(grid.x_of(i)) + "," + std::to_string(grid.y_of(i)) + ",";
    csv::append_double(s, obs.elevation.empty() ? 0.0 : obs.elevation[i]);
    s += "\n";
  }
  csv::write_file(dir / "dem.csv", s);
}

ScreenResult screen_gage_zeros(const ObservationSet& obs, const Grid& grid) {
  ScreenResult out{obs, 0};
  for (auto& g : out.obs.gages) {
    if (!g.rain || *g.rain != 0.0) continue;
    if (g.t < 0 || g.t >= static_cast<int>(obs.radar.size())) continue;
    const RadarField& field = obs.radar[g.t];
    const int cx = grid.x_of(g.cell);
    const int cy = grid.y_of(g.cell);
    int nonzero = 0;
    for (int y = std::max(0, cy - 1); y <= std::min(grid.ny - 1, cy + 1); ++y)
      for (int x = std::max(0, cx - 1); x <= std::min(grid.nx - 1, cx + 1); ++x) {
        const auto& v = field[grid.index(x, y)];
        if (v && *v > 0.0) ++nonzero;
      }
    if (nonzero >= kScreenNonzeroThreshold) {
      g.rain.reset();
      ++out.flagged;
    }
  }
  return out;
}

double standard_zr(double rain_mm_h) {
  if (!(rain_mm_h >= 0.0)) throw std::domain_error("standard_zr: rain must be >= 0");
  return 200.0 * std::pow(rain_mm_h, 1.6);
}

}  // namespace rainfuse
