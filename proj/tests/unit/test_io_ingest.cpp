#include <doctest.h>

#include <bit>
#include <cmath>

#include "helpers.hpp"
#include "rainfuse/io_ingest.hpp"

using namespace rainfuse;
using testutil::TempDir;
using testutil::write_text;

namespace {

const Grid kGrid = make_grid(4, 3, 1.0, 126.0, 37.0);

std::string radar_rows(const Grid& g, int T, double ze) {
  std::string s = "x,y,t,ze\n";
  for (int t = 0; t < T; ++t)
    for (int i = 0; i < g.n(); ++i)
      s += std::to_string(g.x_of(i)) + "," + std::to_string(g.y_of(i)) + "," + std::to_string(t) +
           "," + std::to_string(ze) + "\n";
  return s;
}

InputPaths write_inputs(const TempDir& d, const std::string& gage, const std::string& radar) {
  write_text(d / "gage.csv", gage);
  write_text(d / "radar.csv", radar);
  return {d / "gage.csv", d / "radar.csv", {}, {}};
}

}  // namespace

TEST_CASE("empty gage file") {
  TempDir d("ingest");
  const auto obs = load_observations(
      write_inputs(d, "station_id,lon,lat,t,rain\n", radar_rows(kGrid, 2, 10.0)), kGrid);
  CHECK(obs.gages.empty());
  CHECK(obs.T == 2);
  CHECK(obs.radar.size() == 2);
  CHECK(*obs.radar[1][5] == 10.0);
  CHECK(obs.elevation.size() == static_cast<std::size_t>(kGrid.n()));
}

TEST_CASE("single gage at the grid centre") {
  TempDir d("ingest");
  const auto [lon, lat] = cell_center_lonlat(kGrid, kGrid.index(2, 1));
  const std::string gage = "station_id,lon,lat,t,rain\nG1," + std::to_string(lon) + "," +
                           std::to_string(lat) + ",0,5.0\n";
  const auto obs = load_observations(write_inputs(d, gage, radar_rows(kGrid, 1, 0.0)), kGrid);
  REQUIRE(obs.gages.size() == 1);
  CHECK(obs.gages[0].cell == kGrid.index(2, 1));
  CHECK(*obs.gages[0].rain == 5.0);
  CHECK(obs.gages[0].t == 0);
}

TEST_CASE("invalid rows are rejected with row numbers") {
  TempDir d("ingest");
  const auto [lon, lat] = cell_center_lonlat(kGrid, 0);
  const std::string ll = std::to_string(lon) + "," + std::to_string(lat);
  const std::string gage = "station_id,lon,lat,t,rain\nG1," + ll + ",0,-1\nG2," + ll +
                           ",0,2\nG3,0,0,0,1\nG4," + ll + ",0,abc\n";
  std::string radar = radar_rows(kGrid, 1, 1.0);
  radar += "9,9,0,1\n";
  try {
    load_observations(write_inputs(d, gage, radar), kGrid);
    FAIL("expected IngestError");
  } catch (const IngestError& e) {
    const auto& diag = e.diagnostics();
    REQUIRE(diag.size() == 4);
    CHECK(diag[0].find("gage.csv:2") != std::string::npos);
    CHECK(diag[0].find("negative rain") != std::string::npos);
    CHECK(diag[1].find("gage.csv:4") != std::string::npos);
    CHECK(diag[2].find("gage.csv:5") != std::string::npos);
    CHECK(diag[3].find("radar.csv") != std::string::npos);
  }
}

TEST_CASE("negative reflectivity and bad humidity are rejected") {
  TempDir d("ingest");
  write_text(d / "aws.csv",
             "station_id,lon,lat,t,temp_c,rh_pct,wind_u,wind_v\nS1,126.001,37.001,0,20,140,1,1\n");
  InputPaths p = write_inputs(d, "station_id,lon,lat,t,rain\n", "x,y,t,ze\n0,0,0,-3\n");
  p.aws = d / "aws.csv";
  CHECK_THROWS_AS(load_observations(p, kGrid), IngestError);
}

TEST_CASE("missing values are distinct from zeros") {
  TempDir d("ingest");
  const auto [lon, lat] = cell_center_lonlat(kGrid, 3);
  const std::string ll = std::to_string(lon) + "," + std::to_string(lat);
  const auto obs = load_observations(
      write_inputs(d, "station_id,lon,lat,t,rain\nA," + ll + ",0,\nB," + ll + ",0,0\n",
                   "x,y,t,ze\n0,0,0,\n1,0,0,0\n"),
      kGrid);
  CHECK_FALSE(obs.gages[0].rain.has_value());
  CHECK(obs.gages[1].rain == 0.0);
  CHECK_FALSE(obs.radar[0][0].has_value());
  CHECK(obs.radar[0][1] == 0.0);
  CHECK_FALSE(obs.radar[0][2].has_value());  // no row at all
}

TEST_CASE("write then load is the identity") {
  TempDir d("ingest");
  ObservationSet obs;
  obs.T = 2;
  obs.radar = empty_radar(kGrid, 2);
  for (int t = 0; t < 2; ++t)
    for (int i = 0; i < kGrid.n(); ++i)
      if ((i + t) % 5) obs.radar[t][i] = (i % 3 == 0) ? 0.0 : 0.1 * i + t / 3.0;
  for (int g = 0; g < 4; ++g) {
    const auto [lon, lat] = cell_center_lonlat(kGrid, 2 * g + 1);
    GageRecord r{"G" + std::to_string(g), lon, lat, g % 2, std::nullopt, 2 * g + 1};
    if (g != 2) r.rain = g * 1.0 / 7.0;
    obs.gages.push_back(r);
  }
  obs.stations.push_back({"S1", 126.001, 37.002, 0, 21.5, 80.0, 1.0 / 3.0, -2.0});
  obs.stations.push_back({"S1", 126.001, 37.002, 1, 21.25, 81.0, 0.5, -2.5});
  obs.elevation.assign(kGrid.n(), 0.0);
  for (int i = 0; i < kGrid.n(); ++i) obs.elevation[i] = 100.0 + i / 3.0;
  write_observations(obs, kGrid, d.path());
  const auto back =
      load_observations({d / "gage.csv", d / "radar.csv", d / "aws.csv", d / "dem.csv"}, kGrid);
  CHECK(back.T == 2);
  REQUIRE(back.gages.size() == obs.gages.size());
  for (std::size_t g = 0; g < obs.gages.size(); ++g) {
    CHECK(back.gages[g].station_id == obs.gages[g].station_id);
    CHECK(back.gages[g].lon == obs.gages[g].lon);
    CHECK(back.gages[g].rain == obs.gages[g].rain);
    CHECK(back.gages[g].cell == obs.gages[g].cell);
  }
  CHECK(back.radar == obs.radar);
  CHECK(back.elevation == obs.elevation);
  REQUIRE(back.stations.size() == 2);
  CHECK(back.stations[0].wind_u == obs.stations[0].wind_u);
  CHECK(back.stations[1].temp_c == 21.25);
}

namespace {

ObservationSet screening_case(const Grid& g, int cell, std::optional<double> rain, unsigned mask) {
  ObservationSet obs;
  obs.T = 1;
  obs.radar = empty_radar(g, 1);
  for (int i = 0; i < g.n(); ++i) obs.radar[0][i] = 0.0;
  const int cx = g.x_of(cell), cy = g.y_of(cell);
  int bit = 0;
  for (int dy = -1; dy <= 1; ++dy)
    for (int dx = -1; dx <= 1; ++dx, ++bit) {
      const int x = cx + dx, y = cy + dy;
      if (x < 0 || y < 0 || x >= g.nx || y >= g.ny) continue;
      if (mask >> bit & 1u) obs.radar[0][g.index(x, y)] = 50.0;
    }
  const auto [lon, lat] = cell_center_lonlat(g, cell);
  obs.gages.push_back({"G", lon, lat, 0, rain, cell});
  return obs;
}

}  // namespace

TEST_CASE("screening rule") {
  const Grid g = make_grid(5, 5, 1.0);
  const int centre = g.index(2, 2);
  SUBCASE("all nine radar pixels zero: zero stays") {
    const auto r = screen_gage_zeros(screening_case(g, centre, 0.0, 0u), g);
    CHECK(r.flagged == 0);
    CHECK(r.obs.gages[0].rain == 0.0);
  }
  SUBCASE("exactly three nonzero: becomes missing") {
    const auto r = screen_gage_zeros(screening_case(g, centre, 0.0, 0b100010001u), g);
    CHECK(r.flagged == 1);
    CHECK_FALSE(r.obs.gages[0].rain.has_value());
  }
  SUBCASE("two nonzero: zero stays") {
    const auto r = screen_gage_zeros(screening_case(g, centre, 0.0, 0b000010001u), g);
    CHECK(r.flagged == 0);
  }
  SUBCASE("nonzero and missing gages are never touched") {
    for (unsigned mask : {0u, 0x1FFu}) {
      CHECK(screen_gage_zeros(screening_case(g, centre, 4.2, mask), g).obs.gages[0].rain == 4.2);
      CHECK_FALSE(
          screen_gage_zeros(screening_case(g, centre, std::nullopt, mask), g).obs.gages[0].rain);
    }
  }
  SUBCASE("exhaustive 3x3 truth table, interior cell") {
    for (unsigned mask = 0; mask < 512; ++mask) {
      const auto r = screen_gage_zeros(screening_case(g, centre, 0.0, mask), g);
      CHECK((r.flagged == 1) == (std::popcount(mask) >= 3));
    }
  }
  SUBCASE("corner block is clamped to the four available pixels") {
    for (unsigned mask = 0; mask < 512; ++mask) {
      // Bits 4, 5, 7, 8 are the in-grid pixels around (0, 0).
      const int inside = std::popcount(mask & 0b110110000u);
      const auto r = screen_gage_zeros(screening_case(g, g.index(0, 0), 0.0, mask), g);
      CHECK((r.flagged == 1) == (inside >= 3));
    }
  }
  SUBCASE("idempotent") {
    const auto once = screen_gage_zeros(screening_case(g, centre, 0.0, 0x1FFu), g);
    const auto twice = screen_gage_zeros(once.obs, g);
    CHECK(twice.flagged == 0);
  }
}

TEST_CASE("standard Z-R") {
  CHECK(standard_zr(1.0) == 200.0);
  CHECK(standard_zr(0.0) == 0.0);
  CHECK(standard_zr(10.0) == doctest::Approx(200.0 * std::pow(10.0, 1.6)).epsilon(1e-14));
  CHECK(standard_zr(10.0) == doctest::Approx(7962.14).epsilon(1e-6));
  CHECK_THROWS_AS(standard_zr(-0.1), std::domain_error);
}
