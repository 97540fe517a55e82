#include <doctest.h>

#include <regex>
#include <sstream>

#include "helpers.hpp"
#include "rainfuse/commands.hpp"

using namespace rainfuse;
using testutil::read_text;
using testutil::TempDir;
namespace fs = std::filesystem;

namespace {

const char* kConfig = R"(
[grid]
nx = 6
ny = 5
T = 2
[paths]
data_dir = data
output_dir = out/nested
[sampler]
n_iter = 160
burn_in = 80
adapt_end = 80
thin = 4
seed = 5
[holdout]
fraction = 0.2
repetitions = 2
seed = 9
[simulate]
n_gages = 10
n_stations = 6
seed = 3
)";

int count_files(const fs::path& dir, const std::string& prefix) {
  int n = 0;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().filename().string().rfind(prefix, 0) == 0) ++n;
  return n;
}

std::vector<std::vector<std::string>> rows(const std::string& text) {
  std::vector<std::vector<std::string>> out;
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    std::vector<std::string> f;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    out.push_back(f);
  }
  return out;
}

}  // namespace

TEST_CASE("holdout split sizes and reproducibility") {
  const Grid g = make_grid(12, 10, 1.0, 126.0, 37.0);
  ObservationSet obs;
  obs.T = 2;
  obs.radar = empty_radar(g, 2);
  for (int t = 0; t < 2; ++t)
    for (int i = 0; i < g.n(); ++i)
      if (i % 7) obs.radar[t][i] = 1.0 + i;
  for (int s = 0; s < 102; ++s)
    for (int t = 0; t < 2; ++t) {
      const auto [lon, lat] = cell_center_lonlat(g, s);
      obs.gages.push_back({"G" + std::to_string(s), lon, lat, t, 0.5 * s, s});
    }
  obs.elevation.assign(g.n(), 0.0);
  const HoldoutSplit a = split_holdout(obs, g, 0.10, 4, 0);
  int gages = 0, radar = 0;
  for (const auto& e : a.entries) (e.stream == Stream::kGage ? gages : radar)++;
  CHECK(gages == 20);  // round(0.1 * 204)
  int radar_present = 0;
  for (const auto& f : obs.radar)
    for (const auto& v : f) radar_present += v.has_value();
  CHECK(radar == static_cast<int>(std::lround(0.1 * radar_present)));
  int fit_missing = 0, held = 0;
  for (const auto& r : a.fit.gages) fit_missing += !r.rain;
  for (const auto& r : a.holdout.gages) held += r.rain.has_value();
  CHECK(fit_missing == 20);
  CHECK(held == 20);

  const HoldoutSplit again = split_holdout(obs, g, 0.10, 4, 0);
  const HoldoutSplit other = split_holdout(obs, g, 0.10, 4, 1);
  REQUIRE(again.entries.size() == a.entries.size());
  bool same = true, differs = false;
  for (std::size_t k = 0; k < a.entries.size(); ++k) {
    same = same && again.entries[k].id == a.entries[k].id && again.entries[k].t == a.entries[k].t;
    differs = differs || other.entries[k].id != a.entries[k].id;
  }
  CHECK(same);
  CHECK(differs);
  CHECK(split_holdout(obs, g, 0.0, 4, 0).entries.empty());

  TempDir d("holdout");
  write_holdout(a.entries, d / "h.csv");
  const auto back = read_holdout(d / "h.csv");
  const HoldoutSplit rebuilt = apply_holdout(obs, g, back);
  CHECK(rebuilt.holdout.radar == a.holdout.radar);
  CHECK(rebuilt.fit.radar == a.fit.radar);
  for (std::size_t k = 0; k < obs.gages.size(); ++k) CHECK(rebuilt.fit.gages[k].rain == a.fit.gages[k].rain);
  std::vector<HoldoutEntry> bogus = back;
  bogus[0].t = 7;
  CHECK_THROWS_AS(apply_holdout(obs, g, bogus), std::runtime_error);
}

TEST_CASE("simulate, fit, predict and validate") {
  TempDir d("pipeline");
  testutil::write_text(d / "run.cfg", kConfig);
  const RunConfig cfg = load_config(d / "run.cfg");

  cmd_simulate(cfg);
  for (const char* f : {"gage.csv", "radar.csv", "aws.csv", "dem.csv", "covariates.csv", "truth_Y.csv",
                        "truth_params.csv"})
    CHECK(fs::exists(d / "data" / f));

  cmd_fit(cfg);
  const fs::path out = d / "out" / "nested";
  CHECK(fs::exists(out / "trace.csv"));
  CHECK(fs::exists(out / "dic.txt"));
  const std::string report = read_text(out / "report.json");
  CHECK(report.find("\"kept_draws\": 20") != std::string::npos);
  CHECK(report.find("\"c2\"") != std::string::npos);
  CHECK(count_files(out, "holdout_") == 2);
  CHECK(count_files(out, "trace_") == 2);
  CHECK(count_files(out, "coverage_") == 2);

  cmd_predict(cfg);
  CHECK(count_files(out, "rainmap_t") == 2 * 3);  // csv, pgm, pgm.scale
  CHECK(count_files(out, "probmap_t") == 2);
  CHECK(fs::exists(out / "rainmap_t1.pgm"));
  CHECK(fs::exists(out / "rainmap_t1.pgm.scale"));
  const auto rain = rows(read_text(out / "rainmap_t0.csv"));
  CHECK(rain.size() == 30u);
  for (const auto& r : rain) CHECK(std::stod(r[2]) > 0.0);

  cmd_validate(cfg);
  const auto cov = rows(read_text(out / "coverage_report.csv"));
  REQUIRE(cov.size() == 6u);
  for (const char* stream : {"gage", "radar"}) {
    int c = 0, n = 0;
    double weighted = 0.0, pooled = -1.0;
    for (const auto& r : cov) {
      if (r[1] != stream) continue;
      if (r[0] == "pooled") {
        CHECK(std::stoi(r[2]) == c);
        CHECK(std::stoi(r[3]) == n);
        pooled = std::stod(r[4]);
      } else {
        c += std::stoi(r[2]);
        n += std::stoi(r[3]);
        weighted += std::stod(r[4]) * std::stoi(r[3]);
      }
    }
    REQUIRE(n > 0);
    CHECK(pooled == doctest::Approx(weighted / n).epsilon(1e-12));
  }

  // Validate recomputes the same coverage flags the fit wrote.
  const auto fit_flags = rows(read_text(out / "coverage_0.csv"));
  int inside = 0;
  for (const auto& r : fit_flags) inside += r[5] == "1";
  int reported = 0;
  for (const auto& r : cov)
    if (r[0] == "0") reported += std::stoi(r[2]);
  CHECK(inside == reported);

  // A stray extra repetition is an error.
  fs::copy_file(out / "holdout_1.csv", out / "holdout_2.csv");
  CHECK_THROWS_WITH(cmd_validate(cfg), doctest::Contains("mismatched repetition counts"));
  fs::remove(out / "holdout_2.csv");

  RunConfig one = cfg;
  one.holdout.repetitions = 1;
  CHECK_THROWS_WITH(cmd_validate(one), doctest::Contains("mismatched repetition counts"));
}

TEST_CASE("no holdout files without a fraction") {
  TempDir d("nohold");
  testutil::write_text(d / "run.cfg", std::regex_replace(std::string(kConfig), std::regex("fraction = 0.2"), "fraction = 0"));
  const RunConfig cfg = load_config(d / "run.cfg");
  cmd_simulate(cfg);
  cmd_fit(cfg);
  const fs::path out = d / "out" / "nested";
  CHECK(fs::exists(out / "trace.csv"));
  CHECK(count_files(out, "holdout_") == 0);
  CHECK_THROWS_AS(cmd_validate(cfg), ConfigError);
}

TEST_CASE("predict without a trace fails before writing") {
  TempDir d("notrace");
  testutil::write_text(d / "run.cfg", kConfig);
  const RunConfig cfg = load_config(d / "run.cfg");
  cmd_simulate(cfg);
  CHECK_THROWS_WITH_AS(cmd_predict(cfg), doctest::Contains("paths.trace"), ConfigError);
  CHECK_FALSE(fs::exists(d / "out"));
}

TEST_CASE("fit and predict are byte-for-byte reproducible") {
  std::vector<std::string> first;
  for (int run = 0; run < 2; ++run) {
    TempDir d("repro");
    testutil::write_text(d / "run.cfg", kConfig);
    const RunConfig cfg = load_config(d / "run.cfg");
    cmd_simulate(cfg);
    cmd_fit(cfg);
    cmd_predict(cfg);
    std::vector<std::string> files;
    for (const auto& e : fs::directory_iterator(d / "out" / "nested")) files.push_back(e.path().filename().string());
    std::sort(files.begin(), files.end());
    std::vector<std::string> contents;
    for (const auto& f : files) contents.push_back(f + "\n" + read_text(d / "out" / "nested" / f));
    if (run == 0) {
      first = contents;
    } else {
      REQUIRE(contents.size() == first.size());
      for (std::size_t k = 0; k < contents.size(); ++k) CHECK(contents[k] == first[k]);
    }
  }
}
