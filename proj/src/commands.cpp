#include "rainfuse/commands.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <stdexcept>
#include <tuple>

#include <json.hpp>

#include "rainfuse/covariates.hpp"
#include "rainfuse/csv.hpp"
#include "rainfuse/simulator.hpp"

namespace rainfuse {

namespace fs = std::filesystem;

namespace {

std::string rep_file(const char* stem, int k, const char* ext = ".csv") {
  return std::string(stem) + "_" + std::to_string(k) + ext;
}

std::string radar_id(int x, int y) { return std::to_string(x) + "_" + std::to_string(y); }

CoverageOptions coverage_options(const RunConfig& c, int k) {
  CoverageOptions o;
  o.level = c.holdout.level;
  o.log_floor = c.holdout.log_floor;
  o.sims_per_draw = c.holdout.sims_per_draw;
  o.seed = c.holdout.seed * 1000003ULL + static_cast<std::uint64_t>(k) + 1;
  return o;
}

}  // namespace

PreparedData prepare_data(const RunConfig& config) {
  InputPaths in;
  in.gage = config.gage_path();
  in.radar = config.radar_path();
  if (config.paths.covariates.empty()) in.aws = config.aws_path();
  const fs::path dem = config.dem_path();
  if (!config.paths.dem.empty() || fs::exists(dem)) in.dem = dem;

  PreparedData out;
  out.obs = load_observations(in, config.grid, config.T);
  if (config.screen_gages) {
    ScreenResult s = screen_gage_zeros(out.obs, config.grid);
    out.obs = std::move(s.obs);
    out.flagged = s.flagged;
  }
  if (!config.paths.covariates.empty())
    out.cov = read_covariates(config.covariates_path(), config.grid, config.T);
  else
    out.cov = build_covariates(out.obs, config.grid, default_tps_candidates());
  return out;
}

HoldoutSplit split_holdout(const ObservationSet& obs, const Grid& grid, double fraction,
                           std::uint64_t seed, int repetition) {
  if (!(fraction >= 0.0 && fraction < 1.0))
    throw std::invalid_argument("holdout fraction must lie in [0, 1)");
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(repetition), 0x686f6c64u};
  std::mt19937_64 rng(seq);

  auto choose = [&](int count) {
    std::vector<int> idx(count);
    for (int i = 0; i < count; ++i) idx[i] = i;
    const int k = static_cast<int>(std::lround(fraction * count));
    for (int i = 0; i < k; ++i) {
      std::uniform_int_distribution<int> pick(i, count - 1);
      std::swap(idx[i], idx[pick(rng)]);
    }
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    return idx;
  };

  std::vector<int> gage_rows;
  for (int g = 0; g < static_cast<int>(obs.gages.size()); ++g)
    if (obs.gages[g].rain) gage_rows.push_back(g);
  std::vector<std::pair<int, int>> pixels;  // (t, cell)
  for (int t = 0; t < obs.T; ++t)
    for (int i = 0; i < grid.n(); ++i)
      if (obs.radar[t][i]) pixels.emplace_back(t, i);

  std::vector<HoldoutEntry> entries;
  for (int j : choose(static_cast<int>(gage_rows.size()))) {
    const GageRecord& r = obs.gages[gage_rows[j]];
    HoldoutEntry e;
    e.stream = Stream::kGage;
    e.id = r.station_id;
    e.lon = r.lon;
    e.lat = r.lat;
    e.x = grid.x_of(r.cell);
    e.y = grid.y_of(r.cell);
    e.t = r.t;
    e.value = *r.rain;
    entries.push_back(e);
  }
  for (int j : choose(static_cast<int>(pixels.size()))) {
    const auto [t, i] = pixels[j];
    HoldoutEntry e;
    e.stream = Stream::kRadar;
    e.x = grid.x_of(i);
    e.y = grid.y_of(i);
    e.id = radar_id(e.x, e.y);
    std::tie(e.lon, e.lat) = cell_center_lonlat(grid, i);
    e.t = t;
    e.value = *obs.radar[t][i];
    entries.push_back(e);
  }
  return apply_holdout(obs, grid, entries);
}

HoldoutSplit apply_holdout(const ObservationSet& obs, const Grid& grid,
                           const std::vector<HoldoutEntry>& entries) {
  HoldoutSplit s;
  s.fit = obs;
  s.holdout = obs;
  s.entries = entries;
  s.holdout.radar = empty_radar(grid, obs.T);
  for (auto& g : s.holdout.gages) g.rain.reset();

  std::map<std::pair<std::string, int>, int> gage_row;
  for (int g = 0; g < static_cast<int>(obs.gages.size()); ++g)
    gage_row[{obs.gages[g].station_id, obs.gages[g].t}] = g;

  for (const HoldoutEntry& e : entries) {
    if (e.stream == Stream::kGage) {
      const auto it = gage_row.find({e.id, e.t});
      if (it == gage_row.end() || !obs.gages[it->second].rain)
        throw std::runtime_error("holdout entry " + e.id + " t=" + std::to_string(e.t) +
                                 " has no matching gage record");
      s.fit.gages[it->second].rain.reset();
      s.holdout.gages[it->second].rain = obs.gages[it->second].rain;
    } else {
      if (e.x < 0 || e.x >= grid.nx || e.y < 0 || e.y >= grid.ny || e.t < 0 || e.t >= obs.T)
        throw std::runtime_error("holdout radar entry " + e.id + " outside the grid");
      const int i = grid.index(e.x, e.y);
      if (!obs.radar[e.t][i])
        throw std::runtime_error("holdout radar entry " + e.id + " t=" + std::to_string(e.t) +
                                 " has no matching pixel");
      s.fit.radar[e.t][i].reset();
      s.holdout.radar[e.t][i] = obs.radar[e.t][i];
    }
  }
  return s;
}

void write_holdout(const std::vector<HoldoutEntry>& entries, const fs::path& path) {
  std::string s = "stream,id,lon,lat,x,y,t,value\n";
  for (const HoldoutEntry& e : entries) {
    s += stream_name(e.stream) + "," + e.id + ",";
    csv::append_double(s, e.lon);
    s += ',';
    csv::append_double(s, e.lat);
    s += "," + std::to_string(e.x) + "," + std::to_string(e.y) + "," + std::to_string(e.t) + ",";
    csv::append_double(s, e.value);
    s += '\n';
  }
  csv::write_file(path, s);
}

std::vector<HoldoutEntry> read_holdout(const fs::path& path) {
  csv::Reader r(path, {"stream", "id", "lon", "lat", "x", "y", "t", "value"});
  std::vector<HoldoutEntry> out;
  std::vector<std::string_view> f;
  while (r.next(f)) {
    const std::string where = path.string() + ":" + std::to_string(r.line()) + ": ";
    if (f.size() != 8) throw std::runtime_error(where + "expected 8 fields");
    HoldoutEntry e;
    if (f[0] == "gage")
      e.stream = Stream::kGage;
    else if (f[0] == "radar")
      e.stream = Stream::kRadar;
    else
      throw std::runtime_error(where + "unknown stream '" + std::string(f[0]) + "'");
    try {
      e.id = std::string(f[1]);
      e.lon = csv::parse_double(f[2]);
      e.lat = csv::parse_double(f[3]);
      e.x = static_cast<int>(csv::parse_long(f[4]));
      e.y = static_cast<int>(csv::parse_long(f[5]));
      e.t = static_cast<int>(csv::parse_long(f[6]));
      e.value = csv::parse_double(f[7]);
    } catch (const std::exception& ex) {
      throw std::runtime_error(where + ex.what());
    }
    out.push_back(e);
  }
  return out;
}

std::string fit_report_json(const RunConfig& config, const PosteriorSamples& samples,
                            const DicResult& d, int flagged) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["preset"] = config.preset;
  const ModelConfig m = config.model();
  j["model"] = {{"bias_spatial", m.bias_spatial},
                {"shift_spatial", m.shift_spatial},
                {"basis_k_bias", m.bias_k()},
                {"basis_k_shift", m.shift_k()}};
  j["sampler"] = {{"n_iter", config.sampler.n_iter}, {"burn_in", config.sampler.burn_in},
                  {"thin", config.sampler.thin},     {"seed", config.sampler.seed},
                  {"chains", config.sampler.chains}, {"kept_draws", samples.size()}};
  j["screened_gages"] = flagged;
  ordered_json acc = ordered_json::array();
  for (const BlockReport& b : samples.acceptance)
    acc.push_back({{"block", b.name}, {"scale", b.scale}, {"proposed", b.proposed},
                   {"accepted", b.accepted}, {"rate", b.rate()}});
  j["acceptance"] = acc;
  ordered_json params = ordered_json::object();
  if (samples.size() >= 10) {
    ModelState probe = samples.draws.front();
    for (const ParamSlot& slot : parameter_slots(probe)) {
      const TraceSummary s = trace_summary(samples, slot.name);
      params[slot.name] = {{"median", s.median}, {"q025", s.q025}, {"q975", s.q975}, {"ess", s.ess}};
    }
  }
  j["parameters"] = params;
  j["dic"] = {{"DIC", d.dic}, {"D_bar", d.d_bar}, {"p_D", d.p_d}};
  j["warnings"] = samples.warnings;
  return j.dump(2) + "\n";
}

void cmd_simulate(const RunConfig& config) {
  validate(config, Command::kSimulate);
  const ScenarioSpec spec = config.scenario();
  const SimulatedData data = simulate_dataset(spec);
  const fs::path dir = config.resolve(config.paths.data_dir);
  fs::create_directories(dir);
  write_observations(data.obs, config.grid, dir);
  write_covariates(data.cov, config.grid, dir / "covariates.csv", dir / "transforms.csv");
  write_truth(data.truth, config.grid, dir);
}

void cmd_fit(const RunConfig& config) {
  validate(config, Command::kFit);
  PreparedData data = prepare_data(config);
  const fs::path out = config.output_dir();
  fs::create_directories(out);
  const ModelConfig mc = config.model();

  {
    const Model model(config.grid, data.obs, data.cov, mc);
    const PosteriorSamples samples = run_chain(config.sampler, model);
    const DicResult d = dic(samples, model);
    write_trace(samples, config.trace_path());
    write_dic(d, out / "dic.txt");
    csv::write_file(out / "report.json", fit_report_json(config, samples, d, data.flagged));
  }

  if (config.holdout.fraction > 0.0) {
    for (int k = 0; k < config.holdout.repetitions; ++k) {
      const HoldoutSplit split =
          split_holdout(data.obs, config.grid, config.holdout.fraction, config.holdout.seed, k);
      if (split.entries.empty())
        throw std::runtime_error("holdout repetition " + std::to_string(k) + " withheld no records");
      const Model model(config.grid, split.fit, data.cov, mc);
      const PosteriorSamples samples = run_chain(config.sampler, model);
      write_holdout(split.entries, out / rep_file("holdout", k));
      write_trace(samples, out / rep_file("trace", k));
      const CoverageResult cov =
          holdout_coverage(samples, model, split.holdout, coverage_options(config, k));
      write_coverage(cov, out / rep_file("coverage", k));
    }
  }
}

void cmd_predict(const RunConfig& config) {
  validate(config, Command::kPredict);
  PreparedData data = prepare_data(config);
  const Model model(config.grid, data.obs, data.cov, config.model());
  const PosteriorSamples samples =
      read_trace(config.trace_path(), model.config(), config.grid.n(), config.T);
  if (samples.size() == 0) throw std::runtime_error("trace has no draws: " + config.trace_path().string());
  const fs::path out = config.output_dir();
  fs::create_directories(out);
  const RainMap rain = posterior_rain_map(samples);
  write_rain_maps(rain, config.grid, out);
  write_prob_maps(zero_prob_map(samples, model), config.grid, out);
  for (int t = 0; t < rain.T(); ++t) {
    const std::string stem = "rainmap_t" + std::to_string(t);
    write_pgm(rain.mean[t], config.grid, out / (stem + ".pgm"), out / (stem + ".pgm.scale"));
  }
}

void cmd_validate(const RunConfig& config) {
  validate(config, Command::kValidate);
  const fs::path out = config.output_dir();
  int n_holdout = 0, n_trace = 0;
  for (const auto& entry : fs::directory_iterator(out)) {
    const std::string name = entry.path().filename().string();
    if (entry.path().extension() != ".csv") continue;
    if (name.rfind("holdout_", 0) == 0) ++n_holdout;
    if (name.rfind("trace_", 0) == 0) ++n_trace;
  }
  if (n_holdout != config.holdout.repetitions || n_trace != config.holdout.repetitions)
    throw std::runtime_error("mismatched repetition counts: holdout.repetitions = " +
                             std::to_string(config.holdout.repetitions) + ", " +
                             std::to_string(n_holdout) + " holdout files, " +
                             std::to_string(n_trace) + " trace files in " + out.string());

  PreparedData data = prepare_data(config);
  const ModelConfig mc = config.model();
  std::string report = "repetition,stream,covered,total,fraction\n";
  std::map<Stream, std::vector<std::pair<int, int>>> counts;
  for (int k = 0; k < config.holdout.repetitions; ++k) {
    const std::vector<HoldoutEntry> entries = read_holdout(out / rep_file("holdout", k));
    if (entries.empty())
      throw std::runtime_error(rep_file("holdout", k) + " holds no records");
    const HoldoutSplit split = apply_holdout(data.obs, config.grid, entries);
    const Model model(config.grid, split.fit, data.cov, mc);
    const PosteriorSamples samples =
        read_trace(out / rep_file("trace", k), mc, config.grid.n(), config.T);
    const CoverageResult cov =
        holdout_coverage(samples, model, split.holdout, coverage_options(config, k));
    for (Stream s : {Stream::kGage, Stream::kRadar}) {
      const int c = cov.covered(s), n = cov.total(s);
      counts[s].emplace_back(c, n);
      report += std::to_string(k) + "," + stream_name(s) + "," + std::to_string(c) + "," +
                std::to_string(n) + ",";
      if (n > 0)
        csv::append_double(report, static_cast<double>(c) / n);
      report += '\n';
    }
  }
  for (Stream s : {Stream::kGage, Stream::kRadar}) {
    int c = 0, n = 0;
    for (auto [ci, ni] : counts[s]) c += ci, n += ni;
    report += "pooled," + stream_name(s) + "," + std::to_string(c) + "," + std::to_string(n) + ",";
    if (n > 0) csv::append_double(report, pooled_fraction(counts[s]));
    report += '\n';
  }
  csv::write_file(out / "coverage_report.csv", report);
}

}  // namespace rainfuse
