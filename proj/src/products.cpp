#include "rainfuse/products.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>

#include "rainfuse/csv.hpp"

namespace rainfuse {

namespace {

void require_draws(const PosteriorSamples& s, const char* what) {
  if (s.size() == 0) throw std::invalid_argument(std::string(what) + ": no posterior draws");
}

double quantile_sorted(const std::vector<double>& v, double p) {
  const double h = (v.size() - 1) * p;
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - lo) * (v[hi] - v[lo]);
}

}  // namespace

RainMap posterior_rain_map(const PosteriorSamples& samples) {
  require_draws(samples, "posterior_rain_map");
  const int T = samples.draws[0].T();
  const Eigen::Index n = samples.draws[0].Y[0].size();
  const std::size_t m = samples.size();
  RainMap out;
  std::vector<double> vals(m);
  for (int t = 0; t < T; ++t) {
    Eigen::VectorXd mean(n), med(n), lo(n), hi(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      double sum = 0.0;
      for (std::size_t d = 0; d < m; ++d) {
        vals[d] = std::exp(samples.draws[d].Y[t][i]);
        sum += vals[d];
      }
      mean[i] = sum / m;
      std::sort(vals.begin(), vals.end());
      med[i] = quantile_sorted(vals, 0.5);
      lo[i] = quantile_sorted(vals, 0.025);
      hi[i] = quantile_sorted(vals, 0.975);
    }
    out.mean.push_back(mean);
    out.median.push_back(med);
    out.q025.push_back(lo);
    out.q975.push_back(hi);
  }
  return out;
}

ZeroProbMap zero_prob_map(const PosteriorSamples& samples,
                          const std::vector<std::vector<int>>& gage_cells) {
  require_draws(samples, "zero_prob_map");
  const int T = samples.draws[0].T();
  const Eigen::Index n = samples.draws[0].Y[0].size();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  ZeroProbMap out;
  for (int t = 0; t < T; ++t) {
    std::vector<char> has(n, 0);
    if (t < static_cast<int>(gage_cells.size()))
      for (int c : gage_cells[t]) has.at(c) = 1;
    Eigen::VectorXd pr = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd pg = Eigen::VectorXd::Constant(n, nan);
    for (Eigen::Index i = 0; i < n; ++i) {
      double sr = 0.0, sg = 0.0;
      for (const auto& d : samples.draws) {
        sr += logistic_zero_prob(d.a_r, d.b_r, d.Y[t][i]);
        if (has[i]) sg += logistic_zero_prob(d.a_g, d.b_g, d.Y[t][i]);
      }
      pr[i] = sr / samples.size();
      if (has[i]) pg[i] = sg / samples.size();
    }
    out.pi_r.push_back(pr);
    out.pi_g.push_back(pg);
    out.has_gage.push_back(std::move(has));
  }
  return out;
}

ZeroProbMap zero_prob_map(const PosteriorSamples& samples, const Model& model) {
  std::vector<std::vector<int>> cells(model.T());
  for (const auto& g : model.obs().gages) cells[g.t].push_back(g.cell);
  return zero_prob_map(samples, cells);
}

// ---------------------------------------------------------------------------

void CovarianceSpec::validate() const {
  rainfuse::validate(grid);
  if (!(rho >= 0.0 && rho < 1.0)) throw std::invalid_argument("covariance spec: rho must lie in [0, 1)");
  if (!(rho_Y > 0.0 && rho_Y < 1.0)) throw std::invalid_argument("covariance spec: rho_Y must lie in (0, 1)");
  if (!(tau2_Y > 0.0)) throw std::invalid_argument("covariance spec: tau2_Y must be positive");
  if (tau2_eps.size() != sources.size())
    throw std::invalid_argument("covariance spec: tau2_eps and sources differ in length");
  for (double v : tau2_eps)
    if (!(v > 0.0)) throw std::invalid_argument("covariance spec: tau2_eps must be positive");
  for (const auto& s : sources) {
    if (static_cast<int>(s.size()) != grid.n())
      throw std::invalid_argument("covariance spec: source map has the wrong size");
    for (int c : s)
      if (c < 0 || c >= grid.n()) throw std::invalid_argument("covariance spec: source outside grid");
  }
}

std::vector<std::vector<int>> uniform_sources(const Grid& grid, Displacement d, int T) {
  std::vector<int> src(grid.n());
  for (int i = 0; i < grid.n(); ++i) src[i] = shifted_index(grid, i, d);
  return std::vector<std::vector<int>>(std::max(0, T - 1), src);
}

CovarianceEvaluator::CovarianceEvaluator(CovarianceSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  const int n = spec_.grid.n();
  CarModel car(spec_.grid);
  Eigen::MatrixXd ainv(n, n);
  for (int j = 0; j < n; ++j) ainv.col(j) = car.inverse_column(spec_.rho_Y, j);
  ainv = 0.5 * (ainv + ainv.transpose());
  sigma_.push_back(ainv / spec_.tau2_Y);
  const double r2 = spec_.rho * spec_.rho;
  for (int t = 1; t < spec_.T(); ++t) {
    const auto& src = spec_.sources[t - 1];
    const Eigen::MatrixXd& prev = sigma_.back();
    Eigen::MatrixXd cur = ainv / spec_.tau2_eps[t - 1];
    for (int k = 0; k < n; ++k)
      for (int i = 0; i < n; ++i) cur(i, k) += r2 * prev(src[i], src[k]);
    sigma_.push_back(std::move(cur));
  }
}

double CovarianceEvaluator::cov(int i, int j, int t, int tau) const {
  const int n = spec_.grid.n();
  if (t < 0 || t >= spec_.T()) throw std::out_of_range("latent_covariance: t outside [0, T)");
  if (tau < 0 || t + tau >= spec_.T()) throw std::out_of_range("latent_covariance: lag outside the series");
  if (i < 0 || i >= n || j < 0 || j >= n) throw std::out_of_range("latent_covariance: cell outside grid");
  int k = j;
  double factor = 1.0;
  for (int s = t + tau; s > t; --s) {
    k = spec_.sources[s - 1][k];
    factor *= spec_.rho;
  }
  return factor * sigma_[t](i, k);
}

int offset_cell(const Grid& grid, int i, Displacement h) {
  const int x = grid.x_of(i) + h.dx;
  const int y = grid.y_of(i) + h.dy;
  if (x < 0 || y < 0 || x >= grid.nx || y >= grid.ny) return -1;
  return grid.index(x, y);
}

double CovarianceEvaluator::cov(int i, Displacement h, int t, int tau) const {
  const int j = offset_cell(spec_.grid, i, h);
  if (j < 0) throw std::out_of_range("latent_covariance: offset leaves the grid");
  return cov(i, j, t, tau);
}

double latent_covariance(const CovarianceSpec& spec, int i, Displacement h, int t, int tau) {
  return CovarianceEvaluator(spec).cov(i, h, t, tau);
}

// ---------------------------------------------------------------------------

DicResult dic_from(double d_bar, double d_at_mean) {
  DicResult r;
  r.d_bar = d_bar;
  r.p_d = d_bar - d_at_mean;
  r.dic = r.d_bar + r.p_d;
  return r;
}

ModelState posterior_mean_state(const PosteriorSamples& samples) {
  require_draws(samples, "posterior_mean_state");
  ModelState mean = samples.draws[0];
  const double m = static_cast<double>(samples.size());
  for (auto& y : mean.Y) y.setZero();
  auto slots = parameter_slots(mean);
  std::vector<double> acc(slots.size(), 0.0);
  for (const auto& d : samples.draws) {
    for (std::size_t t = 0; t < d.Y.size(); ++t) mean.Y[t] += d.Y[t];
    ModelState copy = d;
    const auto ds = parameter_slots(copy);
    for (std::size_t j = 0; j < ds.size(); ++j)
      acc[j] += to_unconstrained(*ds[j].value, ds[j].transform);
  }
  for (auto& y : mean.Y) y /= m;
  for (std::size_t j = 0; j < slots.size(); ++j)
    *slots[j].value = from_unconstrained(acc[j] / m, slots[j].transform);
  return mean;
}

DicResult dic(const PosteriorSamples& samples, const Model& model) {
  require_draws(samples, "dic");
  double sum = 0.0;
  for (double d : samples.deviance) sum += d;
  const double d_bar = sum / samples.deviance.size();
  // A degenerate chain has its own draw as the mean; skip the round trip
  // through the transforms so p_D is exactly zero.
  bool degenerate = true;
  for (const auto& d : samples.deviance)
    if (d != samples.deviance[0]) degenerate = false;
  if (degenerate) {
    for (std::size_t k = 1; k < samples.size() && degenerate; ++k) {
      ModelState a = samples.draws[0], b = samples.draws[k];
      const auto sa = parameter_slots(a), sb = parameter_slots(b);
      for (std::size_t j = 0; j < sa.size(); ++j)
        if (*sa[j].value != *sb[j].value) degenerate = false;
      for (std::size_t t = 0; t < a.Y.size(); ++t)
        if (a.Y[t] != b.Y[t]) degenerate = false;
    }
  }
  if (degenerate) return dic_from(samples.deviance[0], samples.deviance[0]);
  return dic_from(d_bar, deviance(posterior_mean_state(samples), model));
}

// ---------------------------------------------------------------------------

std::string stream_name(Stream s) { return s == Stream::kGage ? "gage" : "radar"; }

int CoverageResult::covered(Stream s) const {
  int c = 0;
  for (const auto& r : records) c += (r.stream == s && r.inside);
  return c;
}

int CoverageResult::total(Stream s) const {
  int c = 0;
  for (const auto& r : records) c += (r.stream == s);
  return c;
}

double CoverageResult::fraction(Stream s) const {
  const int n = total(s);
  return n > 0 ? static_cast<double>(covered(s)) / n : std::numeric_limits<double>::quiet_NaN();
}

double CoverageResult::fraction() const {
  if (records.empty()) return std::numeric_limits<double>::quiet_NaN();
  int c = 0;
  for (const auto& r : records) c += r.inside;
  return static_cast<double>(c) / records.size();
}

double pooled_fraction(const std::vector<std::pair<int, int>>& counts) {
  long c = 0, n = 0;
  for (const auto& [cov, tot] : counts) {
    c += cov;
    n += tot;
  }
  if (n == 0) throw std::invalid_argument("pooled_fraction: no records");
  return static_cast<double>(c) / n;
}

CoverageResult holdout_coverage(const PosteriorSamples& samples, const Model& model,
                                const ObservationSet& holdout, const CoverageOptions& opt) {
  require_draws(samples, "holdout_coverage");
  if (!(opt.level > 0.0 && opt.level < 1.0))
    throw std::invalid_argument("holdout_coverage: level must lie in (0, 1)");
  if (opt.sims_per_draw < 1) throw std::invalid_argument("holdout_coverage: sims_per_draw must be >= 1");
  std::vector<CoverageRecord> recs;
  for (const auto& g : holdout.gages) {
    if (!g.rain) continue;
    if (g.cell < 0 || g.t < 0 || g.t >= model.T())
      throw std::invalid_argument("holdout gage record outside the model domain");
    CoverageRecord r;
    r.id = g.station_id + "@" + std::to_string(g.t);
    r.stream = Stream::kGage;
    r.t = g.t;
    r.cell = g.cell;
    r.observed = *g.rain > 0.0 ? std::max(std::log(*g.rain), opt.log_floor) : opt.log_floor;
    recs.push_back(r);
  }
  for (int t = 0; t < static_cast<int>(holdout.radar.size()); ++t)
    for (int i = 0; i < static_cast<int>(holdout.radar[t].size()); ++i) {
      const auto& ze = holdout.radar[t][i];
      if (!ze) continue;
      CoverageRecord r;
      r.id = "radar:" + std::to_string(model.grid().x_of(i)) + ":" +
             std::to_string(model.grid().y_of(i)) + "@" + std::to_string(t);
      r.stream = Stream::kRadar;
      r.t = t;
      r.cell = i;
      r.observed = *ze > 0.0 ? std::max(std::log(*ze), opt.log_floor) : opt.log_floor;
      recs.push_back(r);
    }
  if (recs.empty()) throw std::invalid_argument("holdout_coverage: no held-out records");

  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> norm(0.0, 1.0);
  const std::size_t per = samples.size() * opt.sims_per_draw;
  std::vector<std::vector<double>> sims(recs.size());
  for (auto& s : sims) s.reserve(per);
  for (const auto& d : samples.draws) {
    const Eigen::VectorXd c1 = bias_surface(model, d);
    const double sg = std::sqrt(d.sigma2_g), sr = std::sqrt(d.sigma2_r);
    for (std::size_t k = 0; k < recs.size(); ++k) {
      const auto& r = recs[k];
      const double y = d.Y[r.t][r.cell];
      for (int rep = 0; rep < opt.sims_per_draw; ++rep) {
        const double u = unif(rng);
        const double z = norm(rng);
        double v;
        if (r.stream == Stream::kGage)
          v = u < logistic_zero_prob(d.a_g, d.b_g, y) ? opt.log_floor : y + sg * z;
        else
          v = u < logistic_zero_prob(d.a_r, d.b_r, y) ? opt.log_floor
                                                       : c1[r.cell] + d.c2 * y + sr * z;
        sims[k].push_back(std::max(v, opt.log_floor));
      }
    }
  }
  const double tail = 0.5 * (1.0 - opt.level);
  CoverageResult out;
  for (std::size_t k = 0; k < recs.size(); ++k) {
    auto& s = sims[k];
    std::sort(s.begin(), s.end());
    CoverageRecord r = recs[k];
    r.lower = quantile_sorted(s, tail);
    r.upper = quantile_sorted(s, 1.0 - tail);
    r.inside = r.observed >= r.lower && r.observed <= r.upper;
    out.records.push_back(r);
  }
  return out;
}

// ---------------------------------------------------------------------------

void write_rain_maps(const RainMap& map, const Grid& grid, const std::filesystem::path& dir) {
  for (int t = 0; t < map.T(); ++t) {
    std::string s = "x,y,mean,median,q025,q975\n";
    for (int i = 0; i < grid.n(); ++i) {
      s += std::to_string(grid.x_of(i)) + "," + std::to_string(grid.y_of(i));
      for (const auto* v : {&map.mean, &map.median, &map.q025, &map.q975}) {
        s += ',';
        csv::append_double(s, (*v)[t][i]);
      }
      s += '\n';
    }
    csv::write_file(dir / ("rainmap_t" + std::to_string(t) + ".csv"), s);
  }
}

void write_prob_maps(const ZeroProbMap& map, const Grid& grid, const std::filesystem::path& dir) {
  for (int t = 0; t < map.T(); ++t) {
    std::string s = "x,y,pi_r,pi_g\n";
    for (int i = 0; i < grid.n(); ++i) {
      s += std::to_string(grid.x_of(i)) + "," + std::to_string(grid.y_of(i)) + ",";
      csv::append_double(s, map.pi_r[t][i]);
      s += ',';
      if (map.has_gage[t][i]) csv::append_double(s, map.pi_g[t][i]);
      s += '\n';
    }
    csv::write_file(dir / ("probmap_t" + std::to_string(t) + ".csv"), s);
  }
}

PgmScale write_pgm(const Eigen::VectorXd& values, const Grid& grid,
                   const std::filesystem::path& path, const std::filesystem::path& sidecar) {
  if (values.size() != grid.n()) throw std::invalid_argument("write_pgm: value count does not match grid");
  PgmScale sc;
  sc.min = values.minCoeff();
  sc.max = values.maxCoeff();
  const double range = sc.max - sc.min;
  std::string s = "P2\n" + std::to_string(grid.nx) + " " + std::to_string(grid.ny) + "\n" +
                  std::to_string(sc.levels) + "\n";
  for (int y = grid.ny - 1; y >= 0; --y) {
    for (int x = 0; x < grid.nx; ++x) {
      const double v = values[grid.index(x, y)];
      const long level = range > 0.0 ? std::lround((v - sc.min) / range * sc.levels) : 0;
      if (x > 0) s += ' ';
      s += std::to_string(level);
    }
    s += '\n';
  }
  csv::write_file(path, s);
  std::string side = "min=";
  csv::append_double(side, sc.min);
  side += "\nmax=";
  csv::append_double(side, sc.max);
  side += "\nlevels=" + std::to_string(sc.levels) + "\n";
  csv::write_file(sidecar, side);
  return sc;
}

Eigen::VectorXd read_pgm(const std::filesystem::path& path, const std::filesystem::path& sidecar,
                         const Grid& grid) {
  PgmScale sc;
  {
    std::ifstream in(sidecar);
    if (!in) throw csv::IoError("cannot open " + sidecar.string());
    std::string line;
    while (std::getline(in, line)) {
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = line.substr(0, eq), val = line.substr(eq + 1);
      if (key == "min") sc.min = csv::parse_double(val);
      else if (key == "max") sc.max = csv::parse_double(val);
      else if (key == "levels") sc.levels = static_cast<int>(csv::parse_long(val));
    }
  }
  std::ifstream in(path);
  if (!in) throw csv::IoError("cannot open " + path.string());
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  in >> magic >> w >> h >> maxval;
  if (magic != "P2" || w != grid.nx || h != grid.ny || maxval != sc.levels)
    throw std::runtime_error(path.string() + ": not a matching P2 graymap");
  Eigen::VectorXd out(grid.n());
  for (int y = grid.ny - 1; y >= 0; --y)
    for (int x = 0; x < grid.nx; ++x) {
      int level = 0;
      if (!(in >> level)) throw std::runtime_error(path.string() + ": truncated pixel data");
      out[grid.index(x, y)] = sc.min + (sc.max - sc.min) * level / sc.levels;
    }
  return out;
}

void write_dic(const DicResult& d, const std::filesystem::path& path) {
  std::string s = "DIC ";
  csv::append_double(s, d.dic);
  s += "\nD_bar ";
  csv::append_double(s, d.d_bar);
  s += "\np_D ";
  csv::append_double(s, d.p_d);
  s += '\n';
  csv::write_file(path, s);
}

DicResult read_dic(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw csv::IoError("cannot open " + path.string());
  DicResult d;
  std::string key, val;
  while (in >> key >> val) {
    if (key == "DIC") d.dic = csv::parse_double(val);
    else if (key == "D_bar") d.d_bar = csv::parse_double(val);
    else if (key == "p_D") d.p_d = csv::parse_double(val);
  }
  return d;
}

void write_coverage(const CoverageResult& c, const std::filesystem::path& path) {
  std::string s = "id,stream,observed,lower,upper,inside\n";
  for (const auto& r : c.records) {
    s += r.id + "," + stream_name(r.stream) + ",";
    csv::append_double(s, r.observed);
    s += ',';
    csv::append_double(s, r.lower);
    s += ',';
    csv::append_double(s, r.upper);
    s += r.inside ? ",1\n" : ",0\n";
  }
  csv::write_file(path, s);
}

// ---------------------------------------------------------------------------

std::string trace_block(const std::string& param) {
  if (param.rfind("Y[", 0) == 0) return param.substr(0, param.find(']') + 1);
  for (const char* v : {"beta1_mean", "beta_dyn", "c1_gamma", "beta_shift1", "beta_shift2"})
    if (param.rfind(v, 0) == 0) return param.substr(0, param.rfind('['));
  return param;
}

void write_trace(const PosteriorSamples& samples, const std::filesystem::path& path) {
  std::string s = "iter,block,param,value\n";
  for (std::size_t d = 0; d < samples.size(); ++d) {
    const std::string it = std::to_string(samples.iterations.empty() ? static_cast<int>(d)
                                                                     : samples.iterations[d]);
    const std::string chain_prefix =
        (!samples.chain.empty() && samples.chain[d] > 0) ? std::to_string(samples.chain[d]) + ":" : "";
    ModelState copy = samples.draws[d];
    for (const auto& slot : parameter_slots(copy)) {
      s += chain_prefix + it + "," + trace_block(slot.name) + "," + slot.name + ",";
      csv::append_double(s, *slot.value);
      s += '\n';
    }
    for (std::size_t t = 0; t < copy.Y.size(); ++t) {
      const std::string block = "Y[" + std::to_string(t) + "]";
      for (Eigen::Index i = 0; i < copy.Y[t].size(); ++i) {
        s += chain_prefix + it + "," + block + "," + block + "[" + std::to_string(i) + "],";
        csv::append_double(s, copy.Y[t][i]);
        s += '\n';
      }
    }
    s += chain_prefix + it + ",deviance,deviance,";
    csv::append_double(s, samples.deviance[d]);
    s += '\n';
  }
  csv::write_file(path, s);
}

PosteriorSamples read_trace(const std::filesystem::path& path, const ModelConfig& config,
                            int n_cells, int T) {
  csv::Reader reader(path, {"iter", "block", "param", "value"});
  PosteriorSamples out;
  ModelState cur;
  std::map<std::string, std::size_t> index;
  std::vector<ParamSlot> slots;
  std::string current_iter;
  std::size_t filled = 0;
  const std::size_t expected =
      [&] {
        ModelState probe = make_state(config, n_cells, T);
        return parameter_slots(probe).size();
      }() + static_cast<std::size_t>(n_cells) * T + 1;

  auto start = [&](const std::string& iter) {
    cur = make_state(config, n_cells, T);
    slots = parameter_slots(cur);
    index.clear();
    for (std::size_t j = 0; j < slots.size(); ++j) index[slots[j].name] = j;
    current_iter = iter;
    filled = 0;
  };
  auto finish = [&]() {
    if (filled != expected)
      throw std::runtime_error(path.string() + ": draw " + current_iter + " has " +
                               std::to_string(filled) + " values, expected " +
                               std::to_string(expected));
    const auto colon = current_iter.find(':');
    out.chain.push_back(colon == std::string::npos ? 0 : std::stoi(current_iter.substr(0, colon)));
    out.iterations.push_back(std::stoi(colon == std::string::npos ? current_iter
                                                                  : current_iter.substr(colon + 1)));
    out.draws.push_back(cur);
  };

  std::vector<std::string_view> f;
  bool open = false;
  while (reader.next(f)) {
    if (f.size() != 4)
      throw std::runtime_error(path.string() + ":" + std::to_string(reader.line()) +
                               ": expected 4 fields");
    const std::string iter(f[0]), param(f[2]);
    if (!open || iter != current_iter) {
      if (open) finish();
      start(iter);
      open = true;
    }
    double v;
    try {
      v = csv::parse_double(f[3]);
    } catch (const std::exception& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(reader.line()) + ": " + e.what());
    }
    if (param == "deviance") {
      out.deviance.push_back(v);
    } else if (param.rfind("Y[", 0) == 0) {
      int t = -1, i = -1;
      if (std::sscanf(param.c_str(), "Y[%d][%d]", &t, &i) != 2 || t < 0 || t >= T || i < 0 ||
          i >= n_cells)
        throw std::runtime_error(path.string() + ":" + std::to_string(reader.line()) +
                                 ": bad latent name '" + param + "'");
      cur.Y[t][i] = v;
    } else {
      const auto it = index.find(param);
      if (it == index.end())
        throw std::runtime_error(path.string() + ":" + std::to_string(reader.line()) +
                                 ": unknown parameter '" + param + "'");
      *slots[it->second].value = v;
    }
    ++filled;
  }
  if (open) finish();
  if (out.deviance.size() != out.draws.size())
    throw std::runtime_error(path.string() + ": deviance rows do not match draws");
  if (out.draws.empty()) throw std::runtime_error(path.string() + ": no draws");
  return out;
}

}  // namespace rainfuse
