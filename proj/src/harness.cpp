#include "srcs/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "srcs/baseline.hpp"
#include "srcs/rng.hpp"

namespace srcs::harness {

using nlohmann::json;

const char* to_string(Algorithm a) {
  switch (a) {
    case Algorithm::proposed: return "proposed";
    case Algorithm::proposed_bgg: return "proposed-bgg";
    case Algorithm::proposed_gd: return "proposed-gd";
    case Algorithm::omp_ongrid: return "omp-ongrid";
  }
  return "?";
}

Algorithm algorithm_from_string(const std::string& name) {
  for (Algorithm a : {Algorithm::proposed, Algorithm::proposed_bgg, Algorithm::proposed_gd, Algorithm::omp_ongrid})
    if (name == to_string(a)) return a;
  throw ConfigError("unknown algorithm: " + name);
}

void ExperimentConfig::validate() const {
  array.validate();
  paths.validate(array);
  if (pilot != "ones" && pilot != "random") throw ConfigError("scenario.array.pilot must be \"ones\" or \"random\"");
  if (snr_db.empty()) throw ConfigError("sweep.snr_db needs at least one point");
  if (algorithms.empty()) throw ConfigError("algorithms needs at least one entry");
  if (trials < 1) throw ConfigError("seeds.trials must be >= 1");
  if (workers < 1) throw ConfigError("workers must be >= 1");
  for (Index h : bwp)
    if (h < 1 || array.observed_bwp >= h) throw ConfigError("sweep.bwp entries must exceed the observed BWP index");
  for (Index n : antennas)
    if (n < 1) throw ConfigError("sweep.antennas entries must be >= 1");
  const auto& f = framework;
  if (f.outer_iterations < 1 || f.sse_sweeps < 1 || f.srgu_rounds < 1)
    throw ConfigError("framework iteration counts must be >= 1");
  if (f.zeta && !(*f.zeta > 0.0 && *f.zeta <= 1.0)) throw ConfigError("framework.zeta must lie in (0, 1]");
  if (f.lambda && !(*f.lambda > 0.0 && *f.lambda < 1.0)) throw ConfigError("framework.lambda must lie in (0, 1)");
  if (omp.k_max < 0 || !(omp.stop >= 0.0)) throw ConfigError("omp settings invalid");
}

ExperimentConfig default_config() { return ExperimentConfig{}; }

namespace {

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json to_json(const ExperimentConfig& c) {
  const auto& f = c.framework;
  json j;
  j["schema_version"] = kCsvSchemaVersion;
  j["scenario"] = {
      {"id", c.scenario_id},
      {"array",
       {{"n_rx", c.array.n_rx}, {"m_sub", c.array.m_sub}, {"h_p", c.array.h_p}, {"f0", c.array.f0},
        {"observed_bwp", c.array.observed_bwp}, {"pilot", c.pilot}}},
      {"paths",
       {{"k_paths", c.paths.k_paths}, {"angle_spread_deg", c.paths.angle_spread_deg},
        {"delay_gap_bins", c.paths.delay_gap_bins}, {"delay_span_bins", c.paths.delay_span_bins},
        {"gain_min", c.paths.gain_min}}}};
  j["sweep"] = {{"snr_db", c.snr_db}, {"bwp", c.bwp}, {"antennas", c.antennas}};
  std::vector<std::string> algs;
  for (Algorithm a : c.algorithms) algs.emplace_back(to_string(a));
  j["algorithms"] = algs;
  j["seeds"] = {{"base", c.base_seed}, {"trials", c.trials}};
  j["framework"] = {
      {"outer_iterations", f.outer_iterations},
      {"sse_sweeps", f.sse_sweeps},
      {"srgu_rounds", f.srgu_rounds},
      {"tol_outer", f.tol_outer},
      {"early_stop", f.early_stop},
      {"warm_start", f.warm_start},
      {"sigma_inflation", f.sigma_inflation},
      {"sse_early_stop_tol", f.sse_early_stop_tol},
      {"rho_init", to_string(f.rho_init)},
      {"zeta", opt_json(f.zeta)},
      {"lambda", opt_json(f.lambda)},
      {"armijo",
       {{"c", f.armijo.c}, {"gamma", f.armijo.gamma}, {"eps0", f.armijo.eps0},
        {"max_backtracks", f.armijo.max_backtracks}}},
      {"support",
       {{"probability_threshold", f.support.probability_threshold},
        {"energy_ratio", f.support.energy_ratio},
        {"max_support", f.support.max_support}}},
      {"prior",
       {{"a", f.gamma.active_shape}, {"b", f.gamma.active_rate}, {"a_bar", f.gamma.inactive_shape},
        {"b_bar", f.gamma.inactive_rate}, {"noise_shape", f.noise_shape}, {"noise_rate", f.noise_rate}}}};
  j["init"] = {{"peaks", c.init.peaks},         {"radius", c.init.radius},
               {"oversample", c.init.oversample}, {"fft_pad", c.init.fft_pad},
               {"max_points", c.init.max_points}, {"fallback_angles", c.init.fallback_angles},
               {"fallback_delays", c.init.fallback_delays}};
  j["omp"] = {{"k_max", c.omp.k_max}, {"stop", c.omp.stop}};
  j["workers"] = c.workers;
  j["output"] = {{"csv", c.csv_path}, {"summary", c.summary_path}, {"trace_dir", c.trace_dir}};
  return j;
}

std::optional<double> opt_double(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

ExperimentConfig from_full_json(const json& j) {
  ExperimentConfig c;
  const json& sc = j.at("scenario");
  c.scenario_id = sc.at("id").get<std::string>();
  const json& ar = sc.at("array");
  c.array.n_rx = ar.at("n_rx").get<Index>();
  c.array.m_sub = ar.at("m_sub").get<Index>();
  c.array.h_p = ar.at("h_p").get<Index>();
  c.array.f0 = ar.at("f0").get<double>();
  c.array.observed_bwp = ar.at("observed_bwp").get<Index>();
  c.pilot = ar.at("pilot").get<std::string>();
  const json& pa = sc.at("paths");
  c.paths.k_paths = pa.at("k_paths").get<Index>();
  c.paths.angle_spread_deg = pa.at("angle_spread_deg").get<double>();
  c.paths.delay_gap_bins = pa.at("delay_gap_bins").get<double>();
  c.paths.delay_span_bins = pa.at("delay_span_bins").get<double>();
  c.paths.gain_min = pa.at("gain_min").get<double>();
  c.snr_db = j.at("sweep").at("snr_db").get<std::vector<double>>();
  c.bwp = j.at("sweep").at("bwp").get<std::vector<Index>>();
  c.antennas = j.at("sweep").at("antennas").get<std::vector<Index>>();
  c.algorithms.clear();
  for (const auto& a : j.at("algorithms")) c.algorithms.push_back(algorithm_from_string(a.get<std::string>()));
  c.base_seed = j.at("seeds").at("base").get<std::uint64_t>();
  c.trials = j.at("seeds").at("trials").get<int>();
  const json& f = j.at("framework");
  auto& fs = c.framework;
  fs.outer_iterations = f.at("outer_iterations").get<int>();
  fs.sse_sweeps = f.at("sse_sweeps").get<int>();
  fs.srgu_rounds = f.at("srgu_rounds").get<int>();
  fs.tol_outer = f.at("tol_outer").get<double>();
  fs.early_stop = f.at("early_stop").get<bool>();
  fs.warm_start = f.at("warm_start").get<bool>();
  fs.sigma_inflation = f.at("sigma_inflation").get<double>();
  fs.sse_early_stop_tol = f.at("sse_early_stop_tol").get<double>();
  fs.rho_init = rho_init_from_string(f.at("rho_init").get<std::string>());
  fs.zeta = opt_double(f.at("zeta"));
  fs.lambda = opt_double(f.at("lambda"));
  fs.armijo.c = f.at("armijo").at("c").get<double>();
  fs.armijo.gamma = f.at("armijo").at("gamma").get<double>();
  fs.armijo.eps0 = f.at("armijo").at("eps0").get<double>();
  fs.armijo.max_backtracks = f.at("armijo").at("max_backtracks").get<int>();
  fs.support.probability_threshold = f.at("support").at("probability_threshold").get<double>();
  fs.support.energy_ratio = f.at("support").at("energy_ratio").get<double>();
  fs.support.max_support = f.at("support").at("max_support").get<Index>();
  const json& pr = f.at("prior");
  fs.gamma.active_shape = pr.at("a").get<double>();
  fs.gamma.active_rate = pr.at("b").get<double>();
  fs.gamma.inactive_shape = pr.at("a_bar").get<double>();
  fs.gamma.inactive_rate = pr.at("b_bar").get<double>();
  fs.noise_shape = pr.at("noise_shape").get<double>();
  fs.noise_rate = pr.at("noise_rate").get<double>();
  const json& in = j.at("init");
  c.init.peaks = in.at("peaks").get<Index>();
  c.init.radius = in.at("radius").get<int>();
  c.init.oversample = in.at("oversample").get<int>();
  c.init.fft_pad = in.at("fft_pad").get<int>();
  c.init.max_points = in.at("max_points").get<Index>();
  c.init.fallback_angles = in.at("fallback_angles").get<Index>();
  c.init.fallback_delays = in.at("fallback_delays").get<Index>();
  c.omp.k_max = j.at("omp").at("k_max").get<Index>();
  c.omp.stop = j.at("omp").at("stop").get<double>();
  c.workers = j.at("workers").get<int>();
  c.csv_path = j.at("output").at("csv").get<std::string>();
  c.summary_path = j.at("output").at("summary").get<std::string>();
  c.trace_dir = j.at("output").at("trace_dir").get<std::string>();
  if (j.at("schema_version").get<int>() != kCsvSchemaVersion) throw ConfigError("unsupported schema_version");
  return c;
}

// Overlays `src` onto `dst`, rejecting keys that `dst` does not define.
void merge_strict(json& dst, const json& src, const std::string& path) {
  if (!src.is_object()) throw ConfigError("config: expected an object at '" + path + "'");
  for (auto it = src.begin(); it != src.end(); ++it) {
    const std::string key = path.empty() ? it.key() : path + "." + it.key();
    if (!dst.contains(it.key())) throw ConfigError("config: unknown key '" + key + "'");
    json& target = dst[it.key()];
    if (target.is_object())
      merge_strict(target, it.value(), key);
    else
      target = it.value();
  }
}

ExperimentConfig parse_checked(const json& j) {
  try {
    ExperimentConfig c = from_full_json(j);
    c.validate();
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

}  // namespace

std::string config_to_json(const ExperimentConfig& c) { return to_json(c).dump(2) + "\n"; }

ExperimentConfig config_from_json(const std::string& text) {
  json in;
  try {
    in = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  json full = to_json(default_config());
  merge_strict(full, in, "");
  return parse_checked(full);
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file: " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return config_from_json(ss.str());
}

void apply_override(ExperimentConfig& c, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override must look like key.path=value: " + assignment);
  const std::string path = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::exception&) {
    value = raw;
  }
  json full = to_json(c);
  json* node = &full;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (!node->is_object() || !node->contains(key)) throw ConfigError("override: unknown key '" + path + "'");
    node = &(*node)[key];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  if (node->is_object()) throw ConfigError("override: '" + path + "' is a section, not a value");
  *node = value;
  c = parse_checked(full);
}

std::string config_schema() {
  return R"(scenario.id                string   label copied into every CSV row
scenario.array.n_rx        int      receive antennas N_r (ULA, half-wavelength)
scenario.array.m_sub       int      subcarriers per bandwidth part M
scenario.array.h_p         int      bandwidth parts in the full band
scenario.array.f0          number   subcarrier spacing [Hz]
scenario.array.observed_bwp int     index of the pilot-bearing bandwidth part
scenario.array.pilot       string   "ones" or "random" (unit-modulus, seeded from seeds.base)
scenario.paths.k_paths     int      paths per trial K
scenario.paths.angle_spread_deg number  angles uniform in +-spread/2
scenario.paths.delay_gap_bins   number  minimum delay gap in delay-resolution units 1/(M f0)
scenario.paths.delay_span_bins  number  delays uniform in [0, span) resolution units
scenario.paths.gain_min    number   |gain| uniform in [gain_min, 1]
sweep.snr_db               [number] SNR points [dB]
sweep.bwp                  [int]    h_p values (empty: scenario value)
sweep.antennas             [int]    N_r values (empty: scenario value)
algorithms                 [string] proposed | proposed-bgg | proposed-gd | omp-ongrid
seeds.base                 int      base seed
seeds.trials               int      trials per (algorithm, sweep point)
framework.outer_iterations int      I0
framework.sse_sweeps       int      I1
framework.srgu_rounds      int      I2
framework.tol_outer        number   early-stop movement threshold in coarse cells
framework.early_stop       bool     stop when support repeats and movement < tol_outer
framework.warm_start       bool     seed each SSE pass from the previous one
framework.sigma_inflation  number   prior covariance factor for the gain refit
framework.sse_early_stop_tol number relative change of mu that ends an SSE pass
framework.rho_init         string   prior_mean | active_branch (starting <rho> of each SSE pass)
framework.zeta             number|null  tanh relaxation; null derives it from SNR
framework.lambda           number|null  sparsity ratio; null uses K / grid size
framework.armijo.{c,gamma,eps0,max_backtracks}  line-search parameters
framework.support.{probability_threshold,energy_ratio,max_support}  support extraction
framework.prior.{a,b,a_bar,b_bar,noise_shape,noise_rate}  Gamma hyperparameters
init.{peaks,radius,oversample,fft_pad,max_points,fallback_angles,fallback_delays}  coarse grid
omp.k_max                  int      0 selects 2 K
omp.stop                   number   residual ratio stop
workers                    int      worker threads
output.csv / output.summary / output.trace_dir  output paths (empty trace_dir disables traces)
)";
}

std::string SweepPoint::key() const {
  std::ostringstream os;
  os.precision(17);
  os << "snr=" << snr_db << ";hp=" << h_p << ";nr=" << n_rx;
  return os.str();
}

std::vector<SweepPoint> sweep_points(const ExperimentConfig& c) {
  const std::vector<Index> bwps = c.bwp.empty() ? std::vector<Index>{c.array.h_p} : c.bwp;
  const std::vector<Index> ants = c.antennas.empty() ? std::vector<Index>{c.array.n_rx} : c.antennas;
  std::vector<SweepPoint> pts;
  for (Index nr : ants)
    for (Index hp : bwps)
      for (double snr : c.snr_db) pts.push_back({snr, hp, nr});
  return pts;
}

std::uint64_t cell_seed(std::uint64_t base, Algorithm alg, const SweepPoint& p, int trial) {
  std::uint64_t h = fnv1a64(to_string(alg));
  h = fnv1a64(p.key(), h);
  return mix_seed(mix_seed(base, h), static_cast<std::uint64_t>(trial));
}

std::uint64_t scene_seed(std::uint64_t base, const SweepPoint& p, int trial) {
  return mix_seed(mix_seed(base, fnv1a64(p.key(), fnv1a64("scene"))), static_cast<std::uint64_t>(trial));
}

Scene build_scene(const ExperimentConfig& c, const SweepPoint& p, int trial) {
  Scene s;
  s.array = c.array;
  s.array.h_p = p.h_p;
  s.array.n_rx = p.n_rx;
  if (c.pilot == "random") s.array.pilot = random_pilot(s.array.m_sub, mix_seed(c.base_seed, fnv1a64("pilot")));
  const std::uint64_t seed = scene_seed(c.base_seed, p, trial);
  s.paths = draw_paths(s.array, c.paths, seed);
  s.sample = generate_channel(s.array, s.paths, p.snr_db, mix_seed(seed, 1));
  CoarseInitConfig init = c.init;
  init.k_expected = c.paths.k_paths;
  s.grid0 = coarse_grid_init(s.sample.obs, s.array, init);
  return s;
}

FrameworkConfig framework_config(const ExperimentConfig& c, Algorithm alg, const SweepPoint& p, Index grid_size) {
  const auto& f = c.framework;
  FrameworkConfig fc;
  fc.outer_iterations = f.outer_iterations;
  fc.sse.max_sweeps = f.sse_sweeps;
  fc.sse.variant = alg == Algorithm::proposed_bgg ? PriorVariant::bgg : PriorVariant::tanh;
  fc.sse.support = f.support;
  fc.sse.early_stop_tol = f.sse_early_stop_tol;
  fc.sse.rho_init = f.rho_init;
  fc.srgu.max_rounds = f.srgu_rounds;
  fc.srgu.armijo = f.armijo;
  fc.srgu.method = alg == Algorithm::proposed_gd ? DirectionMethod::gradient_descent : DirectionMethod::bfgs;
  fc.srgu.sigma_inflation = f.sigma_inflation;
  fc.tol_outer = f.tol_outer;
  fc.early_stop = f.early_stop;
  fc.warm_start = f.warm_start;
  fc.prior = BgtPrior::with_expected_support(static_cast<double>(c.paths.k_paths), grid_size);
  if (f.lambda) fc.prior.lambda = *f.lambda;
  fc.prior.gamma = f.gamma;
  fc.prior.zeta = f.zeta ? *f.zeta : zeta_for_snr(p.snr_db);
  fc.prior.noise_shape = f.noise_shape;
  fc.prior.noise_rate = f.noise_rate;
  fc.srgu.x_max = fc.prior.x_max;
  return fc;
}

namespace {
std::string sanitize(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  std::replace(s.begin(), s.end(), '\r', ' ');
  return s;
}
}  // namespace

ResultRow run_cell(const ExperimentConfig& c, Algorithm alg, const SweepPoint& p, int trial) {
  ResultRow row;
  row.scenario_id = c.scenario_id;
  row.algorithm = alg;
  row.point = p;
  row.trial = trial;
  row.seed = cell_seed(c.base_seed, alg, p, trial);
  row.nmse_db = std::nan("");
  row.rmse_db = std::nan("");
  try {
    const Scene s = build_scene(c, p, trial);
    const ChannelDictionary dict(s.array);
    const GridMatrix truth = s.paths.grid().values();
    row.grid_size = s.grid0.size();
    const auto t0 = std::chrono::steady_clock::now();
    GridMatrix theta_s;
    CVector x_s;
    if (alg == Algorithm::omp_ongrid) {
      const Index k_max = c.omp.k_max > 0 ? c.omp.k_max : 2 * c.paths.k_paths;
      const OmpResult r = omp_ongrid_baseline(s.sample.obs, dict, s.grid0, k_max, c.omp.stop);
      theta_s = r.theta_s;
      x_s = r.x_s;
      row.outer_iters = 1;
    } else {
      FrameworkConfig fc = framework_config(c, alg, p, s.grid0.size());
      if (!c.trace_dir.empty()) {
        std::filesystem::create_directories(c.trace_dir);
        fc.trace_path = (std::filesystem::path(c.trace_dir) /
                         (std::string(to_string(alg)) + "_" + std::to_string(row.seed) + ".jsonl"))
                            .string();
      }
      const Scorer scorer = [&](const GridMatrix& th, const CVector& x) {
        return nmse_db(extrapolate_channel(th, x, s.array), s.sample.h_full);
      };
      const FrameworkResult r = run_alternating_map(s.sample.obs, dict, s.grid0, fc, scorer);
      theta_s = r.theta_s;
      x_s = r.x_s;
      row.outer_iters = r.outer_iterations;
      for (const auto& rec : r.trace)
        if (rec.score) row.nmse_trace.push_back(*rec.score);
    }
    row.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    row.support_size = theta_s.rows();
    row.nmse_db = nmse_db(extrapolate_channel(theta_s, x_s, s.array), s.sample.h_full);
    if (theta_s.rows() > 0)
      row.rmse_db = rmse_db(theta_s, truth, std::nullopt, std::nullopt,
                            c.paths.angle_spread_deg * M_PI / 180.0,
                            c.paths.delay_span_bins * s.array.delay_resolution());
  } catch (const std::exception& e) {
    row.status = sanitize(std::string("error: ") + e.what());
  }
  return row;
}

namespace {

std::string fmt_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

const std::vector<std::string> kColumns = {"schema",     "scenario_id", "algorithm",   "snr_db",       "h_p",
                                           "n_rx",       "trial",       "seed",        "status",       "nmse_db",
                                           "rmse_db",    "runtime_s",   "outer_iters", "support_size", "grid_size",
                                           "nmse_trace"};

double parse_double(const std::string& s) { return s == "nan" ? std::nan("") : std::stod(s); }

}  // namespace

void write_csv(std::ostream& os, const std::vector<ResultRow>& rows) {
  for (std::size_t i = 0; i < kColumns.size(); ++i) os << (i ? "," : "") << kColumns[i];
  os << "\r\n";
  for (const ResultRow& r : rows) {
    std::string trace;
    for (std::size_t i = 0; i < r.nmse_trace.size(); ++i) trace += (i ? ";" : "") + fmt_double(r.nmse_trace[i]);
    os << kCsvSchemaVersion << ',' << csv_field(r.scenario_id) << ',' << to_string(r.algorithm) << ','
       << fmt_double(r.point.snr_db) << ',' << r.point.h_p << ',' << r.point.n_rx << ',' << r.trial << ',' << r.seed
       << ',' << csv_field(r.status) << ',' << fmt_double(r.nmse_db) << ',' << fmt_double(r.rmse_db) << ','
       << fmt_double(r.runtime_s) << ',' << r.outer_iters << ',' << r.support_size << ',' << r.grid_size << ','
       << trace << "\r\n";
  }
}

std::vector<ResultRow> read_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open CSV: " + path);
  std::string line;
  if (!std::getline(is, line)) throw ConfigError("empty CSV: " + path);
  const std::vector<std::string> header = split_csv_line(line);
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
  for (const char* needed : {"algorithm", "snr_db", "h_p", "n_rx", "trial", "status", "nmse_db"})
    if (!col.count(needed)) throw ConfigError(std::string("CSV is missing column ") + needed);
  auto get = [&](const std::vector<std::string>& f, const char* name) -> std::string {
    auto it = col.find(name);
    return it == col.end() || it->second >= f.size() ? std::string() : f[it->second];
  };
  std::vector<ResultRow> rows;
  while (std::getline(is, line)) {
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv_line(line);
    ResultRow r;
    r.scenario_id = get(f, "scenario_id");
    r.algorithm = algorithm_from_string(get(f, "algorithm"));
    r.point = {parse_double(get(f, "snr_db")), std::stol(get(f, "h_p")), std::stol(get(f, "n_rx"))};
    r.trial = std::stoi(get(f, "trial"));
    if (const auto s = get(f, "seed"); !s.empty()) r.seed = std::stoull(s);
    r.status = get(f, "status");
    r.nmse_db = parse_double(get(f, "nmse_db"));
    if (const auto s = get(f, "rmse_db"); !s.empty()) r.rmse_db = parse_double(s);
    if (const auto s = get(f, "runtime_s"); !s.empty()) r.runtime_s = parse_double(s);
    if (const auto s = get(f, "outer_iters"); !s.empty()) r.outer_iters = std::stoi(s);
    if (const auto s = get(f, "support_size"); !s.empty()) r.support_size = std::stol(s);
    if (const auto s = get(f, "grid_size"); !s.empty()) r.grid_size = std::stol(s);
    std::stringstream ts(get(f, "nmse_trace"));
    std::string item;
    while (std::getline(ts, item, ';'))
      if (!item.empty()) r.nmse_trace.push_back(parse_double(item));
    rows.push_back(std::move(r));
  }
  return rows;
}

double quantile(std::vector<double> v, double q) {
  v.erase(std::remove_if(v.begin(), v.end(), [](double x) { return std::isnan(x); }), v.end());
  if (v.empty()) return std::nan("");
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = static_cast<std::size_t>(std::ceil(pos));
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

double median(std::vector<double> v) { return quantile(std::move(v), 0.5); }

namespace {
struct GroupKey {
  std::string alg;
  double snr;
  Index hp, nr;
  auto tie() const { return std::tie(alg, hp, nr, snr); }
  bool operator<(const GroupKey& o) const { return tie() < o.tie(); }
};
}  // namespace

void write_summary(std::ostream& os, const std::vector<ResultRow>& rows) {
  std::map<GroupKey, std::vector<const ResultRow*>> groups;
  for (const ResultRow& r : rows) groups[{to_string(r.algorithm), r.point.snr_db, r.point.h_p, r.point.n_rx}].push_back(&r);
  os << "algorithm,snr_db,h_p,n_rx,n,failures,nmse_median,nmse_q25,nmse_q75,rmse_median,rmse_q25,rmse_q75,"
        "runtime_median\r\n";
  for (const auto& [k, g] : groups) {
    std::vector<double> nmse, rmse, rt;
    std::size_t fails = 0;
    for (const ResultRow* r : g) {
      if (r->status != "ok") {
        ++fails;
        continue;
      }
      nmse.push_back(r->nmse_db);
      rmse.push_back(r->rmse_db);
      rt.push_back(r->runtime_s);
    }
    os << k.alg << ',' << fmt_double(k.snr) << ',' << k.hp << ',' << k.nr << ',' << g.size() << ',' << fails << ','
       << fmt_double(median(nmse)) << ',' << fmt_double(quantile(nmse, 0.25)) << ','
       << fmt_double(quantile(nmse, 0.75)) << ',' << fmt_double(median(rmse)) << ','
       << fmt_double(quantile(rmse, 0.25)) << ',' << fmt_double(quantile(rmse, 0.75)) << ','
       << fmt_double(median(rt)) << "\r\n";
  }
}

ExperimentSummary run_experiment(const ExperimentConfig& c, std::vector<ResultRow>* rows_out) {
  c.validate();
  struct Cell {
    Algorithm alg;
    SweepPoint p;
    int trial;
  };
  std::vector<Cell> cells;
  const auto points = sweep_points(c);
  for (Algorithm a : c.algorithms)
    for (const SweepPoint& p : points)
      for (int t = 0; t < c.trials; ++t) cells.push_back({a, p, t});

  std::vector<ResultRow> rows(cells.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) rows[i] = run_cell(c, cells[i].alg, cells[i].p, cells[i].trial);
  };
  const int nthreads = std::max(1, std::min<int>(c.workers, static_cast<int>(cells.size())));
  if (nthreads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < nthreads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  ExperimentSummary sum;
  sum.rows = rows.size();
  for (const auto& r : rows) sum.failures += r.status != "ok";
  if (!c.csv_path.empty()) {
    std::ofstream os(c.csv_path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write CSV: " + c.csv_path);
    write_csv(os, rows);
  }
  if (!c.summary_path.empty()) {
    std::ofstream os(c.summary_path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write summary: " + c.summary_path);
    write_summary(os, rows);
  }
  if (rows_out) *rows_out = std::move(rows);
  return sum;
}

std::uint64_t csv_hash(const std::string& path, const std::vector<std::string>& excluded_columns) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot open CSV: " + path);
  std::string line;
  std::vector<bool> keep;
  std::uint64_t h = fnv1a64("");
  bool first = true;
  while (std::getline(is, line)) {
    const auto f = split_csv_line(line);
    if (first) {
      for (const auto& name : f)
        keep.push_back(std::find(excluded_columns.begin(), excluded_columns.end(), name) == excluded_columns.end());
      first = false;
    }
    for (std::size_t i = 0; i < f.size(); ++i) {
      if (i < keep.size() && !keep[i]) continue;
      h = fnv1a64(csv_field(f[i]), h);
      h = fnv1a64(",", h);
    }
    h = fnv1a64("\n", h);
  }
  return h;
}

namespace {

std::string series_name(const ResultRow& r, bool multi_point) {
  std::string s = to_string(r.algorithm);
  if (multi_point) s += "_hp" + std::to_string(r.point.h_p) + "_nr" + std::to_string(r.point.n_rx);
  return s;
}

void write_table(const std::string& path, const std::string& xlabel, const std::vector<double>& xs,
                 const std::vector<std::string>& series, const std::map<std::pair<std::string, double>, std::vector<double>>& data) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write plot table: " + path);
  os << "# " << xlabel;
  for (const auto& s : series) os << ' ' << s << ' ' << s << "_q25 " << s << "_q75";
  os << '\n';
  for (double x : xs) {
    os << fmt_double(x);
    for (const auto& s : series) {
      auto it = data.find({s, x});
      const std::vector<double> v = it == data.end() ? std::vector<double>{} : it->second;
      os << ' ' << fmt_double(median(v)) << ' ' << fmt_double(quantile(v, 0.25)) << ' '
         << fmt_double(quantile(v, 0.75));
    }
    os << '\n';
  }
}

}  // namespace

std::vector<std::string> emit_plot_data(const std::string& csv_path, const std::vector<FigureSpec>& specs,
                                        const std::string& out_dir) {
  const std::vector<ResultRow> rows = read_csv(csv_path);
  std::filesystem::create_directories(out_dir);
  bool multi = false;
  for (const auto& r : rows)
    multi = multi || r.point.h_p != rows.front().point.h_p || r.point.n_rx != rows.front().point.n_rx;
  std::vector<std::string> written;
  for (const FigureSpec& spec : specs) {
    const std::string name = spec.name.empty() ? spec.kind : spec.name;
    const std::string path = (std::filesystem::path(out_dir) / (name + ".dat")).string();
    std::vector<std::string> series;
    std::vector<double> xs;
    std::map<std::pair<std::string, double>, std::vector<double>> data;
    auto add_series = [&](const std::string& s) {
      if (std::find(series.begin(), series.end(), s) == series.end()) series.push_back(s);
    };
    auto add_x = [&](double x) {
      if (std::find(xs.begin(), xs.end(), x) == xs.end()) xs.push_back(x);
    };
    if (spec.kind == "nmse_vs_snr" || spec.kind == "rmse_vs_snr" || spec.kind == "runtime") {
      for (const auto& r : rows) {
        if (r.status != "ok") continue;
        const std::string s = series_name(r, multi);
        add_series(s);
        add_x(r.point.snr_db);
        const double v = spec.kind == "nmse_vs_snr" ? r.nmse_db : spec.kind == "rmse_vs_snr" ? r.rmse_db : r.runtime_s;
        data[{s, r.point.snr_db}].push_back(v);
      }
      std::sort(xs.begin(), xs.end());
      write_table(path, spec.kind == "runtime" ? "snr_db(runtime_s)" : "snr_db", xs, series, data);
    } else if (spec.kind == "convergence") {
      std::size_t longest = 0;
      for (const auto& r : rows) longest = std::max(longest, r.nmse_trace.size());
      for (const auto& r : rows) {
        if (r.status != "ok" || r.nmse_trace.empty()) continue;
        const std::string s = series_name(r, multi) + "_snr" + fmt_double(r.point.snr_db);
        add_series(s);
        // Early-stopped runs hold their final value.
        for (std::size_t t = 0; t < longest; ++t)
          data[{s, static_cast<double>(t + 1)}].push_back(r.nmse_trace[std::min(t, r.nmse_trace.size() - 1)]);
      }
      for (std::size_t t = 0; t < longest; ++t) xs.push_back(static_cast<double>(t + 1));
      write_table(path, "outer_iteration", xs, series, data);
    } else {
      throw ConfigError("unknown figure kind: " + spec.kind);
    }
    written.push_back(path);
  }
  return written;
}

Index count_significant(const CVector& x, double ratio) {
  if (x.size() == 0) return 0;
  const double peak = x.cwiseAbs2().maxCoeff();
  if (peak == 0.0) return 0;
  Index n = 0;
  for (Index i = 0; i < x.size(); ++i) n += std::norm(x[i]) >= ratio * peak;
  return n;
}

SparsityProfile sparsity_profile(const ExperimentConfig& c, const SweepPoint& p, int trial) {
  const Scene s = build_scene(c, p, trial);
  const ChannelDictionary dict(s.array);
  const CMatrix a = assemble_matrix(dict, s.grid0);
  const QxSystem sys = QxSystem::build(a, s.sample.obs.y);
  SparsityProfile out;
  for (Algorithm alg : {Algorithm::proposed, Algorithm::proposed_bgg}) {
    const FrameworkConfig fc = framework_config(c, alg, p, s.grid0.size());
    const SseOutput sse = run_sse(a, s.sample.obs.y, sys, fc.prior, fc.sse);
    const RVector mag = sse.x_hat.cwiseAbs();
    if (alg == Algorithm::proposed) {
      out.tanh_magnitude = mag;
      out.tanh_count = count_significant(sse.x_hat);
    } else {
      out.bgg_magnitude = mag;
      out.bgg_count = count_significant(sse.x_hat);
    }
  }
  return out;
}

void write_sparsity_table(std::ostream& os, const SparsityProfile& s) {
  os << "# grid_index tanh_abs_x bgg_abs_x  (significant: tanh " << s.tanh_count << ", bgg " << s.bgg_count << ")\n";
  for (Index i = 0; i < s.tanh_magnitude.size(); ++i)
    os << i << ' ' << fmt_double(s.tanh_magnitude[i]) << ' ' << fmt_double(s.bgg_magnitude[i]) << '\n';
}

}  // namespace srcs::harness
