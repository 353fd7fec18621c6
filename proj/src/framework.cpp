#include "srcs/framework.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>

#include "srcs/kernels.hpp"

namespace srcs {

void FrameworkConfig::validate() const {
  if (outer_iterations < 1 || sse.max_sweeps < 1 || srgu.max_rounds < 1)
    throw ConfigError("FrameworkConfig: I0, I1 and I2 must all be >= 1");
  if (!(tol_outer >= 0.0)) throw ConfigError("FrameworkConfig: tol_outer must be >= 0");
  if (!(srgu.armijo.gamma > 0.0 && srgu.armijo.gamma < 1.0)) throw ConfigError("Armijo gamma must lie in (0, 1)");
  if (!(srgu.armijo.c > 0.0 && srgu.armijo.c < 1.0)) throw ConfigError("Armijo c must lie in (0, 1)");
  if (!(srgu.armijo.eps0 > 0.0)) throw ConfigError("Armijo eps0 must be > 0");
  if (!(srgu.sigma_inflation >= 1.0)) throw ConfigError("sigma_inflation must be >= 1");
  prior.validate();
}

std::vector<std::string> FrameworkConfig::warnings() const {
  std::vector<std::string> w;
  if (srgu.max_rounds < sse.max_sweeps)
    w.push_back("refinement iterations (I2) are fewer than SSE sweeps (I1); I2 > I1 is the intended regime");
  return w;
}

namespace {

using Clock = std::chrono::steady_clock;
double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

class TraceWriter {
 public:
  explicit TraceWriter(const std::string& path) {
    if (!path.empty()) {
      out_.open(path);
      if (!out_) throw ConfigError("cannot open trace file: " + path);
      out_ << std::setprecision(17);
    }
  }
  void outer(const OuterRecord& r) {
    if (!out_.is_open()) return;
    out_ << "{\"type\":\"outer\",\"iteration\":" << r.iteration << ",\"support_size\":" << r.support_size
         << ",\"objective\":" << r.objective << ",\"max_move\":" << r.max_move << ",\"sse_sweeps\":" << r.sse_sweeps
         << ",\"srgu_rounds\":" << r.srgu_rounds;
    if (r.score) out_ << ",\"score\":" << *r.score;
    out_ << ",\"sse_seconds\":" << r.sse_seconds << ",\"srgu_seconds\":" << r.srgu_seconds
         << ",\"wall_seconds\":" << r.wall_seconds << "}\n";
  }
  void sse(int outer, const SseTraceRecord& r) {
    if (!out_.is_open()) return;
    out_ << "{\"type\":\"sse\",\"outer\":" << outer << ",\"sweep\":" << r.sweep << ",\"residual_db\":" << r.residual_db
         << ",\"support_size\":" << r.support_size << ",\"kappa_mean\":" << r.kappa_mean << "}\n";
  }
  void srgu(int outer, const SrguTraceRecord& r) {
    if (!out_.is_open()) return;
    out_ << "{\"type\":\"srgu\",\"outer\":" << outer << ",\"round\":" << r.round << ",\"objective\":" << r.objective
         << ",\"step\":" << r.step << ",\"fallback\":" << (r.fallback ? "true" : "false")
         << ",\"stalled\":" << (r.stalled ? "true" : "false") << "}\n";
  }

 private:
  std::ofstream out_;
};

}  // namespace

FrameworkResult run_alternating_map(const Observation& obs, const ParametricDictionary& dict,
                                    const GridParams& grid0, const FrameworkConfig& config, const Scorer& scorer) {
  config.validate();
  require_dims(obs.y.size() == dict.rows(), "run_alternating_map: observation length != dictionary rows");
  require_dims(grid0.dim() == dict.param_dim(), "run_alternating_map: grid dimension mismatch");

  const auto t_start = Clock::now();
  TraceWriter trace(config.trace_path);
  FrameworkResult result;
  result.grid = grid0;
  const Index n = grid0.size();
  const Index dims = dict.param_dim();

  CMatrix a = assemble_matrix(dict, result.grid);
  QxSystem sys = QxSystem::build(a, obs.y);

  std::optional<VariationalState> warm;
  std::vector<Index> prev_support;
  for (int t = 1; t <= config.outer_iterations; ++t) {
    OuterRecord rec;
    rec.iteration = t;

    auto t0 = Clock::now();
    SseOutput sse = run_sse(a, obs.y, sys, config.prior, config.sse,
                            (config.warm_start && warm) ? &*warm : nullptr);
    rec.sse_seconds = seconds_since(t0);
    rec.sse_sweeps = sse.sweeps;
    for (const auto& r : sse.trace) trace.sse(t, r);
    if (t == 1) result.first_pass_x = sse.x_hat;
    if (sse.support.empty()) {
      // mu == 0: nothing to refine.
      result.x_hat = CVector::Zero(n);
      result.support.clear();
      result.theta_s = GridMatrix(0, dims);
      result.x_s = CVector(0);
      result.kappa_hat = sse.kappa_hat;
      rec.wall_seconds = seconds_since(t_start);
      result.trace.push_back(rec);
      trace.outer(rec);
      result.outer_iterations = t;
      break;
    }

    t0 = Clock::now();
    RefinementState ref = run_srgu(sse, dict, result.grid, obs, config.srgu);
    rec.srgu_seconds = seconds_since(t0);
    rec.srgu_rounds = ref.rounds;
    for (const auto& r : ref.trace) trace.srgu(t, r);

    // Movement in coarse cells, then write back only the active rows.
    const GridMatrix before = result.grid.subset(ref.support).values();
    for (Index k = 0; k < before.rows(); ++k)
      for (Index d = 0; d < dims; ++d)
        rec.max_move = std::max(rec.max_move, std::abs(ref.theta_s(k, d) - before(k, d)) / dict.resolution(d));
    result.grid.assign_rows(ref.support, ref.theta_s);
    for (Index k = 0; k < static_cast<Index>(ref.support.size()); ++k) {
      const Index col = ref.support[static_cast<std::size_t>(k)];
      dict.column(result.grid.point(col), std::span<cplx>(a.col(col).data(), static_cast<std::size_t>(a.rows())));
      sys.adj_y[col] = kernels::cdot(kernels::column_span(a, col), kernels::as_span(obs.y));
    }
    kernels::gram_update(a, ref.support, sys.gram);
    for (Index col : ref.support) sys.col_sqnorm[col] = sys.gram(col, col).real();

    result.x_hat = CVector::Zero(n);
    for (Index k = 0; k < static_cast<Index>(ref.support.size()); ++k) result.x_hat[ref.support[static_cast<std::size_t>(k)]] = ref.x_s[k];
    result.support = ref.support;
    result.theta_s = ref.theta_s;
    result.x_s = ref.x_s;
    result.kappa_hat = ref.kappa_hat;
    result.srgu_traces.push_back(ref.trace);

    rec.support_size = static_cast<Index>(ref.support.size());
    rec.objective = ref.final_objective;
    if (scorer) rec.score = scorer(ref.theta_s, ref.x_s);
    rec.wall_seconds = seconds_since(t_start);
    result.trace.push_back(rec);
    trace.outer(rec);
    result.outer_iterations = t;

    if (config.warm_start) {
      warm = std::move(sse.state);
      warm->mu = result.x_hat;
    }
    const bool same_support = ref.support == prev_support;
    prev_support = ref.support;
    if (config.early_stop && same_support && rec.max_move < config.tol_outer) break;
  }
  return result;
}

ComplexityReport complexity_report(const FrameworkConfig& config, Index n, Index m, Index s,
                                   const FrameworkResult* measured) {
  ComplexityReport r;
  const double nn = static_cast<double>(n);
  r.sse_term = config.sse.max_sweeps * nn * nn * nn;
  r.srgu_term = config.srgu.max_rounds * static_cast<double>(m) * static_cast<double>(s) * static_cast<double>(s);
  r.total = config.outer_iterations * (r.sse_term + r.srgu_term);
  if (measured != nullptr) {
    for (const auto& rec : measured->trace) {
      r.measured_sse_seconds += rec.sse_seconds;
      r.measured_srgu_seconds += rec.srgu_seconds;
    }
  }
  return r;
}

double loglog_slope(std::span<const double> x, std::span<const double> y) {
  require_dims(x.size() == y.size() && x.size() >= 2, "loglog_slope: need >= 2 matching points");
  double mx = 0, my = 0;
  const double k = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= k;
  my /= k;
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

}  // namespace srcs
