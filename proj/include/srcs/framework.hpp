#pragma once

// Two-timescale alternating MAP: each outer iteration runs the sparse signal
// estimator over the whole grid, then refines only the active grid points and
// writes them back.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "srcs/common.hpp"
#include "srcs/model.hpp"
#include "srcs/prior.hpp"
#include "srcs/srgu.hpp"
#include "srcs/vbi.hpp"

namespace srcs {

struct FrameworkConfig {
  int outer_iterations = 10;
  SseConfig sse;
  SrguConfig srgu;
  BgtPrior prior;
  /// Early stop once the support repeats and no active point moved more than
  /// tol_outer coarse cells. Disabled when early_stop is false.
  double tol_outer = 1e-3;
  bool early_stop = true;
  /// Seed each SSE pass from the previous one; the default re-initializes.
  bool warm_start = false;
  /// Line-delimited JSON trace of outer and refinement steps; empty disables.
  std::string trace_path;

  int sse_iterations() const { return sse.max_sweeps; }
  int srgu_iterations() const { return srgu.max_rounds; }
  /// Throws ConfigError on invalid iteration caps or prior.
  void validate() const;
  /// Non-fatal advisories (e.g. refinement iterations fewer than SSE sweeps).
  std::vector<std::string> warnings() const;
};

struct OuterRecord {
  int iteration = 0;
  Index support_size = 0;
  /// ||y - A_S x_S||^2 after refinement.
  double objective = 0.0;
  std::optional<double> score;
  double max_move = 0.0;
  int sse_sweeps = 0;
  int srgu_rounds = 0;
  double sse_seconds = 0.0;
  double srgu_seconds = 0.0;
  double wall_seconds = 0.0;
};

struct FrameworkResult {
  CVector x_hat;
  std::vector<Index> support;
  GridMatrix theta_s;
  CVector x_s;
  double kappa_hat = 0.0;
  GridParams grid;
  std::vector<OuterRecord> trace;
  std::vector<std::vector<SrguTraceRecord>> srgu_traces;
  /// Posterior mean of the first SSE pass, before any refinement.
  CVector first_pass_x;
  int outer_iterations = 0;
};

/// Optional per-iteration quality score (e.g. NMSE against a known truth).
using Scorer = std::function<double(const GridMatrix& theta_s, const CVector& x_s)>;

FrameworkResult run_alternating_map(const Observation& obs, const ParametricDictionary& dict,
                                    const GridParams& grid0, const FrameworkConfig& config,
                                    const Scorer& scorer = {});

struct ComplexityReport {
  /// I1 N^3 and I2 M S^2, per outer iteration.
  double sse_term = 0.0;
  double srgu_term = 0.0;
  /// I0 (I1 N^3 + I2 M S^2)
  double total = 0.0;
  double measured_sse_seconds = 0.0;
  double measured_srgu_seconds = 0.0;
};

ComplexityReport complexity_report(const FrameworkConfig& config, Index n, Index m, Index s,
                                   const FrameworkResult* measured = nullptr);

/// Least-squares slope of log(y) against log(x).
double loglog_slope(std::span<const double> x, std::span<const double> y);

}  // namespace srcs
