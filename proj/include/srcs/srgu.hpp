#pragma once

// Fast-timescale super-resolution grid update: LMMSE refit of the active gains
// alternating with quasi-Newton (BFGS) refinement of the active grid points,
// step sizes from an Armijo backtracking search in which every trial point is
// scored with its own re-optimized gains (variable projection).

#include <functional>
#include <vector>

#include "srcs/common.hpp"
#include "srcs/model.hpp"
#include "srcs/vbi.hpp"

namespace srcs {

struct ArmijoParams {
  double c = 1e-2;
  double gamma = 0.5;
  /// Initial step, in units of the coarse grid spacing of each dimension.
  double eps0 = 1.0;
  int max_backtracks = 30;
};

enum class DirectionMethod { bfgs, gradient_descent };

const char* to_string(DirectionMethod m);

struct SrguConfig {
  int max_rounds = 50;
  ArmijoParams armijo;
  DirectionMethod method = DirectionMethod::bfgs;
  /// Prior covariance of the active gains = this factor times the SSE posterior variance.
  double sigma_inflation = 1.5;
  /// Consecutive secant failures after which B is reset to identity.
  int max_secant_failures = 3;
  bool merge_close_points = false;
  /// Points closer than this fraction of the coarse spacing in every dimension are merged.
  double merge_fraction = 0.1;
  /// Refined gains are clamped to this magnitude.
  double x_max = 1e3;
};

struct LmmseDiagnostics {
  bool ridge_fallback = false;
  double jitter = 0.0;
};

/// argmin_x kappa ||y - A_S x||^2 + (x - u)^H Sigma^-1 (x - u), Sigma diagonal.
CVector lmmse_gain_update(const CMatrix& a_s, const CVector& y, double kappa, const CVector& u_s,
                          const RVector& sigma_s, LmmseDiagnostics* diag = nullptr);
/// Same with a full (Hermitian positive definite) prior covariance.
CVector lmmse_gain_update(const CMatrix& a_s, const CVector& y, double kappa, const CVector& u_s,
                          const CMatrix& sigma_s, LmmseDiagnostics* diag = nullptr);

/// ||y - A_S(theta_S) x_S||^2
double grid_objective(const ParametricDictionary& dict, const GridMatrix& theta_s, const CVector& x_s,
                      const CVector& y);
/// Gradient w.r.t. theta_S flattened row-major (entry k*D + d), gains held fixed.
RVector grid_gradient(const ParametricDictionary& dict, const GridMatrix& theta_s, const CVector& x_s,
                      const CVector& y);

/// Inverse-Hessian approximation and the previous iterate for secant pairs.
struct BfgsState {
  RMatrix inv_hessian;
  RVector prev_point;
  RVector prev_grad;
  bool has_history = false;
  int consecutive_failures = 0;
  int max_failures = 3;

  BfgsState() = default;
  explicit BfgsState(Index dim, int max_failures = 3);
  void reset();
};

struct DirectionResult {
  RVector direction;
  /// True when the secant condition failed and -grad was returned.
  bool fallback = false;
};

/// Secant pair s = point - prev_point, g = grad - prev_grad. When s^T g > 0 the
/// inverse update B <- (I - r s g^T) B (I - r g s^T) + r s s^T (r = 1 / s^T g) is applied
/// and -B grad returned; otherwise -grad with B unchanged. Coordinates flagged in
/// `frozen` contribute zero to the secant pair.
DirectionResult bfgs_direction(BfgsState& state, const RVector& point, const RVector& grad,
                               const std::vector<bool>* frozen = nullptr);

struct ProjectedValue {
  double value = 0.0;
  CVector gains;
};
using ProjectedObjective = std::function<ProjectedValue(const RVector&)>;
using BoxProjection = std::function<void(RVector&)>;

struct LineSearchResult {
  double step = 0.0;
  RVector point;
  CVector gains;
  double value = 0.0;
  bool stalled = false;
  int backtracks = 0;
  /// Coordinates moved by the box projection at the accepted point.
  std::vector<bool> clamped;
};

/// Backtracking search for f(p + e d) <= value + c e d^T grad starting at e = eps0,
/// shrinking by gamma. Returns step 0 and stalled = true after max_backtracks.
LineSearchResult armijo_search(const ProjectedObjective& f, const RVector& point, double value,
                               const RVector& grad, const RVector& direction, const ArmijoParams& params,
                               const BoxProjection& project = {});

struct SrguTraceRecord {
  int round = 0;
  double objective = 0.0;
  double step = 0.0;
  bool fallback = false;
  bool stalled = false;
};

struct RefinementState {
  std::vector<Index> support;
  GridMatrix theta_s;
  CVector x_s;
  CVector u_s;
  RVector sigma_s;
  double kappa_hat = 0.0;
  BfgsState bfgs;
  std::vector<SrguTraceRecord> trace;
  int rounds = 0;
  int stalls = 0;
  /// Objective ||y - A_S x_S||^2 before and after refinement.
  double initial_objective = 0.0;
  double final_objective = 0.0;
};

/// Projected objective over grid points scaled by dict.resolution(d), flattened
/// row-major; objective values are divided by `value_scale`.
ProjectedObjective make_projected_objective(const ParametricDictionary& dict, const CVector& y, double kappa,
                                            const CVector& u_s, const RVector& sigma_s, double value_scale,
                                            double x_max);

/// Refines the grid points of sse.support (taken from `grid`) over up to config.max_rounds rounds.
RefinementState run_srgu(const SseOutput& sse, const ParametricDictionary& dict, const GridParams& grid,
                         const Observation& obs, const SrguConfig& config);

}  // namespace srcs
