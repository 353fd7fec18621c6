#pragma once

// Slow-timescale sparse signal estimation: mean-field variational Bayesian
// inference under the Bernoulli-Gamma-Tanh prior (tanh-VBI), with the
// conditional-Gaussian (BGG) prior available as an ablation.

#include <optional>
#include <string>
#include <vector>

#include "srcs/common.hpp"
#include "srcs/model.hpp"
#include "srcs/prior.hpp"

namespace srcs {

enum class PriorVariant { tanh, bgg };

const char* to_string(PriorVariant v);

struct SupportPolicy {
  double probability_threshold = 0.5;
  /// Keep n only when |mu_n|^2 >= energy_ratio * max_k |mu_k|^2.
  double energy_ratio = 0.01;
  /// 0 selects rows / 4.
  Index max_support = 0;
};

/// Parameters of q(x), q(rho), q(s), q(kappa).
struct VariationalState {
  CVector mu;
  RVector sigma_diag;
  std::optional<CMatrix> sigma_full;
  RVector rho_shape;
  RVector rho_rate;
  RVector s_prob;
  double kappa_shape = 1.0;
  double kappa_rate = 1.0;

  Index size() const { return mu.size(); }
  RVector rho_mean() const { return rho_shape.cwiseQuotient(rho_rate); }
  /// psi(a~) - ln b~
  RVector log_rho_mean() const;
  double kappa_mean() const { return kappa_shape / kappa_rate; }
};

/// Data-side quantities of q(x) that stay fixed while the grid is fixed.
struct QxSystem {
  CMatrix gram;     // A^H A
  CVector adj_y;    // A^H y
  RVector col_sqnorm;
  double y_sqnorm = 0.0;

  static QxSystem build(const CMatrix& a, const CVector& y);
};

struct QxPosterior {
  CVector mu;
  RVector sigma_diag;
  std::optional<CMatrix> sigma_full;
};

/// Sigma = (diag(c) + kappa A^H A)^-1, mu = kappa Sigma A^H y.
/// Throws NumericalError when the precision matrix is not numerically positive definite.
QxPosterior update_qx(const QxSystem& sys, double kappa_mean, const RVector& c, bool keep_full = false);
QxPosterior update_qx(const CMatrix& a, const CVector& y, double kappa_mean, const RVector& c,
                      bool keep_full = false);

struct GammaParams {
  RVector shape;
  RVector rate;
};

GammaParams update_qrho(const RVector& s_prob, const GammaBranches& branches, const CVector& mu,
                        const RVector& sigma_diag);

/// Posterior support probabilities, evaluated in log space.
RVector update_qs(const RVector& lambda, const GammaBranches& branches, const RVector& rho_mean,
                  const RVector& log_rho_mean);

struct KappaParams {
  double shape = 0.0;
  double rate = 0.0;
};

/// c~ = c + M, d~ = d + ||y - A mu||^2 + sum_n sigma_n^2 ||a_n||^2 (diagonal trace approximation).
KappaParams update_qkappa(double c, double d, const CVector& y, const CMatrix& a, const CVector& mu,
                          const RVector& sigma_diag);
KappaParams update_qkappa(double c, double d, const CVector& y, const CMatrix& a, const CVector& mu,
                          const RVector& sigma_diag, const RVector& col_sqnorm);

/// Exact tr(A Sigma A^H) for a full Sigma, for comparing against the diagonal approximation.
double full_trace_term(const CMatrix& gram, const CMatrix& sigma);

/// Starting value of <rho>.
enum class RhoInit {
  /// a / b for every entry. Escapes the zero fixed point on low-gain dictionaries.
  active_branch,
  /// lambda-weighted mean of both Gamma branches. Grows the support from zero;
  /// needs enough array gain to leave the inactive branch.
  prior_mean,
};

const char* to_string(RhoInit r);
/// Throws ConfigError for unknown names.
RhoInit rho_init_from_string(const std::string& name);

struct SseConfig {
  int max_sweeps = 30;
  RhoInit rho_init = RhoInit::active_branch;
  PriorVariant variant = PriorVariant::tanh;
  SupportPolicy support;
  /// Stop when ||mu_k - mu_{k-1}|| / ||mu_k|| falls below this; 0 disables.
  double early_stop_tol = 1e-6;
  /// Sigma is kept in full only up to this size.
  Index full_sigma_limit = 2048;
  /// Record tr(A Sigma A^H) minus its diagonal approximation in the trace.
  bool trace_gap_diagnostics = false;
};

struct SseTraceRecord {
  int sweep = 0;
  double residual_db = 0.0;
  Index support_size = 0;
  double kappa_mean = 0.0;
  double trace_gap = 0.0;
};

struct SseOutput {
  CVector x_hat;
  double kappa_hat = 0.0;
  std::vector<Index> support;
  CVector posterior_mean_s;
  RVector posterior_var_s;
  VariationalState state;
  std::vector<SseTraceRecord> trace;
  int sweeps = 0;
};

/// Initial factors: u_hat = 0, lambda~ = lambda, <rho> per `rho_init`,
/// <kappa> = c/d, or M / ||y||^2 when the noise prior is weak.
VariationalState initial_state(const BgtPrior& prior, Index n, Index rows, double y_sqnorm,
                               RhoInit rho_init = RhoInit::active_branch);

/// Runs up to config.max_sweeps sweeps of q(x) -> q(rho) -> q(s) -> q(kappa).
/// `warm` (same size) seeds every factor, including u_hat from warm->mu.
SseOutput run_sse(const CMatrix& a, const CVector& y, const QxSystem& sys, const BgtPrior& prior,
                  const SseConfig& config, const VariationalState* warm = nullptr);
SseOutput run_sse(const Observation& obs, const ParametricDictionary& dict, const GridParams& grid,
                  const BgtPrior& prior, const SseConfig& config);

/// Indices with lambda~ above threshold and enough energy, capped and sorted ascending.
/// Falls back to argmax |mu| when nothing qualifies; empty only when mu == 0.
std::vector<Index> extract_support(const VariationalState& state, const SupportPolicy& policy, Index rows);

}  // namespace srcs
