#pragma once

// Three-layer Bernoulli-Gamma-Tanh prior: support s_n ~ Bernoulli(lambda_n),
// precision rho_n | s_n ~ Gamma(a, b) or Gamma(a_bar, b_bar), and
// p(x_n | rho_n) proportional to exp(-rho_n tanh(|x_n|^2 / zeta)).

#include <optional>
#include <vector>

#include "srcs/common.hpp"

namespace srcs {

/// Shape/rate pairs of the two Gamma branches of q(rho).
struct GammaBranches {
  double active_shape = 1.0;
  double active_rate = 1.0;
  double inactive_shape = 1.0;
  double inactive_rate = 1e-5;
};

struct BgtPrior {
  double lambda = 0.05;
  /// Per-coefficient sparsity ratios; overrides `lambda` when non-empty.
  std::vector<double> lambda_per_index;
  GammaBranches gamma;
  double zeta = 0.1;
  double noise_shape = 1e-6;
  double noise_rate = 1e-6;
  /// Magnitude bound of the tanh density's support; only used to clamp refined gains.
  double x_max = 1e3;

  /// Throws ConfigError unless 0.1 <= a/b <= 10, a_bar/b_bar >= 1e3, 0 < zeta <= 1,
  /// lambda in (0, 1) and every shape/rate positive.
  void validate() const;

  double lambda_at(Index n) const {
    return lambda_per_index.empty() ? lambda : lambda_per_index[static_cast<std::size_t>(n)];
  }
  RVector lambda_vector(Index n) const;

  /// lambda = max(expected_support / n, 0.01), everything else at defaults.
  static BgtPrior with_expected_support(double expected_support, Index n);
};

/// Relaxation parameter from SNR: clamp(10^(-snr_db / 20), 0.01, 1).
double zeta_for_snr(double snr_db);

/// tanh(|x|^2 / zeta). Throws ConfigError for zeta <= 0.
double tanh_penalty(double x_abs_sq, double zeta);

/// Tangent line of tanh(z) at z0 = |u_hat|^2 / zeta: tanh(z) ~ a_hat + b_hat z.
struct SlaPoint {
  CVector u_hat;
  RVector a_hat;
  RVector b_hat;
};

SlaPoint sla_coefficients(const CVector& u_hat, double zeta);

/// Diagonal precision of the linearized prior: c_n = <rho_n> (1 - tanh^2(|u_n|^2/zeta)) / zeta.
RVector sla_precision_vector(const RVector& rho_mean, const CVector& u_hat, double zeta);

}  // namespace srcs
