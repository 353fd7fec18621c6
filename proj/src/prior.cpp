#include "srcs/prior.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace srcs {

void BgtPrior::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("BgtPrior: " + msg); };
  const auto& g = gamma;
  if (!(g.active_shape > 0 && g.active_rate > 0 && g.inactive_shape > 0 && g.inactive_rate > 0))
    fail("Gamma shapes and rates must be positive");
  const double active_mean = g.active_shape / g.active_rate;
  if (active_mean < 0.1 || active_mean > 10.0) fail("active precision mean a/b must lie in [0.1, 10]");
  if (g.inactive_shape / g.inactive_rate < 1e3) fail("inactive precision mean a_bar/b_bar must be >= 1e3");
  if (!(zeta > 0.0 && zeta <= 1.0)) fail("zeta must lie in (0, 1]");
  if (!(noise_shape > 0 && noise_rate > 0)) fail("noise shape/rate must be positive");
  if (!(x_max > 0)) fail("x_max must be positive");
  auto check_lambda = [&](double l) {
    if (!(l > 0.0 && l < 1.0)) fail("lambda must lie in (0, 1)");
  };
  check_lambda(lambda);
  std::for_each(lambda_per_index.begin(), lambda_per_index.end(), check_lambda);
}

RVector BgtPrior::lambda_vector(Index n) const {
  if (!lambda_per_index.empty()) {
    require_dims(static_cast<Index>(lambda_per_index.size()) == n, "BgtPrior: lambda vector length");
    return Eigen::Map<const RVector>(lambda_per_index.data(), n);
  }
  return RVector::Constant(n, lambda);
}

BgtPrior BgtPrior::with_expected_support(double expected_support, Index n) {
  BgtPrior p;
  p.lambda = std::clamp(expected_support / static_cast<double>(n), 0.01, 0.99);
  return p;
}

double zeta_for_snr(double snr_db) { return std::clamp(std::pow(10.0, -snr_db / 20.0), 0.01, 1.0); }

double tanh_penalty(double x_abs_sq, double zeta) {
  if (!(zeta > 0.0)) throw ConfigError("tanh_penalty: zeta must be > 0");
  return std::tanh(x_abs_sq / zeta);
}

SlaPoint sla_coefficients(const CVector& u_hat, double zeta) {
  if (!(zeta > 0.0)) throw ConfigError("sla_coefficients: zeta must be > 0");
  SlaPoint p{u_hat, RVector(u_hat.size()), RVector(u_hat.size())};
  for (Index n = 0; n < u_hat.size(); ++n) {
    const double z0 = std::norm(u_hat[n]) / zeta;
    const double t = std::tanh(z0);
    p.b_hat[n] = 1.0 - t * t;
    p.a_hat[n] = t - p.b_hat[n] * z0;
  }
  return p;
}

RVector sla_precision_vector(const RVector& rho_mean, const CVector& u_hat, double zeta) {
  require_dims(rho_mean.size() == u_hat.size(), "sla_precision_vector: length mismatch");
  if (!(zeta > 0.0)) throw ConfigError("sla_precision_vector: zeta must be > 0");
  RVector c(rho_mean.size());
  for (Index n = 0; n < c.size(); ++n) {
    const double t = std::tanh(std::norm(u_hat[n]) / zeta);
    c[n] = rho_mean[n] * (1.0 - t * t) / zeta;
  }
  return c;
}

}  // namespace srcs
