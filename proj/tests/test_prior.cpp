#include <doctest.h>

#include <cmath>

#include "srcs/prior.hpp"
#include "test_util.hpp"

using namespace srcs;

TEST_CASE("default prior satisfies its own constraints") {
  BgtPrior p;
  CHECK_NOTHROW(p.validate());
  const BgtPrior q = BgtPrior::with_expected_support(3, 64);
  CHECK(q.lambda == doctest::Approx(3.0 / 64.0));
  CHECK(BgtPrior::with_expected_support(0.1, 1000).lambda == doctest::Approx(0.01));
}

TEST_CASE("prior validation rejects out-of-regime hyperparameters") {
  BgtPrior p;
  p.gamma.active_rate = 100.0;  // a/b = 0.01
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p = BgtPrior{};
  p.gamma.inactive_rate = 0.01;  // a_bar/b_bar = 100
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p = BgtPrior{};
  p.zeta = 1.5;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p.zeta = 0.0;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p = BgtPrior{};
  p.lambda = 1.0;
  CHECK_THROWS_AS(p.validate(), ConfigError);
}

TEST_CASE("tanh penalty examples") {
  CHECK(tanh_penalty(0.0, 0.3) == 0.0);
  CHECK(tanh_penalty(1e6 * 0.3, 0.3) > 1.0 - 1e-9);
  const double zeta = 0.2;
  CHECK(tanh_penalty(zeta * std::atanh(0.5), zeta) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK_THROWS_AS(tanh_penalty(1.0, 0.0), ConfigError);
  double prev = 0.0;
  for (int i = 1; i < 100; ++i) {
    const double v = tanh_penalty(0.01 * i, zeta);
    CHECK(v >= prev);
    prev = v;
  }
}

TEST_CASE("SLA coefficients at the origin and in saturation") {
  CVector u(2);
  u << cplx(0.0, 0.0), cplx(30.0, 0.0);
  const SlaPoint p = sla_coefficients(u, 0.1);
  CHECK(p.b_hat[0] == 1.0);
  CHECK(p.a_hat[0] == 0.0);
  CHECK(p.b_hat[1] < 1e-12);
}

TEST_CASE("SLA tangency identity and slope bounds") {
  Rng rng(31);
  for (double zeta : {0.01, 0.1, 1.0}) {
    const CVector u = test::random_cvector(200, rng, 4.0 * zeta);
    const SlaPoint p = sla_coefficients(u, zeta);
    for (Index n = 0; n < u.size(); ++n) {
      const double z0 = std::norm(u[n]) / zeta;
      CHECK(std::abs(p.a_hat[n] + p.b_hat[n] * z0 - std::tanh(z0)) <= 1e-14);
      CHECK(p.b_hat[n] >= 0.0);
      CHECK(p.b_hat[n] <= 1.0);
    }
  }
}

TEST_CASE("tangent line is first-order accurate") {
  // |tanh''| <= 4 / (3 sqrt 3) on the whole real line.
  const double bound = 4.0 / (3.0 * std::sqrt(3.0));
  for (double z0 : {0.0, 0.3, 1.0, 2.5}) {
    CVector u(1);
    u[0] = std::sqrt(z0 * 0.5);
    const SlaPoint p = sla_coefficients(u, 0.5);
    for (int i = 0; i <= 400; ++i) {
      const double z = 0.01 * i;
      CHECK(std::abs(std::tanh(z) - (p.a_hat[0] + p.b_hat[0] * z)) <= (z - z0) * (z - z0) * bound + 1e-14);
    }
  }
}

TEST_CASE("SLA precision vector") {
  Rng rng(32);
  const double zeta = 0.25;
  RVector rho(50);
  for (Index i = 0; i < 50; ++i) rho[i] = rng.uniform(0.0, 10.0);
  const CVector zero = CVector::Zero(50);
  CHECK((sla_precision_vector(rho, zero, zeta) - rho / zeta).norm() <= 1e-14 * rho.norm());
  CHECK(sla_precision_vector(RVector::Zero(50), test::random_cvector(50, rng), zeta).norm() == 0.0);
  const CVector u = test::random_cvector(50, rng, 0.5);
  const RVector c = sla_precision_vector(rho, u, zeta);
  for (Index i = 0; i < 50; ++i) {
    const double t = std::tanh(std::norm(u[i]) / zeta);
    CHECK(c[i] == doctest::Approx(rho[i] * (1.0 - t * t) / zeta).epsilon(1e-13));
    CHECK(c[i] >= 0.0);
  }
}

TEST_CASE("tanh prior is heavier-tailed than the matched Gaussian") {
  // Both log-densities share curvature rho / zeta at the origin; beyond that the
  // tanh penalty saturates so its density ratio to the Gaussian grows.
  const double rho = 50.0, zeta = 0.1;
  double prev = 0.0;
  for (int i = 1; i <= 50; ++i) {
    const double x2 = 0.02 * i;
    const double log_ratio = -rho * std::tanh(x2 / zeta) + rho * x2 / zeta;
    CHECK(log_ratio >= prev);
    prev = log_ratio;
  }
  CHECK(prev > 0.0);
}

TEST_CASE("zeta follows SNR monotonically and is clamped") {
  CHECK(zeta_for_snr(0.0) == doctest::Approx(1.0));
  CHECK(zeta_for_snr(20.0) == doctest::Approx(0.1));
  CHECK(zeta_for_snr(100.0) == doctest::Approx(0.01));
  CHECK(zeta_for_snr(-20.0) == doctest::Approx(1.0));
  CHECK(zeta_for_snr(10.0) > zeta_for_snr(15.0));
}
