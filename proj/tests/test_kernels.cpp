#include <doctest.h>

#include <vector>

#include "srcs/kernels.hpp"
#include "srcs/rng.hpp"

using namespace srcs;

namespace {

CVector random_vector(Index n, Rng& rng) {
  CVector v(n);
  for (Index i = 0; i < n; ++i) v[i] = rng.complex_normal(1.0);
  return v;
}

CMatrix random_matrix(Index m, Index n, Rng& rng) {
  CMatrix a(m, n);
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < m; ++i) a(i, j) = rng.complex_normal(1.0);
  return a;
}

// Restores the startup dispatch after each test that pins an ISA.
struct IsaGuard {
  kernels::Isa saved = kernels::active_isa();
  ~IsaGuard() { kernels::force_isa(saved); }
};

}  // namespace

TEST_CASE("scalar kernels match Eigen reductions") {
  Rng rng(11);
  for (Index n : {0, 1, 3, 4, 7, 64, 129}) {
    const CVector a = random_vector(n, rng);
    const CVector b = random_vector(n, rng);
    const cplx dot = kernels::scalar::cdot(kernels::as_span(a), kernels::as_span(b));
    CHECK(std::abs(dot - a.dot(b)) <= 1e-12 * (1.0 + a.norm() * b.norm()));
    CHECK(kernels::scalar::sqnorm(kernels::as_span(a)) == doctest::Approx(a.squaredNorm()).epsilon(1e-13));
    CHECK(kernels::scalar::sqdist(kernels::as_span(a), kernels::as_span(b)) ==
          doctest::Approx((a - b).squaredNorm()).epsilon(1e-13));
    CVector y = b;
    const cplx alpha(0.3, -1.2);
    kernels::scalar::caxpy(alpha, kernels::as_span(a), kernels::as_span(y));
    CHECK((y - (b + alpha * a)).norm() <= 1e-13 * (1.0 + y.norm()));
  }
}

TEST_CASE("empty spans reduce to zero") {
  const CVector e(0);
  CHECK(kernels::cdot(kernels::as_span(e), kernels::as_span(e)) == cplx(0.0, 0.0));
  CHECK(kernels::sqnorm(kernels::as_span(e)) == 0.0);
}

#if defined(SRCS_HAVE_AVX2)
TEST_CASE("avx2 kernels agree with the scalar reference") {
  if (!kernels::isa_supported(kernels::Isa::avx2)) return;
  Rng rng(12);
  for (Index n = 0; n <= 67; ++n) {
    const CVector a = random_vector(n, rng);
    const CVector b = random_vector(n, rng);
    const auto sa = kernels::as_span(a);
    const auto sb = kernels::as_span(b);
    const double tol = 1e-13 * (1.0 + a.squaredNorm() + b.squaredNorm());
    CHECK(std::abs(kernels::avx2::cdot(sa, sb) - kernels::scalar::cdot(sa, sb)) <= tol);
    CHECK(std::abs(kernels::avx2::sqnorm(sa) - kernels::scalar::sqnorm(sa)) <= tol);
    CHECK(std::abs(kernels::avx2::sqdist(sa, sb) - kernels::scalar::sqdist(sa, sb)) <= tol);
    CVector y1 = b, y2 = b;
    kernels::avx2::caxpy({-0.7, 0.4}, sa, kernels::as_span(y1));
    kernels::scalar::caxpy({-0.7, 0.4}, sa, kernels::as_span(y2));
    CHECK((y1 - y2).norm() <= tol);
  }
}

TEST_CASE("composite operations agree across ISAs") {
  if (!kernels::isa_supported(kernels::Isa::avx2)) return;
  IsaGuard guard;
  Rng rng(13);
  const CMatrix a = random_matrix(37, 21, rng);
  const CVector x = random_vector(21, rng);
  const CVector y = random_vector(37, rng);
  kernels::force_isa(kernels::Isa::scalar);
  const CMatrix g0 = kernels::gram(a);
  const CVector r0 = kernels::adjoint_matvec(a, y);
  const double e0 = kernels::residual_energy(a, x, y);
  kernels::force_isa(kernels::Isa::avx2);
  CHECK((kernels::gram(a) - g0).norm() <= 1e-12 * g0.norm());
  CHECK((kernels::adjoint_matvec(a, y) - r0).norm() <= 1e-12 * r0.norm());
  CHECK(kernels::residual_energy(a, x, y) == doctest::Approx(e0).epsilon(1e-12));
}
#endif

TEST_CASE("force_isa rejects unsupported targets") {
  if (kernels::isa_supported(kernels::Isa::avx2)) return;
  CHECK_THROWS_AS(kernels::force_isa(kernels::Isa::avx2), ConfigError);
}

TEST_CASE("composite operations match dense Eigen") {
  Rng rng(14);
  const CMatrix a = random_matrix(19, 11, rng);
  const CVector x = random_vector(11, rng);
  const CVector y = random_vector(19, rng);
  const CMatrix g = kernels::gram(a);
  CHECK((g - a.adjoint() * a).norm() <= 1e-12 * g.norm());
  CHECK((kernels::adjoint_matvec(a, y) - a.adjoint() * y).norm() <= 1e-12 * y.norm() * a.norm());
  CHECK((kernels::matvec(a, x) - a * x).norm() <= 1e-12 * x.norm() * a.norm());
  CHECK(kernels::residual_energy(a, x, y) == doctest::Approx((y - a * x).squaredNorm()).epsilon(1e-12));
  CHECK((kernels::column_sqnorms(a) - a.colwise().squaredNorm().transpose()).norm() <= 1e-12 * a.squaredNorm());
}

TEST_CASE("gram_update refreshes only the moved columns") {
  Rng rng(15);
  CMatrix a = random_matrix(16, 9, rng);
  CMatrix g = kernels::gram(a);
  const std::vector<Index> changed{2, 7};
  for (Index j : changed) a.col(j) = random_vector(16, rng);
  kernels::gram_update(a, changed, g);
  CHECK((g - a.adjoint() * a).norm() <= 1e-12 * g.norm());
}
