#include <atomic>
#include <cstdlib>
#include <string_view>

#include "srcs/kernels.hpp"

namespace srcs::kernels {
namespace {

struct Table {
  cplx (*cdot)(CSpan, CSpan);
  void (*caxpy)(cplx, CSpan, MutCSpan);
  double (*sqnorm)(CSpan);
  double (*sqdist)(CSpan, CSpan);
};

constexpr Table kScalar{&scalar::cdot, &scalar::caxpy, &scalar::sqnorm, &scalar::sqdist};
#if defined(SRCS_HAVE_AVX2)
constexpr Table kAvx2{&avx2::cdot, &avx2::caxpy, &avx2::sqnorm, &avx2::sqdist};
#endif

const Table& table_for(Isa isa) {
#if defined(SRCS_HAVE_AVX2)
  if (isa == Isa::avx2) return kAvx2;
#endif
  (void)isa;
  return kScalar;
}

Isa detect() {
  if (const char* env = std::getenv("SRCS_SIMD")) {
    const std::string_view v(env);
    if (v == "scalar") return Isa::scalar;
    if (v == "avx2" && isa_supported(Isa::avx2)) return Isa::avx2;
  }
  return isa_supported(Isa::avx2) ? Isa::avx2 : Isa::scalar;
}

std::atomic<Isa>& current() {
  static std::atomic<Isa> isa{detect()};
  return isa;
}

inline const Table& active() { return table_for(current().load(std::memory_order_relaxed)); }

}  // namespace

const char* isa_name(Isa isa) { return isa == Isa::avx2 ? "avx2" : "scalar"; }

bool isa_supported(Isa isa) {
  if (isa == Isa::scalar) return true;
#if defined(SRCS_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Isa active_isa() { return current().load(); }

void force_isa(Isa isa) {
  if (!isa_supported(isa)) throw ConfigError(std::string("ISA not supported on this host: ") + isa_name(isa));
  current().store(isa);
}

cplx cdot(CSpan a, CSpan b) { return active().cdot(a, b); }
void caxpy(cplx alpha, CSpan x, MutCSpan y) { active().caxpy(alpha, x, y); }
double sqnorm(CSpan a) { return active().sqnorm(a); }
double sqdist(CSpan a, CSpan b) { return active().sqdist(a, b); }

CMatrix gram(const CMatrix& a) {
  const Index n = a.cols();
  CMatrix g(n, n);
  for (Index j = 0; j < n; ++j) {
    const CSpan aj = column_span(a, j);
    g(j, j) = cplx(sqnorm(aj), 0.0);
    for (Index i = 0; i < j; ++i) {
      const cplx v = cdot(column_span(a, i), aj);
      g(i, j) = v;
      g(j, i) = std::conj(v);
    }
  }
  return g;
}

void gram_update(const CMatrix& a, std::span<const Index> changed, CMatrix& g) {
  require_dims(g.rows() == a.cols() && g.cols() == a.cols(), "gram_update: Gram size mismatch");
  const Index n = a.cols();
  for (Index j : changed) {
    const CSpan aj = column_span(a, j);
    for (Index i = 0; i < n; ++i) {
      const cplx v = (i == j) ? cplx(sqnorm(aj), 0.0) : cdot(column_span(a, i), aj);
      g(i, j) = v;
      g(j, i) = std::conj(v);
    }
  }
}

CVector adjoint_matvec(const CMatrix& a, const CVector& y) {
  require_dims(a.rows() == y.size(), "adjoint_matvec: row mismatch");
  CVector out(a.cols());
  const CSpan ys = as_span(y);
  for (Index j = 0; j < a.cols(); ++j) out[j] = cdot(column_span(a, j), ys);
  return out;
}

CVector matvec(const CMatrix& a, const CVector& x) {
  require_dims(a.cols() == x.size(), "matvec: column mismatch");
  CVector out = CVector::Zero(a.rows());
  MutCSpan os = as_span(out);
  for (Index j = 0; j < a.cols(); ++j) {
    if (x[j] != cplx(0.0, 0.0)) caxpy(x[j], column_span(a, j), os);
  }
  return out;
}

double residual_energy(const CMatrix& a, const CVector& x, const CVector& y) {
  const CVector ax = matvec(a, x);
  return sqdist(as_span(y), as_span(ax));
}

RVector column_sqnorms(const CMatrix& a) {
  RVector out(a.cols());
  for (Index j = 0; j < a.cols(); ++j) out[j] = sqnorm(column_span(a, j));
  return out;
}

}  // namespace srcs::kernels
