#pragma once

// Data-parallel inner loops over interleaved complex<double> arrays.
//
// Every kernel has a scalar reference implementation and, on x86-64, an
// AVX2/FMA variant. The active variant is chosen once at startup from CPUID and
// can be pinned with SRCS_SIMD=scalar|avx2 or force_isa(). Variants differ only
// in summation order.

#include <span>

#include "srcs/common.hpp"

namespace srcs::kernels {

enum class Isa { scalar, avx2 };

const char* isa_name(Isa isa);
bool isa_supported(Isa isa);
Isa active_isa();
/// Pins the dispatch table. Throws ConfigError when the host lacks the ISA.
void force_isa(Isa isa);

using CSpan = std::span<const cplx>;
using MutCSpan = std::span<cplx>;

/// sum_i conj(a_i) * b_i
cplx cdot(CSpan a, CSpan b);
/// y += alpha * x
void caxpy(cplx alpha, CSpan x, MutCSpan y);
/// sum_i |a_i|^2
double sqnorm(CSpan a);
/// sum_i |a_i - b_i|^2
double sqdist(CSpan a, CSpan b);

namespace scalar {
cplx cdot(CSpan a, CSpan b);
void caxpy(cplx alpha, CSpan x, MutCSpan y);
double sqnorm(CSpan a);
double sqdist(CSpan a, CSpan b);
}  // namespace scalar

#if defined(SRCS_HAVE_AVX2)
namespace avx2 {
cplx cdot(CSpan a, CSpan b);
void caxpy(cplx alpha, CSpan x, MutCSpan y);
double sqnorm(CSpan a);
double sqdist(CSpan a, CSpan b);
}  // namespace avx2
#endif

inline CSpan column_span(const CMatrix& a, Index j) {
  return {a.col(j).data(), static_cast<std::size_t>(a.rows())};
}
inline CSpan as_span(const CVector& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }
inline MutCSpan as_span(CVector& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

// Composite operations built on the dispatched kernels.

/// Hermitian Gram matrix A^H A.
CMatrix gram(const CMatrix& a);
/// Recomputes rows/columns `changed` of an existing Gram matrix after those columns of A moved.
void gram_update(const CMatrix& a, std::span<const Index> changed, CMatrix& g);
/// A^H y
CVector adjoint_matvec(const CMatrix& a, const CVector& y);
/// A x
CVector matvec(const CMatrix& a, const CVector& x);
/// ||y - A x||^2
double residual_energy(const CMatrix& a, const CVector& x, const CVector& y);
/// Per-column squared norms.
RVector column_sqnorms(const CMatrix& a);

}  // namespace srcs::kernels
