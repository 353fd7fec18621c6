#include <immintrin.h>

#include "srcs/kernels.hpp"

// Two complex<double> per 256-bit lane: [re0 im0 re1 im1].

namespace srcs::kernels::avx2 {
namespace {

inline const double* raw(CSpan s) { return reinterpret_cast<const double*>(s.data()); }
inline double* raw(MutCSpan s) { return reinterpret_cast<double*>(s.data()); }

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

}  // namespace

cplx cdot(CSpan a, CSpan b) {
  const std::size_t n = a.size();
  const double* pa = raw(a);
  const double* pb = raw(b);
  // re_acc collects [ar*br, ai*bi]; im_acc collects [ar*bi, ai*br].
  __m256d re0 = _mm256_setzero_pd(), re1 = _mm256_setzero_pd();
  __m256d im0 = _mm256_setzero_pd(), im1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d va0 = _mm256_loadu_pd(pa + 2 * i);
    const __m256d vb0 = _mm256_loadu_pd(pb + 2 * i);
    const __m256d va1 = _mm256_loadu_pd(pa + 2 * i + 4);
    const __m256d vb1 = _mm256_loadu_pd(pb + 2 * i + 4);
    re0 = _mm256_fmadd_pd(va0, vb0, re0);
    re1 = _mm256_fmadd_pd(va1, vb1, re1);
    im0 = _mm256_fmadd_pd(va0, _mm256_permute_pd(vb0, 0b0101), im0);
    im1 = _mm256_fmadd_pd(va1, _mm256_permute_pd(vb1, 0b0101), im1);
  }
  for (; i + 2 <= n; i += 2) {
    const __m256d va = _mm256_loadu_pd(pa + 2 * i);
    const __m256d vb = _mm256_loadu_pd(pb + 2 * i);
    re0 = _mm256_fmadd_pd(va, vb, re0);
    im0 = _mm256_fmadd_pd(va, _mm256_permute_pd(vb, 0b0101), im0);
  }
  const __m256d re = _mm256_add_pd(re0, re1);
  const __m256d im = _mm256_add_pd(im0, im1);
  // im lanes alternate [+ar*bi, +ai*br]; flip the odd lanes before summing.
  const __m256d sign = _mm256_set_pd(-1.0, 1.0, -1.0, 1.0);
  double sre = hsum(re);
  double sim = hsum(_mm256_mul_pd(im, sign));
  for (; i < n; ++i) {
    const double ar = a[i].real(), ai = a[i].imag();
    const double br = b[i].real(), bi = b[i].imag();
    sre += ar * br + ai * bi;
    sim += ar * bi - ai * br;
  }
  return {sre, sim};
}

void caxpy(cplx alpha, CSpan x, MutCSpan y) {
  const std::size_t n = x.size();
  const double* px = raw(x);
  double* py = raw(y);
  const __m256d p = _mm256_set1_pd(alpha.real());
  // [-q, q, -q, q] applied to swapped x = [xi, xr] gives [-q*xi, q*xr].
  const __m256d qs = _mm256_set_pd(alpha.imag(), -alpha.imag(), alpha.imag(), -alpha.imag());
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const __m256d vx = _mm256_loadu_pd(px + 2 * i);
    __m256d vy = _mm256_loadu_pd(py + 2 * i);
    vy = _mm256_fmadd_pd(p, vx, vy);
    vy = _mm256_fmadd_pd(qs, _mm256_permute_pd(vx, 0b0101), vy);
    _mm256_storeu_pd(py + 2 * i, vy);
  }
  for (; i < n; ++i) {
    const double xr = x[i].real(), xi = x[i].imag();
    y[i] = {y[i].real() + alpha.real() * xr - alpha.imag() * xi,
            y[i].imag() + alpha.real() * xi + alpha.imag() * xr};
  }
}

double sqnorm(CSpan a) {
  const std::size_t n = a.size();
  const double* pa = raw(a);
  __m256d acc0 = _mm256_setzero_pd(), acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d v0 = _mm256_loadu_pd(pa + 2 * i);
    const __m256d v1 = _mm256_loadu_pd(pa + 2 * i + 4);
    acc0 = _mm256_fmadd_pd(v0, v0, acc0);
    acc1 = _mm256_fmadd_pd(v1, v1, acc1);
  }
  for (; i + 2 <= n; i += 2) {
    const __m256d v = _mm256_loadu_pd(pa + 2 * i);
    acc0 = _mm256_fmadd_pd(v, v, acc0);
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += std::norm(a[i]);
  return s;
}

double sqdist(CSpan a, CSpan b) {
  const std::size_t n = a.size();
  const double* pa = raw(a);
  const double* pb = raw(b);
  __m256d acc0 = _mm256_setzero_pd(), acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d d0 = _mm256_sub_pd(_mm256_loadu_pd(pa + 2 * i), _mm256_loadu_pd(pb + 2 * i));
    const __m256d d1 =
        _mm256_sub_pd(_mm256_loadu_pd(pa + 2 * i + 4), _mm256_loadu_pd(pb + 2 * i + 4));
    acc0 = _mm256_fmadd_pd(d0, d0, acc0);
    acc1 = _mm256_fmadd_pd(d1, d1, acc1);
  }
  for (; i + 2 <= n; i += 2) {
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(pa + 2 * i), _mm256_loadu_pd(pb + 2 * i));
    acc0 = _mm256_fmadd_pd(d, d, acc0);
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += std::norm(a[i] - b[i]);
  return s;
}

}  // namespace srcs::kernels::avx2
