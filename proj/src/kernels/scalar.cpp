#include "srcs/kernels.hpp"

namespace srcs::kernels::scalar {

cplx cdot(CSpan a, CSpan b) {
  double re = 0.0, im = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double ar = a[i].real(), ai = a[i].imag();
    const double br = b[i].real(), bi = b[i].imag();
    re += ar * br + ai * bi;
    im += ar * bi - ai * br;
  }
  return {re, im};
}

void caxpy(cplx alpha, CSpan x, MutCSpan y) {
  const double p = alpha.real(), q = alpha.imag();
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double xr = x[i].real(), xi = x[i].imag();
    y[i] = {y[i].real() + p * xr - q * xi, y[i].imag() + p * xi + q * xr};
  }
}

double sqnorm(CSpan a) {
  double s = 0.0;
  for (const cplx& v : a) s += v.real() * v.real() + v.imag() * v.imag();
  return s;
}

double sqdist(CSpan a, CSpan b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double dr = a[i].real() - b[i].real();
    const double di = a[i].imag() - b[i].imag();
    s += dr * dr + di * di;
  }
  return s;
}

}  // namespace srcs::kernels::scalar
