#pragma once

// Brute-force and finite-difference references. Nothing here reuses the
// solver kernels it is meant to check.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "srcs/common.hpp"
#include "srcs/model.hpp"

namespace srcs::oracle {

constexpr double kRelFloor = 1e-12;
/// Default finite-difference step relative to each coordinate's scale.
constexpr double kFdStep = 1e-6;

struct OracleReport {
  std::string test;
  std::string instance;
  double analytic = 0.0;
  double oracle = 0.0;
  double rel_error = 0.0;
  bool pass = false;
};

/// ||a - b|| / max(||b||, kRelFloor)
double relative_error(const RVector& a, const RVector& b);
double relative_error(const CVector& a, const CVector& b);

/// Central differences, coordinate i stepped by step * scale[i] (scale empty = ones).
RVector fd_gradient(const std::function<double(const RVector&)>& f, const RVector& point, const RVector& scale = {},
                    double step = kFdStep);

/// argmin_x kappa ||y - A x||^2 + (x - u)^H P (x - u) through a generic LU
/// solve of the normal equations. Throws NumericalError when the system
/// matrix is not Hermitian positive definite.
CVector dense_quadratic_map(const CMatrix& a, const CVector& y, double kappa, const CMatrix& prior_precision,
                            const CVector& u);

struct MleResult {
  std::vector<double> points;  // ascending
  CVector gains;
  double objective = 0.0;
};

/// Global least-squares fit of K = 1 or 2 components of a 1-D dictionary.
/// K = 1 scans every multiple of fine_fraction * range. K = 2 scans all pairs
/// on a 1e-2 lattice and then rescans all pairs within two lattice cells of the
/// best candidates at 1e-3 and finally at fine_fraction.
MleResult exhaustive_small_mle(const ParametricDictionary& dict, const CVector& y, int k, double fine_fraction = 1e-4);

/// Runs every oracle check once on `instances` random cases seeded from `seed`.
std::vector<OracleReport> run_oracle_suite(std::uint64_t seed, int instances);

}  // namespace srcs::oracle
