#pragma once

#include <vector>

#include "srcs/common.hpp"
#include "srcs/model.hpp"

namespace srcs {

struct OmpResult {
  CVector x_hat;  // full grid length
  std::vector<Index> support;  // selection order
  GridMatrix theta_s;
  CVector x_s;
  double residual_ratio = 1.0;
};

/// On-grid orthogonal matching pursuit: select argmax |a^H r| / ||a||, refit by
/// least squares, stop at k_max atoms or when ||r|| / ||y|| < stop.
OmpResult omp_ongrid_baseline(const Observation& obs, const ParametricDictionary& dict, const GridParams& grid,
                              Index k_max, double stop);

}  // namespace srcs
