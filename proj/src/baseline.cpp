#include "srcs/baseline.hpp"

#include <cmath>

#include "srcs/kernels.hpp"

namespace srcs {

OmpResult omp_ongrid_baseline(const Observation& obs, const ParametricDictionary& dict, const GridParams& grid,
                              Index k_max, double stop) {
  if (k_max < 1) throw ConfigError("omp_ongrid_baseline: k_max must be >= 1");
  require_dims(obs.y.size() == dict.rows(), "omp_ongrid_baseline: observation length != dictionary rows");
  const CMatrix a = assemble_matrix(dict, grid);
  const RVector norms = kernels::column_sqnorms(a).cwiseSqrt();
  const double y_norm = obs.y.norm();

  OmpResult out;
  out.x_hat = CVector::Zero(grid.size());
  CVector r = obs.y;
  CVector coef;
  std::vector<bool> chosen(static_cast<std::size_t>(grid.size()), false);
  if (y_norm == 0.0) {
    out.residual_ratio = 0.0;
    out.theta_s = GridMatrix(0, grid.dim());
    return out;
  }
  const Index limit = std::min(k_max, std::min(grid.size(), dict.rows()));
  while (static_cast<Index>(out.support.size()) < limit) {
    const CVector corr = kernels::adjoint_matvec(a, r);
    Index best = -1;
    double best_v = -1.0;
    for (Index n = 0; n < grid.size(); ++n) {
      if (chosen[static_cast<std::size_t>(n)] || norms[n] == 0.0) continue;
      const double v = std::abs(corr[n]) / norms[n];
      if (v > best_v) {
        best_v = v;
        best = n;
      }
    }
    if (best < 0) break;
    chosen[static_cast<std::size_t>(best)] = true;
    out.support.push_back(best);
    const CMatrix a_s = assemble_columns(dict, grid, out.support);
    coef = a_s.colPivHouseholderQr().solve(obs.y);
    r = obs.y - a_s * coef;
    out.residual_ratio = r.norm() / y_norm;
    if (out.residual_ratio < stop) break;
  }
  out.x_s = coef;
  out.theta_s = grid.subset(out.support).values();
  for (std::size_t k = 0; k < out.support.size(); ++k) out.x_hat[out.support[k]] = coef[static_cast<Index>(k)];
  return out;
}

}  // namespace srcs
