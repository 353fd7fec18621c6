#include "srcs/model.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "srcs/kernels.hpp"
#include "srcs/rng.hpp"

namespace srcs {

RangeError::RangeError(Index column, Index dimension, double value, double lo, double hi)
    : std::out_of_range([&] {
        std::ostringstream os;
        os << "grid parameter out of range: column " << column << ", dimension " << dimension
           << ", value " << value << " not in [" << lo << ", " << hi << "]";
        return os.str();
      }()),
      column_(column),
      dimension_(dimension) {}

GridParams::GridParams(GridMatrix values) : values_(std::move(values)) {
  if (values_.rows() < 1 || values_.cols() < 1) throw DimensionError("GridParams: need N >= 1 and D >= 1");
  if (!values_.allFinite()) throw ConfigError("GridParams: non-finite entry");
}

GridParams GridParams::from_points(std::span<const double> points) {
  GridMatrix v(static_cast<Index>(points.size()), 1);
  for (std::size_t i = 0; i < points.size(); ++i) v(static_cast<Index>(i), 0) = points[i];
  return GridParams(std::move(v));
}

void GridParams::assign_rows(std::span<const Index> rows, const GridMatrix& points) {
  require_dims(points.rows() == static_cast<Index>(rows.size()) && points.cols() == dim(),
               "GridParams::assign_rows: shape mismatch");
  for (std::size_t k = 0; k < rows.size(); ++k) values_.row(rows[k]) = points.row(static_cast<Index>(k));
}

GridParams GridParams::subset(std::span<const Index> rows) const {
  GridMatrix v(static_cast<Index>(rows.size()), dim());
  for (std::size_t k = 0; k < rows.size(); ++k) v.row(static_cast<Index>(k)) = values_.row(rows[k]);
  return GridParams(std::move(v));
}

CVector ParametricDictionary::column(std::span<const double> theta) const {
  CVector out(rows());
  column(theta, std::span<cplx>(out.data(), static_cast<std::size_t>(out.size())));
  return out;
}

CMatrix ParametricDictionary::column_jacobian(std::span<const double> theta) const {
  CMatrix jac(rows(), param_dim());
  column_jacobian(theta, jac);
  return jac;
}

void ParametricDictionary::check_point(std::span<const double> theta, Index column_index) const {
  require_dims(static_cast<Index>(theta.size()) == param_dim(), "grid point dimension mismatch");
  for (Index d = 0; d < param_dim(); ++d) {
    const ParamRange r = valid_range(d);
    if (!std::isfinite(theta[d]) || !r.contains(theta[d])) throw RangeError(column_index, d, theta[d], r.lo, r.hi);
  }
}

void ParametricDictionary::clamp_point(std::span<double> theta) const {
  for (Index d = 0; d < param_dim(); ++d) theta[d] = valid_range(d).clamp(theta[d]);
}

FourierDictionary::FourierDictionary(Index rows) : positions_(static_cast<std::size_t>(rows)) {
  if (rows < 1) throw ConfigError("FourierDictionary: rows must be >= 1");
  std::iota(positions_.begin(), positions_.end(), 0.0);
}

FourierDictionary::FourierDictionary(std::vector<double> sample_positions)
    : positions_(std::move(sample_positions)) {
  if (positions_.empty()) throw ConfigError("FourierDictionary: no sample positions");
}

void FourierDictionary::column(std::span<const double> theta, std::span<cplx> out) const {
  const double w = -2.0 * M_PI * theta[0];
  for (std::size_t m = 0; m < positions_.size(); ++m) out[m] = std::polar(1.0, w * positions_[m]);
}

void FourierDictionary::column_jacobian(std::span<const double> theta, CMatrix& jac) const {
  const double w = -2.0 * M_PI * theta[0];
  for (std::size_t m = 0; m < positions_.size(); ++m) {
    const double t = positions_[m];
    jac(static_cast<Index>(m), 0) = cplx(0.0, -2.0 * M_PI * t) * std::polar(1.0, w * t);
  }
}

GridParams uniform_grid(Index n, double lo, double hi) {
  GridMatrix v(n, 1);
  for (Index i = 0; i < n; ++i) v(i, 0) = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n);
  return GridParams(std::move(v));
}

CMatrix assemble_matrix(const ParametricDictionary& dict, const GridParams& grid) {
  std::vector<Index> all(static_cast<std::size_t>(grid.size()));
  std::iota(all.begin(), all.end(), Index{0});
  return assemble_columns(dict, grid, all);
}

CMatrix assemble_columns(const ParametricDictionary& dict, const GridParams& grid,
                         std::span<const Index> columns) {
  require_dims(grid.dim() == dict.param_dim(), "assemble: grid dimension does not match dictionary");
  CMatrix a(dict.rows(), static_cast<Index>(columns.size()));
  for (std::size_t k = 0; k < columns.size(); ++k) {
    const Index n = columns[k];
    const auto p = grid.point(n);
    dict.check_point(p, n);
    dict.column(p, std::span<cplx>(a.col(static_cast<Index>(k)).data(), static_cast<std::size_t>(a.rows())));
  }
  return a;
}

Observation synthesize_observation(const ParametricDictionary& dict, const GridParams& grid_true,
                                   const CVector& x_true, NoiseSpec noise, std::uint64_t seed) {
  require_dims(x_true.size() == grid_true.size(), "synthesize_observation: gains/grid length mismatch");
  if (!noise.noiseless && !(noise.precision > 0.0)) throw ConfigError("noise precision must be > 0");
  const CMatrix a = assemble_matrix(dict, grid_true);
  Observation obs;
  obs.y = kernels::matvec(a, x_true);
  if (!noise.noiseless) {
    Rng rng(seed);
    const double var = 1.0 / noise.precision;
    for (Index m = 0; m < obs.y.size(); ++m) obs.y[m] += rng.complex_normal(var);
  }
  obs.truth = GroundTruth{grid_true, x_true,
                          noise.noiseless ? std::nullopt : std::optional<double>(noise.precision)};
  return obs;
}

CVector residual(const Observation& obs, const ParametricDictionary& dict, const GridParams& grid,
                 const CVector& x) {
  require_dims(obs.y.size() == dict.rows(), "residual: observation length != dictionary rows");
  require_dims(x.size() == grid.size(), "residual: x length != grid size");
  const CMatrix a = assemble_matrix(dict, grid);
  return obs.y - kernels::matvec(a, x);
}

}  // namespace srcs
