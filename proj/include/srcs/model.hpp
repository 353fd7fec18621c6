#pragma once

// Linear observation model y = A(theta) x + w with a parameter-dependent
// sensing matrix, and the dictionary interface every solver consumes.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "srcs/common.hpp"

namespace srcs {

struct ParamRange {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double v) const { return v >= lo && v <= hi; }
  double clamp(double v) const { return v < lo ? lo : (v > hi ? hi : v); }
  double width() const { return hi - lo; }
};

/// N grid points of dimension D; row n parameterizes dictionary column n.
class GridParams {
 public:
  GridParams() = default;
  explicit GridParams(GridMatrix values);
  /// One-dimensional grid from a list of points.
  static GridParams from_points(std::span<const double> points);

  Index size() const { return values_.rows(); }
  Index dim() const { return values_.cols(); }
  std::span<const double> point(Index n) const {
    return {values_.data() + n * values_.cols(), static_cast<std::size_t>(values_.cols())};
  }
  double operator()(Index n, Index d) const { return values_(n, d); }
  const GridMatrix& values() const { return values_; }

  /// Overwrites the rows listed in `rows` with the corresponding rows of `points`.
  void assign_rows(std::span<const Index> rows, const GridMatrix& points);
  GridParams subset(std::span<const Index> rows) const;

 private:
  GridMatrix values_;
};

/// Source of columns a(theta) and their parameter Jacobians.
///
/// Implementations must be pure: the same theta always yields the same column,
/// and evaluation is safe from many threads.
class ParametricDictionary {
 public:
  virtual ~ParametricDictionary() = default;

  virtual Index rows() const = 0;
  virtual Index param_dim() const = 0;
  virtual ParamRange valid_range(Index d) const = 0;
  /// Coarse (Fourier-limited) grid spacing along dimension d.
  virtual double resolution(Index d) const = 0;

  virtual void column(std::span<const double> theta, std::span<cplx> out) const = 0;
  /// Writes da/dtheta_d into column d of `jac` (rows() x param_dim()).
  virtual void column_jacobian(std::span<const double> theta, CMatrix& jac) const = 0;

  CVector column(std::span<const double> theta) const;
  CMatrix column_jacobian(std::span<const double> theta) const;

  /// Throws RangeError naming `column_index` and the offending dimension.
  void check_point(std::span<const double> theta, Index column_index) const;
  /// Clamps every coordinate into valid_range.
  void clamp_point(std::span<double> theta) const;
};

/// Generic 1-D Fourier dictionary: a_m(f) = exp(-j 2 pi t_m f), f a normalized
/// frequency in [0, 1]. Sample positions default to t_m = m.
class FourierDictionary final : public ParametricDictionary {
 public:
  explicit FourierDictionary(Index rows);
  explicit FourierDictionary(std::vector<double> sample_positions);

  Index rows() const override { return static_cast<Index>(positions_.size()); }
  Index param_dim() const override { return 1; }
  ParamRange valid_range(Index) const override { return {0.0, 1.0}; }
  double resolution(Index) const override { return 1.0 / static_cast<double>(positions_.size()); }

  using ParametricDictionary::column;
  using ParametricDictionary::column_jacobian;
  void column(std::span<const double> theta, std::span<cplx> out) const override;
  void column_jacobian(std::span<const double> theta, CMatrix& jac) const override;

  const std::vector<double>& positions() const { return positions_; }

 private:
  std::vector<double> positions_;
};

/// Evenly spaced 1-D grid of n points over [lo, hi).
GridParams uniform_grid(Index n, double lo, double hi);

struct NoiseSpec {
  double precision = 1.0;
  bool noiseless = false;

  static NoiseSpec none() { return {1.0, true}; }
  static NoiseSpec with_precision(double kappa) { return {kappa, false}; }
};

/// Scoring metadata; never consumed by the estimators.
struct GroundTruth {
  GridParams params;
  CVector gains;
  std::optional<double> noise_precision;
};

struct Observation {
  CVector y;
  std::optional<GroundTruth> truth;
};

/// Dense M x N matrix whose column n is dict.column(grid row n).
CMatrix assemble_matrix(const ParametricDictionary& dict, const GridParams& grid);
/// Only the listed columns, in the listed order.
CMatrix assemble_columns(const ParametricDictionary& dict, const GridParams& grid,
                         std::span<const Index> columns);

/// y = A(theta_true) x_true + w, w ~ CN(0, kappa^-1 I) with real/imag variance 1/(2 kappa).
Observation synthesize_observation(const ParametricDictionary& dict, const GridParams& grid_true,
                                   const CVector& x_true, NoiseSpec noise, std::uint64_t seed);

/// y - A(theta) x
CVector residual(const Observation& obs, const ParametricDictionary& dict, const GridParams& grid,
                 const CVector& x);

}  // namespace srcs
