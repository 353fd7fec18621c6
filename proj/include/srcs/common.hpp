#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace srcs {

using cplx = std::complex<double>;
using Index = Eigen::Index;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;
using RVector = Eigen::VectorXd;
using RMatrix = Eigen::MatrixXd;
// Grid parameters are stored row-major so that one grid point is contiguous.
using GridMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// A grid parameter fell outside the dictionary's declared range.
class RangeError : public std::out_of_range {
 public:
  RangeError(Index column, Index dimension, double value, double lo, double hi);

  Index column() const { return column_; }
  Index dimension() const { return dimension_; }

 private:
  Index column_;
  Index dimension_;
};

/// Factorization or conditioning failure in a dense solve.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Inconsistent vector/matrix sizes passed to an operation.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Invalid hyperparameter or configuration value.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline void require_dims(bool ok, const char* what) {
  if (!ok) throw DimensionError(what);
}

}  // namespace srcs
