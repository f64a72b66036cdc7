#pragma once

#include <cstdint>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

namespace vrbb {

using Index = Eigen::Index;

/// Common type aliases, templated on the floating point type.
template <typename ScalarT>
struct Types {
  using Scalar = ScalarT;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using SparseMatrix = Eigen::SparseMatrix<Scalar, Eigen::RowMajor, Index>;
};

using TypesD = Types<double>;

}  // namespace vrbb
