#pragma once

#include <Eigen/Dense>

#include <cstdint>

namespace nlh {

using Index = Eigen::Index;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Coordinates of a node; dimension is 1 or 2, so storage is fixed at two.
template <typename Scalar>
using Point = Eigen::Matrix<Scalar, Eigen::Dynamic, 1, 0, 2, 1>;

enum class BoundaryCondition { neumann, dirichlet };

inline const char* to_string(BoundaryCondition bc) {
  return bc == BoundaryCondition::neumann ? "neumann" : "dirichlet";
}

}  // namespace nlh
