#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "nlh/error.hpp"
#include "nlh/types.hpp"

namespace nlh {

/// Uniform cell-centered quadrature of an axis-aligned box, optionally
/// surrounded by `pad_cells` layers of ambient cells (used by the Dirichlet
/// problem to house the exterior region where the solution vanishes).
///
/// Nodes are numbered over the whole padded lattice, first axis fastest.
/// Interior nodes are the cell centers of the box itself.
template <typename Scalar>
class Grid {
 public:
  Grid(int dim, Index m, Index pad_cells, std::array<Scalar, 2> lo, std::array<Scalar, 2> side)
      : dim_(dim), m_(m), pad_(pad_cells), lo_(lo), side_(side) {
    if (dim != 1 && dim != 2) throw ConfigError("grid dimension must be 1 or 2, got " + std::to_string(dim));
    if (m < 2) throw ConfigError("grid needs at least 2 nodes per axis, got " + std::to_string(m));
    if (pad_cells < 0) throw ConfigError("pad_cells must be non-negative");
    for (int a = 0; a < dim; ++a) {
      if (!(side[a] > Scalar(0))) throw ConfigError("box side lengths must be positive");
      h_[a] = side[a] / Scalar(m);
    }
    weight_ = Scalar(1);
    for (int a = 0; a < dim; ++a) weight_ *= h_[a];

    const Index per_axis = m + 2 * pad_cells;
    const Index total = dim == 1 ? per_axis : per_axis * per_axis;
    nodes_.resize(dim, total);
    interior_of_.assign(static_cast<std::size_t>(total), -1);
    for (Index k = 0; k < total; ++k) {
      std::array<Index, 2> cell{k % per_axis, k / per_axis};
      bool inside = true;
      for (int a = 0; a < dim; ++a) {
        const Index c = cell[a] - pad_cells;
        nodes_(a, k) = lo[a] + (Scalar(c) + Scalar(0.5)) * h_[a];
        inside = inside && c >= 0 && c < m;
      }
      if (inside) {
        interior_of_[static_cast<std::size_t>(k)] = static_cast<Index>(interior_.size());
        interior_.push_back(k);
      }
    }
  }

  int dim() const { return dim_; }
  Index m() const { return m_; }
  Index pad_cells() const { return pad_; }
  Index cells_per_axis() const { return m_ + 2 * pad_; }

  /// Total number of nodes, padded ones included.
  Index size() const { return nodes_.cols(); }
  Index interior_size() const { return static_cast<Index>(interior_.size()); }
  bool padded() const { return pad_ > 0; }

  Scalar weight() const { return weight_; }
  Scalar h(int axis = 0) const { return h_[axis]; }
  Scalar lo(int axis = 0) const { return lo_[axis]; }
  Scalar side(int axis = 0) const { return side_[axis]; }

  Scalar volume() const {
    Scalar v(1);
    for (int a = 0; a < dim_; ++a) v *= side_[a];
    return v;
  }

  /// Width of the padding layer in length units (smallest over the axes).
  Scalar pad_width() const {
    Scalar w = Scalar(pad_) * h_[0];
    for (int a = 1; a < dim_; ++a) w = std::min(w, Scalar(pad_) * h_[a]);
    return w;
  }

  auto point(Index k) const { return nodes_.col(k); }
  const Matrix<Scalar>& nodes() const { return nodes_; }

  bool is_interior(Index k) const { return interior_of_[static_cast<std::size_t>(k)] >= 0; }
  /// Position of ambient node `k` in the interior numbering, or -1.
  Index interior_index(Index k) const { return interior_of_[static_cast<std::size_t>(k)]; }
  /// Ambient index of the `i`-th interior node.
  Index ambient_index(Index i) const { return interior_[static_cast<std::size_t>(i)]; }
  const std::vector<Index>& interior_nodes() const { return interior_; }

  /// Interior values of an ambient field.
  Vector<Scalar> restrict_to_interior(const Vector<Scalar>& ambient) const {
    check_ambient(ambient);
    Vector<Scalar> out(interior_size());
    for (Index i = 0; i < interior_size(); ++i) out[i] = ambient[ambient_index(i)];
    return out;
  }

  /// Ambient field equal to `interior` on the box and zero on padded nodes.
  Vector<Scalar> extend_by_zero(const Vector<Scalar>& interior) const {
    check_interior(interior);
    Vector<Scalar> out = Vector<Scalar>::Zero(size());
    for (Index i = 0; i < interior_size(); ++i) out[ambient_index(i)] = interior[i];
    return out;
  }

  /// Samples `fn(point)` on every ambient node.
  template <typename Fn>
  Vector<Scalar> sample(Fn&& fn) const {
    Vector<Scalar> out(size());
    for (Index k = 0; k < size(); ++k) out[k] = fn(point(k));
    return out;
  }

  /// Samples `fn(point)` on the interior nodes only.
  template <typename Fn>
  Vector<Scalar> sample_interior(Fn&& fn) const {
    Vector<Scalar> out(interior_size());
    for (Index i = 0; i < interior_size(); ++i) out[i] = fn(point(ambient_index(i)));
    return out;
  }

  void check_interior(const Vector<Scalar>& v) const {
    if (v.size() != interior_size())
      throw PreconditionError("field has " + std::to_string(v.size()) + " values, grid has " +
                              std::to_string(interior_size()) + " interior nodes");
  }
  void check_ambient(const Vector<Scalar>& v) const {
    if (v.size() != size())
      throw PreconditionError("field has " + std::to_string(v.size()) + " values, grid has " +
                              std::to_string(size()) + " nodes");
  }

  bool same_layout(const Grid& other) const {
    return dim_ == other.dim_ && m_ == other.m_ && pad_ == other.pad_ && lo_ == other.lo_ && side_ == other.side_;
  }

 private:
  int dim_;
  Index m_;
  Index pad_;
  std::array<Scalar, 2> lo_;
  std::array<Scalar, 2> side_;
  std::array<Scalar, 2> h_{Scalar(1), Scalar(1)};
  Scalar weight_;
  Matrix<Scalar> nodes_;
  std::vector<Index> interior_;
  std::vector<Index> interior_of_;
};

/// Grid on the unit box [0,1]^dim.
template <typename Scalar = double>
Grid<Scalar> build_grid(int dim, Index m, Index pad_cells = 0) {
  return Grid<Scalar>(dim, m, pad_cells, {Scalar(0), Scalar(0)}, {Scalar(1), Scalar(1)});
}

/// Smallest number of pad cells whose width covers `radius`.
template <typename Scalar>
Index pad_cells_for(Scalar radius, Index m, Scalar side = Scalar(1)) {
  using std::ceil;
  const Scalar h = side / Scalar(m);
  return static_cast<Index>(ceil(radius / h - Scalar(1e-9)));
}

}  // namespace nlh
