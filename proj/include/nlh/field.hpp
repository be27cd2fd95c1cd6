#pragma once

#include <cmath>

#include "nlh/grid.hpp"

namespace nlh {

// Fields are plain Eigen vectors. Interior fields carry one value per box
// node; ambient fields carry one value per node of the padded lattice. The
// quadrature helpers below accept either and always integrate over the box.

template <typename Scalar>
Vector<Scalar> interior_values(const Grid<Scalar>& g, const Vector<Scalar>& u) {
  if (u.size() == g.interior_size()) return u;
  return g.restrict_to_interior(u);
}

template <typename Scalar>
Scalar integral(const Grid<Scalar>& g, const Vector<Scalar>& u) {
  return interior_values(g, u).sum() * g.weight();
}

/// Average over the box, (1/|box|) * integral.
template <typename Scalar>
Scalar mean(const Grid<Scalar>& g, const Vector<Scalar>& u) {
  return integral(g, u) / g.volume();
}

/// Subtracts the box average from the interior values; padded values are left untouched.
template <typename Scalar>
Vector<Scalar> project_mean_zero(const Grid<Scalar>& g, const Vector<Scalar>& u) {
  const Scalar mu = mean(g, u);
  Vector<Scalar> out = u;
  if (u.size() == g.interior_size()) {
    out.array() -= mu;
  } else {
    g.check_ambient(u);
    for (Index k : g.interior_nodes()) out[k] -= mu;
  }
  return out;
}

template <typename Scalar>
Scalar inner(const Grid<Scalar>& g, const Vector<Scalar>& u, const Vector<Scalar>& v) {
  return interior_values(g, u).dot(interior_values(g, v)) * g.weight();
}

template <typename Scalar>
Scalar l2_norm(const Grid<Scalar>& g, const Vector<Scalar>& u) {
  using std::sqrt;
  return sqrt(interior_values(g, u).squaredNorm() * g.weight());
}

}  // namespace nlh
