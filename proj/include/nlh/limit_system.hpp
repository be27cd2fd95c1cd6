#pragma once

#include <string>

#include "nlh/error.hpp"
#include "nlh/operator.hpp"

namespace nlh {

/// Block operator of the homogenized system acting on (u_A, u_B), both on
/// interior nodes. Row blocks are the A- and B-equations; the right-hand
/// sides are X f and (1 - X) f. For the Dirichlet problem the y-integrals run
/// over the padded lattice with u_A = u_B = 0 off the box.
template <typename Scalar>
struct LimitOperator {
  Matrix<Scalar> entries;       ///< 2N x 2N, unknowns ordered (u_A, u_B)
  Vector<Scalar> X;             ///< limit density on interior nodes
  BoundaryCondition bc = BoundaryCondition::neumann;

  Index block_size() const { return X.size(); }

  /// (X, 1 - X), the discrete nullspace for the Neumann problem.
  Vector<Scalar> null_direction() const {
    Vector<Scalar> z(2 * X.size());
    z << X, Vector<Scalar>::Ones(X.size()) - X;
    return z;
  }

  /// M * diag(X, 1 - X); symmetric by the structure of the system.
  Matrix<Scalar> symmetrized() const { return entries * null_direction().asDiagonal(); }
};

/// Assembles the homogenized block operator. `X` is an ambient field of the
/// limit density with values in [0,1].
template <typename Scalar>
LimitOperator<Scalar> assemble_limit_system(const Grid<Scalar>& g, const Vector<Scalar>& X,
                                            const KernelSet<Scalar>& ks, BoundaryCondition bc) {
  g.check_ambient(X);
  for (Index k = 0; k < X.size(); ++k)
    if (!(X[k] >= Scalar(0) && X[k] <= Scalar(1)))
      throw PreconditionError("limit density must lie in [0,1], got " + std::to_string(static_cast<double>(X[k])));
  detail::check_kernels(g, ks);
  if (bc == BoundaryCondition::dirichlet) detail::check_padding(g, ks);

  const Index N = g.interior_size();
  const Scalar w = g.weight();
  LimitOperator<Scalar> M;
  M.bc = bc;
  M.X = g.restrict_to_interior(X);
  M.entries = Matrix<Scalar>::Zero(2 * N, 2 * N);
  const bool ambient = bc == BoundaryCondition::dirichlet;

  parallel_for(0, N, [&](Index i) {
    const Index a = g.ambient_index(i);
    const Scalar xa = X[a];
    const Index ra = i;      // row of the A-equation
    const Index rb = N + i;  // row of the B-equation
    auto visit = [&](Index b) {
      const Index j = g.interior_index(b);
      const Scalar xb = X[b];
      const Scalar jv = ks.J(g, a, b) * w;
      const Scalar rv = ks.R(g, a, b) * w;
      const Scalar gv = ks.G(g, a, b) * w;
      // A-equation: J [X(x) u_A(y) - X(y) u_A(x)] + R [X(x) u_B(y) - (1 - X(y)) u_A(x)]
      M.entries(ra, ra) -= xb * jv + (Scalar(1) - xb) * rv;
      // B-equation: R [(1 - X(x)) u_A(y) - X(y) u_B(x)] + G [(1 - X(x)) u_B(y) - (1 - X(y)) u_B(x)]
      M.entries(rb, rb) -= xb * rv + (Scalar(1) - xb) * gv;
      if (j >= 0) {
        M.entries(ra, j) += xa * jv;
        M.entries(ra, N + j) += xa * rv;
        M.entries(rb, j) += (Scalar(1) - xa) * rv;
        M.entries(rb, N + j) += (Scalar(1) - xa) * gv;
      }
    };
    if (ambient) {
      for (Index b = 0; b < g.size(); ++b) visit(b);
    } else {
      for (Index b : g.interior_nodes()) visit(b);
    }
  });
  return M;
}

}  // namespace nlh
