#pragma once

#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "nlh/error.hpp"
#include "nlh/field.hpp"
#include "nlh/kernel.hpp"
#include "nlh/parallel.hpp"

namespace nlh {

/// Discrete nonlocal operator on the interior nodes, quadrature weights baked
/// in: (L u)_i approximates the right-hand side of the two-phase equation at
/// node i. For the Dirichlet problem the exterior contributions (where u = 0)
/// appear only as killing mass on the diagonal.
template <typename Scalar>
struct OperatorMatrix {
  Matrix<Scalar> entries;
  BoundaryCondition bc = BoundaryCondition::neumann;
  int n = 0;  ///< partition index, 0 when not tied to a partition

  Index size() const { return entries.rows(); }
  Vector<Scalar> apply(const Vector<Scalar>& u) const { return entries * u; }
};

/// Kernel weight between two nodes with phase values chi_x, chi_y:
/// J inside A, R across the interface, G inside B.
template <typename Scalar>
Scalar phase_kernel(const KernelSet<Scalar>& ks, const Grid<Scalar>& g, Index a, Index b, Scalar chi_a,
                    Scalar chi_b) {
  Scalar v(0);
  const Scalar ab = chi_a * (Scalar(1) - chi_b) + (Scalar(1) - chi_a) * chi_b;
  if (chi_a * chi_b != Scalar(0)) v += chi_a * chi_b * ks.J(g, a, b);
  if (ab != Scalar(0)) v += ab * ks.R(g, a, b);
  const Scalar bb = (Scalar(1) - chi_a) * (Scalar(1) - chi_b);
  if (bb != Scalar(0)) v += bb * ks.G(g, a, b);
  return v;
}

namespace detail {

template <typename Scalar>
void check_indicator(const Grid<Scalar>& g, const Vector<Scalar>& chi) {
  g.check_ambient(chi);
  for (Index k = 0; k < chi.size(); ++k)
    if (chi[k] != Scalar(0) && chi[k] != Scalar(1)) throw PreconditionError("indicator field must be 0/1");
}

template <typename Scalar>
void check_kernels(const Grid<Scalar>& g, const KernelSet<Scalar>& ks) {
  ks.J.check_grid(g);
  ks.R.check_grid(g);
  ks.G.check_grid(g);
}

template <typename Scalar>
void check_padding(const Grid<Scalar>& g, const KernelSet<Scalar>& ks) {
  const Scalar radius = ks.max_support_radius();
  if (g.pad_width() + Scalar(1e-12) < radius)
    throw PreconditionError("Dirichlet assembly needs pad width >= kernel support radius (" +
                            std::to_string(static_cast<double>(radius)) + "), grid pads only " +
                            std::to_string(static_cast<double>(g.pad_width())) +
                            "; exterior kernel mass would be lost");
}

}  // namespace detail

/// Neumann operator: interactions restricted to the box. `chi` is an ambient
/// 0/1 field (padded nodes, if any, are ignored).
template <typename Scalar>
OperatorMatrix<Scalar> assemble_neumann(const Grid<Scalar>& g, const Vector<Scalar>& chi, const KernelSet<Scalar>& ks,
                                        int n = 0) {
  detail::check_indicator(g, chi);
  detail::check_kernels(g, ks);
  const Index N = g.interior_size();
  OperatorMatrix<Scalar> L;
  L.bc = BoundaryCondition::neumann;
  L.n = n;
  L.entries = Matrix<Scalar>::Zero(N, N);
  const Scalar w = g.weight();
  parallel_for(0, N, [&](Index i) {
    const Index a = g.ambient_index(i);
    Scalar diag(0);
    for (Index j = 0; j < N; ++j) {
      if (j == i) continue;
      const Index b = g.ambient_index(j);
      const Scalar c = phase_kernel(ks, g, a, b, chi[a], chi[b]) * w;
      L.entries(i, j) = c;
      diag -= c;
    }
    L.entries(i, i) = diag;
  });
  return L;
}

/// Dirichlet operator on a padded grid; `chi` partitions the whole padded lattice.
template <typename Scalar>
OperatorMatrix<Scalar> assemble_dirichlet(const Grid<Scalar>& g, const Vector<Scalar>& chi,
                                          const KernelSet<Scalar>& ks, int n = 0) {
  detail::check_indicator(g, chi);
  detail::check_kernels(g, ks);
  detail::check_padding(g, ks);
  const Index N = g.interior_size();
  OperatorMatrix<Scalar> L;
  L.bc = BoundaryCondition::dirichlet;
  L.n = n;
  L.entries = Matrix<Scalar>::Zero(N, N);
  const Scalar w = g.weight();
  parallel_for(0, N, [&](Index i) {
    const Index a = g.ambient_index(i);
    Scalar diag(0);
    for (Index b = 0; b < g.size(); ++b) {
      if (b == a) continue;
      const Scalar c = phase_kernel(ks, g, a, b, chi[a], chi[b]) * w;
      const Index j = g.interior_index(b);
      if (j >= 0) L.entries(i, j) = c;
      diag -= c;
    }
    L.entries(i, i) = diag;
  });
  return L;
}

template <typename Scalar>
OperatorMatrix<Scalar> assemble(const Grid<Scalar>& g, const Vector<Scalar>& chi, const KernelSet<Scalar>& ks,
                                BoundaryCondition bc, int n = 0) {
  return bc == BoundaryCondition::neumann ? assemble_neumann(g, chi, ks, n) : assemble_dirichlet(g, chi, ks, n);
}

/// Discrete killing mass per interior node: the one-jump probability of
/// leaving the box, sum over padded y of the phase kernel times h^d.
template <typename Scalar>
Vector<Scalar> killing_mass(const Grid<Scalar>& g, const Vector<Scalar>& chi, const KernelSet<Scalar>& ks) {
  detail::check_indicator(g, chi);
  detail::check_kernels(g, ks);
  Vector<Scalar> q = Vector<Scalar>::Zero(g.interior_size());
  for (Index i = 0; i < g.interior_size(); ++i) {
    const Index a = g.ambient_index(i);
    Scalar s(0);
    for (Index b = 0; b < g.size(); ++b)
      if (!g.is_interior(b)) s += phase_kernel(ks, g, a, b, chi[a], chi[b]);
    q[i] = s * g.weight();
  }
  return q;
}

/// Phi(A, B, V) u = sum_{x in A} sum_{y in B} V(x,y) (u(y) - u(x))^2 h^{2d}
/// over the box (Neumann) or the whole padded lattice (Dirichlet, u extended by 0).
/// `in_a`/`in_b` are ambient 0/1 selectors and `u` is an ambient field.
template <typename Scalar>
Scalar phi(const Grid<Scalar>& g, const Vector<Scalar>& in_a, const Vector<Scalar>& in_b, const Kernel<Scalar>& V,
           const Vector<Scalar>& u, BoundaryCondition bc) {
  const bool all = bc == BoundaryCondition::dirichlet;
  Scalar total(0);
  for (Index a = 0; a < g.size(); ++a) {
    if (in_a[a] == Scalar(0) || (!all && !g.is_interior(a))) continue;
    Scalar row(0);
    for (Index b = 0; b < g.size(); ++b) {
      if (in_b[b] == Scalar(0) || (!all && !g.is_interior(b))) continue;
      const Scalar d = u[b] - u[a];
      row += in_b[b] * V(g, a, b) * d * d;
    }
    total += in_a[a] * row;
  }
  return total * g.weight() * g.weight();
}

/// The three interaction sums appearing in the energy and the Rayleigh quotient.
template <typename Scalar>
struct PhiTerms {
  Scalar jaa = Scalar(0);  ///< Phi(A, A, J)
  Scalar rab = Scalar(0);  ///< Phi(A, B, R)
  Scalar gbb = Scalar(0);  ///< Phi(B, B, G)

  /// 1/2 Phi_J + Phi_R + 1/2 Phi_G, which equals -a(u,u).
  Scalar quadratic() const { return jaa / 2 + rab + gbb / 2; }
};

/// `u` is an interior field; it is extended by zero onto padded nodes.
template <typename Scalar>
PhiTerms<Scalar> phi_terms(const Grid<Scalar>& g, const Vector<Scalar>& chi, const KernelSet<Scalar>& ks,
                           const Vector<Scalar>& u, BoundaryCondition bc) {
  detail::check_indicator(g, chi);
  const Vector<Scalar> ua = u.size() == g.size() ? u : g.extend_by_zero(u);
  const Vector<Scalar> chi_b = Vector<Scalar>::Ones(g.size()) - chi;
  return {phi(g, chi, chi, ks.J, ua, bc), phi(g, chi, chi_b, ks.R, ua, bc), phi(g, chi_b, chi_b, ks.G, ua, bc)};
}

/// E(u) = 1/4 Phi(A,A,J) + 1/4 Phi(B,B,G) + 1/2 Phi(A,B,R) + <f, u>.
/// Its unique critical point over the admissible space solves L u = f.
template <typename Scalar>
Scalar energy(const Grid<Scalar>& g, const Vector<Scalar>& chi, const KernelSet<Scalar>& ks, const Vector<Scalar>& u,
              const Vector<Scalar>& f, BoundaryCondition bc) {
  if (bc == BoundaryCondition::dirichlet && u.size() == g.size()) {
    for (Index k = 0; k < g.size(); ++k)
      if (!g.is_interior(k) && u[k] != Scalar(0)) throw PreconditionError("Dirichlet field must vanish off the box");
  }
  const PhiTerms<Scalar> t = phi_terms(g, chi, ks, u, bc);
  return t.jaa / 4 + t.gbb / 4 + t.rab / 2 + inner(g, f, u);
}

/// a(u, v) = <L u, v> with quadrature weights; symmetric when L is.
template <typename Scalar>
Scalar dirichlet_form(const Grid<Scalar>& g, const OperatorMatrix<Scalar>& L, const Vector<Scalar>& u,
                      const Vector<Scalar>& v) {
  const Vector<Scalar> ui = interior_values(g, u);
  const Vector<Scalar> vi = interior_values(g, v);
  if (ui.size() != L.size()) throw PreconditionError("dirichlet_form: field and operator sizes differ");
  return (L.entries * ui).dot(vi) * g.weight();
}

/// Writes `rows,cols,bc,n` followed by the entries row-major, one row per line.
template <typename Scalar>
void write_matrix_csv(const std::string& path, const OperatorMatrix<Scalar>& L) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path + " for writing");
  out.precision(17);
  out << "rows,cols,bc,n\n" << L.entries.rows() << ',' << L.entries.cols() << ',' << to_string(L.bc) << ',' << L.n
      << '\n';
  for (Index i = 0; i < L.entries.rows(); ++i) {
    for (Index j = 0; j < L.entries.cols(); ++j) {
      if (j) out << ',';
      out << static_cast<double>(L.entries(i, j));
    }
    out << '\n';
  }
}

}  // namespace nlh
