#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <tuple>
#include <utility>

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include "nlh/error.hpp"
#include "nlh/field.hpp"
#include "nlh/limit_system.hpp"
#include "nlh/operator.hpp"

namespace nlh {

struct SolveOptions {
  double tolerance = 1e-10;     ///< bound on the L2 residual
  Index direct_limit = 4096;    ///< above this many unknowns use conjugate gradients
  double mean_tolerance = 1e-12;
};

template <typename Scalar>
struct SolveResult {
  Vector<Scalar> u;                     ///< interior values
  std::optional<Scalar> multiplier;     ///< Neumann only
  Scalar residual = Scalar(0);          ///< ||L u - f|| with quadrature weights
  int iterations = 0;                   ///< 0 for direct factorizations
};

template <typename Scalar>
struct LimitPair {
  Vector<Scalar> uA;
  Vector<Scalar> uB;
  Scalar residual_a = Scalar(0);
  Scalar residual_b = Scalar(0);
  Scalar constraint_value = Scalar(0);  ///< integral of uA + uB (Neumann)
  std::optional<Scalar> multiplier;
  int iterations = 0;

  Vector<Scalar> sum() const { return uA + uB; }
};

namespace detail {

template <typename Scalar>
struct CgOutcome {
  Vector<Scalar> x;
  int iterations = 0;
  Scalar residual = Scalar(0);
};

// Plain conjugate gradients for a symmetric positive definite operator given
// as a callable; stops on relative residual `tol` or after `cap` iterations.
template <typename Scalar, typename Apply>
CgOutcome<Scalar> conjugate_gradient(Apply&& apply, const Vector<Scalar>& b, Scalar tol, int cap) {
  CgOutcome<Scalar> out;
  out.x = Vector<Scalar>::Zero(b.size());
  Vector<Scalar> r = b;
  Vector<Scalar> p = r;
  Scalar rr = r.squaredNorm();
  const Scalar target = tol * tol * std::max(Scalar(1), b.squaredNorm());
  for (int it = 0; it < cap; ++it) {
    if (rr <= target) break;
    const Vector<Scalar> Ap = apply(p);
    const Scalar pAp = p.dot(Ap);
    if (!(pAp > Scalar(0))) throw SingularError("conjugate gradients met a non-positive curvature direction");
    const Scalar alpha = rr / pAp;
    out.x += alpha * p;
    r -= alpha * Ap;
    const Scalar rr_new = r.squaredNorm();
    p = r + (rr_new / rr) * p;
    rr = rr_new;
    out.iterations = it + 1;
  }
  using std::sqrt;
  out.residual = sqrt(rr);
  if (rr > target)
    throw ConvergenceError("conjugate gradients hit the iteration cap", static_cast<double>(out.residual));
  return out;
}

template <typename Scalar>
Scalar weighted_norm(const Vector<Scalar>& v, Scalar w) {
  using std::sqrt;
  return sqrt(v.squaredNorm() * w);
}

template <typename Scalar>
void check_residual(Scalar residual, const SolveOptions& opt, const char* what) {
  if (!(residual <= Scalar(opt.tolerance))) throw ConvergenceError(std::string(what) + " residual above tolerance",
                                                                   static_cast<double>(residual));
}

template <typename Scalar>
Scalar symmetry_defect(const Matrix<Scalar>& A) {
  return (A - A.transpose()).cwiseAbs().maxCoeff() / std::max(Scalar(1), A.cwiseAbs().maxCoeff());
}

}  // namespace detail

/// Neumann problem L u = f on mean-zero fields, through the bordered system
/// [L 1; 1^T 0](u, mu) = (f, 0). Requires a mean-zero right-hand side.
/// For symmetric L the multiplier vanishes. For row-normalized (asymmetric) L
/// it is the part of f outside the range of L, and the residual reported is
/// that of the bordered equation L u + mu = f.
template <typename Scalar>
SolveResult<Scalar> solve_neumann(const Grid<Scalar>& g, const OperatorMatrix<Scalar>& L, const Vector<Scalar>& f,
                                  const SolveOptions& opt = {}) {
  using std::abs;
  if (L.bc != BoundaryCondition::neumann) throw PreconditionError("solve_neumann needs a Neumann operator");
  g.check_interior(f);
  const Index N = L.size();
  const Scalar fmean = f.mean();
  if (abs(fmean) > Scalar(opt.mean_tolerance) * std::max(Scalar(1), f.cwiseAbs().maxCoeff()))
    throw PreconditionError("Neumann data must have zero mean, got mean " + std::to_string(static_cast<double>(fmean)));

  SolveResult<Scalar> res;
  if (N <= opt.direct_limit) {
    Matrix<Scalar> B = Matrix<Scalar>::Zero(N + 1, N + 1);
    B.topLeftCorner(N, N) = L.entries;
    B.col(N).head(N).setOnes();
    B.row(N).head(N).setOnes();
    Vector<Scalar> rhs(N + 1);
    rhs << f, Scalar(0);
    Eigen::PartialPivLU<Matrix<Scalar>> lu(B);
    if (!(lu.rcond() > Scalar(1e-14))) throw SingularError("bordered Neumann system is singular");
    const Vector<Scalar> sol = lu.solve(rhs);
    res.u = sol.head(N);
    res.multiplier = sol[N];
  } else {
    if (detail::symmetry_defect(L.entries) > Scalar(1e-12))
      throw PreconditionError("iterative Neumann solve needs a symmetric operator");
    // -L + (s/N) 1 1^T is positive definite; on mean-zero data its solution is mean-zero.
    const Scalar shift = L.entries.diagonal().cwiseAbs().maxCoeff();
    auto apply = [&](const Vector<Scalar>& v) -> Vector<Scalar> {
      Vector<Scalar> out = -(L.entries * v);
      out.array() += shift * v.mean();
      return out;
    };
    const Vector<Scalar> b = -(f.array() - fmean).matrix();
    auto cg = detail::conjugate_gradient<Scalar>(apply, b, Scalar(opt.tolerance) * Scalar(1e-3),
                                                 static_cast<int>(10 * N));
    res.u = cg.x;
    res.u.array() -= res.u.mean();
    res.multiplier = fmean;
    res.iterations = cg.iterations;
  }
  res.residual = detail::weighted_norm<Scalar>(
      Vector<Scalar>((L.entries * res.u).array() + *res.multiplier - f.array()), g.weight());
  detail::check_residual(res.residual, opt, "Neumann solve");
  return res;
}

/// Dirichlet problem L u = f; the operator is negative definite when the
/// killing mass is positive somewhere on every connected component.
template <typename Scalar>
SolveResult<Scalar> solve_dirichlet(const Grid<Scalar>& g, const OperatorMatrix<Scalar>& L, const Vector<Scalar>& f,
                                    const SolveOptions& opt = {}) {
  if (L.bc != BoundaryCondition::dirichlet) throw PreconditionError("solve_dirichlet needs a Dirichlet operator");
  g.check_interior(f);
  const Index N = L.size();
  SolveResult<Scalar> res;
  const Matrix<Scalar> A = -L.entries;
  const bool symmetric = detail::symmetry_defect(A) <= Scalar(1e-12);
  if (N <= opt.direct_limit && symmetric) {
    Eigen::LLT<Matrix<Scalar>> llt(A);
    if (llt.info() != Eigen::Success) throw SingularError("Dirichlet operator is not negative definite");
    res.u = llt.solve(Vector<Scalar>(-f));
  } else if (N <= opt.direct_limit) {
    Eigen::PartialPivLU<Matrix<Scalar>> lu(A);
    if (!(lu.rcond() > Scalar(1e-14))) throw SingularError("Dirichlet operator is singular");
    res.u = lu.solve(Vector<Scalar>(-f));
  } else {
    if (!symmetric) throw PreconditionError("iterative Dirichlet solve needs a symmetric operator");
    auto apply = [&](const Vector<Scalar>& v) -> Vector<Scalar> { return A * v; };
    auto cg = detail::conjugate_gradient<Scalar>(apply, Vector<Scalar>(-f), Scalar(opt.tolerance) * Scalar(1e-3),
                                                 static_cast<int>(10 * N));
    res.u = cg.x;
    res.iterations = cg.iterations;
  }
  res.residual = detail::weighted_norm<Scalar>(L.entries * res.u - f, g.weight());
  if (!res.u.allFinite()) throw SingularError("Dirichlet operator is singular");
  detail::check_residual(res.residual, opt, "Dirichlet solve");
  return res;
}

/// Dispatches on the boundary condition of `L`.
template <typename Scalar>
SolveResult<Scalar> solve(const Grid<Scalar>& g, const OperatorMatrix<Scalar>& L, const Vector<Scalar>& f,
                          const SolveOptions& opt = {}) {
  return L.bc == BoundaryCondition::neumann ? solve_neumann(g, L, f, opt) : solve_dirichlet(g, L, f, opt);
}

/// Per-equation residuals (A-rows, B-rows) of the limit system.
template <typename Scalar>
std::pair<Scalar, Scalar> limit_residuals(const Grid<Scalar>& g, const LimitOperator<Scalar>& M,
                                          const Vector<Scalar>& uA, const Vector<Scalar>& uB,
                                          const Vector<Scalar>& f) {
  const Index N = M.block_size();
  Vector<Scalar> u(2 * N);
  u << uA, uB;
  const Vector<Scalar> Mu = M.entries * u;
  const Vector<Scalar> ra = Mu.head(N) - M.X.cwiseProduct(f);
  const Vector<Scalar> rb = Mu.tail(N) - (Vector<Scalar>::Ones(N) - M.X).cwiseProduct(f);
  return {detail::weighted_norm<Scalar>(ra, g.weight()), detail::weighted_norm<Scalar>(rb, g.weight())};
}

/// Solves the homogenized pair. For the Neumann problem the block system is
/// bordered by the nullspace direction (X, 1 - X) and the constraint
/// integral of (uA + uB) = 0.
template <typename Scalar>
LimitPair<Scalar> solve_limit_pair(const Grid<Scalar>& g, const LimitOperator<Scalar>& M, const Vector<Scalar>& f,
                                   const SolveOptions& opt = {}) {
  using std::abs;
  g.check_interior(f);
  const Index N = M.block_size();
  const bool neumann = M.bc == BoundaryCondition::neumann;
  if (neumann && abs(f.mean()) > Scalar(opt.mean_tolerance) * std::max(Scalar(1), f.cwiseAbs().maxCoeff()))
    throw PreconditionError("Neumann limit data must have zero mean");

  Vector<Scalar> rhs(2 * N);
  rhs << M.X.cwiseProduct(f), (Vector<Scalar>::Ones(N) - M.X).cwiseProduct(f);
  const Vector<Scalar> z = M.null_direction();
  LimitPair<Scalar> pair;
  Vector<Scalar> u;

  const bool interior_density = (M.X.array() > Scalar(0)).all() && (M.X.array() < Scalar(1)).all();
  if (2 * N <= opt.direct_limit || !interior_density) {
    if (neumann) {
      Matrix<Scalar> B = Matrix<Scalar>::Zero(2 * N + 1, 2 * N + 1);
      B.topLeftCorner(2 * N, 2 * N) = M.entries;
      B.col(2 * N).head(2 * N) = z;
      B.row(2 * N).head(2 * N).setConstant(g.weight());
      Vector<Scalar> r(2 * N + 1);
      r << rhs, Scalar(0);
      Eigen::PartialPivLU<Matrix<Scalar>> lu(B);
      if (!(lu.rcond() > Scalar(1e-14))) throw SingularError("bordered limit system is singular");
      const Vector<Scalar> sol = lu.solve(r);
      u = sol.head(2 * N);
      pair.multiplier = sol[2 * N];
    } else {
      Eigen::PartialPivLU<Matrix<Scalar>> lu(M.entries);
      if (!(lu.rcond() > Scalar(1e-14))) throw SingularError("Dirichlet limit system is singular");
      u = lu.solve(rhs);
    }
  } else {
    // With D = diag(X, 1 - X), -M D is symmetric positive semidefinite and its
    // kernel (Neumann) is spanned by (1, 1). Solve for y with u = D y.
    const Matrix<Scalar> K = -(M.entries * z.asDiagonal());
    const Scalar shift = neumann ? K.diagonal().cwiseAbs().maxCoeff() : Scalar(0);
    auto apply = [&](const Vector<Scalar>& v) -> Vector<Scalar> {
      Vector<Scalar> out = K * v;
      if (neumann) out.array() += shift * v.mean();
      return out;
    };
    auto cg = detail::conjugate_gradient<Scalar>(apply, Vector<Scalar>(-rhs), Scalar(opt.tolerance) * Scalar(1e-3),
                                                 static_cast<int>(20 * N));
    u = z.cwiseProduct(cg.x);
    pair.iterations = cg.iterations;
    if (neumann) {
      // Adding c (X, 1 - X) changes the integral of uA + uB by c |box|.
      const Scalar c = -u.sum() * g.weight() / g.volume();
      u += c * z;
      pair.multiplier = Scalar(0);
    }
  }
  pair.uA = u.head(N);
  pair.uB = u.tail(N);
  pair.constraint_value = u.sum() * g.weight();
  std::tie(pair.residual_a, pair.residual_b) = limit_residuals(g, M, pair.uA, pair.uB, f);
  detail::check_residual(pair.residual_a, opt, "limit system (A equation)");
  detail::check_residual(pair.residual_b, opt, "limit system (B equation)");
  return pair;
}

/// L2 defect of the summed equation (A rows plus B rows) against f.
template <typename Scalar>
Scalar combined_residual(const Grid<Scalar>& g, const LimitOperator<Scalar>& M, const Vector<Scalar>& uA,
                         const Vector<Scalar>& uB, const Vector<Scalar>& f) {
  const Index N = M.block_size();
  g.check_interior(f);
  Vector<Scalar> u(2 * N);
  u << uA, uB;
  const Vector<Scalar> Mu = M.entries * u;
  return detail::weighted_norm<Scalar>(Vector<Scalar>(Mu.head(N) + Mu.tail(N) - f), g.weight());
}

template <typename Scalar>
Scalar combined_residual(const Grid<Scalar>& g, const LimitOperator<Scalar>& M, const LimitPair<Scalar>& p,
                         const Vector<Scalar>& f) {
  return combined_residual(g, M, p.uA, p.uB, f);
}

/// Bounds c0 <= X <= 1 - c1 required of the limit density by corrector studies.
template <typename Scalar>
struct DensityBounds {
  Scalar c0 = Scalar(0.01);
  Scalar c1 = Scalar(0.01);
};

/// Oscillating corrector chi_A uA / X + chi_B uB / (1 - X) on interior nodes;
/// mean-free for the Neumann problem. `chi` and `X` are ambient fields.
template <typename Scalar>
Vector<Scalar> corrector_field(const Grid<Scalar>& g, const Vector<Scalar>& chi, const Vector<Scalar>& X,
                               const LimitPair<Scalar>& pair, BoundaryCondition bc,
                               const DensityBounds<Scalar>& bounds = {}) {
  detail::check_indicator(g, chi);
  g.check_ambient(X);
  g.check_interior(pair.uA);
  g.check_interior(pair.uB);
  if (!(bounds.c0 > Scalar(0)) || !(bounds.c1 > Scalar(0)))
    throw PreconditionError("corrector bounds c0, c1 must be positive");
  const Vector<Scalar> xi = g.restrict_to_interior(X);
  const Scalar lo = xi.minCoeff();
  const Scalar hi = xi.maxCoeff();
  if (lo < bounds.c0 || hi > Scalar(1) - bounds.c1)
    throw PreconditionError("corrector needs " + std::to_string(static_cast<double>(bounds.c0)) +
                            " <= X <= 1 - " + std::to_string(static_cast<double>(bounds.c1)) + ", X ranges over [" +
                            std::to_string(static_cast<double>(lo)) + ", " + std::to_string(static_cast<double>(hi)) +
                            "]");
  const Vector<Scalar> ci = g.restrict_to_interior(chi);
  Vector<Scalar> w(g.interior_size());
  for (Index i = 0; i < w.size(); ++i)
    w[i] = ci[i] * pair.uA[i] / xi[i] + (Scalar(1) - ci[i]) * pair.uB[i] / (Scalar(1) - xi[i]);
  if (bc == BoundaryCondition::neumann) w.array() -= w.mean();
  return w;
}

/// L2 distance between a finite-n solution and a corrector (both interior fields).
template <typename Scalar>
Scalar corrector_error(const Grid<Scalar>& g, const Vector<Scalar>& un, const Vector<Scalar>& corrector) {
  if (un.size() != corrector.size()) throw PreconditionError("corrector_error: fields live on different grids");
  return l2_norm(g, Vector<Scalar>(un - corrector));
}

}  // namespace nlh
