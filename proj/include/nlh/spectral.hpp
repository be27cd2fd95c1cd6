#pragma once

#include <cmath>
#include <random>
#include <string>

#include <Eigen/Eigenvalues>

#include "nlh/error.hpp"
#include "nlh/operator.hpp"

namespace nlh {

template <typename Scalar>
struct RayleighResult {
  Scalar value = Scalar(0);     ///< lambda_n, smallest Rayleigh quotient of -L on the admissible space
  Scalar residual = Scalar(0);  ///< ||(-L) v - lambda v|| for the unit minimizer v
  Vector<Scalar> minimizer;
  int iterations = 0;
  bool dense = true;
};

struct RayleighOptions {
  Index dense_limit = 2000;  ///< below this many nodes use a full symmetric eigendecomposition
  double tolerance = 1e-8;
  int krylov_dim = 120;
  int max_restarts = 200;
  std::uint64_t seed = 17;
};

namespace detail {

template <typename Scalar>
void remove_mean(Vector<Scalar>& v) {
  v.array() -= v.mean();
}

// Lanczos with full reorthogonalization and single-vector restarts on the
// symmetric matrix A, restricted to mean-zero vectors when `deflate`.
template <typename Scalar>
RayleighResult<Scalar> lanczos_smallest(const Matrix<Scalar>& A, bool deflate, const RayleighOptions& opt) {
  using std::abs;
  using std::sqrt;
  const Index N = A.rows();
  const Index k_max = std::min<Index>(opt.krylov_dim, deflate ? N - 1 : N);
  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> normal;
  Vector<Scalar> start(N);
  for (Index i = 0; i < N; ++i) start[i] = Scalar(normal(rng));
  if (deflate) remove_mean(start);
  start.normalize();

  const Scalar scale = A.cwiseAbs().rowwise().sum().maxCoeff();
  RayleighResult<Scalar> best;
  best.dense = false;
  for (int restart = 0; restart < opt.max_restarts; ++restart) {
    Matrix<Scalar> V(N, k_max + 1);
    Vector<Scalar> beta(k_max);
    V.col(0) = start;
    Index k = 0;
    for (; k < k_max; ++k) {
      Vector<Scalar> w = A * V.col(k);
      if (deflate) remove_mean(w);
      // Project after orthogonalizing too; small beta amplifies any drift off the mean-zero space.
      for (int pass = 0; pass < 2; ++pass) {
        w -= V.leftCols(k + 1) * (V.leftCols(k + 1).transpose() * w);
        if (deflate) remove_mean(w);
      }
      beta[k] = w.norm();
      if (beta[k] <= Scalar(1e-14) * scale) {
        ++k;
        break;
      }
      V.col(k + 1) = w / beta[k];
    }
    // Full projection rather than the tridiagonal: near exhaustion of the
    // space the reorthogonalization terms are not negligible next to beta.
    const Matrix<Scalar> Vk = V.leftCols(k);
    Matrix<Scalar> T = Vk.transpose() * (A * Vk);
    T = (T + T.transpose()).eval() / Scalar(2);
    Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> small(T);
    Vector<Scalar> x = V.leftCols(k) * small.eigenvectors().col(0);
    if (deflate) remove_mean(x);
    x.normalize();
    const Scalar theta = x.dot(A * x);
    Vector<Scalar> r = A * x - theta * x;
    if (deflate) remove_mean(r);
    best.value = theta;
    best.residual = r.norm();
    best.minimizer = x;
    best.iterations = restart + 1;
    if (best.residual <= Scalar(opt.tolerance) * std::max(Scalar(1), scale)) return best;
    start = x;
  }
  throw ConvergenceError("Lanczos iteration for the smallest eigenvalue did not converge",
                         static_cast<double>(best.residual));
}

}  // namespace detail

/// lambda_n = min over the admissible space of -a(u,u)/||u||^2, i.e. the
/// smallest eigenvalue of -L on mean-zero vectors (Neumann) or on all
/// vectors (Dirichlet). Constants are deflated explicitly in the Neumann case.
template <typename Scalar>
RayleighResult<Scalar> min_rayleigh(const OperatorMatrix<Scalar>& L, const RayleighOptions& opt = {}) {
  using std::abs;
  const Index N = L.size();
  const Scalar sym_err = (L.entries - L.entries.transpose()).cwiseAbs().maxCoeff();
  const Scalar scale = L.entries.cwiseAbs().maxCoeff();
  if (sym_err > Scalar(1e-10) * std::max(Scalar(1), scale))
    throw PreconditionError("min_rayleigh needs a symmetric operator (asymmetry " +
                            std::to_string(static_cast<double>(sym_err)) + ")");
  const bool deflate = L.bc == BoundaryCondition::neumann;
  Matrix<Scalar> A = -(L.entries + L.entries.transpose()) / Scalar(2);

  if (N >= opt.dense_limit) return detail::lanczos_smallest(A, deflate, opt);

  Matrix<Scalar> shifted = A;
  if (deflate) {
    // Move the constant mode above the spectrum (Gershgorin bound).
    const Scalar shift = A.cwiseAbs().rowwise().sum().maxCoeff() + Scalar(1);
    shifted.array() += shift / Scalar(N);
  }
  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> es(shifted);
  if (es.info() != Eigen::Success) throw ConvergenceError("symmetric eigensolver failed", -1.0);
  RayleighResult<Scalar> r;
  r.value = es.eigenvalues()[0];
  r.minimizer = es.eigenvectors().col(0);
  Vector<Scalar> res = A * r.minimizer - r.value * r.minimizer;
  r.residual = res.norm();
  const Scalar norm_inf = A.cwiseAbs().rowwise().sum().maxCoeff();
  if (r.residual > Scalar(opt.tolerance) * std::max(Scalar(1), norm_inf))
    throw ConvergenceError("eigen-residual above tolerance", static_cast<double>(r.residual));
  return r;
}

}  // namespace nlh
