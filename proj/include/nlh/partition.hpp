#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numbers>
#include <string>

#include "nlh/error.hpp"
#include "nlh/field.hpp"
#include "nlh/grid.hpp"

namespace nlh {

enum class PartitionKind { stripes, checkerboard, random, explicit_table };

/// How the phase-A volume fraction used at index n relates to the base profile.
///  - fixed:      fraction_n = profile, weak-* limit X = profile
///  - vanishing:  fraction_n = profile / n, X = 0
///  - saturating: fraction_n = 1 - profile / n, X = 1
enum class FractionSchedule { fixed, vanishing, saturating };

inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// A rule producing the phase-A indicator for every oscillation index n,
/// together with its weak-* limit density X.
template <typename Scalar>
struct PartitionFamily {
  using Profile = std::function<Scalar(const Point<Scalar>&)>;

  PartitionKind kind = PartitionKind::stripes;
  Profile profile = [](const Point<Scalar>&) { return Scalar(0.5); };
  FractionSchedule schedule = FractionSchedule::fixed;
  std::uint64_t seed = 0;
  /// Per-n ambient indicator fields, explicit kind only.
  std::map<int, Vector<Scalar>> table;
  /// Limit density for the explicit kind.
  Profile explicit_limit;

  static PartitionFamily stripes(Scalar theta, FractionSchedule s = FractionSchedule::fixed) {
    PartitionFamily p;
    p.kind = PartitionKind::stripes;
    p.profile = [theta](const Point<Scalar>&) { return theta; };
    p.schedule = s;
    return p;
  }

  /// Weak-* limit X at `x`, clamped to [0,1].
  Scalar limit_at(const Point<Scalar>& x) const {
    if (kind == PartitionKind::explicit_table) {
      if (!explicit_limit) throw ConfigError("explicit partition needs a limit density");
      return std::clamp(explicit_limit(x), Scalar(0), Scalar(1));
    }
    switch (schedule) {
      case FractionSchedule::vanishing: return Scalar(0);
      case FractionSchedule::saturating: return Scalar(1);
      default: return std::clamp(profile(x), Scalar(0), Scalar(1));
    }
  }

  /// Phase-A volume fraction used to build the n-th partition at `x`.
  Scalar fraction_at(int n, const Point<Scalar>& x) const {
    const Scalar base = std::clamp(profile(x), Scalar(0), Scalar(1));
    switch (schedule) {
      case FractionSchedule::vanishing: return base / Scalar(n);
      case FractionSchedule::saturating: return Scalar(1) - base / Scalar(n);
      default: return base;
    }
  }
};

/// Ambient field of the weak-* limit density X.
template <typename Scalar>
Vector<Scalar> limit_density(const PartitionFamily<Scalar>& p, const Grid<Scalar>& g) {
  return g.sample([&](const auto& x) { return p.limit_at(x); });
}

namespace detail {

template <typename Scalar>
Scalar frac(Scalar v) {
  using std::floor;
  return v - floor(v);
}

}  // namespace detail

/// Ambient 0/1 field of the phase-A indicator for oscillation index `n`.
/// Membership is decided at node (cell) centers.
template <typename Scalar>
Vector<Scalar> indicator(const PartitionFamily<Scalar>& p, int n, const Grid<Scalar>& g) {
  using std::floor;
  using std::sqrt;
  if (n < 1) throw PreconditionError("partition index n must be >= 1");

  if (p.kind == PartitionKind::explicit_table) {
    auto it = p.table.find(n);
    if (it == p.table.end()) throw ConfigError("explicit partition has no entry for n = " + std::to_string(n));
    Vector<Scalar> chi = it->second;
    if (chi.size() == g.interior_size() && g.padded()) chi = g.extend_by_zero(chi);
    g.check_ambient(chi);
    for (Index k = 0; k < chi.size(); ++k)
      if (chi[k] != Scalar(0) && chi[k] != Scalar(1))
        throw ConfigError("explicit partition entry for n = " + std::to_string(n) + " is not 0/1");
    return chi;
  }
  if (p.kind == PartitionKind::checkerboard && g.dim() != 2)
    throw ConfigError("checkerboard partitions need a 2D grid");

  const Scalar nn = Scalar(n);
  Vector<Scalar> chi(g.size());
  for (Index k = 0; k < g.size(); ++k) {
    const auto x = g.point(k);
    std::array<Scalar, 2> s{};
    std::array<Scalar, 2> cell{};
    Point<Scalar> center(g.dim());
    for (int a = 0; a < g.dim(); ++a) {
      s[a] = nn * (x[a] - g.lo(a)) / g.side(a);
      cell[a] = floor(s[a]);
      center[a] = g.lo(a) + (cell[a] + Scalar(0.5)) * g.side(a) / nn;
    }
    bool in_a = false;
    switch (p.kind) {
      case PartitionKind::stripes:
        in_a = detail::frac(s[0]) < p.fraction_at(n, Point<Scalar>(x));
        break;
      case PartitionKind::checkerboard: {
        const Scalar side = sqrt(p.fraction_at(n, center));
        const Scalar t0 = s[0] - cell[0];
        const Scalar t1 = s[1] - cell[1];
        const auto parity = (static_cast<long long>(cell[0]) + static_cast<long long>(cell[1])) & 1LL;
        in_a = parity == 0 ? (t0 < side && t1 < side)
                           : (t0 >= Scalar(1) - side && t1 >= Scalar(1) - side);
        break;
      }
      case PartitionKind::random: {
        std::uint64_t h = mix64(p.seed ^ mix64(static_cast<std::uint64_t>(n)));
        for (int a = 0; a < g.dim(); ++a)
          h = mix64(h ^ static_cast<std::uint64_t>(static_cast<long long>(cell[a]) + (1LL << 40)));
        const Scalar u = Scalar(static_cast<double>(h >> 11) * 0x1.0p-53);
        in_a = u < p.fraction_at(n, center);
        break;
      }
      case PartitionKind::explicit_table: break;
    }
    chi[k] = in_a ? Scalar(1) : Scalar(0);
  }
  return chi;
}

/// Test functions used to probe weak convergence on the box: all monomials of
/// total degree <= order and cos(pi k.x) for integer vectors |k|_inf <= order.
/// Columns are test functions sampled on interior nodes.
template <typename Scalar>
Matrix<Scalar> test_dictionary(const Grid<Scalar>& g, int order) {
  using std::cos;
  using std::pow;
  if (order < 0) throw PreconditionError("dictionary order must be >= 0");
  const Scalar pi = std::numbers::pi_v<Scalar>;
  std::vector<std::function<Scalar(const Point<Scalar>&)>> fns;
  if (g.dim() == 1) {
    for (int a = 0; a <= order; ++a) fns.push_back([a](const Point<Scalar>& x) { return pow(x[0], a); });
    for (int k = 1; k <= order; ++k) fns.push_back([k, pi](const Point<Scalar>& x) { return cos(pi * k * x[0]); });
  } else {
    for (int a = 0; a <= order; ++a)
      for (int b = 0; a + b <= order; ++b)
        fns.push_back([a, b](const Point<Scalar>& x) { return pow(x[0], a) * pow(x[1], b); });
    for (int k0 = 0; k0 <= order; ++k0)
      for (int k1 = -order; k1 <= order; ++k1) {
        if (k0 == 0 && k1 <= 0) continue;  // constant already present; cos is even
        fns.push_back([k0, k1, pi](const Point<Scalar>& x) { return cos(pi * (k0 * x[0] + k1 * x[1])); });
      }
  }
  Matrix<Scalar> phi(g.interior_size(), static_cast<Index>(fns.size()));
  for (Index j = 0; j < phi.cols(); ++j) phi.col(j) = g.sample_interior(fns[static_cast<std::size_t>(j)]);
  return phi;
}

/// max_k |<a - b, phi_k>| over the test dictionary of the given order.
template <typename Scalar>
Scalar weak_gap(const Grid<Scalar>& g, const Vector<Scalar>& a, const Vector<Scalar>& b, int order) {
  if (a.size() != b.size()) throw PreconditionError("weak gap: fields live on different grids");
  const Vector<Scalar> diff = interior_values(g, Vector<Scalar>(a - b));
  const Matrix<Scalar> phi = test_dictionary(g, order);
  return (phi.transpose() * diff).cwiseAbs().maxCoeff() * g.weight();
}

/// Weak-* discrepancy between an indicator and its limit density.
template <typename Scalar>
Scalar weak_star_gap(const Grid<Scalar>& g, const Vector<Scalar>& chi, const Vector<Scalar>& X, int order) {
  return weak_gap(g, chi, X, order);
}

}  // namespace nlh
