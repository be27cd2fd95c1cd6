#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <string>

#include "nlh/error.hpp"
#include "nlh/grid.hpp"

namespace nlh {

enum class KernelKind { constant, tent, gaussian_truncated, tabulated };
enum class NormMode { ambient, domain };
enum class KernelLabel { J, G, R };

inline const char* to_string(KernelKind k) {
  switch (k) {
    case KernelKind::constant: return "constant";
    case KernelKind::tent: return "tent";
    case KernelKind::gaussian_truncated: return "gaussian_truncated";
    case KernelKind::tabulated: return "tabulated";
  }
  return "?";
}

inline const char* to_string(KernelLabel l) {
  switch (l) {
    case KernelLabel::J: return "J";
    case KernelLabel::G: return "G";
    case KernelLabel::R: return "R";
  }
  return "?";
}

/// Symmetric nonnegative two-point kernel.
///
/// Analytic kinds are of convolution type and normalized to unit mass over
/// R^dim (ambient mode):
///  - constant: V = amplitude on the whole computational box (global support);
///  - tent: V = amplitude * c * (1 - |z|/delta)_+;
///  - gaussian_truncated: V = amplitude * c * (exp(-|z|^2/2s^2) - exp(-delta^2/2s^2))_+,
///    the Gaussian shifted to vanish on its truncation sphere and renormalized.
/// Tabulated kernels are dense node-indexed tables on a specific grid.
/// A domain-mode kernel additionally carries per-row scale factors.
template <typename Scalar>
class Kernel {
 public:
  static Kernel constant(Scalar amplitude, int dim, KernelLabel label = KernelLabel::J) {
    Kernel k(KernelKind::constant, dim, label);
    k.amplitude_ = amplitude;
    k.delta_ = std::numeric_limits<Scalar>::infinity();
    return k;
  }

  static Kernel tent(Scalar delta, int dim, KernelLabel label = KernelLabel::J, Scalar amplitude = Scalar(1)) {
    if (!(delta > Scalar(0))) throw ConfigError("tent kernel needs a positive support radius");
    Kernel k(KernelKind::tent, dim, label);
    k.delta_ = delta;
    k.amplitude_ = amplitude;
    const Scalar pi = std::numbers::pi_v<Scalar>;
    k.norm_ = dim == 1 ? Scalar(1) / delta : Scalar(3) / (pi * delta * delta);
    return k;
  }

  static Kernel gaussian_truncated(Scalar delta, Scalar sigma, int dim, KernelLabel label = KernelLabel::J,
                                   Scalar amplitude = Scalar(1)) {
    using std::erf;
    using std::exp;
    using std::sqrt;
    if (!(delta > Scalar(0)) || !(sigma > Scalar(0)))
      throw ConfigError("truncated gaussian needs positive radius and width");
    Kernel k(KernelKind::gaussian_truncated, dim, label);
    k.delta_ = delta;
    k.sigma_ = sigma;
    k.amplitude_ = amplitude;
    const Scalar pi = std::numbers::pi_v<Scalar>;
    const Scalar edge = exp(-delta * delta / (Scalar(2) * sigma * sigma));
    const Scalar mass = dim == 1
                            ? sigma * sqrt(Scalar(2) * pi) * erf(delta / (sigma * sqrt(Scalar(2)))) - Scalar(2) * delta * edge
                            : Scalar(2) * pi * sigma * sigma * (Scalar(1) - edge) - pi * delta * delta * edge;
    k.edge_ = edge;
    k.norm_ = Scalar(1) / mass;
    return k;
  }

  /// Node-indexed table over the ambient nodes of some grid.
  static Kernel tabulated(Matrix<Scalar> table, int dim, KernelLabel label = KernelLabel::J,
                          NormMode mode = NormMode::domain) {
    Kernel k(KernelKind::tabulated, dim, label);
    k.table_ = std::make_shared<const Matrix<Scalar>>(std::move(table));
    k.mode_ = mode;
    k.delta_ = std::numeric_limits<Scalar>::infinity();
    return k;
  }

  KernelKind kind() const { return kind_; }
  KernelLabel label() const { return label_; }
  NormMode norm_mode() const { return mode_; }
  int dim() const { return dim_; }
  Scalar amplitude() const { return amplitude_; }
  Scalar sigma() const { return sigma_; }
  /// Support radius; infinite for kernels supported on the whole box.
  Scalar support_radius() const { return delta_; }
  bool global_support() const { return kind_ == KernelKind::constant || kind_ == KernelKind::tabulated; }
  bool convolution_type() const { return kind_ != KernelKind::tabulated && !row_scale_; }
  bool has_row_scale() const { return static_cast<bool>(row_scale_); }
  const Vector<Scalar>* row_scale() const { return row_scale_.get(); }

  Kernel with_label(KernelLabel l) const {
    Kernel k = *this;
    k.label_ = l;
    return k;
  }

  /// Profile value at separation `z` for analytic kinds.
  Scalar profile(Scalar r) const {
    using std::exp;
    switch (kind_) {
      case KernelKind::constant: return amplitude_;
      case KernelKind::tent: return r < delta_ ? amplitude_ * norm_ * (Scalar(1) - r / delta_) : Scalar(0);
      case KernelKind::gaussian_truncated:
        return r < delta_ ? amplitude_ * norm_ * (exp(-r * r / (Scalar(2) * sigma_ * sigma_)) - edge_) : Scalar(0);
      case KernelKind::tabulated: break;
    }
    throw PreconditionError("tabulated kernels have no analytic profile");
  }

  /// Analytic evaluation at two points (row scaling is node-indexed and not applied here).
  template <typename P1, typename P2>
  Scalar evaluate(const P1& x, const P2& y) const {
    if (kind_ == KernelKind::tabulated) throw PreconditionError("tabulated kernels are evaluated by node index");
    return profile((x - y).norm());
  }

  /// Kernel value between ambient nodes `i` and `j` of `g`.
  Scalar operator()(const Grid<Scalar>& g, Index i, Index j) const {
    Scalar v;
    if (kind_ == KernelKind::tabulated) {
      if (i < 0 || j < 0 || i >= table_->rows() || j >= table_->cols())
        throw PreconditionError("tabulated kernel queried off-table at (" + std::to_string(i) + ", " +
                                std::to_string(j) + ")");
      v = (*table_)(i, j);
    } else if (kind_ == KernelKind::constant) {
      v = amplitude_;
    } else {
      v = profile((g.point(i) - g.point(j)).norm());
    }
    if (row_scale_) v *= (*row_scale_)[i];
    return v;
  }

  /// Copy with per-row scale factors and domain normalization mode.
  Kernel with_row_scale(Vector<Scalar> scale) const {
    Kernel k = *this;
    k.row_scale_ = std::make_shared<const Vector<Scalar>>(std::move(scale));
    k.mode_ = NormMode::domain;
    return k;
  }

  Kernel with_norm_mode(NormMode m) const {
    Kernel k = *this;
    k.mode_ = m;
    return k;
  }

  /// Checks that node-indexed data (tables, row scales) fit `g`.
  void check_grid(const Grid<Scalar>& g) const {
    if (table_ && (table_->rows() < g.size() || table_->cols() < g.size()))
      throw PreconditionError("tabulated kernel covers " + std::to_string(table_->rows()) + " nodes, grid has " +
                              std::to_string(g.size()));
    if (row_scale_ && row_scale_->size() != g.size())
      throw PreconditionError("domain-normalized kernel was built for a different grid");
  }

 private:
  Kernel(KernelKind kind, int dim, KernelLabel label) : kind_(kind), label_(label), dim_(dim) {
    if (dim != 1 && dim != 2) throw ConfigError("kernel dimension must be 1 or 2");
    mode_ = kind == KernelKind::constant ? NormMode::domain : NormMode::ambient;
  }

  KernelKind kind_;
  KernelLabel label_;
  NormMode mode_ = NormMode::ambient;
  int dim_;
  Scalar amplitude_ = Scalar(1);
  Scalar delta_ = Scalar(0);
  Scalar sigma_ = Scalar(0);
  Scalar norm_ = Scalar(1);
  Scalar edge_ = Scalar(0);
  std::shared_ptr<const Matrix<Scalar>> table_;
  std::shared_ptr<const Vector<Scalar>> row_scale_;
};

/// The three kernels of the model: J (A to A), R (A to B and back), G (B to B).
template <typename Scalar>
struct KernelSet {
  Kernel<Scalar> J;
  Kernel<Scalar> R;
  Kernel<Scalar> G;

  Scalar max_support_radius() const {
    Scalar r = Scalar(0);
    for (const auto* k : {&J, &R, &G})
      if (!k->global_support()) r = std::max(r, k->support_radius());
    return r;
  }
};

template <typename Scalar>
struct ValidationReport {
  bool nonnegative = true;
  bool diagonal_positive = true;
  bool symmetric = true;
  bool normalized = true;
  Scalar negativity = Scalar(0);      ///< |most negative value|
  Scalar diagonal_min = Scalar(0);    ///< smallest V(x,x)
  Scalar asymmetry = Scalar(0);       ///< max |V(x,y) - V(y,x)|
  Scalar normalization_error = Scalar(0);  ///< max_x |quadrature mass - 1|
  Scalar worst_violation = Scalar(0);
  /// V >= positivity_floor whenever |x - y| <= positivity_radius.
  Scalar positivity_floor = Scalar(0);
  Scalar positivity_radius = Scalar(0);

  bool passed() const { return nonnegative && diagonal_positive && symmetric && normalized; }
};

/// Quadrature mass sum_y V(x_k, y) h^d for every interior node, over the
/// padded lattice (`over_ambient`) or over the box only.
template <typename Scalar>
Vector<Scalar> row_masses(const Kernel<Scalar>& k, const Grid<Scalar>& g, bool over_ambient) {
  k.check_grid(g);
  Vector<Scalar> mass(g.interior_size());
  for (Index i = 0; i < g.interior_size(); ++i) {
    const Index a = g.ambient_index(i);
    Scalar s(0);
    if (over_ambient) {
      for (Index b = 0; b < g.size(); ++b) s += k(g, a, b);
    } else {
      for (Index b : g.interior_nodes()) s += k(g, a, b);
    }
    mass[i] = s * g.weight();
  }
  return mass;
}

/// Checks nonnegativity, V(x,x) > 0, symmetry and unit mass on the grid.
/// Ambient-mode kernels are integrated over the padded lattice, domain-mode
/// kernels over the box.
template <typename Scalar>
ValidationReport<Scalar> validate_hypotheses(const Kernel<Scalar>& k, const Grid<Scalar>& g, Scalar tol) {
  using std::abs;
  using std::max;
  if (!(tol > Scalar(0))) throw PreconditionError("validation tolerance must be positive");
  k.check_grid(g);
  ValidationReport<Scalar> r;
  Scalar min_value = std::numeric_limits<Scalar>::infinity();
  Scalar min_diag = std::numeric_limits<Scalar>::infinity();
  for (Index a = 0; a < g.size(); ++a) {
    min_diag = std::min(min_diag, k(g, a, a));
    for (Index b = 0; b < g.size(); ++b) {
      const Scalar v = k(g, a, b);
      min_value = std::min(min_value, v);
      if (b > a) r.asymmetry = max(r.asymmetry, abs(v - k(g, b, a)));
    }
  }
  r.negativity = min_value < Scalar(0) ? -min_value : Scalar(0);
  r.diagonal_min = min_diag;
  r.nonnegative = r.negativity == Scalar(0);
  r.diagonal_positive = min_diag > Scalar(0);
  r.symmetric = r.asymmetry == Scalar(0);

  const Vector<Scalar> mass = row_masses(k, g, k.norm_mode() == NormMode::ambient);
  r.normalization_error = (mass.array() - Scalar(1)).abs().maxCoeff();
  r.normalized = r.normalization_error <= tol;

  r.worst_violation = max(max(r.negativity, r.asymmetry), r.normalization_error);
  if (!r.diagonal_positive) r.worst_violation = max(r.worst_violation, abs(min_diag));

  if (k.kind() == KernelKind::tabulated || k.has_row_scale()) {
    r.positivity_radius = Scalar(0);
    r.positivity_floor = r.diagonal_positive ? min_diag : Scalar(0);
  } else if (k.global_support()) {
    r.positivity_radius = std::numeric_limits<Scalar>::infinity();
    r.positivity_floor = k.amplitude();
  } else {
    r.positivity_radius = k.support_radius() / Scalar(2);
    r.positivity_floor = k.profile(r.positivity_radius);
  }
  return r;
}

/// Rescales every row so that the box quadrature mass is exactly one.
/// The result is generally not symmetric.
template <typename Scalar>
Kernel<Scalar> normalize_on_domain(const Kernel<Scalar>& k, const Grid<Scalar>& g) {
  const Vector<Scalar> mass = row_masses(k, g, false);
  Vector<Scalar> scale = Vector<Scalar>::Ones(g.size());
  for (Index i = 0; i < g.interior_size(); ++i) {
    if (!(mass[i] > Scalar(0)))
      throw SingularError("kernel has zero mass over the box at interior node " + std::to_string(i));
    scale[g.ambient_index(i)] = Scalar(1) / mass[i];
  }
  if (k.has_row_scale()) scale = scale.cwiseProduct(*k.row_scale());
  return k.with_row_scale(std::move(scale));
}

/// max |V(x,y) - V(y,x)| over pairs of interior nodes.
template <typename Scalar>
Scalar asymmetry(const Kernel<Scalar>& k, const Grid<Scalar>& g) {
  using std::abs;
  Scalar worst(0);
  for (Index a : g.interior_nodes())
    for (Index b : g.interior_nodes()) worst = std::max(worst, abs(k(g, a, b) - k(g, b, a)));
  return worst;
}

}  // namespace nlh
