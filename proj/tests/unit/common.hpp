#pragma once

#include <doctest.h>

#include "nlh/field.hpp"
#include "nlh/grid.hpp"
#include "nlh/kernel.hpp"
#include "nlh/operator.hpp"
#include "nlh/partition.hpp"
#include "../support/oracles.hpp"

namespace nlh::test {

inline KernelSet<double> tent_set(int dim = 1) {
  return {Kernel<double>::tent(0.2, dim, KernelLabel::J), Kernel<double>::tent(0.25, dim, KernelLabel::R),
          Kernel<double>::tent(0.3, dim, KernelLabel::G)};
}

inline KernelSet<double> constant_set(int dim = 1, double r_amplitude = 1.0) {
  return {Kernel<double>::constant(1.0, dim, KernelLabel::J), Kernel<double>::constant(r_amplitude, dim, KernelLabel::R),
          Kernel<double>::constant(1.0, dim, KernelLabel::G)};
}

inline Vector<double> ones(Index n) { return Vector<double>::Ones(n); }
inline Vector<double> zeros(Index n) { return Vector<double>::Zero(n); }
inline Vector<double> constant(Index n, double v) { return Vector<double>::Constant(n, v); }

inline Vector<double> stripes(const Grid<double>& g, int n, double theta = 0.5) {
  return indicator(PartitionFamily<double>::stripes(theta), n, g);
}

inline double max_abs(const Matrix<double>& a) { return a.size() ? a.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace nlh::test
