#include <cmath>
#include <filesystem>
#include <fstream>

#include "common.hpp"
#include "nlh/kernel_io.hpp"

using namespace nlh;

TEST_CASE("constant kernel evaluates to its amplitude") {
  const auto k = Kernel<double>::constant(1.0, 1);
  const auto g = build_grid(1, 8);
  for (Index a = 0; a < g.size(); ++a)
    for (Index b = 0; b < g.size(); ++b) CHECK(k(g, a, b) == 1.0);
  CHECK(k.norm_mode() == NormMode::domain);
}

TEST_CASE("tent peak") {
  const auto k = Kernel<double>::tent(0.25, 1);
  Point<double> x(1);
  x << 0.4;
  CHECK(k.evaluate(x, x) == doctest::Approx(4.0));
  const auto k2 = Kernel<double>::tent(0.25, 2);
  Point<double> y(2);
  y << 0.3, 0.3;
  CHECK(k2.evaluate(y, y) == doctest::Approx(3.0 / (M_PI * 0.0625)));
}

TEST_CASE("analytic kernels are exactly symmetric") {
  const auto g = build_grid(2, 10, 3);
  for (const auto& k : {Kernel<double>::tent(0.3, 2), Kernel<double>::gaussian_truncated(0.3, 0.1, 2),
                        Kernel<double>::constant(2.0, 2)}) {
    for (Index a = 0; a < g.size(); a += 7)
      for (Index b = 0; b < g.size(); b += 5) CHECK(k(g, a, b) == k(g, b, a));
  }
}

TEST_CASE("continuous normalization of the analytic profiles") {
  // Radial integral of the profile against an independent fine rule.
  for (int dim : {1, 2}) {
    for (const auto& k : {Kernel<double>::tent(0.25, dim), Kernel<double>::gaussian_truncated(0.25, 0.08, dim)}) {
      const int steps = 200000;
      const double dr = k.support_radius() / steps;
      double s = 0.0;
      for (int i = 0; i < steps; ++i) {
        const double r = (i + 0.5) * dr;
        s += k.profile(r) * (dim == 1 ? 2.0 : 2.0 * M_PI * r) * dr;
      }
      CHECK(s == doctest::Approx(1.0).epsilon(1e-8));
    }
  }
}

TEST_CASE("hypotheses for the constant kernel in domain mode") {
  const auto g = build_grid(1, 32);
  const auto r = validate_hypotheses(Kernel<double>::constant(1.0, 1), g, 1e-3);
  CHECK(r.passed());
  CHECK(r.worst_violation == doctest::Approx(0.0));
}

TEST_CASE("tent normalization error is second order") {
  const double delta = 0.25;
  double prev = 0.0;
  for (Index m : {64, 128, 256}) {
    const auto g = build_grid(1, m, pad_cells_for(delta, m));
    const auto r = validate_hypotheses(Kernel<double>::tent(delta, 1), g, 1e-3);
    CHECK(r.passed());
    CHECK(r.asymmetry == 0.0);
    CHECK(r.negativity == 0.0);
    // Lattice sum of the tent at offsets j h, |j| h < delta.
    const double h = 1.0 / double(m);
    const int K = int(std::floor(delta / h - 1e-9));
    double s = h / delta;
    for (int j = 1; j <= K; ++j) s += 2.0 * (1.0 - j * h / delta) * h / delta;
    CHECK(r.normalization_error == doctest::Approx(std::abs(s - 1.0)).epsilon(1e-9));
    if (prev > 0.0) CHECK(r.normalization_error <= prev / 3.0);
    prev = r.normalization_error;
  }
}

TEST_CASE("missing padding shows up as lost mass") {
  const auto g = build_grid(1, 64);
  const auto r = validate_hypotheses(Kernel<double>::tent(0.25, 1), g, 1e-3);
  CHECK_FALSE(r.normalized);
  CHECK(r.normalization_error > 0.1);
}

TEST_CASE("negative tabulated entry") {
  const auto g = build_grid(1, 4);
  Matrix<double> t = Matrix<double>::Constant(4, 4, 1.0);
  t(1, 2) = t(2, 1) = -0.3;
  const auto r = validate_hypotheses(Kernel<double>::tabulated(t, 1), g, 1e-3);
  CHECK_FALSE(r.nonnegative);
  CHECK(r.negativity == doctest::Approx(0.3));
}

TEST_CASE("asymmetric and non-positive-diagonal tables") {
  const auto g = build_grid(1, 4);
  Matrix<double> t = Matrix<double>::Constant(4, 4, 1.0);
  t(0, 3) = 1.5;
  t(2, 2) = 0.0;
  const auto r = validate_hypotheses(Kernel<double>::tabulated(t, 1), g, 1e-3);
  CHECK_FALSE(r.symmetric);
  CHECK(r.asymmetry == doctest::Approx(0.5));
  CHECK_FALSE(r.diagonal_positive);
}

TEST_CASE("domain normalization") {
  SUBCASE("constant kernel is already row-stochastic") {
    const auto g = build_grid(1, 4);
    const auto k = normalize_on_domain(Kernel<double>::constant(1.0, 1), g);
    for (Index i = 0; i < 4; ++i) CHECK((*k.row_scale())[i] == doctest::Approx(1.0));
  }
  SUBCASE("boundary rows are scaled up") {
    const auto g = build_grid(1, 64);
    const auto k = normalize_on_domain(Kernel<double>::tent(0.25, 1), g);
    const Index near = 8;  // x = 1/8 + h/2
    CHECK((*k.row_scale())[near] > 1.0);
    const auto mass = row_masses(k, g, false);
    CHECK((mass.array() - 1.0).abs().maxCoeff() < 1e-13);
    CHECK(asymmetry(k, g) > 0.0);
  }
}

TEST_CASE("bad kernel parameters") {
  CHECK_THROWS_AS(Kernel<double>::tent(0.0, 1), ConfigError);
  CHECK_THROWS_AS(Kernel<double>::gaussian_truncated(0.2, -1.0, 1), ConfigError);
  CHECK_THROWS_AS(Kernel<double>::tent(0.2, 3), ConfigError);
  const auto k = Kernel<double>::tabulated(Matrix<double>::Ones(3, 3), 1);
  CHECK_THROWS_AS(k.check_grid(build_grid(1, 4)), PreconditionError);
}

TEST_CASE("tabulated kernel file round trip") {
  const auto g = build_grid(1, 6);
  Matrix<double> t(6, 6);
  for (Index i = 0; i < 6; ++i)
    for (Index j = 0; j < 6; ++j) t(i, j) = 1.0 + 0.1 * double((i - j) * (i - j));
  const auto k = Kernel<double>::tabulated(t, 1);
  const auto path = (std::filesystem::temp_directory_path() / "nlh_kernel_rt.csv").string();
  save_tabulated_kernel(path, k, g);
  const auto back = load_tabulated_kernel<double>(path, g.size(), 1, KernelLabel::R);
  for (Index i = 0; i < 6; ++i)
    for (Index j = 0; j < 6; ++j) CHECK(back(g, i, j) == t(i, j));
  CHECK(back.label() == KernelLabel::R);
  std::filesystem::remove(path);
}

TEST_CASE("malformed kernel tables") {
  const auto path = (std::filesystem::temp_directory_path() / "nlh_kernel_bad.csv").string();
  {
    std::ofstream(path) << "x_index,y_index,value\n0,9,1.0\n";
  }
  CHECK_THROWS_AS(load_tabulated_kernel<double>(path, 4, 1, KernelLabel::J), ConfigError);
  {
    std::ofstream(path) << "x_index,y_index,value\n0,1,abc\n";
  }
  CHECK_THROWS_AS(load_tabulated_kernel<double>(path, 4, 1, KernelLabel::J), ConfigError);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_tabulated_kernel<double>(path, 4, 1, KernelLabel::J), ConfigError);
}

TEST_CASE("long double kernels") {
  const auto g = build_grid<long double>(1, 16, 4);
  const auto r = validate_hypotheses(Kernel<long double>::tent(0.25L, 1), g, 1e-3L);
  CHECK(r.passed());
}
