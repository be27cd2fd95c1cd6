#include <cmath>

#include "common.hpp"

using namespace nlh;

namespace {
Vector<double> vec(std::initializer_list<double> v) {
  Vector<double> out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}
}  // namespace

TEST_CASE("stripes on four cells") {
  const auto g = build_grid(1, 4);
  CHECK(test::stripes(g, 1) == vec({1, 1, 0, 0}));
  CHECK(test::stripes(g, 2) == vec({1, 0, 1, 0}));
  for (int n : {1, 2, 3, 7}) CHECK(test::stripes(g, n, 1.0) == test::ones(4));
  for (int n : {1, 2, 3, 7}) CHECK(test::stripes(g, n, 0.0) == test::zeros(4));
}

TEST_CASE("stripes volume fraction") {
  const auto g = build_grid(1, 256);
  for (int n : {2, 4, 8, 16, 32}) CHECK(mean(g, test::stripes(g, n, 0.25)) == doctest::Approx(0.25));
}

TEST_CASE("checkerboard volume fraction and 2D requirement") {
  const auto g = build_grid(2, 32);
  PartitionFamily<double> p;
  p.kind = PartitionKind::checkerboard;
  p.profile = [](const Point<double>&) { return 0.25; };
  CHECK(mean(g, indicator(p, 4, g)) == doctest::Approx(0.25));
  CHECK_THROWS_AS(indicator(p, 2, build_grid(1, 8)), ConfigError);
}

TEST_CASE("random partitions are seeded") {
  const auto g = build_grid(2, 32);
  PartitionFamily<double> p;
  p.kind = PartitionKind::random;
  p.seed = 5;
  const auto a = indicator(p, 8, g);
  CHECK(a == indicator(p, 8, g));
  p.seed = 6;
  CHECK(a != indicator(p, 8, g));
  // 64 cells, each in A with probability 1/2.
  CHECK(std::abs(mean(g, a) - 0.5) < 0.25);
}

TEST_CASE("fraction schedules") {
  auto p = PartitionFamily<double>::stripes(1.0, FractionSchedule::vanishing);
  Point<double> x(1);
  x << 0.3;
  CHECK(p.fraction_at(4, x) == doctest::Approx(0.25));
  CHECK(p.limit_at(x) == 0.0);
  p.schedule = FractionSchedule::saturating;
  CHECK(p.fraction_at(4, x) == doctest::Approx(0.75));
  CHECK(p.limit_at(x) == 1.0);
}

TEST_CASE("explicit partitions") {
  const auto g = build_grid(1, 4);
  PartitionFamily<double> p;
  p.kind = PartitionKind::explicit_table;
  p.explicit_limit = [](const Point<double>&) { return 0.5; };
  p.table[2] = vec({1, 0, 0, 1});
  CHECK(indicator(p, 2, g) == vec({1, 0, 0, 1}));
  CHECK_THROWS_AS(indicator(p, 3, g), ConfigError);
  p.table[3] = vec({1, 0.5, 0, 1});
  CHECK_THROWS_AS(indicator(p, 3, g), ConfigError);
  CHECK_THROWS_AS(indicator(p, 0, g), PreconditionError);
}

TEST_CASE("weak gap basics") {
  const auto g = build_grid(1, 64);
  const Vector<double> half = test::constant(64, 0.5);
  CHECK(weak_star_gap(g, half, half, 3) == 0.0);
  CHECK(weak_star_gap(g, test::ones(64), test::zeros(64), 0) == doctest::Approx(1.0));
}

TEST_CASE("stripe weak gaps against closed-form integrals") {
  // Monomial x^a integrated against chi - 1/2 over each period of length 1/n,
  // plus cos(pi k x), done exactly.
  const auto exact = [](int n, int order) {
    double worst = 0.0;
    for (int a = 0; a <= order; ++a) {
      double s = 0.0;
      for (int j = 0; j < n; ++j) {
        const double x0 = double(j) / n, x1 = (j + 0.5) / n, x2 = (j + 1.0) / n;
        const auto F = [a](double x) { return std::pow(x, a + 1) / (a + 1); };
        s += 0.5 * (F(x1) - F(x0)) - 0.5 * (F(x2) - F(x1));
      }
      worst = std::max(worst, std::abs(s));
    }
    for (int k = 1; k <= order; ++k) {
      double s = 0.0;
      for (int j = 0; j < n; ++j) {
        const double x0 = double(j) / n, x1 = (j + 0.5) / n, x2 = (j + 1.0) / n;
        const auto F = [k](double x) { return std::sin(M_PI * k * x) / (M_PI * k); };
        s += 0.5 * (F(x1) - F(x0)) - 0.5 * (F(x2) - F(x1));
      }
      worst = std::max(worst, std::abs(s));
    }
    return worst;
  };
  const auto g = build_grid(1, 1024);
  const Vector<double> X = test::constant(g.size(), 0.5);
  double prev = INFINITY;
  for (int n : {2, 4, 8, 16}) {
    const double gap = weak_star_gap(g, test::stripes(g, n), X, 3);
    CHECK(gap == doctest::Approx(exact(n, 3)).epsilon(2e-3));
    CHECK(gap < prev);
    prev = gap;
  }
}

TEST_CASE("dictionary shape") {
  CHECK(test_dictionary(build_grid(1, 8), 3).cols() == 7);
  CHECK(test_dictionary(build_grid(2, 8), 2).cols() == 6 + 12);
  CHECK_THROWS_AS(test_dictionary(build_grid(1, 8), -1), PreconditionError);
}
