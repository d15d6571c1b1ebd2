#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "bmjb/model.hpp"
#include "bmjb/stats.hpp"
#include "generators.hpp"

using namespace bmjb;
using doctest::Approx;

namespace {
const Interval kUnit(0.0, 1.0);
}

TEST_CASE("interval rejects empty or non-finite ranges") {
  CHECK_THROWS_AS(Interval(1.0, 1.0), ValidationError);
  CHECK_THROWS_AS(Interval(2.0, 1.0), ValidationError);
  CHECK_THROWS_AS(Interval(0.0, INFINITY), ValidationError);
  const Interval I(-1.0, 3.0);
  CHECK(I.length() == 4.0);
  CHECK(I.center() == 1.0);
}

TEST_CASE("reflect examples") {
  CHECK(reflect(0.3, kUnit) == Approx(0.7).epsilon(1e-15));
  CHECK(reflect(0.5, kUnit) == 0.5);
  CHECK(reflect(0.0, Interval(-1.0, 3.0)) == 2.0);
  CHECK_THROWS_AS(reflect(1.5, kUnit), DomainError);
  CHECK_THROWS_AS(reflect(-1e-9, kUnit), DomainError);
}

TEST_CASE("reflect is an involution on the closed interval") {
  gen::check_cases(500, 11, [](gen::Source& g) {
    const Interval I = g.interval();
    const double x = I.a() + I.length() * g.uniform(0.0, 1.0);
    const double r = reflect(x, I);
    CHECK(I.contains_closed(r));
    CHECK(reflect(r, I) == Approx(x).epsilon(1e-14).scale(I.length()));
  });
}

TEST_CASE("admissibility: boundary and outside points are rejected") {
  CHECK_THROWS_AS(JumpMeasure::dirac(kUnit, 1.0), ValidationError);
  CHECK_THROWS_AS(JumpMeasure::dirac(kUnit, 0.0), ValidationError);
  CHECK_THROWS_AS(JumpMeasure::mixture(kUnit, {{0.3, 0.5}, {1.2, 0.5}}), ValidationError);
  CHECK_THROWS_AS(JumpMeasure::mixture(kUnit, {{0.3, 0.5}, {0.7, 0.4}}), ValidationError);
  CHECK_THROWS_AS(JumpMeasure::mixture(kUnit, {{0.3, 1.5}, {0.7, -0.5}}), ValidationError);
  CHECK_THROWS_AS(JumpMeasure::grid(kUnit, {1.0, 2.0}), ValidationError);
  CHECK_THROWS_AS(JumpMeasure::grid(kUnit, {0.0, 0.0}, true), ValidationError);
  CHECK_THROWS_AS(JumpMeasure::grid(kUnit, {}, true), ValidationError);
  CHECK_NOTHROW(JumpMeasure::grid(kUnit, {1.0, 1.0 + 1e-13}));
}

TEST_CASE("generated measures are normalized and supported inside the interval") {
  gen::check_cases(200, 12, [](gen::Source& g) {
    const Interval I = g.interval();
    const JumpMeasure nu = g.measure(I);
    CAPTURE(nu.kind_name());
    CHECK(nu.cdf(I.b()) == Approx(1.0).epsilon(1e-12));
    CHECK(nu.cdf(I.a()) == Approx(0.0).epsilon(1e-12));
    double total = 0.0;
    for (const Atom& node : nu.quadrature()) total += node.weight;
    CHECK(total == Approx(1.0).epsilon(1e-12));
    if (nu.kind_name() == "quasistationary") {
      CHECK(nu.support_distance() == 0.0);
    } else {
      CHECK(nu.support_min() > I.a());
      CHECK(nu.support_max() < I.b());
      CHECK(nu.support_distance() > 0.0);
    }
    CHECK(nu.support_distance() ==
          Approx(std::min(nu.support_min() - I.a(), I.b() - nu.support_max())).epsilon(1e-12));
  });
}

TEST_CASE("samples lie in the support hull") {
  gen::check_cases(60, 13, [](gen::Source& g) {
    const Interval I = g.interval();
    const JumpMeasure nu = g.measure(I);
    RandomStream rng(7, static_cast<std::uint64_t>(g.integer(0, 1000)));
    for (int i = 0; i < 200; ++i) {
      const double x = nu.sample(rng);
      CHECK(x >= nu.support_min());
      CHECK(x <= nu.support_max());
    }
  });
}

TEST_CASE("grid support distance is measured to the outer cell edges") {
  const JumpMeasure nu = JumpMeasure::grid(kUnit, {0.0, 1.0, 1.0, 1.0, 0.0}, true);
  CHECK(nu.support_min() == Approx(0.2));
  CHECK(nu.support_max() == Approx(0.8));
  CHECK(nu.support_distance() == Approx(0.2));
}

TEST_CASE("Dirac sampling is deterministic") {
  const JumpMeasure nu = JumpMeasure::dirac(kUnit, 0.5);
  RandomStream rng(1, 0);
  for (int i = 0; i < 100; ++i) CHECK(nu.sample(rng) == 0.5);
}

TEST_CASE("quasistationary samples have mean one half") {
  const JumpMeasure nu = JumpMeasure::quasistationary(kUnit);
  RandomStream rng(3, 0);
  std::vector<double> xs(200000);
  for (double& x : xs) x = nu.sample(rng);
  const MeanEstimate m = mean_estimate(xs);
  CHECK(std::abs(m.mean - 0.5) < 4.0 * m.stderr_);
  // density (pi/2) sin(pi x): variance 1/4 - 2/pi^2
  double var = 0.0;
  for (double x : xs) var += (x - m.mean) * (x - m.mean);
  var /= static_cast<double>(xs.size() - 1);
  CHECK(var == Approx(0.25 - 2.0 / (std::numbers::pi * std::numbers::pi)).epsilon(0.02));
}

TEST_CASE("mixture frequencies pass chi-square at 1e5 draws") {
  const JumpMeasure nu = JumpMeasure::mixture(kUnit, {{0.3, 0.5}, {0.7, 0.5}});
  RandomStream rng(5, 0);
  std::vector<double> counts(2, 0.0);
  for (int i = 0; i < 100000; ++i) counts[nu.sample(rng) < 0.5 ? 0 : 1] += 1.0;
  const TestResult r = chi_square_test(counts, {0.5, 0.5});
  CHECK(r.p_value > 0.01);
}

TEST_CASE("cdf and quantile are inverse on generated measures") {
  gen::check_cases(100, 14, [](gen::Source& g) {
    const Interval I = g.interval();
    const JumpMeasure nu = g.coin() ? g.grid(I) : JumpMeasure::quasistationary(I);
    for (int k = 0; k < 20; ++k) {
      const double q = g.uniform(0.01, 0.99);
      CHECK(nu.cdf(nu.quantile(q)) == Approx(q).epsilon(1e-9));
    }
  });
}

TEST_CASE("quantize examples") {
  const JumpMeasure d = quantize(JumpMeasure::dirac(kUnit, 0.5), 17);
  REQUIRE(std::holds_alternative<JumpMeasure::Dirac>(d.kind()));
  CHECK(std::get<JumpMeasure::Dirac>(d.kind()).point == 0.5);

  const JumpMeasure uniform = JumpMeasure::grid(kUnit, {0, 1, 1, 1, 0}, true);
  const JumpMeasure q = quantize(uniform, 3);
  REQUIRE(std::holds_alternative<JumpMeasure::Mixture>(q.kind()));
  const auto& atoms = std::get<JumpMeasure::Mixture>(q.kind()).atoms;
  REQUIRE(atoms.size() == 3);
  const double expected[] = {0.3, 0.5, 0.7};
  for (int i = 0; i < 3; ++i) {
    CHECK(atoms[static_cast<std::size_t>(i)].point == Approx(expected[i]).epsilon(1e-12));
    CHECK(atoms[static_cast<std::size_t>(i)].weight == Approx(1.0 / 3.0).epsilon(1e-12));
  }
  CHECK_THROWS_AS(quantize(uniform, 0), DomainError);
}

TEST_CASE("quantization error is bounded by the support width over n") {
  gen::check_cases(60, 15, [](gen::Source& g) {
    const Interval I = g.interval();
    const JumpMeasure nu = g.measure(I);
    const int n = g.integer(1, 64);
    const double width = nu.support_max() - nu.support_min();
    CHECK(wasserstein1(quantize(nu, n), nu) <= width / n + 1e-9 * I.length());
  });
}

TEST_CASE("truncation conditions on the inner region") {
  const JumpMeasure uniform = JumpMeasure::grid(kUnit, {0, 1, 1, 1, 0}, true);
  const JumpMeasure t = truncate(uniform, 0.25);
  // Exact at cell edges: the conditioned law puts 0.15 / 0.5 below 0.4.
  CHECK(t.cdf(0.2) == Approx(0.0).epsilon(1e-12));
  CHECK(t.cdf(0.4) == Approx(0.3).epsilon(1e-12));
  CHECK(t.cdf(0.6) == Approx(0.7).epsilon(1e-12));
  CHECK(t.cdf(0.8) == Approx(1.0).epsilon(1e-12));
  const JumpMeasure m = truncate(JumpMeasure::mixture(kUnit, {{0.1, 0.2}, {0.5, 0.4}, {0.6, 0.4}}), 0.2);
  CHECK(m.cdf(0.55) == Approx(0.5).epsilon(1e-12));
  CHECK_THROWS_AS(truncate(JumpMeasure::dirac(kUnit, 0.1), 0.2), ValidationError);
}

TEST_CASE("reflected measures mirror the cdf") {
  gen::check_cases(60, 16, [](gen::Source& g) {
    const Interval I = g.interval();
    const JumpMeasure nu = g.coin() ? g.grid(I) : JumpMeasure::quasistationary(I);
    const JumpMeasure r = nu.reflected();
    const double x = g.point(I);
    CHECK(r.cdf(x) == Approx(1.0 - nu.cdf(reflect(x, I))).epsilon(1e-10));
  });
  CHECK(JumpMeasure::quasistationary(kUnit).is_symmetric());
  CHECK_FALSE(JumpMeasure::dirac(kUnit, 0.3).is_symmetric());
}

TEST_CASE("random streams are reproducible and index-separated") {
  RandomStream a(42, 7), b(42, 7), c(42, 8);
  bool differs = false;
  for (int i = 0; i < 1000; ++i) {
    const double u = a.uniform();
    CHECK(u == b.uniform());
    CHECK(u > 0.0);
    CHECK(u < 1.0);
    differs |= u != c.uniform();
  }
  CHECK(differs);
  RandomStream n1(1, 0), n2(1, 0);
  for (int i = 0; i < 100; ++i) CHECK(n1.normal() == n2.normal());
}

TEST_CASE("streams for neighbouring indices are uncorrelated") {
  const int n = 20000;
  double sxy = 0.0, sx = 0.0, sy = 0.0, sxx = 0.0, syy = 0.0;
  for (int i = 0; i < n; ++i) {
    RandomStream a(9, static_cast<std::uint64_t>(i)), b(9, static_cast<std::uint64_t>(i) + 1);
    const double x = a.uniform(), y = b.uniform();
    sx += x; sy += y; sxy += x * y; sxx += x * x; syy += y * y;
  }
  const double cov = sxy / n - (sx / n) * (sy / n);
  const double corr = cov / std::sqrt((sxx / n - sx * sx / n / n) * (syy / n - sy * sy / n / n));
  CHECK(std::abs(corr) < 4.0 / std::sqrt(n));
}

TEST_CASE("run config validation") {
  RunConfig config;
  CHECK_NOTHROW(config.validate(Interval(-1.0, 1.0)));
  config.replicates = 0;
  CHECK_THROWS_AS(config.validate(kUnit), ValidationError);
  config.replicates = 1;
  config.horizon = 0.0;
  CHECK_THROWS_AS(config.validate(kUnit), ValidationError);
  config.horizon = 1.0;
  config.initial = 1.0;
  CHECK_THROWS_AS(config.validate(kUnit), ValidationError);
  config.initial = JumpMeasure::dirac(Interval(0.0, 2.0), 1.0);
  CHECK_THROWS_AS(config.validate(kUnit), ValidationError);
}
