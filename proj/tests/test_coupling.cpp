#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "bmjb/coupling.hpp"
#include "bmjb/parallel.hpp"
#include "bmjb/process.hpp"
#include "generators.hpp"

using namespace bmjb;
using doctest::Approx;

namespace {

const Interval kUnit(0.0, 1.0);
constexpr double kPi = std::numbers::pi;
const JumpMeasure kCentre = JumpMeasure::dirac(kUnit, 0.5);

std::vector<double> times_of(const std::vector<CouplingRecord>& records) {
  std::vector<double> out;
  out.reserve(records.size());
  for (const CouplingRecord& r : records) out.push_back(r.time);
  return out;
}

}  // namespace

TEST_CASE("normalize_pair examples") {
  const NormalizedPair ordered = normalize_pair(0.55, 0.45, kCentre);
  CHECK(ordered.x == 0.45);
  CHECK(ordered.y == 0.55);
  CHECK_FALSE(ordered.reflected);

  const NormalizedPair mirrored = normalize_pair(0.2, 0.3, kCentre);
  CHECK(mirrored.x == Approx(0.7).epsilon(1e-15));
  CHECK(mirrored.y == Approx(0.8).epsilon(1e-15));
  CHECK(mirrored.reflected);

  CHECK_THROWS_AS(normalize_pair(0.1, 0.9, kCentre), PreconditionError);
  CHECK_THROWS_AS(normalize_pair(0.0, 0.5, kCentre), DomainError);
}

TEST_CASE("reflection carries an asymmetric jump law along") {
  const JumpMeasure nu = JumpMeasure::dirac(kUnit, 0.4);
  const NormalizedPair p = normalize_pair(0.35, 0.45, nu);
  CHECK(p.reflected);
  CHECK(p.x == Approx(0.55));
  CHECK(p.y == Approx(0.65));
  CHECK(std::get<JumpMeasure::Dirac>(p.nu.kind()).point == Approx(0.6));
}

TEST_CASE("the symmetric interval has half the length for every start") {
  for (double x : {0.1, 0.25, 0.49}) {
    const auto [l, r] = symmetric_interval(kUnit, x);
    CHECK(r - l == Approx(0.5).epsilon(1e-15));
    CHECK(l == Approx(-(1.0 - 2.0 * x) / 2.0));
  }
  gen::check_cases(100, 81, [](gen::Source& g) {
    const Interval I = g.interval();
    const double x = I.a() + 0.5 * I.length() * g.uniform(0.01, 1.0);
    const auto [l, r] = symmetric_interval(I, x);
    CHECK(r - l == Approx(0.5 * I.length()).epsilon(1e-12));
    CHECK(l <= 0.0);
    CHECK(r > 0.0);
  });
  RandomStream rng(1, 0);
  CHECK(symmetric_coupling_time(kUnit, 0.5, rng) == 0.0);
  CHECK_THROWS_AS(symmetric_interval(kUnit, 0.6), DomainError);
}

TEST_CASE("symmetric coupling times have mean and tail of the half-length interval") {
  const std::size_t n = 1000000;
  const std::vector<double> times = parallel_map(n, [](std::size_t i) {
    RandomStream rng(82, i);
    return symmetric_coupling_time(kUnit, 0.45, rng);
  });
  const MeanEstimate m = mean_estimate(times);
  // Exit of (-0.05, 0.45) from 0 has mean 0.05 * 0.45.
  CHECK(std::abs(m.mean - 0.0225) < 4.0 * m.stderr_);
  const TailFit fit = fit_tail_exponent(times, kTailLow, kTailHigh);
  CHECK(fit.rate == Approx(2.0 * kPi * kPi).epsilon(0.05));
}

TEST_CASE("staged sampler: coincident and already symmetric pairs") {
  RandomStream rng(83, 0);
  const CouplingRecord same = staged_coupling_sample(0.6, 0.6, kCentre, rng);
  CHECK(same.time == 0.0);
  CHECK(same.stages.empty());

  for (int i = 0; i < 50; ++i) {
    const CouplingRecord r = staged_coupling_sample(0.45, 0.55, kCentre, rng);
    REQUIRE(r.stages.size() == 1);
    CHECK(r.stages[0].phase == CouplingPhase::symmetric);
    CHECK(r.stages[0].left == Approx(-0.05));
    CHECK(r.stages[0].right == Approx(0.45));
    CHECK(r.time == r.stages[0].duration);
  }
}

TEST_CASE("stage intervals for the pair (0.50, 0.58)") {
  RandomStream rng(84, 0);
  bool seen_b = false, seen_c = false;
  for (int i = 0; i < 2000; ++i) {
    const CouplingRecord r = staged_coupling_sample(0.5, 0.58, kCentre, rng);
    REQUIRE_FALSE(r.stages.empty());
    CHECK(r.stages[0].phase == CouplingPhase::stage_a);
    CHECK(r.stages[0].left == Approx(-0.04));
    CHECK(r.stages[0].right == Approx(0.42));
    for (const StageRecord& s : r.stages) {
      if (s.phase == CouplingPhase::stage_b) {
        seen_b = true;
        CHECK(s.left == Approx(-0.21));
        CHECK(s.right == Approx(0.04));
      }
      if (s.phase == CouplingPhase::stage_c) {
        seen_c = true;
        // (a + (y - x) - J) / 2 with J = 0.5
        CHECK(s.left == Approx(-0.21));
        CHECK(s.right == Approx(0.04));
      }
    }
  }
  CHECK(seen_b);
  CHECK(seen_c);
}

TEST_CASE("stage records: lengths, phase order and total time") {
  gen::check_cases(40, 85, [](gen::Source& g) {
    const Interval I = g.interval();
    const JumpMeasure nu = g.coin() ? g.mixture(I, 0.15) : g.dirac(I, 0.15);
    const double gap = g.uniform(0.0, 0.95) * nu.support_distance();
    const double x = g.point(I, 0.05);
    const double y = std::min(x + gap, I.b() - 1e-3 * I.length());
    RandomStream rng(85, static_cast<std::uint64_t>(g.integer(0, 1 << 20)));
    for (int k = 0; k < 100; ++k) {
      const CouplingRecord r = coupling_sample(x, y, nu, rng);
      double total = 0.0;
      for (std::size_t i = 0; i < r.stages.size(); ++i) {
        const StageRecord& s = r.stages[i];
        CHECK(s.right - s.left <= 0.5 * I.length() * (1.0 + 1e-12));
        CHECK(s.left <= 0.0);
        CHECK(s.right >= 0.0);
        CHECK(s.duration >= 0.0);
        if (s.phase == CouplingPhase::symmetric) {
          CHECK(i + 1 == r.stages.size());
          CHECK(s.right - s.left == Approx(0.5 * I.length()).epsilon(1e-12));
        }
        total += s.duration;
      }
      CHECK(r.time == Approx(total).epsilon(1e-14));
    }
  });
}

TEST_CASE("staged sampler rejects pairs outside its preconditions") {
  RandomStream rng(86, 0);
  CHECK_THROWS_AS(staged_coupling_sample(0.55, 0.45, kCentre, rng), PreconditionError);
  CHECK_THROWS_AS(staged_coupling_sample(0.2, 0.3, kCentre, rng), PreconditionError);
  CHECK_THROWS_AS(staged_coupling_sample(0.3, 0.9, kCentre, rng), PreconditionError);
  CHECK_THROWS_AS(coupling_sample(0.1, 0.9, kCentre, rng), PreconditionError);
}

TEST_CASE("domination of exit survival by the centre start") {
  const DominationReport centre = domination_check(kUnit, {0.5}, {0.05, 0.2, 1.0});
  for (const DominationRow& row : centre.rows) CHECK(row.survival == row.center_survival);

  const DominationReport r = domination_check(kUnit, {0.1}, {0.2});
  REQUIRE(r.rows.size() == 1);
  // Exact series values.
  CHECK(r.rows[0].center_survival - r.rows[0].survival == Approx(0.32779692076822756).epsilon(1e-10));

  std::vector<double> xs, ts;
  for (int i = 1; i < 40; ++i) xs.push_back(i / 40.0);
  for (double t = 0.005; t < 2.0; t *= 1.3) ts.push_back(t);
  const DominationReport grid = domination_check(kUnit, xs, ts);
  CHECK(grid.holds);
  CHECK(grid.monotone);
  CHECK(grid.max_violation <= 1e-12);
}

TEST_CASE("Chernoff envelope of the five-fold exit sum") {
  // Values from tests/oracles/oracles.py.
  CHECK(chernoff_sum5(kUnit, 0.5) == Approx(0.39683033112969174).epsilon(1e-8));
  CHECK(chernoff_sum5(kUnit, 1.0) == Approx(0.00092160196714257427).epsilon(1e-8));
  double previous = 1.0;
  for (double t = 0.2; t < 2.0; t += 0.1) {
    const double c = chernoff_sum5(kUnit, t);
    CHECK(c <= previous);
    previous = c;
  }
  CHECK(chernoff_sum5(Interval(0.0, 2.0), 2.0) == Approx(chernoff_sum5(kUnit, 0.5)).epsilon(1e-10));
}

TEST_CASE("tail comparison for the symmetric pair") {
  std::vector<double> times;
  for (double t = 0.02; t <= 0.6; t += 0.02) times.push_back(t);
  const TailComparison c = tail_vs_sum5(0.45, 0.55, kCentre, 60000, times, 87);
  CHECK(c.dominated);
  CHECK(c.envelope);
  REQUIRE(c.tail);
  const double target = 2.0 * kPi * kPi;
  CHECK(std::abs(c.tail->rate - target) < std::max(3.0 * c.tail->stderr_, 0.1 * target));

  const TailComparison small = tail_vs_sum5(0.45, 0.55, kCentre, 2000, times, 87);
  CHECK_FALSE(small.tail);
  CHECK_FALSE(small.tail_note.empty());
}

TEST_CASE("event-driven sampler matches the discretized construction") {
  const std::size_t n = 10000;
  for (const auto& [x, y] : {std::pair{0.5, 0.58}, std::pair{0.52, 0.6}}) {
    CAPTURE(x);
    const std::vector<double> exact = times_of(coupling_samples(x, y, kCentre, n, 88));
    const std::vector<double> brute = parallel_map(n, [&](std::size_t i) {
      RandomStream rng(89, i);
      return discretized_oracle(x, y, kCentre, 1e-5, rng).coupling_time;
    });
    CHECK(ks_two_sample(exact, brute).p_value > 0.01);
  }
  RandomStream rng(90, 0);
  CHECK_THROWS_AS(discretized_oracle(0.5, 0.58, kCentre, 1e-3, rng), DomainError);
}

TEST_CASE("each coordinate of the discretized coupling is a jump-boundary process") {
  const double horizon = 0.2;
  const std::size_t n = 20000;
  const JumpMeasure nu = JumpMeasure::dirac(kUnit, 0.45);
  const std::vector<OracleRun> runs = parallel_map(n, [&](std::size_t i) {
    RandomStream rng(91, i);
    return discretized_oracle(0.52, 0.6, nu, 1e-4, rng, horizon);
  });
  std::vector<double> xs, ys;
  for (const OracleRun& r : runs) {
    xs.push_back(r.x);
    ys.push_back(r.y);
  }
  const int bins = 25;
  const LawAtTime from_x = law_at_time(0.52, nu, horizon);
  const LawAtTime from_y = law_at_time(0.6, nu, horizon);
  auto probs = [&](const LawAtTime& law) {
    std::vector<double> p;
    for (int i = 0; i < bins; ++i) p.push_back(law.cdf((i + 1.0) / bins) - law.cdf(static_cast<double>(i) / bins));
    return p;
  };
  CHECK(chi_square_test(histogram(xs, kUnit, bins), probs(from_x)).p_value > 0.01);
  CHECK(chi_square_test(histogram(ys, kUnit, bins), probs(from_y)).p_value > 0.01);
}

TEST_CASE("coupling inequality between mirror TV and distance to equilibrium") {
  for (const JumpMeasure& nu : {kCentre, JumpMeasure::quasistationary(kUnit)}) {
    const InvariantMeasure mu(nu);
    for (double t : {0.02, 0.05, 0.1}) {
      double sup = 0.0;
      std::vector<double> mirror;
      for (int i = 1; i < 20; ++i) {
        const double x = i / 20.0;
        const LawAtTime law = law_at_time(x, nu, t);
        const int cells = 2000;
        double tv = 0.0;
        for (int k = 0; k < cells; ++k) {
          const double lo = static_cast<double>(k) / cells, hi = (k + 1.0) / cells;
          tv += std::abs(law.cdf(hi) - law.cdf(lo) - mu.mass(lo, hi));
        }
        sup = std::max(sup, 0.5 * tv);
        if (x <= 0.5) mirror.push_back(tv_mirror_exact(kUnit, x, t));
      }
      CAPTURE(t);
      for (double m : mirror) CHECK(m <= 2.0 * sup + 1e-9);
    }
  }
}
