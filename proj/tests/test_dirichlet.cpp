#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "bmjb/dirichlet.hpp"
#include "bmjb/stats.hpp"
#include "generators.hpp"

using namespace bmjb;
using doctest::Approx;

namespace {

const Interval kUnit(0.0, 1.0);
constexpr double kPi = std::numbers::pi;

template <class F>
double integrate(F&& f, double lo, double hi) {
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, lo, hi, 15, 1e-14);
}

// Oracle values from tests/oracles/oracles.py.
struct HeatCase {
  double a, b, t, x, y, value;
};
const HeatCase kHeat[] = {
    {0.0, 1.0, 0.01, 0.3, 0.35, 3.5206532649734383},
    {0.0, 1.0, 0.1, 0.2, 0.7, 0.33650711571689548},
    {0.0, 1.0, 1.0, 0.5, 0.25, 0.010170858980814974},
    {-1.0, 3.0, 0.3, 0.0, 1.2, 0.066075810119413878},
};

}  // namespace

TEST_CASE("basis: eigenvalues increase and scale with the squared length") {
  const SpectralBasis basis(kUnit, 40);
  for (int k = 0; k + 1 < basis.terms(); ++k) CHECK(basis.eigenvalue(k) < basis.eigenvalue(k + 1));
  CHECK(basis.eigenvalue(0) == Approx(kPi * kPi / 2.0).epsilon(1e-15));
  gen::check_cases(100, 21, [](gen::Source& g) {
    const Interval I = g.interval();
    const int k = g.integer(0, 30);
    const double scaled = dirichlet_eigenvalue(kUnit, k) / (I.length() * I.length());
    CHECK(dirichlet_eigenvalue(I, k) == Approx(scaled).epsilon(1e-15));
  });
}

TEST_CASE("basis: orthonormality and reflection parity") {
  const Interval I(-0.5, 1.5);
  const SpectralBasis basis(I, 12);
  for (int j = 0; j < 12; ++j) {
    for (int k = j; k < 12; ++k) {
      const double ip = integrate(
          [&](double x) { return basis.eigenfunction(j, x) * basis.eigenfunction(k, x); }, I.a(), I.b());
      CHECK(ip == Approx(j == k ? 1.0 : 0.0).epsilon(1e-10).scale(1.0));
    }
    const double coef = integrate([&](double x) { return basis.eigenfunction(j, x); }, I.a(), I.b());
    CHECK(basis.coefficient(j) == Approx(coef).epsilon(1e-10).scale(1.0));
  }
  gen::check_cases(200, 22, [&](gen::Source& g) {
    const double x = g.point(I);
    const int k = g.integer(0, 11);
    const double sign = k % 2 == 0 ? 1.0 : -1.0;
    CHECK(basis.eigenfunction(k, reflect(x, I)) == Approx(sign * basis.eigenfunction(k, x)).scale(1.0).epsilon(1e-12));
  });
}

TEST_CASE("heat kernel matches the high-precision image series") {
  for (const HeatCase& c : kHeat) {
    const Interval I(c.a, c.b);
    CAPTURE(c.t);
    CHECK(heat_kernel(I, c.t, c.x, c.y) == Approx(c.value).epsilon(1e-12));
  }
  CHECK_THROWS_AS(heat_kernel(kUnit, 0.0, 0.3, 0.4), DomainError);
  CHECK_THROWS_AS(heat_kernel(kUnit, -1.0, 0.3, 0.4), DomainError);
}

TEST_CASE("heat kernel is symmetric and sub-Markov") {
  gen::check_cases(300, 23, [](gen::Source& g) {
    const Interval I = g.interval();
    const double L2 = I.length() * I.length();
    const double t = L2 * std::exp(g.uniform(std::log(1e-3), std::log(2.0)));
    const double x = g.point(I), y = g.point(I);
    const double p = heat_kernel(I, t, x, y);
    CHECK(p >= 0.0);
    CHECK(p == Approx(heat_kernel(I, t, y, x)).epsilon(1e-12));
  });
  for (double x : {0.1, 0.5, 0.83}) {
    double previous = 1.0;
    for (double t : {0.001, 0.01, 0.05, 0.1, 0.3, 1.0}) {
      const double mass = integrate([&](double y) { return heat_kernel(kUnit, t, x, y); }, 0.0, 1.0);
      CHECK(mass <= 1.0 + 1e-12);
      CHECK(mass <= previous);
      CHECK(mass == Approx(survival(kUnit, x, t)).epsilon(1e-10));
      previous = mass;
    }
  }
}

TEST_CASE("spectral and image series agree at the crossover") {
  const Interval I(0.0, 1.0);
  const double t = crossover_time(I);
  CHECK(t == Approx(1.0 / (kPi * kPi)).epsilon(1e-15));
  double worst = 0.0;
  for (int i = 1; i <= 50; ++i) {
    const double x = i / 51.0;
    worst = std::max(worst, std::abs(survival_spectral(I, x, t) - survival_image(I, x, t)));
    worst = std::max(worst, std::abs(exit_flux_spectral(I, x, t, Side::right) -
                                     exit_flux_image(I, x, t, Side::right)));
    for (int j = 1; j <= 50; ++j) {
      const double y = j / 51.0;
      worst = std::max(worst, std::abs(heat_kernel_spectral(I, t, x, y) - heat_kernel_image(I, t, x, y)));
    }
  }
  CHECK(worst < 1e-10);
}

TEST_CASE("Chapman-Kolmogorov on a grid") {
  for (double s : {0.02, 0.15}) {
    for (double t : {0.05, 0.4}) {
      for (double x : {0.2, 0.5}) {
        for (double y : {0.35, 0.9}) {
          const double lhs = integrate(
              [&](double z) { return heat_kernel(kUnit, s, x, z) * heat_kernel(kUnit, t, z, y); }, 0.0, 1.0);
          CHECK(lhs == Approx(heat_kernel(kUnit, s + t, x, y)).epsilon(1e-9));
        }
      }
    }
  }
}

TEST_CASE("survival values and limits") {
  CHECK(survival(kUnit, 0.5, 0.05) == Approx(0.94930536268447035).epsilon(1e-12));
  CHECK(survival(kUnit, 0.1, 0.3) == Approx(0.089525755835254636).epsilon(1e-12));
  CHECK(survival(kUnit, 0.5, 2.0) == Approx(6.5856006054394028e-5).epsilon(1e-11));
  gen::check_cases(100, 24, [](gen::Source& g) {
    const Interval I = g.interval();
    const double x = g.point(I);
    CHECK(survival(I, x, 0.0) == 1.0);
    double previous = 1.0;
    for (double t = 0.01; t < 3.0; t *= 1.7) {
      const double s = survival(I, x, t * I.length() * I.length());
      CHECK(s <= previous + 1e-15);
      previous = s;
    }
    CHECK(previous < 0.01);
  });
}

TEST_CASE("survival decays at the principal eigenvalue of a finite-difference Laplacian") {
  const int n = 2000;
  const double h = 1.0 / n;
  Eigen::VectorXd diag = Eigen::VectorXd::Constant(n - 1, 1.0 / (h * h));
  Eigen::VectorXd off = Eigen::VectorXd::Constant(n - 2, -0.5 / (h * h));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
  solver.computeFromTridiagonal(diag, off, Eigen::EigenvaluesOnly);
  const double fd = solver.eigenvalues()(0);
  const double slope = std::log(survival(kUnit, 0.5, 4.0) / survival(kUnit, 0.5, 3.0));
  CHECK(-slope == Approx(fd).epsilon(1e-6));
  CHECK(-slope == Approx(4.934802200544679).epsilon(1e-12));
}

TEST_CASE("survival is maximal from the centre and decreases towards the boundary") {
  gen::check_cases(40, 25, [](gen::Source& g) {
    const Interval I = g.interval();
    const double t = g.uniform(0.005, 1.0) * I.length() * I.length();
    const double centre = survival(I, I.center(), t);
    double previous = centre;
    for (int i = 1; i <= 20; ++i) {
      const double x = I.center() + 0.5 * I.length() * i / 21.0;
      const double s = survival(I, x, t);
      CHECK(s <= centre + 1e-14);
      CHECK(s <= previous + 1e-14);
      CHECK(survival(I, reflect(x, I), t) == Approx(s).epsilon(1e-12));
      previous = s;
    }
  });
  CHECK(survival(kUnit, 0.5, 0.2) - survival(kUnit, 0.1, 0.2) ==
        Approx(0.32779692076822756).epsilon(1e-11));
}

TEST_CASE("exit density: total probability, side fluxes and mean") {
  for (double x : {0.05, 0.3, 0.5}) {
    CAPTURE(x);
    const double T = 0.7;
    const double mass = integrate([&](double t) { return exit_density(kUnit, x, t); }, 0.0, T);
    CHECK(mass + survival(kUnit, x, T) == Approx(1.0).epsilon(1e-9));
    const double right = integrate([&](double t) { return exit_flux(kUnit, x, t, Side::right); }, 0.0, 40.0);
    CHECK(right == Approx(x).epsilon(1e-9));
    const double mean = integrate([&](double t) { return t * exit_density(kUnit, x, t); }, 0.0, 40.0);
    CHECK(mean == Approx(x * (1.0 - x)).epsilon(1e-8));
    CHECK(exit_cdf(kUnit, x, 40.0, Side::left) == Approx(1.0 - x).epsilon(1e-12));
  }
  CHECK(exit_flux(kUnit, 0.3, 0.1, Side::right) == Approx(0.75854749676995998).epsilon(1e-12));
  CHECK_THROWS_AS(exit_density(kUnit, 0.3, 0.0), DomainError);
  gen::check_cases(200, 26, [](gen::Source& g) {
    const Interval I = g.interval();
    const double x = g.point(I);
    const double t = g.uniform(0.002, 1.5) * I.length() * I.length();
    const double left = exit_flux(I, x, t, Side::left), right = exit_flux(I, x, t, Side::right);
    CHECK(left >= 0.0);
    CHECK(right >= 0.0);
    CHECK(left + right == Approx(exit_density(I, x, t)).epsilon(1e-10));
  });
}

TEST_CASE("moment generating functions") {
  CHECK(exit_mgf(kUnit, 0.3, 3.0) == Approx(2.6014661888072284).epsilon(1e-12));
  CHECK(mgf_exit_center(0.0, 0.5) == 1.0);
  CHECK(mgf_exit_center(kPi * kPi, 0.5) == Approx(2.2521719028431772).epsilon(1e-12));
  CHECK_THROWS_AS(mgf_exit_center(2.0 * kPi * kPi, 0.5), DomainError);
  CHECK_THROWS_AS(mgf_exit_center(-1.0, 0.5), DomainError);
  // abscissa for half of the unit interval equals the odd eigenvalue of (0,1)
  CHECK(kPi * kPi / (2.0 * 0.25) == Approx(dirichlet_eigenvalue(kUnit, 1)).epsilon(1e-15));
}

TEST_CASE("mgf matches a Monte-Carlo average of exit times") {
  const Interval half(0.0, 0.5);
  ExitLaw law(half, 0.25);
  law.build_table();
  const double s = 0.5 * kPi * kPi / (2.0 * 0.25);
  RandomStream rng(31, 0);
  std::vector<double> values(1000000);
  for (double& v : values) v = std::exp(s * law.sample(rng).time);
  const MeanEstimate m = mean_estimate(values);
  CHECK(std::abs(m.mean - mgf_exit_center(s, 0.5)) < 3.0 * m.stderr_);
}

TEST_CASE("Green kernel") {
  CHECK(green(kUnit, 0.5, 0.5) == Approx(0.5).epsilon(1e-15));
  CHECK(mean_exit(JumpMeasure::dirac(kUnit, 0.5)) == Approx(0.25).epsilon(1e-15));
  gen::check_cases(100, 27, [](gen::Source& g) {
    const Interval I = g.interval();
    const double x = g.point(I), y = g.point(I);
    CHECK(green(I, x, y) == Approx(green(I, y, x)).epsilon(1e-14));
    CHECK(green(I, x, y) >= 0.0);
    CHECK(green(I, x, I.a()) == Approx(0.0).scale(1.0));
    CHECK(green(I, I.b(), y) == Approx(0.0).scale(1.0));
    auto g_x = [&](double z) { return green(I, x, z); };
    const double row = integrate(g_x, I.a(), x) + integrate(g_x, x, I.b());
    CHECK(row == Approx((x - I.a()) * (I.b() - x)).epsilon(1e-12));
    CHECK(green_integral(I, x, y) ==
          Approx(integrate(g_x, I.a(), std::min(x, y)) + integrate(g_x, std::min(x, y), y)).epsilon(1e-12));
  });
  gen::check_cases(40, 28, [](gen::Source& g) {
    const Interval I = g.interval();
    const JumpMeasure nu = g.measure(I);
    CHECK(mean_exit(nu) ==
          Approx(nu.integrate([&](double x) { return (x - I.a()) * (I.b() - x); })).epsilon(1e-12));
  });
}

TEST_CASE("exit sampling: side probabilities and mean time") {
  RandomStream rng(41, 0);
  const int n = 1000000;
  int right = 0;
  for (int i = 0; i < n; ++i) right += sample_exit(0.5, kUnit, rng).side == Side::right;
  const double p = static_cast<double>(right) / n;
  CHECK(std::abs(p - 0.5) < 3.0 * std::sqrt(0.25 / n));

  ExitLaw law(kUnit, 0.3);
  std::vector<double> times(200000);
  int rights = 0;
  for (double& t : times) {
    const Exit e = law.sample(rng);
    t = e.time;
    rights += e.side == Side::right;
  }
  const MeanEstimate m = mean_estimate(times);
  CHECK(std::abs(m.mean - 0.21) < 3.0 * m.stderr_);
  const double q = static_cast<double>(rights) / times.size();
  CHECK(std::abs(q - 0.3) < 3.0 * std::sqrt(0.21 / times.size()));
}

TEST_CASE("conditional quantiles invert the side-resolved cdf") {
  gen::check_cases(50, 29, [](gen::Source& g) {
    const Interval I = g.interval();
    const ExitLaw law(I, g.point(I, 0.05));
    for (Side side : {Side::left, Side::right}) {
      const double u = g.uniform(0.001, 0.999);
      const double t = law.conditional_quantile(u, side);
      CHECK(law.cdf(t, side) / law.probability(side) == Approx(u).epsilon(1e-10));
    }
  });
}

TEST_CASE("exit sampling matches a fine random-walk discretization") {
  // Signed exit time: positive on the right, negative on the left.
  const double x = 0.3, dt = 1e-5;
  const int n = 2000;
  std::vector<double> exact(n), walk(n);
  RandomStream rng(43, 0), steps(44, 0);
  for (int i = 0; i < n; ++i) {
    const Exit e = sample_exit(x, kUnit, rng);
    exact[static_cast<std::size_t>(i)] = e.side == Side::right ? e.time : -e.time;
    double w = x, t = 0.0;
    for (;;) {
      const double next = w + std::sqrt(dt) * steps.normal();
      t += dt;
      // Brownian-bridge crossing probabilities at both walls.
      const double pl = next <= 0.0 ? 1.0 : std::exp(-2.0 * w * next / dt);
      const double pr = next >= 1.0 ? 1.0 : std::exp(-2.0 * (1.0 - w) * (1.0 - next) / dt);
      if (steps.uniform() < pl) {
        walk[static_cast<std::size_t>(i)] = -(t - 0.5 * dt);
        break;
      }
      if (steps.uniform() < pr) {
        walk[static_cast<std::size_t>(i)] = t - 0.5 * dt;
        break;
      }
      w = next;
    }
  }
  CHECK(ks_two_sample(exact, walk).p_value > 0.01);
}

TEST_CASE("killed position sampling follows the killed cdf") {
  RandomStream rng(45, 0);
  for (double t : {0.01, 0.2}) {
    const double x = 0.3;
    const int bins = 20, n = 50000;
    std::vector<double> counts(bins, 0.0), probs(bins);
    for (int i = 0; i < n; ++i) {
      const double y = sample_killed_position(kUnit, x, t, rng);
      REQUIRE(kUnit.contains(y));
      counts[static_cast<std::size_t>(std::min(bins - 1, static_cast<int>(y * bins)))] += 1.0;
    }
    const double s = survival(kUnit, x, t);
    for (int k = 0; k < bins; ++k)
      probs[static_cast<std::size_t>(k)] =
          (killed_cdf(kUnit, t, x, (k + 1.0) / bins) - killed_cdf(kUnit, t, x, static_cast<double>(k) / bins)) / s;
    CHECK(chi_square_test(counts, probs).p_value > 0.01);
  }
  CHECK(killed_cdf(kUnit, 0.1, 0.4, 1.0) == Approx(survival(kUnit, 0.4, 0.1)).epsilon(1e-12));
}
