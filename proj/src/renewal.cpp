#include <algorithm>
#include <cmath>
#include <numbers>

#include "bmjb/process.hpp"
#include "bmjb/quadrature.hpp"

namespace bmjb {

namespace {

// E_x[f(W_t); tau > t] for a bounded test function.
class KilledExpectation {
 public:
  KilledExpectation(const TestFunction& f, const Interval& interval, double dt)
      : f_(f), interval_(interval) {
    if (const auto* g = std::get_if<std::function<double(double)>>(&f)) {
      const double L = interval.length();
      const int modes = std::min(
          4000, 5 + static_cast<int>(std::sqrt(2.0 * L * L * 40.0 / (std::numbers::pi * std::numbers::pi * dt))));
      const SpectralBasis basis(interval, modes);
      coefficients_.resize(modes);
      for (int n = 0; n < modes; ++n)
        coefficients_[n] = integrate_panels(
            [&](double y) { return (*g)(y) * basis.eigenfunction(n, y); }, interval.a(),
            interval.b(), 512);
    }
  }

  double operator()(double t, double x) const {
    if (const Indicator* ind = std::get_if<Indicator>(&f_)) {
      if (t == 0.0) return (x > ind->lo && x < ind->hi) ? 1.0 : 0.0;
      const double lo = std::clamp(ind->lo, interval_.a(), interval_.b());
      const double hi = std::clamp(ind->hi, interval_.a(), interval_.b());
      if (!(hi > lo)) return 0.0;
      return killed_cdf(interval_, t, x, hi) - killed_cdf(interval_, t, x, lo);
    }
    const auto& g = std::get<std::function<double(double)>>(f_);
    if (t == 0.0) return g(x);
    const SpectralBasis basis(interval_, static_cast<int>(coefficients_.size()));
    double sum = 0.0;
    for (std::size_t n = 0; n < coefficients_.size(); ++n) {
      const double e = std::exp(-basis.eigenvalue(static_cast<int>(n)) * t);
      if (e < 1e-18) break;
      sum += e * basis.eigenfunction(static_cast<int>(n), x) * coefficients_[n];
    }
    return sum;
  }

 private:
  const TestFunction& f_;
  Interval interval_;
  std::vector<double> coefficients_;
};

struct Solution {
  std::vector<double> z, Z, Z_stationary;
};

Solution solve_mesh(const TestFunction& f, const JumpMeasure& nu, std::optional<double> start,
                    double dt, int steps) {
  const Interval& I = nu.interval();
  const KilledExpectation killed(f, I, dt);
  const std::vector<Atom>& nodes = nu.quadrature();

  std::vector<double> z(steps + 1), dF(steps + 1, 0.0);
  double previous = 0.0;
  for (int i = 0; i <= steps; ++i) {
    const double t = i * dt;
    double zi = 0.0;
    for (const Atom& node : nodes) zi += node.weight * killed(t, node.point);
    z[i] = zi;
    const double F = 1.0 - survival(nu, t);
    if (i > 0) dF[i] = F - previous;
    previous = F;
  }

  // Stieltjes trapezoid; the current node enters through dF[1] only.
  std::vector<double> Z(steps + 1);
  Z[0] = z[0];
  const double diagonal = 1.0 - 0.5 * dF[1];
  for (int i = 1; i <= steps; ++i) {
    double rhs = z[i] + 0.5 * Z[i - 1] * dF[1];
    for (int j = 2; j <= i; ++j) rhs += 0.5 * (Z[i - j] + Z[i - j + 1]) * dF[j];
    Z[i] = rhs / diagonal;
  }
  if (!start) return {z, Z, Z};

  const double x = *start;
  if (!I.contains(x)) throw DomainError("renewal_solve: start point outside the interval");
  std::vector<double> zx(steps + 1), dFx(steps + 1, 0.0), Zx(steps + 1);
  previous = 0.0;
  for (int i = 0; i <= steps; ++i) {
    const double t = i * dt;
    zx[i] = killed(t, x);
    const double F = 1.0 - survival(I, x, t);
    if (i > 0) dFx[i] = F - previous;
    previous = F;
  }
  for (int i = 0; i <= steps; ++i) {
    double value = zx[i];
    for (int j = 1; j <= i; ++j) value += 0.5 * (Z[i - j] + Z[i - j + 1]) * dFx[j];
    Zx[i] = value;
  }
  return {zx, Zx, Z};
}

}  // namespace

double RenewalSystem::at(double t) const {
  if (times.empty()) throw DomainError("renewal system is empty");
  if (t <= 0.0) return Z.front();
  const double s = t / dt;
  const auto i = static_cast<std::size_t>(s);
  if (i + 1 >= times.size()) return Z.back();
  const double frac = s - static_cast<double>(i);
  return (1.0 - frac) * Z[i] + frac * Z[i + 1];
}

RenewalSystem renewal_solve(const TestFunction& f, const JumpMeasure& nu,
                            std::optional<double> start, const RenewalOptions& options) {
  if (!(options.dt > 0.0) || !(options.horizon > options.dt))
    throw DomainError("renewal_solve: need 0 < dt < horizon");
  const int steps = static_cast<int>(std::llround(options.horizon / options.dt));
  const double dt = options.horizon / steps;

  RenewalSystem out;
  out.dt = dt;
  Solution fine = solve_mesh(f, nu, start, dt, steps);
  for (int i = 0; i <= steps; ++i) out.times.push_back(i * dt);
  out.z = std::move(fine.z);
  out.Z = std::move(fine.Z);
  out.Z_stationary = std::move(fine.Z_stationary);

  const InvariantMeasure invariant(nu);
  out.cycle_mean = invariant.normalizer();
  if (const Indicator* ind = std::get_if<Indicator>(&f)) {
    const Interval& I = nu.interval();
    out.limit = invariant.mass(std::clamp(ind->lo, I.a(), I.b()), std::clamp(ind->hi, I.a(), I.b()));
  } else {
    const auto& g = std::get<std::function<double(double)>>(f);
    out.limit = integrate_panels([&](double y) { return g(y) * invariant.density(y); },
                                 nu.interval().a(), nu.interval().b(), 256);
  }

  if (options.richardson && steps % 4 == 0 && steps >= 16) {
    const Solution half = solve_mesh(f, nu, start, 2.0 * dt, steps / 2);
    const Solution quarter = solve_mesh(f, nu, start, 4.0 * dt, steps / 4);
    double d1 = 0.0, d2 = 0.0;
    for (int i = 0; i <= steps / 4; ++i) {
      d1 = std::max(d1, std::abs(out.Z[4 * i] - half.Z[2 * i]));
      d2 = std::max(d2, std::abs(half.Z[2 * i] - quarter.Z[i]));
    }
    out.richardson_error = d1 / 3.0;
    out.observed_order = d1 > 0.0 && d2 > 0.0 ? std::log2(d2 / d1) : 2.0;
    if (out.richardson_error > options.tolerance) {
      out.accuracy_warning = true;
      out.warning = "renewal mesh too coarse: Richardson error estimate " +
                    std::to_string(out.richardson_error) + " exceeds " +
                    std::to_string(options.tolerance);
    } else if (d1 > 1e-9 && out.observed_order < 1.0) {
      out.accuracy_warning = true;
      out.warning = "renewal mesh not in the asymptotic range: observed order " +
                    std::to_string(out.observed_order);
    }
  }
  return out;
}

}  // namespace bmjb
