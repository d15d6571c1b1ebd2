#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "bmjb/detail/series.hpp"
#include "bmjb/dirichlet.hpp"

namespace bmjb {

using namespace detail;

namespace {

void check_time(double t) {
  if (!(t > 0.0) || !std::isfinite(t))
    throw DomainError("time must be positive and finite, got " + std::to_string(t));
}

}  // namespace

ExitLaw::ExitLaw(const Interval& interval, double x)
    : interval_(interval), x_(x), u_(x - interval.a()), t_cross_(crossover_time(interval)) {
  if (!interval.contains(x)) throw DomainError("exit law needs a start inside the interval");
  SineRecurrence sx(kPi * u_ / interval.length());
  sines_.resize(kCrossTerms);
  for (double& s : sines_) s = sx.next();
}

double ExitLaw::probability(Side side) const {
  const double p = u_ / interval_.length();
  return side == Side::right ? p : 1.0 - p;
}

double ExitLaw::flux_side(double t, Side side) const {
  const double L = interval_.length();
  if (t < t_cross_) return image_flux_right(L, side == Side::right ? u_ : L - u_, t);
  ModeDecay decay(L, t);
  double sum = 0.0;
  for (int n = 1; n <= kCrossTerms; ++n) {
    const double e = decay.next();
    const double sign = (side == Side::right && n % 2 == 0) ? -1.0 : 1.0;
    sum += sign * n * e * sines_[n - 1];
    if (e < 1e-19) break;
  }
  return kPi / (L * L) * sum;
}

double ExitLaw::tail_side(double t, Side side) const {
  const double L = interval_.length();
  const double w = side == Side::right ? u_ : L - u_;
  if (t < t_cross_) return w / L - image_cdf_right(L, w, t);
  ModeDecay decay(L, t);
  double sum = 0.0;
  for (int n = 1; n <= kCrossTerms; ++n) {
    const double e = decay.next();
    const double sign = (side == Side::right && n % 2 == 0) ? -1.0 : 1.0;
    sum += sign * e * sines_[n - 1] / n;
    if (e < 1e-19) break;
  }
  return 2.0 / kPi * sum;
}

double ExitLaw::cdf_side(double t, Side side) const {
  const double L = interval_.length();
  const double w = side == Side::right ? u_ : L - u_;
  if (t < t_cross_) return image_cdf_right(L, w, t);
  return w / L - tail_side(t, side);
}

double ExitLaw::survival(double t) const {
  if (t <= 0.0) return 1.0;
  if (t < t_cross_) return std::clamp(1.0 - cdf_side(t, Side::left) - cdf_side(t, Side::right),
                                      0.0, 1.0);
  return std::clamp(tail_side(t, Side::left) + tail_side(t, Side::right), 0.0, 1.0);
}

double ExitLaw::density(double t) const {
  check_time(t);
  return std::max(0.0, flux_side(t, Side::left) + flux_side(t, Side::right));
}

double ExitLaw::flux(double t, Side side) const {
  check_time(t);
  return std::max(0.0, flux_side(t, side));
}

double ExitLaw::cdf(double t, Side side) const {
  if (t <= 0.0) return 0.0;
  return std::clamp(cdf_side(t, side), 0.0, probability(side));
}

double ExitLaw::tail(double t, Side side) const {
  if (t <= 0.0) return probability(side);
  return std::clamp(tail_side(t, side), 0.0, probability(side));
}

// Safeguarded Newton on the conditional distribution function. For u > 1/2
// the complementary tail is matched instead so that large quantiles keep
// full relative accuracy.
double ExitLaw::solve_time(double u, Side side, double lo, double hi) const {
  const double p = probability(side);
  const bool upper = u > 0.5;
  const double target = upper ? 1.0 - u : u;
  // f increasing in t in both branches.
  auto eval = [&](double t) {
    if (upper) return target - tail_side(t, side) / p;
    return cdf_side(t, side) / p - target;
  };
  const double tol = std::min(1e-13, 1e-7 * target);
  double t = 0.5 * (lo + hi);
  for (int iter = 0; iter < 200; ++iter) {
    const double f = eval(t);
    if (std::abs(f) <= tol) return t;
    if (f < 0.0)
      lo = t;
    else
      hi = t;
    if (hi - lo <= 1e-15 * hi) return t;
    const double slope = flux_side(t, side) / p;
    double next = slope > 0.0 ? t - f / slope : lo - 1.0;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    t = next;
  }
  return t;
}

double ExitLaw::conditional_quantile(double u, Side side) const {
  if (!(u > 0.0 && u < 1.0)) throw DomainError("quantile level must lie in (0, 1)");
  const double p = probability(side);
  if (!(p > 0.0)) throw DomainError("exit side has zero probability");
  const Table& table = tables_[side == Side::right];
  if (!table.times.empty()) {
    const int n = static_cast<int>(table.times.size()) - 1;
    const int i = std::min(n - 1, static_cast<int>(u * n));
    double lo = table.times[i];
    double hi = table.times[i + 1];
    if (i + 1 == n) {
      hi = std::max(2.0 * lo, lo + 1e-3);
      while (tail_side(hi, side) / p > 1.0 - u) hi *= 2.0;
    }
    return solve_time(u, side, lo, hi);
  }
  // Bracket on a geometric time grid around the mean exit time scale.
  const double L = interval_.length();
  const double w = side == Side::right ? u_ : L - u_;
  double lo = 0.25 * w * w / 64.0, hi = lo;
  const bool upper = u > 0.5;
  auto below = [&](double t) {
    return upper ? tail_side(t, side) / p > 1.0 - u : cdf_side(t, side) / p < u;
  };
  while (below(hi)) {
    lo = hi;
    hi *= 2.0;
  }
  if (lo == hi) {
    lo = 0.0;
    while (lo == 0.0) {
      const double t = hi * 0.25;
      if (below(t))
        lo = t;
      else
        hi = t;
      if (hi < 1e-300) break;
    }
  }
  return solve_time(u, side, lo, hi);
}

void ExitLaw::build_table(int size) {
  if (size < 2) throw DomainError("quantile table needs at least two cells");
  for (Side side : {Side::left, Side::right}) {
    Table table;
    table.times.assign(size + 1, 0.0);
    for (int i = 1; i < size; ++i)
      table.times[i] = conditional_quantile(static_cast<double>(i) / size, side);
    table.times[size] = table.times[size - 1];
    tables_[side == Side::right] = std::move(table);
  }
}

Exit ExitLaw::sample(RandomStream& rng) const {
  const Side side = rng.uniform() < probability(Side::right) ? Side::right : Side::left;
  return {conditional_quantile(rng.uniform(), side), side};
}

Exit sample_exit(double x, const Interval& interval, RandomStream& rng) {
  return ExitLaw(interval, x).sample(rng);
}

double sample_killed_position(const Interval& I, double x, double t, RandomStream& rng) {
  check_time(t);
  if (!I.contains(x)) throw DomainError("start point outside the interval");
  const double total = survival(I, x, t);
  if (!(total > 0.0)) throw NumericalError("survival probability underflows");
  const double target = rng.uniform() * total;
  const double tol = 1e-14 * total;
  double lo = I.a(), hi = I.b();
  double y = std::clamp(x + std::sqrt(t) * normal_quantile(target / total), lo, hi);
  if (y <= lo || y >= hi) y = 0.5 * (lo + hi);
  for (int iter = 0; iter < 200; ++iter) {
    const double f = killed_cdf(I, t, x, y) - target;
    if (std::abs(f) <= tol) break;
    if (f < 0.0)
      lo = y;
    else
      hi = y;
    if (hi - lo <= 1e-15 * I.length()) break;
    const double slope = heat_kernel(I, t, x, y);
    double next = slope > 0.0 ? y - f / slope : lo - 1.0;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    y = next;
  }
  return y;
}

}  // namespace bmjb
