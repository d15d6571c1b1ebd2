#include "bmjb/dirichlet.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "bmjb/detail/series.hpp"

namespace bmjb {

using namespace detail;

SpectralBasis::SpectralBasis(const Interval& interval, int terms)
    : interval_(interval), terms_(terms) {
  if (terms < 1) throw DomainError("spectral basis needs at least one term");
}

double SpectralBasis::eigenvalue(int k) const { return dirichlet_eigenvalue(interval_, k); }

double SpectralBasis::eigenfunction(int k, double x) const {
  const double L = interval_.length();
  return std::sqrt(2.0 / L) * std::sin((k + 1) * kPi * (x - interval_.a()) / L);
}

double SpectralBasis::primitive(int k, double x) const {
  const double L = interval_.length();
  const double n = k + 1;
  return std::sqrt(2.0 / L) * L / (n * kPi) * (1.0 - std::cos(n * kPi * (x - interval_.a()) / L));
}

double SpectralBasis::coefficient(int k) const { return primitive(k, interval_.b()); }

double SpectralBasis::project(int k, const JumpMeasure& nu) const {
  return nu.integrate([&](double x) { return eigenfunction(k, x); });
}

double dirichlet_eigenvalue(const Interval& interval, int k) {
  if (k < 0) throw DomainError("eigenvalue index must be nonnegative");
  const double n = k + 1;
  const double L = interval.length();
  return n * n * kPi * kPi / (2.0 * L * L);
}

double crossover_time(const Interval& interval) {
  return interval.length() * interval.length() / (kPi * kPi);
}

namespace {

void check_time(double t) {
  if (!(t > 0.0) || !std::isfinite(t))
    throw DomainError("time must be positive and finite, got " + std::to_string(t));
}

void check_point(const Interval& interval, double x) {
  if (!interval.contains_closed(x))
    throw DomainError("point " + std::to_string(x) + " outside the interval");
}

}  // namespace

// ---------------------------------------------------------------------------
// Heat kernel

double heat_kernel_spectral(const Interval& I, double t, double x, double y) {
  check_time(t);
  check_point(I, x);
  check_point(I, y);
  const double L = I.length();
  const double thx = kPi * (x - I.a()) / L, thy = kPi * (y - I.a()) / L;
  SineRecurrence sx(thx), sy(thy);
  ModeDecay decay(L, t);
  double sum = 0.0;
  for (int n = 1; n <= kMaxModes; ++n) {
    const double e = decay.next();
    sum += e * sx.next() * sy.next();
    if (decay.tail_below(n, 1e-18)) break;
  }
  return 2.0 / L * sum;
}

double heat_kernel_image(const Interval& I, double t, double x, double y) {
  check_time(t);
  check_point(I, x);
  check_point(I, y);
  const double L = I.length();
  const double u = x - I.a(), v = y - I.a();
  const double norm = 1.0 / std::sqrt(2.0 * kPi * t);
  const int K = image_terms(L, t);
  double sum = 0.0;
  for (int k = -K; k <= K; ++k) {
    const double d1 = v - u + 2.0 * k * L;
    const double d2 = v + u + 2.0 * k * L;
    sum += std::exp(-d1 * d1 / (2.0 * t)) - std::exp(-d2 * d2 / (2.0 * t));
  }
  return std::max(0.0, norm * sum);
}

double heat_kernel(const Interval& I, double t, double x, double y) {
  check_time(t);
  return t >= crossover_time(I) ? heat_kernel_spectral(I, t, x, y)
                                : heat_kernel_image(I, t, x, y);
}

// ---------------------------------------------------------------------------
// Killed distribution function

double killed_cdf_spectral(const Interval& I, double t, double x, double y) {
  check_time(t);
  check_point(I, x);
  check_point(I, y);
  const double L = I.length();
  SineRecurrence sx(kPi * (x - I.a()) / L);
  CosineRecurrence cy(kPi * (y - I.a()) / L);
  ModeDecay decay(L, t);
  double sum = 0.0;
  for (int n = 1; n <= kMaxModes; ++n) {
    const double e = decay.next();
    sum += e / n * sx.next() * (1.0 - cy.next());
    if (decay.tail_below(n, 1e-18)) break;
  }
  return std::clamp(2.0 / kPi * sum, 0.0, 1.0);
}

double killed_cdf_image(const Interval& I, double t, double x, double y) {
  check_time(t);
  check_point(I, x);
  check_point(I, y);
  const double L = I.length();
  const double u = x - I.a(), v = y - I.a();
  const double s = std::sqrt(t);
  const int K = image_terms(L, t);
  double sum = 0.0;
  for (int k = -K; k <= K; ++k) {
    const double shift = 2.0 * k * L;
    sum += normal_mass((shift - u) / s, (v - u + shift) / s) -
           normal_mass((u + shift) / s, (v + u + shift) / s);
  }
  return std::clamp(sum, 0.0, 1.0);
}

double killed_cdf(const Interval& I, double t, double x, double y) {
  check_time(t);
  return t >= crossover_time(I) ? killed_cdf_spectral(I, t, x, y)
                                : killed_cdf_image(I, t, x, y);
}

// ---------------------------------------------------------------------------
// Exit laws. Right-exit quantities from w = x - a; left exit mirrors w -> L - w.

double survival_spectral(const Interval& I, double x, double t) {
  check_point(I, x);
  if (t == 0.0) return I.contains(x) ? 1.0 : 0.0;
  check_time(t);
  const double L = I.length();
  SineRecurrence sx(kPi * (x - I.a()) / L);
  ModeDecay decay(L, t);
  double sum = 0.0;
  for (int n = 1; n <= kMaxModes; ++n) {
    const double e = decay.next();
    const double s = sx.next();
    if (n % 2 == 1) sum += e * s / n;
    if (decay.tail_below(n, 1e-18)) break;
  }
  return std::clamp(4.0 / kPi * sum, 0.0, 1.0);
}

double survival_image(const Interval& I, double x, double t) {
  check_point(I, x);
  if (t == 0.0) return I.contains(x) ? 1.0 : 0.0;
  check_time(t);
  const double L = I.length();
  const double w = x - I.a();
  return std::clamp(1.0 - image_cdf_right(L, w, t) - image_cdf_right(L, L - w, t), 0.0, 1.0);
}

double survival(const Interval& I, double x, double t) {
  check_point(I, x);
  if (t == 0.0) return I.contains(x) ? 1.0 : 0.0;
  check_time(t);
  return t >= crossover_time(I) ? survival_spectral(I, x, t) : survival_image(I, x, t);
}

double survival(const JumpMeasure& nu, double t) {
  const Interval& I = nu.interval();
  if (std::holds_alternative<JumpMeasure::Quasistationary>(nu.kind())) {
    if (t == 0.0) return 1.0;
    check_time(t);
    return std::exp(-dirichlet_eigenvalue(I, 0) * t);
  }
  return nu.integrate([&](double x) { return survival(I, x, t); });
}

double exit_cdf_integral(const Interval& I, double x, double t) {
  check_point(I, x);
  if (t == 0.0) return 0.0;
  check_time(t);
  const double L = I.length();
  const double w = x - I.a();
  if (t < crossover_time(I)) return image_cdf_right_integral(L, w, t) + image_cdf_right_integral(L, L - w, t);
  // t - E[tau] + int_t^inf P(tau > s) ds
  SineRecurrence sx(kPi * w / L);
  ModeDecay decay(L, t);
  double tail = 0.0;
  for (int n = 1; n <= kMaxModes; ++n) {
    const double e = decay.next();
    const double s = sx.next();
    if (n % 2 == 1) tail += e * s / (n * n * n);
    if (decay.tail_below(n, 1e-18)) break;
  }
  return t - w * (L - w) + 8.0 * L * L / (kPi * kPi * kPi) * tail;
}

double exit_cdf_integral(const JumpMeasure& nu, double t) {
  const Interval& I = nu.interval();
  if (std::holds_alternative<JumpMeasure::Quasistationary>(nu.kind())) {
    if (t == 0.0) return 0.0;
    check_time(t);
    return exponential_cdf_integral(dirichlet_eigenvalue(I, 0), t);
  }
  return nu.integrate([&](double x) { return exit_cdf_integral(I, x, t); });
}

double exit_flux_spectral(const Interval& I, double x, double t, Side side) {
  check_time(t);
  check_point(I, x);
  const double L = I.length();
  SineRecurrence sx(kPi * (x - I.a()) / L);
  ModeDecay decay(L, t);
  double sum = 0.0;
  for (int n = 1; n <= kMaxModes; ++n) {
    const double e = decay.next();
    const double s = sx.next();
    const double sign = (side == Side::right && n % 2 == 0) ? -1.0 : 1.0;
    sum += sign * n * e * s;
    if (decay.tail_below(n, 1e-18 / n)) break;
  }
  return std::max(0.0, kPi / (L * L) * sum);
}

double exit_flux_image(const Interval& I, double x, double t, Side side) {
  check_time(t);
  check_point(I, x);
  const double L = I.length();
  const double w = side == Side::right ? x - I.a() : I.b() - x;
  return std::max(0.0, image_flux_right(L, w, t));
}

double exit_flux(const Interval& I, double x, double t, Side side) {
  check_time(t);
  return t >= crossover_time(I) ? exit_flux_spectral(I, x, t, side)
                                : exit_flux_image(I, x, t, side);
}

double exit_density(const Interval& I, double x, double t) {
  return exit_flux(I, x, t, Side::left) + exit_flux(I, x, t, Side::right);
}

double exit_cdf(const Interval& I, double x, double t, Side side) {
  check_point(I, x);
  if (t == 0.0) return 0.0;
  check_time(t);
  const double L = I.length();
  const double w = side == Side::right ? x - I.a() : I.b() - x;
  if (t < crossover_time(I)) return std::clamp(image_cdf_right(L, w, t), 0.0, w / L);
  return std::clamp(w / L - spectral_tail_right(L, w, t), 0.0, w / L);
}

double exit_mgf(const Interval& I, double x, double s) {
  check_point(I, x);
  const double L = I.length();
  const double d = std::abs(x - I.center());
  if (s == 0.0) return 1.0;
  if (s > 0.0) {
    if (s >= dirichlet_eigenvalue(I, 0))
      throw DomainError("exit-time mgf diverges at or beyond the principal eigenvalue");
    const double k = std::sqrt(2.0 * s);
    return std::cos(k * d) / std::cos(0.5 * k * L);
  }
  const double k = std::sqrt(-2.0 * s);
  const double A = k * d, B = 0.5 * k * L;
  return std::exp(A - B) * (1.0 + std::exp(-2.0 * A)) / (1.0 + std::exp(-2.0 * B));
}

double mgf_exit_center(double s, double length) {
  if (!(length > 0.0)) throw DomainError("interval length must be positive");
  if (s < 0.0) throw DomainError("mgf_exit_center expects a nonnegative argument");
  if (s >= kPi * kPi / (2.0 * length * length))
    throw DomainError("exit-time mgf diverges at or beyond pi^2 / (2 length^2)");
  return 1.0 / std::cos(0.5 * length * std::sqrt(2.0 * s));
}

// ---------------------------------------------------------------------------
// Green function

double green(const Interval& I, double x, double y) {
  check_point(I, x);
  check_point(I, y);
  return 2.0 * (std::min(x, y) - I.a()) * (I.b() - std::max(x, y)) / I.length();
}

double green_integral(const Interval& I, double x, double y) {
  check_point(I, x);
  check_point(I, y);
  const double L = I.length();
  if (x < y) return (x - I.a()) * ((I.b() - x) * L - (I.b() - y) * (I.b() - y)) / L;
  return (I.b() - x) * (y - I.a()) * (y - I.a()) / L;
}

double green_measure(const JumpMeasure& nu, double y) {
  const Interval& I = nu.interval();
  check_point(I, y);
  const double L = I.length();
  const PartialMoments below = nu.partial_moments(y);
  const PartialMoments total = nu.total_moments();
  // x < y contributes (x-a)(b-y), x >= y contributes (y-a)(b-x).
  const double above = L * (1.0 - below.mass) - (total.first - below.first);
  return 2.0 / L * ((I.b() - y) * below.first + (y - I.a()) * above);
}

double green_measure_integral(const JumpMeasure& nu, double y) {
  const Interval& I = nu.interval();
  check_point(I, y);
  const double L = I.length();
  const PartialMoments below = nu.partial_moments(y);
  const PartialMoments total = nu.total_moments();
  const double by = I.b() - y, ya = y - I.a();
  const double lower = L * below.first - below.second - below.first * by * by / L;
  const double upper = ya * ya / L * (L * (1.0 - below.mass) - (total.first - below.first));
  return lower + upper;
}

double mean_exit(const JumpMeasure& nu) {
  const PartialMoments total = nu.total_moments();
  return nu.interval().length() * total.first - total.second;
}

}  // namespace bmjb
