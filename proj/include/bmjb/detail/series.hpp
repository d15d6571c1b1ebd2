#pragma once

// Building blocks shared by the series evaluators.

#include <algorithm>
#include <cmath>
#include <numbers>

#include <boost/math/special_functions/erf.hpp>

namespace bmjb::detail {

inline constexpr double kPi = std::numbers::pi;
inline constexpr int kMaxModes = 1'000'000;
// Eigenmodes needed for t >= L^2 / pi^2 to reach 1e-19.
inline constexpr int kCrossTerms = 24;

// sin(n theta), n = 1, 2, ... by rotation, resynchronized periodically.
class SineRecurrence {
 public:
  explicit SineRecurrence(double theta) : theta_(theta), c1_(std::cos(theta)), s1_(std::sin(theta)) {}
  double next() {
    ++n_;
    if (n_ % 64 == 1) {
      c_ = std::cos(n_ * theta_);
      s_ = std::sin(n_ * theta_);
    } else {
      const double c = c_ * c1_ - s_ * s1_;
      s_ = s_ * c1_ + c_ * s1_;
      c_ = c;
    }
    return s_;
  }
  double cosine() const { return c_; }

 private:
  double theta_, c1_, s1_;
  double c_ = 1.0, s_ = 0.0;
  long n_ = 0;
};

class CosineRecurrence {
 public:
  explicit CosineRecurrence(double theta) : rot_(theta) {}
  double next() {
    rot_.next();
    return rot_.cosine();
  }

 private:
  SineRecurrence rot_;
};

// exp(-n^2 pi^2 t / (2 L^2)) for n = 1, 2, ... with one exponential.
class ModeDecay {
 public:
  ModeDecay(double L, double t) {
    const double r = -kPi * kPi * t / (2.0 * L * L);
    q_ = std::exp(r);
    q2_ = q_ * q_;
    step_ = q_;  // q^(2n-1) for the next n
    e_ = 1.0;
  }
  double next() {
    e_ *= step_;
    step_ *= q2_;
    return e_;
  }
  // True once the remaining sum over m > n is below tol.
  bool tail_below(int, double tol) const {
    const double following = e_ * step_;
    const double ratio = step_ * q2_;
    return following <= tol * (1.0 - ratio) || following == 0.0;
  }

 private:
  double q_, q2_, step_, e_;
};

inline int image_terms(double L, double t) {
  return static_cast<int>(std::ceil(10.0 * std::sqrt(t) / (2.0 * L))) + 1;
}

// Phi(hi) - Phi(lo) for the standard normal, accurate in both tails.
inline double normal_mass(double lo, double hi) {
  constexpr double r = 0.70710678118654752440;
  if (lo >= 0.0) return 0.5 * (std::erfc(lo * r) - std::erfc(hi * r));
  if (hi <= 0.0) return 0.5 * (std::erfc(-hi * r) - std::erfc(-lo * r));
  return 1.0 - 0.5 * std::erfc(-lo * r) - 0.5 * std::erfc(hi * r);
}

inline double normal_quantile(double p) {
  p = std::clamp(p, 1e-300, 1.0 - 1e-16);
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

// P(tau <= t, right exit) by images, start at distance w from the left end.
inline double image_cdf_right(double L, double w, double t) {
  if (!(t > 0.0)) return 0.0;
  const double s = std::sqrt(2.0 * t);
  const double z0 = (L - w) / s;
  double sum = 0.0;
  for (int k = 0;; ++k) {
    const double z = ((2 * k + 1) * L - w) / s;
    if (k > 0 && z * z - z0 * z0 > 45.0) break;
    sum += std::erfc(z) - std::erfc(((2 * k + 1) * L + w) / s);
  }
  return sum;
}

// int_0^t (1 - e^{-rate s}) ds
inline double exponential_cdf_integral(double rate, double t) {
  const double x = rate * t;
  if (x >= 0.1) return (x + std::expm1(-x)) / rate;
  // x + expm1(-x) = sum_{k>=2} (-1)^k x^k / k!
  double term = x * x / 2.0, sum = 0.0;
  for (int k = 2; k < 12; ++k) {
    sum += term;
    term *= -x / (k + 1);
  }
  return sum / rate;
}

// int_0^t erfc(d / sqrt(2 s)) ds
inline double erfc_time_integral(double d, double t) {
  const double z = d / std::sqrt(2.0 * t);
  return (t + d * d) * std::erfc(z) - d * std::sqrt(2.0 * t / kPi) * std::exp(-z * z);
}

// int_0^t image_cdf_right(L, w, s) ds
inline double image_cdf_right_integral(double L, double w, double t) {
  if (!(t > 0.0)) return 0.0;
  const double s = std::sqrt(2.0 * t);
  const double z0 = (L - w) / s;
  double sum = 0.0;
  for (int k = 0;; ++k) {
    const double z = ((2 * k + 1) * L - w) / s;
    if (k > 0 && z * z - z0 * z0 > 45.0) break;
    sum += erfc_time_integral((2 * k + 1) * L - w, t) - erfc_time_integral((2 * k + 1) * L + w, t);
  }
  return sum;
}

inline double image_flux_right(double L, double w, double t) {
  if (!(t > 0.0)) return 0.0;
  const double norm = 1.0 / std::sqrt(2.0 * kPi * t * t * t);
  const double d0 = L - w;
  double sum = 0.0;
  for (int k = 0;; ++k) {
    const double d = (2 * k + 1) * L - w;
    if (k > 0 && (d * d - d0 * d0) / (2.0 * t) > 45.0) break;
    const double e = (2 * k + 1) * L + w;
    sum += d * std::exp(-d * d / (2.0 * t)) - e * std::exp(-e * e / (2.0 * t));
  }
  return norm * sum;
}

// (w / L) - P(tau <= t, right exit) by the eigenfunction series.
inline double spectral_tail_right(double L, double w, double t) {
  SineRecurrence sw(kPi * w / L);
  ModeDecay decay(L, t);
  double sum = 0.0;
  for (int n = 1; n <= kMaxModes; ++n) {
    const double e = decay.next();
    const double s = sw.next();
    sum += (n % 2 == 1 ? 1.0 : -1.0) * e * s / n;
    if (decay.tail_below(n, 1e-19)) break;
  }
  return 2.0 / kPi * sum;
}

}  // namespace bmjb::detail
