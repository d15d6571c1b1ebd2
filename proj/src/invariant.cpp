#include <algorithm>

#include "bmjb/process.hpp"

namespace bmjb {

InvariantMeasure::InvariantMeasure(JumpMeasure nu) : nu_(std::move(nu)), m_(mean_exit(nu_)) {
  if (!(m_ > 0.0)) throw ValidationError("invariant measure: mean exit time must be positive");
}

double InvariantMeasure::density(double y) const {
  if (!nu_.interval().contains_closed(y)) return 0.0;
  return std::max(0.0, green_measure(nu_, y) / m_);
}

double InvariantMeasure::cdf(double y) const {
  const Interval& I = nu_.interval();
  if (y <= I.a()) return 0.0;
  if (y >= I.b()) return 1.0;
  return std::clamp(green_measure_integral(nu_, y) / m_, 0.0, 1.0);
}

std::vector<double> InvariantMeasure::bin_masses(int bins) const {
  const Interval& I = nu_.interval();
  std::vector<double> p(bins);
  double previous = 0.0;
  for (int i = 0; i < bins; ++i) {
    const double c = i + 1 == bins ? 1.0 : cdf(I.a() + I.length() * (i + 1) / bins);
    p[i] = c - previous;
    previous = c;
  }
  return p;
}

InvariantMeasure invariant_density(const JumpMeasure& nu) { return InvariantMeasure(nu); }

}  // namespace bmjb
