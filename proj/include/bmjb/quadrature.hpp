#pragma once

#include <Eigen/Core>

namespace bmjb {

// Gauss-Legendre rule on [-1, 1].
struct GaussRule {
  Eigen::VectorXd nodes;
  Eigen::VectorXd weights;
};

// Cached for n <= 64.
const GaussRule& gauss_legendre(int n);

// Composite Gauss-Legendre over [lo, hi] with `panels` equal panels.
template <class F>
auto integrate_panels(F&& f, double lo, double hi, int panels, int order = 8)
    -> decltype(f(0.0)) {
  const GaussRule& rule = gauss_legendre(order);
  const double h = (hi - lo) / panels;
  decltype(f(0.0)) sum{};
  for (int p = 0; p < panels; ++p) {
    const double mid = lo + (p + 0.5) * h;
    for (int i = 0; i < order; ++i)
      sum += (0.5 * h * rule.weights[i]) * f(mid + 0.5 * h * rule.nodes[i]);
  }
  return sum;
}

}  // namespace bmjb
