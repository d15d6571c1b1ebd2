#pragma once

#include <vector>

#include "bmjb/model.hpp"

namespace bmjb {

// Brownian motion (generator 1/2 d^2/dx^2) killed on leaving an interval.
// Kernels switch between the eigenfunction series (t >= crossover_time) and
// the method-of-images series (t < crossover_time).

enum class Side { left, right };

class SpectralBasis {
 public:
  SpectralBasis(const Interval& interval, int terms);

  const Interval& interval() const { return interval_; }
  int terms() const { return terms_; }

  // lambda_k = ((k+1) pi)^2 / (2 L^2), k = 0, 1, ...
  double eigenvalue(int k) const;
  // sqrt(2/L) sin((k+1) pi (x-a)/L)
  double eigenfunction(int k, double x) const;
  // int_a^x phi_k
  double primitive(int k, double x) const;
  // int_a^b phi_k, zero for odd k
  double coefficient(int k) const;
  // int phi_k dnu
  double project(int k, const JumpMeasure& nu) const;

 private:
  Interval interval_;
  int terms_;
};

double dirichlet_eigenvalue(const Interval& interval, int k);
double crossover_time(const Interval& interval);

// p^D(t, x, y). Throws DomainError for t <= 0.
double heat_kernel(const Interval& interval, double t, double x, double y);
double heat_kernel_spectral(const Interval& interval, double t, double x, double y);
double heat_kernel_image(const Interval& interval, double t, double x, double y);

// P_x(W_t <= y, tau > t).
double killed_cdf(const Interval& interval, double t, double x, double y);
double killed_cdf_spectral(const Interval& interval, double t, double x, double y);
double killed_cdf_image(const Interval& interval, double t, double x, double y);

// P_x(tau > t); 1 at t = 0.
double survival(const Interval& interval, double x, double t);
double survival_spectral(const Interval& interval, double x, double t);
double survival_image(const Interval& interval, double x, double t);
// P_nu(tau > t); exact for the quasistationary law.
double survival(const JumpMeasure& nu, double t);
// int_0^t P_x(tau <= s) ds, and its average over nu.
double exit_cdf_integral(const Interval& interval, double x, double t);
double exit_cdf_integral(const JumpMeasure& nu, double t);

// Exit-time density h(x, t) and its side-resolved parts.
double exit_density(const Interval& interval, double x, double t);
double exit_flux(const Interval& interval, double x, double t, Side side);
double exit_flux_spectral(const Interval& interval, double x, double t, Side side);
double exit_flux_image(const Interval& interval, double x, double t, Side side);
// P_x(tau <= t, exit through side).
double exit_cdf(const Interval& interval, double x, double t, Side side);

// E_x[exp(s tau)] for real s below the principal eigenvalue (s may be negative).
double exit_mgf(const Interval& interval, double x, double s);
// E[exp(s xi)] for xi the exit time from the centre of an interval of the
// given length; requires 0 <= s < pi^2 / (2 length^2).
double mgf_exit_center(double s, double length);

// Green function of -1/2 d^2/dx^2 with Dirichlet conditions.
double green(const Interval& interval, double x, double y);
// int_a^y g(x, z) dz
double green_integral(const Interval& interval, double x, double y);
// int g(x, y) nu(dx)
double green_measure(const JumpMeasure& nu, double y);
double green_measure_integral(const JumpMeasure& nu, double y);
// E_nu[tau] = int (x-a)(b-x) dnu
double mean_exit(const JumpMeasure& nu);

struct Exit {
  double time;
  Side side;
};

// Exit law from a fixed starting point with precomputed series tables. An
// optional quantile table speeds up repeated sampling from the same point.
class ExitLaw {
 public:
  ExitLaw(const Interval& interval, double x);

  const Interval& interval() const { return interval_; }
  double start() const { return x_; }
  double probability(Side side) const;

  double survival(double t) const;
  double density(double t) const;
  double flux(double t, Side side) const;
  // P(tau <= t, side) and probability(side) - cdf(t, side).
  double cdf(double t, Side side) const;
  double tail(double t, Side side) const;

  // Time quantile of the exit law conditioned on the side.
  double conditional_quantile(double u, Side side) const;
  Exit sample(RandomStream& rng) const;

  void build_table(int size = 512);

 private:
  // Series are written for the right side; the left side uses the mirrored
  // start (L - u).
  double cdf_side(double t, Side side) const;
  double tail_side(double t, Side side) const;
  double flux_side(double t, Side side) const;
  double solve_time(double u, Side side, double lo, double hi) const;

  Interval interval_;
  double x_;
  double u_;
  double t_cross_;
  std::vector<double> sines_;  // sin(n pi u / L), n = 1..; enough terms for t >= t_cross
  struct Table {
    std::vector<double> times;
    std::vector<double> cdf;
  };
  Table tables_[2];
};

Exit sample_exit(double x, const Interval& interval, RandomStream& rng);

// Position at time t of BM started at x conditioned on tau > t.
double sample_killed_position(const Interval& interval, double x, double t, RandomStream& rng);

}  // namespace bmjb
