#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "bmjb/dirichlet.hpp"
#include "bmjb/model.hpp"

namespace bmjb {

// Brownian motion with jump boundary: on hitting a or b the path restarts at
// a point drawn from the jump measure.

using StartLaw = std::variant<double, JumpMeasure>;

// Event-driven trajectory up to a horizon.
struct PathSkeleton {
  double start = 0.0;
  std::vector<double> epochs;      // absolute jump times
  std::vector<double> excursions;  // epochs[i] - epochs[i-1]
  std::vector<double> targets;     // restart points
  double horizon = 0.0;
  double position = 0.0;           // state at the horizon
};

class Simulator {
 public:
  explicit Simulator(JumpMeasure nu);

  const JumpMeasure& measure() const { return nu_; }
  const Interval& interval() const { return nu_.interval(); }

  double sample_start(const StartLaw& start, RandomStream& rng) const;
  // Exit from x; uses tabulated laws for the atoms of a discrete measure.
  Exit sample_exit(double x, RandomStream& rng) const;

  struct State {
    double position;
    int jumps;
  };
  // State after `duration` time units from x.
  State run(double x, double duration, RandomStream& rng) const;

  PathSkeleton path(const StartLaw& start, double horizon, RandomStream& rng) const;

  // Positions at increasing times, chaining the Markov property between them.
  std::vector<double> positions(const StartLaw& start, const std::vector<double>& times,
                                RandomStream& rng) const;

  // X_t from x and the copy from R(x) driven by the reflected Brownian motion;
  // both share the first restart point and coincide afterwards.
  std::pair<double, double> mirror_pair(double x, double t, RandomStream& rng) const;

 private:
  const ExitLaw* cached(double x) const;

  JumpMeasure nu_;
  std::vector<ExitLaw> cache_;  // sorted by start point
};

PathSkeleton simulate(const StartLaw& start, const JumpMeasure& nu, double horizon,
                      RandomStream& rng);

// ---------------------------------------------------------------------------
// Law at a fixed time

// Initial law represented by weighted points (exact for atoms, Gauss panels
// for densities). The quasistationary law is carried in closed form.
class StartPoints {
 public:
  static StartPoints point(const Interval& interval, double x);
  static StartPoints measure(const JumpMeasure& rho);
  static StartPoints density(const Interval& interval, const std::function<double(double)>& f,
                             int panels = 64);
  static StartPoints from(const StartLaw& start, const Interval& interval);

  const Interval& interval() const { return interval_; }
  const std::vector<Atom>& nodes() const { return nodes_; }
  double quasistationary_weight() const { return quasistationary_; }
  double mass() const;

  double killed_density(double t, double y) const;
  double killed_cdf(double t, double y) const;
  double survival(double t) const;
  double exit_density(double t) const;
  // int_0^t P(tau <= s) ds
  double exit_cdf_integral(double t) const;
  // E[exp(-theta tau)] for theta >= 0.
  double exit_laplace(double theta) const;

 private:
  StartPoints(Interval interval, std::vector<Atom> nodes, double quasistationary = 0.0)
      : interval_(interval), nodes_(std::move(nodes)), quasistationary_(quasistationary) {}
  Interval interval_;
  std::vector<Atom> nodes_;
  double quasistationary_;  // weight of the closed-form quasistationary part
};

// Bound on P(at least n + 1 jumps by time t).
struct JumpTailBound {
  double time;
  double tail_constant;  // P_nu(tau <= t)
  double bound(int n) const;
};

JumpTailBound jump_tail_bound(const JumpMeasure& nu, double t);
// inf over theta of exp(theta t) E_rho[e^{-theta tau}] E_nu[e^{-theta tau}]^n
double chernoff_jump_bound(const StartPoints& start, const JumpMeasure& nu, double t, int n);

struct LawOptions {
  double dt = 5e-4;         // convolution mesh upper bound, in units of L^2
  int min_steps = 400;      // mesh steps at least this many
  double truncation = 1e-8;
  int max_jumps = 0;        // 0: choose from the tail bound
  int modes = 512;
  bool extrapolate = true;  // Richardson on the mesh of twice the step
};

struct LawGrid {
  double time;
  std::vector<double> y;
  std::vector<double> density;
  int jumps;
  double truncation_bound;
  double tail_constant;
};

// Density of X_t decomposed by the number of jumps before t; evaluable at
// any point of the interval.
class LawAtTime {
 public:
  LawAtTime(StartPoints start, JumpMeasure nu, double t, const LawOptions& options = {});

  double time() const { return t_; }
  int jumps() const { return jumps_; }
  double truncation_bound() const { return bound_; }
  double tail_constant() const { return alpha_; }

  double density(double y) const;
  double cdf(double y) const;
  double mass() const { return cdf(start_.interval().b()); }
  LawGrid grid(int points = 201) const;

 private:
  double jump_part(double y, bool integrated) const;

  StartPoints start_;
  JumpMeasure nu_;
  double t_;
  int jumps_ = 0;
  double bound_ = 0.0;
  double alpha_ = 0.0;
  double rate_end_ = 0.0;          // renewal density at t
  std::vector<double> projection_; // int phi_n dnu
  std::vector<double> remainder_;  // int (u(s) - u(t)) e^{-lambda_n (t-s)} ds
};

LawAtTime law_at_time(const StartLaw& start, const JumpMeasure& nu, double t,
                      const LawOptions& options = {});

// Law of W_t given tau > t for W started from `start`.
double conditioned_density(const StartPoints& start, double t, double y);
// sup_y |conditioned density - quasistationary density| on a 401-point grid.
double quasistationary_check(const Interval& interval, double t);
double quasistationary_check(const StartPoints& start, double t);

// ---------------------------------------------------------------------------
// Invariant law

class InvariantMeasure {
 public:
  explicit InvariantMeasure(JumpMeasure nu);

  const JumpMeasure& measure() const { return nu_; }
  double normalizer() const { return m_; }
  double density(double y) const;
  double cdf(double y) const;
  double mass(double lo, double hi) const { return cdf(hi) - cdf(lo); }
  // Masses of `bins` equal cells.
  std::vector<double> bin_masses(int bins) const;

 private:
  JumpMeasure nu_;
  double m_;
};

InvariantMeasure invariant_density(const JumpMeasure& nu);

// ---------------------------------------------------------------------------
// Renewal equation

struct Indicator {
  double lo;
  double hi;
};
using TestFunction = std::variant<Indicator, std::function<double(double)>>;

struct RenewalOptions {
  double dt = 1e-3;
  double horizon = 3.0;
  bool richardson = true;
  double tolerance = 1e-4;  // accepted Richardson error estimate
};

struct RenewalSystem {
  double dt = 0.0;
  std::vector<double> times;
  std::vector<double> z;   // initial term for the reported solution
  std::vector<double> Z;   // solution from the requested start
  std::vector<double> Z_stationary;  // solution started from nu
  double limit = 0.0;      // mu^nu(f)
  double cycle_mean = 0.0; // E_nu[tau]
  double richardson_error = 0.0;
  double observed_order = 0.0;
  bool accuracy_warning = false;
  std::string warning;

  double at(double t) const;
};

// Solves Z = z + Z * F for the process started from nu and, when a start
// point is given, the delayed equation for that start.
RenewalSystem renewal_solve(const TestFunction& f, const JumpMeasure& nu,
                            std::optional<double> start = std::nullopt,
                            const RenewalOptions& options = {});

// ---------------------------------------------------------------------------
// Total variation diagnostics

// Exact TV between the laws at time t from x and from R(x).
double tv_mirror_exact(const Interval& interval, double x, double t);
// Least-squares slope of log tv_mirror_exact over [t0, t1].
double tv_mirror_rate(const Interval& interval, double x, double t0, double t1,
                      int points = 41);

struct TvEstimate {
  double tv;
  double stderr_;
};

// Paired Monte-Carlo estimate of the mirror TV with 200 (default) bins.
TvEstimate tv_mirror_mc(const Simulator& sim, double x, double t, std::size_t pairs,
                        std::uint64_t seed, int bins = 200, unsigned workers = 0);

struct TvPoint {
  double t;
  double tv;
  double stderr_;
  double argmax_x;
};

struct RateEstimate {
  double rate;
  double stderr_;
  double ci_low;
  double ci_high;
  std::vector<TvPoint> series;
};

// Fits the decay rate of sup_x TV(law of X_t from x, mu^nu).
RateEstimate tv_rate_estimate(const JumpMeasure& nu, const std::vector<double>& xs,
                              const std::vector<double>& ts, std::size_t replicates,
                              std::uint64_t seed, int bins = 200, unsigned workers = 0);

}  // namespace bmjb
