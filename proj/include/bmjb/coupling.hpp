#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bmjb/dirichlet.hpp"
#include "bmjb/model.hpp"
#include "bmjb/stats.hpp"

namespace bmjb {

// Survival window used for coupling-time tail fits.
inline constexpr double kTailLow = 1e-4;
inline constexpr double kTailHigh = 0.2;

enum class CouplingPhase { stage_a, stage_b, stage_c, symmetric, coupled };
std::string_view phase_name(CouplingPhase phase);

// Ordered pair with midpoint at or above the centre. When the input pair had
// its midpoint below the centre, both points and the measure are reflected.
struct NormalizedPair {
  double x;
  double y;
  bool reflected;
  JumpMeasure nu;
};

// Throws PreconditionError when y - x >= dist(supp nu, {a, b}).
NormalizedPair normalize_pair(double x, double y, const JumpMeasure& nu);

// Exit interval (l, r) of the driving Brownian motion, started at 0, for the
// mirror pair (x, R(x)): (-(R(x)-x)/2, ((b-a)-(R(x)-x))/2).
std::pair<double, double> symmetric_interval(const Interval& interval, double x);

// Coupling time of the pair (x, R(x)) under mirror coupling; x in (a, c].
double symmetric_coupling_time(const Interval& interval, double x, RandomStream& rng);

struct StageRecord {
  CouplingPhase phase;
  double left;   // driving-motion exit interval
  double right;
  Side side;
  double duration;
};

struct CouplingRecord {
  double time = 0.0;                // sum of the stage durations
  std::vector<StageRecord> stages;  // in order; the symmetric phase last when visited
  std::optional<double> jump_target;

  int stages_visited() const { return static_cast<int>(stages.size()); }
};

// Event-driven three-stage coupling of BMJB(nu) from x and y. Requires a
// normalized pair: x <= y, (x+y)/2 >= c, y - x < dist(supp nu, {a, b}).
CouplingRecord staged_coupling_sample(double x, double y, const JumpMeasure& nu,
                                      RandomStream& rng);

// normalize_pair followed by staged_coupling_sample.
CouplingRecord coupling_sample(double x, double y, const JumpMeasure& nu, RandomStream& rng);

std::vector<CouplingRecord> coupling_samples(double x, double y, const JumpMeasure& nu,
                                             std::size_t n, std::uint64_t seed,
                                             unsigned workers = 0);

// Brute-force version of the staged construction: Gaussian increments of size
// dt for the driving motion, Brownian-bridge crossing corrections at the
// stage barriers. With a horizon the pair is followed up to that time (past
// coupling as one process) and its positions are returned as well.
struct OracleRun {
  double coupling_time;  // infinity when not coupled before the horizon
  double x;              // positions at the horizon
  double y;
};
OracleRun discretized_oracle(double x, double y, const JumpMeasure& nu, double dt,
                             RandomStream& rng, std::optional<double> horizon = std::nullopt);

struct DominationRow {
  double x;
  double t;
  double survival;
  double center_survival;
};

struct DominationReport {
  std::vector<DominationRow> rows;
  double max_violation = 0.0;  // max survival(x,t) - survival(c,t)
  bool holds = true;
  // Survival decreases as |x - c| grows, for every t.
  bool monotone = true;
};

DominationReport domination_check(const Interval& interval, const std::vector<double>& xs,
                                  const std::vector<double>& ts, double tolerance = 1e-12);

// min over s < 2 pi^2 / L^2 of E[exp(s xi)]^5 exp(-s t), xi the centre exit
// time of an interval of length L/2.
double chernoff_sum5(const Interval& interval, double t);

struct TailComparison {
  std::vector<double> times;
  std::vector<double> coupling_survival, coupling_stderr;
  std::vector<double> sum5_survival, sum5_stderr;
  std::vector<double> chernoff;
  // P(tau > t) <= P(sum5 > t) + 3 sigma at every time.
  bool dominated = true;
  // Chernoff curve >= both empirical curves - 3 sigma at every time.
  bool envelope = true;
  // Empty when the sample is too small for the survival window.
  std::optional<TailFit> tail;
  std::string tail_note;
};

TailComparison tail_vs_sum5(double x, double y, const JumpMeasure& nu, std::size_t samples,
                            const std::vector<double>& times, std::uint64_t seed,
                            unsigned workers = 0);

}  // namespace bmjb
