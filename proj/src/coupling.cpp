#include "bmjb/coupling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "bmjb/parallel.hpp"

namespace bmjb {

std::string_view phase_name(CouplingPhase phase) {
  switch (phase) {
    case CouplingPhase::stage_a: return "stage_a";
    case CouplingPhase::stage_b: return "stage_b";
    case CouplingPhase::stage_c: return "stage_c";
    case CouplingPhase::symmetric: return "symmetric";
    case CouplingPhase::coupled: return "coupled";
  }
  return "unknown";
}

namespace {

double symmetric_tolerance(const Interval& I) { return 1e-12 * I.length(); }

void check_inside(const Interval& I, double v, const char* what) {
  if (!I.contains(v))
    throw NumericalError(std::string("coupling: ") + what + " left the interval (" +
                         std::to_string(v) + ")");
}

void check_pair(double x, double y, const JumpMeasure& nu) {
  const Interval& I = nu.interval();
  if (!I.contains(x) || !I.contains(y))
    throw PreconditionError("coupling: both points must lie in the open interval");
  if (x > y) throw PreconditionError("coupling: pair must be ordered, x <= y");
  if (0.5 * (x + y) < I.center() - symmetric_tolerance(I))
    throw PreconditionError("coupling: pair midpoint below the centre; apply normalize_pair");
  if (y - x >= nu.support_distance())
    throw PreconditionError(
        "coupling: gap " + std::to_string(y - x) + " is not below dist(supp nu, boundary) = " +
        std::to_string(nu.support_distance()) +
        "; couple through intermediate points and the triangle inequality instead");
}

Exit drive(double left, double right, RandomStream& rng) {
  return sample_exit(0.0, Interval(left, right), rng);
}

}  // namespace

NormalizedPair normalize_pair(double x, double y, const JumpMeasure& nu) {
  const Interval& I = nu.interval();
  if (!I.contains(x) || !I.contains(y))
    throw DomainError("normalize_pair: points must lie in the open interval");
  if (x > y) std::swap(x, y);
  NormalizedPair out{x, y, false, nu};
  if (0.5 * (x + y) < I.center() - symmetric_tolerance(I)) {
    out.x = reflect(y, I);
    out.y = reflect(x, I);
    out.reflected = true;
    out.nu = nu.reflected();
  }
  if (out.y - out.x >= out.nu.support_distance())
    throw PreconditionError(
        "normalize_pair: gap " + std::to_string(out.y - out.x) +
        " is not below dist(supp nu, boundary) = " + std::to_string(out.nu.support_distance()) +
        "; couple through intermediate points and the triangle inequality instead");
  return out;
}

std::pair<double, double> symmetric_interval(const Interval& interval, double x) {
  if (!interval.contains(x) || x > interval.center())
    throw DomainError("symmetric_interval: need x in (a, c]");
  const double gap = reflect(x, interval) - x;
  return {-0.5 * gap, 0.5 * (interval.length() - gap)};
}

double symmetric_coupling_time(const Interval& interval, double x, RandomStream& rng) {
  const auto [left, right] = symmetric_interval(interval, x);
  if (!(left < 0.0)) return 0.0;
  return drive(left, right, rng).time;
}

CouplingRecord staged_coupling_sample(double x, double y, const JumpMeasure& nu,
                                      RandomStream& rng) {
  check_pair(x, y, nu);
  const Interval& I = nu.interval();
  const double a = I.a(), b = I.b();
  CouplingRecord rec;
  if (x == y) return rec;
  const double gap = y - x;

  auto stage = [&](CouplingPhase phase, double left, double right) {
    const Exit e = drive(left, right, rng);
    rec.stages.push_back({phase, left, right, e.side, e.time});
    rec.time += e.time;
    return e.side;
  };
  auto symmetric = [&](double lower) {
    check_inside(I, lower, "symmetric-phase point");
    const auto [left, right] = symmetric_interval(I, lower);
    if (left < 0.0) stage(CouplingPhase::symmetric, left, right);
  };

  const double left_a = 0.5 * ((a + b) - (x + y));
  if (left_a > -symmetric_tolerance(I)) {
    symmetric(x);
    return rec;
  }
  if (stage(CouplingPhase::stage_a, left_a, b - y) == Side::left) {
    symmetric(x + left_a);
    return rec;
  }
  // Y hits b and jumps; X sits at b - gap.
  const double j1 = nu.sample(rng);
  rec.jump_target = j1;
  check_inside(I, b - gap, "stage-b start");
  // Mirror stage: X = b - gap + B, Y = J1 - B.
  if (stage(CouplingPhase::stage_b, 0.5 * (gap - (b - j1)), 0.5 * gap) == Side::left) return rec;
  check_inside(I, j1 - 0.5 * gap, "stage-c start");
  // Synchronous stage: X = b - gap/2 + B, Y = J1 - gap/2 + B.
  const double left_c = 0.5 * (a + gap - j1);
  if (stage(CouplingPhase::stage_c, left_c, 0.5 * gap) == Side::right) return rec;
  symmetric(j1 - 0.5 * gap + left_c);
  return rec;
}

CouplingRecord coupling_sample(double x, double y, const JumpMeasure& nu, RandomStream& rng) {
  const NormalizedPair pair = normalize_pair(x, y, nu);
  return staged_coupling_sample(pair.x, pair.y, pair.nu, rng);
}

std::vector<CouplingRecord> coupling_samples(double x, double y, const JumpMeasure& nu,
                                             std::size_t n, std::uint64_t seed, unsigned workers) {
  const NormalizedPair pair = normalize_pair(x, y, nu);
  check_pair(pair.x, pair.y, pair.nu);
  return parallel_map(
      n,
      [&](std::size_t i) {
        RandomStream rng(seed, i);
        return staged_coupling_sample(pair.x, pair.y, pair.nu, rng);
      },
      workers);
}

// ---------------------------------------------------------------------------
// Discretized oracle

OracleRun discretized_oracle(double x, double y, const JumpMeasure& nu, double dt,
                             RandomStream& rng, std::optional<double> horizon) {
  check_pair(x, y, nu);
  if (!(dt > 0.0) || dt > 1e-4) throw DomainError("discretized_oracle: need 0 < dt <= 1e-4");
  if (horizon && !(*horizon > 0.0)) throw DomainError("discretized_oracle: horizon must be positive");
  const Interval& I = nu.interval();
  const double a = I.a(), b = I.b(), c = I.center();
  const double gap = y - x;
  const double sd = std::sqrt(dt);
  const double end = horizon ? *horizon : std::numeric_limits<double>::infinity();

  // Both coordinates are affine in the driving displacement beta since the
  // start of the current phase: X = x0 + sx beta, Y = y0 + sy beta.
  CouplingPhase phase = CouplingPhase::stage_a;
  double x0 = x, sx = 1.0, y0 = y, sy = 1.0, left = 0.0, right = 0.0, j1 = 0.0;
  double coupled_at = std::numeric_limits<double>::infinity();

  auto enter_symmetric = [&](double lower) {
    phase = CouplingPhase::symmetric;
    x0 = lower;
    sx = 1.0;
    y0 = reflect(lower, I);
    sy = -1.0;
    left = a - lower;
    right = c - lower;
  };
  auto enter_coupled = [&](double z, double t) {
    phase = CouplingPhase::coupled;
    coupled_at = std::min(coupled_at, t);
    x0 = y0 = z;
    sx = sy = 1.0;
    left = a - z;
    right = b - z;
  };

  double t = 0.0;
  if (x == y) {
    enter_coupled(x, 0.0);
  } else {
    left = 0.5 * ((a + b) - (x + y));
    right = b - y;
    if (left > -symmetric_tolerance(I)) enter_symmetric(x);
  }
  if (!horizon && phase == CouplingPhase::coupled) return {0.0, x, y};

  double beta = 0.0;
  bool swapped = false;  // the symmetric phase tracks the lower point in x0
  while (t < end) {
    const double next = beta + sd * rng.normal();
    int side = 0;  // -1 left, +1 right
    if (next <= left) {
      side = -1;
    } else if (next >= right) {
      side = 1;
    } else {
      const double p_left = std::exp(-2.0 * (beta - left) * (next - left) / dt);
      const double p_right = std::exp(-2.0 * (right - beta) * (right - next) / dt);
      const bool hit_left = rng.uniform() < p_left;
      const bool hit_right = rng.uniform() < p_right;
      if (hit_left && hit_right)
        side = p_left >= p_right ? -1 : 1;
      else if (hit_left)
        side = -1;
      else if (hit_right)
        side = 1;
    }
    if (side == 0) {
      t += dt;
      beta = next;
      continue;
    }
    // The crossing happened inside the step; place it at the midpoint.
    t += 0.5 * dt;
    beta = side < 0 ? left : right;
    const double xe = x0 + sx * beta, ye = y0 + sy * beta;
    switch (phase) {
      case CouplingPhase::stage_a:
        if (side < 0) {
          enter_symmetric(xe);
        } else {
          j1 = nu.sample(rng);
          phase = CouplingPhase::stage_b;
          x0 = xe;
          sx = 1.0;
          y0 = j1;
          sy = -1.0;
          left = 0.5 * (gap - (b - j1));
          right = 0.5 * gap;
        }
        break;
      case CouplingPhase::stage_b:
        if (side < 0) {
          enter_coupled(xe, t);
        } else {
          phase = CouplingPhase::stage_c;
          x0 = xe;
          y0 = ye;
          sx = sy = 1.0;
          left = 0.5 * (a + gap - j1);
          right = 0.5 * gap;
        }
        break;
      case CouplingPhase::stage_c:
        if (side > 0) {
          enter_coupled(j1, t);
        } else {
          enter_symmetric(ye);
          swapped = true;
        }
        break;
      case CouplingPhase::symmetric:
        enter_coupled(side < 0 ? nu.sample(rng) : c, t);
        break;
      case CouplingPhase::coupled:
        enter_coupled(nu.sample(rng), t);
        break;
    }
    beta = 0.0;
    if (!horizon && phase == CouplingPhase::coupled) return {coupled_at, x0, y0};
    t += 0.5 * dt;
  }
  double xh = x0 + sx * beta, yh = y0 + sy * beta;
  if (phase == CouplingPhase::symmetric && swapped) std::swap(xh, yh);
  return {coupled_at, xh, yh};
}

// ---------------------------------------------------------------------------
// Domination and tails

DominationReport domination_check(const Interval& interval, const std::vector<double>& xs,
                                  const std::vector<double>& ts, double tolerance) {
  DominationReport report;
  const double c = interval.center();
  std::vector<double> order = xs;
  std::sort(order.begin(), order.end(),
            [&](double p, double q) { return std::abs(p - c) < std::abs(q - c); });
  for (double t : ts) {
    const double centre = survival(interval, c, t);
    double previous = std::numeric_limits<double>::infinity();
    for (double x : order) {
      const double s = survival(interval, x, t);
      report.rows.push_back({x, t, s, centre});
      report.max_violation = std::max(report.max_violation, s - centre);
      if (s > previous + tolerance) report.monotone = false;
      previous = s;
    }
  }
  report.holds = report.max_violation <= tolerance;
  return report;
}

double chernoff_sum5(const Interval& interval, double t) {
  const double half = 0.5 * interval.length();
  const double s_max = std::numbers::pi * std::numbers::pi / (2.0 * half * half);
  auto objective = [&](double s) { return 5.0 * std::log(mgf_exit_center(s, half)) - s * t; };
  double lo = 0.0, hi = s_max * (1.0 - 1e-9);
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
  double f1 = objective(x1), f2 = objective(x2);
  for (int iter = 0; iter < 200 && hi - lo > 1e-12 * s_max; ++iter) {
    if (f1 < f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - g * (hi - lo);
      f1 = objective(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + g * (hi - lo);
      f2 = objective(x2);
    }
  }
  return std::min(1.0, std::exp(std::min({f1, f2, objective(0.0)})));
}

TailComparison tail_vs_sum5(double x, double y, const JumpMeasure& nu, std::size_t samples,
                            const std::vector<double>& times, std::uint64_t seed,
                            unsigned workers) {
  if (samples < 2) throw DomainError("tail_vs_sum5: need at least two samples");
  const Interval& I = nu.interval();
  const std::vector<CouplingRecord> records = coupling_samples(x, y, nu, samples, seed, workers);
  std::vector<double> coupling(samples);
  for (std::size_t i = 0; i < samples; ++i) coupling[i] = records[i].time;

  ExitLaw centre(Interval(0.0, 0.5 * I.length()), 0.25 * I.length());
  centre.build_table();
  std::vector<double> sum5 = parallel_map(
      samples,
      [&](std::size_t i) {
        RandomStream rng(seed, samples + i);
        double s = 0.0;
        for (int k = 0; k < 5; ++k) s += centre.sample(rng).time;
        return s;
      },
      workers);
  std::sort(sum5.begin(), sum5.end());
  std::vector<double> sorted = coupling;
  std::sort(sorted.begin(), sorted.end());

  TailComparison out;
  out.times = times;
  const double n = static_cast<double>(samples);
  for (double t : times) {
    const double pc = empirical_survival(sorted, t), ps = empirical_survival(sum5, t);
    const double sc = std::sqrt(pc * (1.0 - pc) / n), ss = std::sqrt(ps * (1.0 - ps) / n);
    const double envelope = chernoff_sum5(I, t);
    out.coupling_survival.push_back(pc);
    out.coupling_stderr.push_back(sc);
    out.sum5_survival.push_back(ps);
    out.sum5_stderr.push_back(ss);
    out.chernoff.push_back(envelope);
    if (pc > ps + 3.0 * std::hypot(sc, ss)) out.dominated = false;
    if (envelope < std::max(pc - 3.0 * sc, ps - 3.0 * ss)) out.envelope = false;
  }
  try {
    out.tail = fit_tail_exponent(std::move(coupling), kTailLow, kTailHigh);
  } catch (const NumericalError& e) {
    out.tail_note = e.what();
  }
  return out;
}

}  // namespace bmjb
