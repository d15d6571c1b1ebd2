#include <algorithm>
#include <cmath>

#include "bmjb/parallel.hpp"
#include "bmjb/process.hpp"
#include "bmjb/stats.hpp"

namespace bmjb {

// The difference of the laws from x and R(x) only involves paths that have
// not jumped yet, and equals the killed kernel of the half interval (a, c)
// on (a, c). Its L1 half-norm is the survival probability in (a, c).
double tv_mirror_exact(const Interval& interval, double x, double t) {
  if (!interval.contains(x)) throw DomainError("tv_mirror_exact: point outside the interval");
  if (!(t > 0.0)) throw DomainError("tv_mirror_exact: time must be positive");
  const double c = interval.center();
  if (x == c) return 0.0;
  const double start = x < c ? x : reflect(x, interval);
  return survival(Interval(interval.a(), c), start, t);
}

double tv_mirror_rate(const Interval& interval, double x, double t0, double t1, int points) {
  if (!(t1 > t0) || points < 2) throw DomainError("tv_mirror_rate: empty window");
  std::vector<double> ts, ys, ws;
  for (int i = 0; i < points; ++i) {
    const double t = t0 + (t1 - t0) * i / (points - 1);
    const double tv = tv_mirror_exact(interval, x, t);
    if (!(tv > 0.0)) throw NumericalError("tv_mirror_rate: TV vanishes in the window");
    ts.push_back(t);
    ys.push_back(std::log(tv));
    ws.push_back(1.0);
  }
  return weighted_linear_fit(ts, ys, ws).slope;
}

TvEstimate tv_mirror_mc(const Simulator& sim, double x, double t, std::size_t pairs,
                        std::uint64_t seed, int bins, unsigned workers) {
  const auto samples = parallel_map(
      pairs,
      [&](std::size_t i) {
        RandomStream rng(seed, i);
        return sim.mirror_pair(x, t, rng);
      },
      workers);
  std::vector<double> xs(pairs), ys(pairs);
  for (std::size_t i = 0; i < pairs; ++i) {
    xs[i] = samples[i].first;
    ys[i] = samples[i].second;
  }
  const CrossFitTv tv = tv_crossfit_paired(xs, ys, sim.interval(), bins);
  return {tv.tv, tv.stderr_};
}

RateEstimate tv_rate_estimate(const JumpMeasure& nu, const std::vector<double>& xs,
                              const std::vector<double>& ts, std::size_t replicates,
                              std::uint64_t seed, int bins, unsigned workers) {
  if (xs.empty() || ts.size() < 2) throw DomainError("tv_rate_estimate: need points and times");
  const Simulator sim(nu);
  const InvariantMeasure invariant(nu);
  const std::vector<double> probs = invariant.bin_masses(bins);

  RateEstimate out{};
  out.series.assign(ts.size(), TvPoint{0.0, -1.0, 0.0, 0.0});
  for (std::size_t xi = 0; xi < xs.size(); ++xi) {
    const double x = xs[xi];
    const auto paths = parallel_map(
        replicates,
        [&](std::size_t i) {
          RandomStream rng(seed, xi * replicates + i);
          return sim.positions(x, ts, rng);
        },
        workers);
    for (std::size_t k = 0; k < ts.size(); ++k) {
      std::vector<double> samples(replicates);
      for (std::size_t i = 0; i < replicates; ++i) samples[i] = paths[i][k];
      const CrossFitTv tv = tv_crossfit(samples, nu.interval(), probs);
      if (tv.tv > out.series[k].tv) out.series[k] = {ts[k], tv.tv, tv.stderr_, x};
    }
  }
  std::vector<double> tt, ys, ws;
  for (const TvPoint& p : out.series) {
    if (!(p.tv > 3.0 * p.stderr_))
      throw NumericalError("tv_rate_estimate: TV at t = " + std::to_string(p.t) +
                           " is below the Monte-Carlo noise floor");
    tt.push_back(p.t);
    ys.push_back(std::log(p.tv));
    ws.push_back((p.tv / p.stderr_) * (p.tv / p.stderr_));
  }
  const LinearFit fit = weighted_linear_fit(tt, ys, ws);
  double chi2 = 0.0;
  for (std::size_t i = 0; i < tt.size(); ++i) {
    const double r = ys[i] - (fit.slope * tt[i] + fit.intercept);
    chi2 += ws[i] * r * r;
  }
  const double dof = static_cast<double>(tt.size()) - 2.0;
  const double inflation = dof > 0.0 ? std::sqrt(std::max(1.0, chi2 / dof)) : 1.0;
  out.rate = -fit.slope;
  out.stderr_ = fit.slope_stderr * inflation;
  out.ci_low = out.rate - 1.96 * out.stderr_;
  out.ci_high = out.rate + 1.96 * out.stderr_;
  return out;
}

}  // namespace bmjb
