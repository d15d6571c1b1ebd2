#include "bmjb/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <numbers>

#include "bmjb/coupling.hpp"
#include "bmjb/parallel.hpp"
#include "bmjb/process.hpp"
#include "bmjb/stats.hpp"

namespace bmjb {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kPi2 = kPi * kPi;

std::string format(const char* fmt, ...) {
  char buffer[1024];
  va_list args;
  va_start(args, fmt);
  std::vsnprintf(buffer, sizeof buffer, fmt, args);
  va_end(args);
  return buffer;
}

const Interval kUnit(0.0, 1.0);

std::vector<std::pair<std::string, JumpMeasure>> single_measures() {
  std::vector<Atom> five;
  for (double p : {0.3, 0.4, 0.5, 0.6, 0.7}) five.push_back({p, 0.2});
  return {{"Dirac(0.5)", JumpMeasure::dirac(kUnit, 0.5)},
          {"Dirac(0.3)", JumpMeasure::dirac(kUnit, 0.3)},
          {"uniform 5-atom mixture", JumpMeasure::mixture(kUnit, five)},
          {"quantize(qsd, 32)", quantize(JumpMeasure::quasistationary(kUnit), 32)}};
}

struct Outcome {
  bool passed;
  std::string detail;
};

Outcome gap_constancy(const VerifyOptions& o) {
  double worst = 0.0;
  std::string detail;
  for (const auto& [name, nu] : single_measures()) {
    const double gap = spectral_gap(nu, o.workers);
    worst = std::max(worst, std::abs(gap - 2.0 * kPi2));
    detail += format("%s %.10f; ", name.c_str(), gap);
  }
  return {worst < 1e-8, detail + format("max |gap - 2 pi^2| = %.2e (tol 1e-8)", worst)};
}

Outcome realness(const VerifyOptions& o) {
  SearchRegion region = default_region(kUnit);
  region.re_max = 120.0;
  region.im_max = 50.0;
  bool ok = true;
  std::string detail;
  double worst_im = 0.0;
  for (const auto& [name, nu] : single_measures()) {
    const CharacteristicSystem system(nu);
    const SpectrumResult result = find_spectrum(system, region, o.workers);
    int scanned = 0;
    for (const auto& r : oracle::real_root_scan(system, region.re_min, region.re_max))
      scanned += r.multiplicity;
    const double im = result.max_imaginary();
    worst_im = std::max(worst_im, im);
    const bool good = im < 1e-6 && scanned == result.total_multiplicity() &&
                      result.winding == result.total_multiplicity();
    ok = ok && good;
    detail += format("%s: %d roots (scan %d, winding %d); ", name.c_str(),
                     result.total_multiplicity(), scanned, result.winding);
  }
  return {ok, detail + format("max |Im| = %.1e (tol 1e-6)", worst_im)};
}

Outcome two_measure_optimum(const VerifyOptions& o) {
  const double target = 4.5 * kPi2;
  const double gap = spectral_gap(JumpMeasure::dirac(kUnit, 2.0 / 3.0),
                                  JumpMeasure::dirac(kUnit, 1.0 / 3.0), o.workers);
  constexpr int n = 21;
  const double step = 0.8 / (n - 1);
  const auto gaps = parallel_map(
      n * n,
      [&](std::size_t k) {
        const double p = 0.1 + step * static_cast<double>(k / n);
        const double q = 0.1 + step * static_cast<double>(k % n);
        return spectral_gap(JumpMeasure::dirac(kUnit, p), JumpMeasure::dirac(kUnit, q), 1);
      },
      o.workers);
  const auto best = static_cast<std::size_t>(std::max_element(gaps.begin(), gaps.end()) - gaps.begin());
  const double p = 0.1 + step * static_cast<double>(best / n);
  const double q = 0.1 + step * static_cast<double>(best % n);
  const bool located = std::abs(p - 2.0 / 3.0) <= step && std::abs(q - 1.0 / 3.0) <= step;
  const bool exact = std::abs(gap - target) < 1e-8;
  const bool bounded = gaps[best] <= target + 1e-8;
  return {exact && located && bounded,
          format("gap(2/3, 1/3) = %.10f, |err| = %.2e (tol 1e-8); grid max %.6f at (%.2f, %.2f), "
                 "cell %.2f",
                 gap, std::abs(gap - target), gaps[best], p, q, step)};
}

Outcome infimum_approach(const VerifyOptions& o) {
  std::vector<int> ns;
  for (int n = 4; n <= 1024; n *= 2) ns.push_back(n);
  const auto gaps = parallel_map(
      ns.size(),
      [&](std::size_t i) {
        const double p = 1.0 / ns[i];
        return spectral_gap(JumpMeasure::dirac(kUnit, p), JumpMeasure::dirac(kUnit, 1.0 - p), 1);
      },
      o.workers);
  bool decreasing = true;
  std::string detail;
  for (std::size_t i = 0; i < ns.size(); ++i) {
    if (i > 0 && !(gaps[i] < gaps[i - 1])) decreasing = false;
    detail += format("n=%d %.6f; ", ns[i], gaps[i]);
  }
  const double floor = 0.5 * kPi2;
  const double last = gaps.back();
  const bool close = last < 1.05 * floor && last > floor;
  return {decreasing && close,
          detail + format("relative excess at n=1024: %.4f (need (0, 0.05))", last / floor - 1.0)};
}

Outcome invariant_measure(const VerifyOptions& o) {
  const JumpMeasure nu = JumpMeasure::dirac(kUnit, 0.5);
  const Simulator sim(nu);
  constexpr std::size_t n = 1000000;
  const auto samples = parallel_map(
      n,
      [&](std::size_t i) {
        RandomStream rng(o.seed, i);
        return sim.run(0.2, 3.0, rng).position;
      },
      o.workers);
  const InvariantMeasure mu(nu);
  const double tv = tv_plugin(histogram(samples, kUnit, 200), mu.bin_masses(200));

  const JumpMeasure qsd = JumpMeasure::quasistationary(kUnit);
  const InvariantMeasure fixed(qsd);
  double peak = 0.0, fixed_error = 0.0;
  for (int i = 1; i < 400; ++i) {
    const double y = i / 400.0;
    peak = std::max(peak, qsd.density(y));
    fixed_error = std::max(fixed_error, std::abs(fixed.density(y) - qsd.density(y)));
  }
  const double conditioned = std::max(quasistationary_check(kUnit, 0.05), quasistationary_check(kUnit, 1.0));
  const double relative = std::max(fixed_error, conditioned) / peak;
  return {tv < 0.01 && relative < 1e-10,
          format("200-bin TV at t=3 from 1e6 paths = %.5f (tol 0.01); qsd fixed-point sup-relative "
                 "error %.2e (tol 1e-10)",
                 tv, relative)};
}

Outcome mirror_rate(const VerifyOptions& o) {
  const double slope = -tv_mirror_rate(kUnit, 0.25, 0.2, 0.6);
  const double rel = std::abs(slope / (2.0 * kPi2) - 1.0);
  const Simulator sim(JumpMeasure::dirac(kUnit, 0.5));
  const TvEstimate mc = tv_mirror_mc(sim, 0.25, 0.2, 1000000, o.seed, 200, o.workers);
  const double exact = tv_mirror_exact(kUnit, 0.25, 0.2);
  const double z = std::abs(mc.tv - exact) / mc.stderr_;
  return {rel < 5e-3 && z < 3.0,
          format("slope %.5f vs -2 pi^2, relative error %.2e (tol 5e-3); MC TV %.5f +- %.5f vs exact "
                 "%.5f (%.2f sigma)",
                 -slope, rel, mc.tv, mc.stderr_, exact, z)};
}

Outcome coupling_efficiency(const VerifyOptions& o) {
  std::vector<double> ts;
  for (int i = 0; i <= 100; ++i) ts.push_back(0.01 * i);
  const TailComparison cmp =
      tail_vs_sum5(0.45, 0.55, JumpMeasure::dirac(kUnit, 0.5), 100000, ts, o.seed, o.workers);
  if (!cmp.tail) return {false, "tail fit failed: " + cmp.tail_note};
  const double ratio = cmp.tail->rate / (2.0 * kPi2);
  return {cmp.dominated && ratio >= 0.9 && ratio <= 1.1,
          format("domination on %zu grid points: %s; tail rate %.3f +- %.3f = %.4f x 2 pi^2 (need "
                 "[0.9, 1.1])",
                 ts.size(), cmp.dominated ? "yes" : "no", cmp.tail->rate, cmp.tail->stderr_, ratio)};
}

Outcome sampler_equivalence(const VerifyOptions& o) {
  const JumpMeasure nu = JumpMeasure::mixture(kUnit, {{0.4, 0.5}, {0.6, 0.5}});
  const double x = 0.5, y = 0.58, dt = 1e-5, horizon = 0.3;
  constexpr std::size_t n = 10000;
  const auto records = coupling_samples(x, y, nu, n, o.seed, o.workers);
  std::vector<double> staged(n);
  for (std::size_t i = 0; i < n; ++i) staged[i] = records[i].time;
  const auto oracle_times = parallel_map(
      n,
      [&](std::size_t i) {
        RandomStream rng(o.seed + 1, i);
        return discretized_oracle(x, y, nu, dt, rng).coupling_time;
      },
      o.workers);
  const TestResult ks = ks_two_sample(staged, oracle_times);

  const auto runs = parallel_map(
      n,
      [&](std::size_t i) {
        RandomStream rng(o.seed + 2, i);
        return discretized_oracle(x, y, nu, dt, rng, horizon);
      },
      o.workers);
  double worst_p = 1.0;
  std::string marginals;
  for (int side = 0; side < 2; ++side) {
    std::vector<double> positions(n);
    for (std::size_t i = 0; i < n; ++i) positions[i] = side == 0 ? runs[i].x : runs[i].y;
    const LawAtTime law = law_at_time(side == 0 ? x : y, nu, horizon);
    std::vector<double> probs(20);
    for (int k = 0; k < 20; ++k) probs[k] = law.cdf((k + 1) / 20.0) - law.cdf(k / 20.0);
    const TestResult chi = chi_square_test(histogram(positions, kUnit, 20), probs);
    worst_p = std::min(worst_p, chi.p_value);
    marginals += format("%s chi2 %.2f (dof %.0f) p %.3f; ", side == 0 ? "X" : "Y", chi.statistic,
                        chi.dof, chi.p_value);
  }
  return {ks.p_value > 0.01 && worst_p > 0.01,
          format("KS D %.4f p %.3f; ", ks.statistic, ks.p_value) + marginals + "(need p > 0.01)"};
}

Outcome renewal(const VerifyOptions& o) {
  const JumpMeasure nu = JumpMeasure::dirac(kUnit, 0.5);
  const double start = 0.3;
  RenewalOptions options;
  options.dt = 1e-3;
  options.horizon = 3.0;
  const RenewalSystem sys = renewal_solve(Indicator{0.4, 0.6}, nu, start, options);
  double worst = 0.0;
  for (std::size_t i = 0; i < sys.times.size(); ++i) {
    if (sys.times[i] < 2.0 - 1e-12) continue;
    worst = std::max({worst, std::abs(sys.Z[i] - 0.36), std::abs(sys.Z_stationary[i] - 0.36)});
  }
  const Simulator sim(nu);
  constexpr std::size_t n = 200000;
  const auto hits = parallel_map(
      n,
      [&](std::size_t i) {
        RandomStream rng(o.seed, i);
        const double p = sim.run(start, 0.5, rng).position;
        return p > 0.4 && p < 0.6 ? 1.0 : 0.0;
      },
      o.workers);
  const MeanEstimate mc = mean_estimate(hits);
  const double z = std::abs(sys.at(0.5) - mc.mean) / mc.stderr_;
  return {worst < 1e-3 && z < 3.0,
          format("max |Z(t) - 0.36| over t >= 2: %.2e (tol 1e-3); Z(0.5) = %.5f vs MC %.5f +- %.5f "
                 "(%.2f sigma)",
                 worst, sys.at(0.5), mc.mean, mc.stderr_, z)};
}

Outcome kernel_infrastructure(const VerifyOptions& o) {
  const double tc = crossover_time(kUnit);
  double kernel = 0.0;
  for (int i = 1; i < 40; ++i)
    for (int j = 1; j < 40; ++j) {
      const double x = i / 40.0, y = j / 40.0;
      kernel = std::max(kernel, std::abs(heat_kernel_spectral(kUnit, tc, x, y) -
                                         heat_kernel_image(kUnit, tc, x, y)));
    }

  std::vector<double> xs, ts;
  for (int i = 1; i <= 50; ++i) {
    xs.push_back(i / 51.0);
    ts.push_back(0.02 * i);
  }
  const DominationReport dom = domination_check(kUnit, xs, ts);

  const JumpMeasure nu = JumpMeasure::dirac(kUnit, 0.5);
  const Simulator sim(nu);
  constexpr std::size_t n = 100000;
  bool jumps_ok = true;
  std::string jumps;
  for (double t : {0.1, 0.25, 0.5}) {
    const double alpha = jump_tail_bound(nu, t).tail_constant;
    const auto counts = parallel_map(
        n,
        [&](std::size_t i) {
          RandomStream rng(o.seed + static_cast<std::uint64_t>(1000 * t), i);
          return sim.run(0.5, t, rng).jumps;
        },
        o.workers);
    const int top = *std::max_element(counts.begin(), counts.end());
    double worst = -1.0;
    for (int k = 1; k <= top; ++k) {
      const double p = static_cast<double>(std::count_if(counts.begin(), counts.end(),
                                                         [&](int c) { return c >= k; })) / n;
      const double bound = std::pow(alpha, k);
      const double sigma = std::sqrt(bound * (1.0 - bound) / n);
      worst = std::max(worst, (p - bound) / std::max(sigma, 1.0 / n));
      if (p > bound + 3.0 * sigma + 1.0 / n) jumps_ok = false;
    }
    if (!jumps.empty()) jumps += "; ";
    jumps += format("t=%.2f alpha %.4f worst excess %.2f sigma", t, alpha, worst);
  }
  return {kernel < 1e-10 && dom.holds && jumps_ok,
          format("kernel agreement at crossover %.2e (tol 1e-10); domination on 50x50 grid: %s "
                 "(max excess %.2e); ",
                 kernel, dom.holds ? "holds" : "violated", dom.max_violation) +
              jumps};
}

struct Criterion {
  const char* name;
  Outcome (*run)(const VerifyOptions&);
};

const Criterion kTable[kCriteria] = {
    {"gap constancy", gap_constancy},
    {"single-measure realness", realness},
    {"two-measure optimum", two_measure_optimum},
    {"infimum approach", infimum_approach},
    {"invariant measure", invariant_measure},
    {"mirror-TV rate", mirror_rate},
    {"coupling efficiency", coupling_efficiency},
    {"sampler equivalence", sampler_equivalence},
    {"renewal solver", renewal},
    {"kernel infrastructure", kernel_infrastructure},
};

}  // namespace

CriterionResult verify_criterion(int id, const VerifyOptions& options) {
  if (id < 1 || id > kCriteria) throw DomainError("criterion id must be in 1.." + std::to_string(kCriteria));
  const Criterion& c = kTable[id - 1];
  const auto start = std::chrono::steady_clock::now();
  CriterionResult result{id, c.name, false, ""};
  try {
    const Outcome out = c.run(options);
    result.passed = out.passed;
    result.detail = out.detail;
  } catch (const std::exception& e) {
    result.detail = std::string("error: ") + e.what();
  }
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

std::vector<CriterionResult> verify_all(const VerifyOptions& options,
                                        const std::function<void(const CriterionResult&)>& on_result) {
  std::vector<CriterionResult> out;
  for (int id = 1; id <= kCriteria; ++id) {
    out.push_back(verify_criterion(id, options));
    if (on_result) on_result(out.back());
  }
  return out;
}

std::string format_result(const CriterionResult& r) {
  return format("[%s] %d %s (%.1fs): ", r.passed ? "PASS" : "FAIL", r.id, r.name.c_str(), r.seconds) +
         r.detail;
}

// ---------------------------------------------------------------------------

namespace oracle {

std::vector<ScanRoot> real_root_scan(const CharacteristicSystem& system, double lo, double hi,
                                     int points) {
  if (!(hi > lo) || points < 10) throw DomainError("real_root_scan: empty range");
  auto f = [&](double r) { return system.determinant(r).real() / r; };
  auto residual = [&](double r) { return std::abs(system.determinant(r)) / system.scale(r); };
  const double step = (hi - lo) / points;
  std::vector<double> grid(points + 1), values(points + 1);
  for (int i = 0; i <= points; ++i) {
    grid[i] = lo + step * i;
    values[i] = f(grid[i]);
  }
  std::vector<double> found;
  for (int i = 1; i <= points; ++i) {
    if (values[i] == 0.0) {
      found.push_back(grid[i]);
    } else if ((values[i - 1] < 0.0) != (values[i] < 0.0) && values[i - 1] != 0.0) {
      double a = grid[i - 1], b = grid[i], fa = values[i - 1];
      for (int iter = 0; iter < 200 && b - a > 1e-15 * b; ++iter) {
        const double m = 0.5 * (a + b), fm = f(m);
        if (fm == 0.0) {
          a = b = m;
          break;
        }
        if ((fm < 0.0) == (fa < 0.0)) {
          a = m;
          fa = fm;
        } else {
          b = m;
        }
      }
      found.push_back(0.5 * (a + b));
    } else if (i < points && std::abs(values[i]) < std::abs(values[i - 1]) &&
               std::abs(values[i]) < std::abs(values[i + 1]) &&
               (values[i] < 0.0) == (values[i + 1] < 0.0)) {
      // Touching zero without a sign change.
      double a = grid[i - 1], b = grid[i + 1];
      const double g = 0.5 * (std::sqrt(5.0) - 1.0);
      double x1 = b - g * (b - a), x2 = a + g * (b - a);
      double f1 = std::abs(f(x1)), f2 = std::abs(f(x2));
      for (int iter = 0; iter < 200 && b - a > 1e-14 * b; ++iter) {
        if (f1 < f2) {
          b = x2;
          x2 = x1;
          f2 = f1;
          x1 = b - g * (b - a);
          f1 = std::abs(f(x1));
        } else {
          a = x1;
          x1 = x2;
          f1 = f2;
          x2 = a + g * (b - a);
          f2 = std::abs(f(x2));
        }
      }
      const double r = 0.5 * (a + b);
      if (residual(r) < 1e-10) found.push_back(r);
    }
  }
  std::vector<ScanRoot> roots;
  const double h = 1e-4 * (hi - lo);
  for (double r : found) {
    if (!roots.empty() && r - roots.back().value < 10.0 * step) continue;
    const double near = std::abs(f(r + h)) + std::abs(f(r - h));
    const double far = std::abs(f(r + 2.0 * h)) + std::abs(f(r - 2.0 * h));
    const int m = std::max(1, static_cast<int>(std::lround(std::log2(far / near))));
    roots.push_back({r, m});
  }
  return roots;
}

}  // namespace oracle

}  // namespace bmjb
