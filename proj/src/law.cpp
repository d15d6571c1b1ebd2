#include <algorithm>
#include <cmath>
#include <numbers>

#include "bmjb/detail/series.hpp"
#include "bmjb/process.hpp"
#include "bmjb/quadrature.hpp"

namespace bmjb {

using detail::kPi;

// ---------------------------------------------------------------------------
// StartPoints

StartPoints StartPoints::point(const Interval& interval, double x) {
  if (!interval.contains(x)) throw DomainError("start point outside the open interval");
  return StartPoints(interval, {{x, 1.0}});
}

StartPoints StartPoints::measure(const JumpMeasure& rho) {
  if (std::holds_alternative<JumpMeasure::Quasistationary>(rho.kind())) return StartPoints(rho.interval(), {}, 1.0);
  return StartPoints(rho.interval(), rho.quadrature());
}

StartPoints StartPoints::density(const Interval& interval, const std::function<double(double)>& f,
                                 int panels) {
  if (panels < 1) throw DomainError("start density needs at least one panel");
  const GaussRule& rule = gauss_legendre(8);
  const double h = interval.length() / panels;
  std::vector<Atom> nodes;
  nodes.reserve(8 * panels);
  for (int p = 0; p < panels; ++p) {
    const double mid = interval.a() + (p + 0.5) * h;
    for (int k = 0; k < 8; ++k) {
      const double x = mid + 0.5 * h * rule.nodes[k];
      const double w = 0.5 * h * rule.weights[k] * f(x);
      if (w != 0.0) nodes.push_back({x, w});
    }
  }
  return StartPoints(interval, std::move(nodes));
}

StartPoints StartPoints::from(const StartLaw& start, const Interval& interval) {
  if (const double* x = std::get_if<double>(&start)) return point(interval, *x);
  const JumpMeasure& rho = std::get<JumpMeasure>(start);
  if (!(rho.interval() == interval)) throw ValidationError("start law lives on another interval");
  return measure(rho);
}

double StartPoints::mass() const {
  double m = quasistationary_;
  for (const Atom& node : nodes_) m += node.weight;
  return m;
}

namespace {

// Weight times exp(-lambda_1 t) for the quasistationary part.
double decayed(const Interval& I, double weight, double t) {
  return weight == 0.0 ? 0.0 : weight * std::exp(-dirichlet_eigenvalue(I, 0) * t);
}

}  // namespace

double StartPoints::killed_density(double t, double y) const {
  double sum = 0.0;
  if (quasistationary_ != 0.0)
    sum = decayed(interval_, quasistationary_, t) * JumpMeasure::quasistationary(interval_).density(y);
  for (const Atom& node : nodes_) sum += node.weight * heat_kernel(interval_, t, node.point, y);
  return sum;
}

double StartPoints::killed_cdf(double t, double y) const {
  double sum = 0.0;
  if (quasistationary_ != 0.0)
    sum = decayed(interval_, quasistationary_, t) * JumpMeasure::quasistationary(interval_).cdf(y);
  for (const Atom& node : nodes_) sum += node.weight * bmjb::killed_cdf(interval_, t, node.point, y);
  return sum;
}

double StartPoints::survival(double t) const {
  double sum = decayed(interval_, quasistationary_, t);
  for (const Atom& node : nodes_) sum += node.weight * bmjb::survival(interval_, node.point, t);
  return sum;
}

double StartPoints::exit_density(double t) const {
  double sum = dirichlet_eigenvalue(interval_, 0) * decayed(interval_, quasistationary_, t);
  for (const Atom& node : nodes_) sum += node.weight * bmjb::exit_density(interval_, node.point, t);
  return sum;
}

double StartPoints::exit_cdf_integral(double t) const {
  double sum = 0.0;
  if (quasistationary_ != 0.0)
    sum = quasistationary_ * detail::exponential_cdf_integral(dirichlet_eigenvalue(interval_, 0), t);
  for (const Atom& node : nodes_) sum += node.weight * bmjb::exit_cdf_integral(interval_, node.point, t);
  return sum;
}

double StartPoints::exit_laplace(double theta) const {
  const double lambda = dirichlet_eigenvalue(interval_, 0);
  double sum = quasistationary_ * lambda / (lambda + theta);
  for (const Atom& node : nodes_) sum += node.weight * exit_mgf(interval_, node.point, -theta);
  return sum;
}

// ---------------------------------------------------------------------------
// Jump-count tails

double JumpTailBound::bound(int n) const { return std::pow(tail_constant, n); }

JumpTailBound jump_tail_bound(const JumpMeasure& nu, double t) {
  if (!(t > 0.0)) throw DomainError("jump_tail_bound: time must be positive");
  const double alive = survival(nu, t);
  return {t, std::clamp(1.0 - alive, 0.0, 1.0)};
}

double chernoff_jump_bound(const StartPoints& start, const JumpMeasure& nu, double t, int n) {
  const StartPoints jumps = StartPoints::measure(nu);
  auto log_bound = [&](double log_theta) {
    const double theta = std::exp(log_theta);
    return theta * t + std::log(start.exit_laplace(theta)) + n * std::log(jumps.exit_laplace(theta));
  };
  // Golden-section search in log theta; the objective is unimodal.
  double lo = std::log(1e-6), hi = std::log(1e8);
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
  double f1 = log_bound(x1), f2 = log_bound(x2);
  for (int iter = 0; iter < 120; ++iter) {
    if (f1 < f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - g * (hi - lo);
      f1 = log_bound(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + g * (hi - lo);
      f2 = log_bound(x2);
    }
  }
  return std::min(1.0, std::exp(std::min(f1, f2)));
}

// ---------------------------------------------------------------------------
// LawAtTime

namespace {

// int_0^dt e^{-lambda r} dr and int_0^dt r e^{-lambda r} dr
void cell_moments(double lambda, double dt, double& e0, double& e1) {
  const double x = lambda * dt;
  if (x < 1e-2) {
    double s0 = 0.0, s1 = 0.0, term = 1.0, fact = 1.0;
    for (int k = 0; k < 8; ++k) {
      fact *= (k + 1);
      s0 += term / fact;                       // (-x)^k / (k+1)!
      s1 += term * (k + 1) / (fact * (k + 2));  // (-x)^k (k+1) / (k+2)!
      term *= -x;
    }
    e0 = dt * s0;
    e1 = dt * dt * s1;
    return;
  }
  e0 = -std::expm1(-x) / lambda;
  e1 = (1.0 - std::exp(-x) * (1.0 + x)) / (lambda * lambda);
}

// Renewal density summed over jump counts 1..jumps, from the first-jump
// density h and per-cell excursion masses dF and first moments M1.
std::vector<double> renewal_rate(std::vector<double> h, const std::vector<double>& dF,
                                 const std::vector<double>& M1, double dt, int jumps) {
  const std::size_t steps = h.size() - 1;
  std::vector<double> rate = h;
  std::vector<double> next(steps + 1);
  for (int k = 2; k <= jumps; ++k) {
    double added = 0.0;
    for (std::size_t i = 0; i <= steps; ++i) {
      double sum = 0.0;
      for (std::size_t j = 1; j <= i; ++j)
        sum += h[i - j + 1] * dF[j] + (h[i - j] - h[i - j + 1]) * M1[j] / dt;
      next[i] = sum;
      added = std::max(added, std::abs(sum));
    }
    h.swap(next);
    for (std::size_t i = 0; i <= steps; ++i) rate[i] += h[i];
    if (added == 0.0) break;
  }
  return rate;
}

// int_0^t (u(s) - u(t)) e^{-lambda (t - s)} ds for u piecewise linear on the mesh.
double rate_remainder(double lambda, const std::vector<double>& rate, double dt) {
  double e0, e1;
  cell_moments(lambda, dt, e0, e1);
  const double q = std::exp(-lambda * dt);
  const double end = rate.back();
  double acc = 0.0;
  for (std::size_t j = 0; j + 1 < rate.size(); ++j) {
    const double v0 = rate[j] - end, v1 = rate[j + 1] - end;
    acc = acc * q + v1 * e0 + (v0 - v1) * e1 / dt;
  }
  return acc;
}

}  // namespace

LawAtTime::LawAtTime(StartPoints start, JumpMeasure nu, double t, const LawOptions& options)
    : start_(std::move(start)), nu_(std::move(nu)), t_(t) {
  if (!(t > 0.0)) throw DomainError("law_at_time: time must be positive");
  if (!(start_.interval() == nu_.interval()))
    throw ValidationError("law_at_time: start and jump measure live on different intervals");
  const Interval& I = nu_.interval();
  // Start points with appreciable weight close to the boundary have an exit
  // density concentrated near s ~ d^2; the mesh must resolve it.
  const double scale = I.length() * I.length();
  double mesh = options.dt * scale;
  const double total = start_.mass();
  for (const Atom& node : start_.nodes()) {
    if (node.weight < 1e-3 * total) continue;
    const double d = std::min(node.point - I.a(), I.b() - node.point);
    mesh = std::min(mesh, std::max(d * d / 40.0, 2e-5 * scale));
  }
  // Jump targets near the boundary put a thin layer into each excursion law;
  // the moment weights below capture its mass, a moderate mesh its shape.
  if (!std::holds_alternative<JumpMeasure::Quasistationary>(nu_.kind())) {
    for (const Atom& node : nu_.quadrature()) {
      if (node.weight < 1e-3) continue;
      const double d = std::min(node.point - I.a(), I.b() - node.point);
      mesh = std::min(mesh, std::max(d * d / 10.0, 2e-5 * scale));
    }
  }
  int steps = std::max(options.min_steps, static_cast<int>(std::ceil(t / mesh)));
  steps += steps % 2;
  const double dt = t / steps;

  alpha_ = jump_tail_bound(nu_, t).tail_constant;
  auto tail_bound = [&](int n) {
    const double geometric = std::pow(alpha_, n);
    if (geometric < options.truncation) return geometric;
    return std::min(geometric, chernoff_jump_bound(start_, nu_, t, n));
  };
  if (options.max_jumps > 0) {
    jumps_ = options.max_jumps;
  } else {
    jumps_ = 1;
    while (jumps_ < 5000 && tail_bound(jumps_) >= options.truncation) ++jumps_;
  }
  bound_ = tail_bound(jumps_);

  // Per mesh cell, the mass dF of a fresh excursion from nu and its first
  // moment M1 about the cell's left end. Product integration against a
  // piecewise linear density is then second order even when the excursion
  // law has a boundary layer much thinner than the mesh.
  std::vector<double> dF(steps + 1, 0.0), M1(steps + 1, 0.0);
  {
    double F_prev = 0.0, G_prev = 0.0;
    for (int j = 1; j <= steps; ++j) {
      const double s = j * dt;
      const double F = 1.0 - survival(nu_, s);
      const double G = exit_cdf_integral(nu_, s);
      dF[j] = F - F_prev;
      M1[j] = std::clamp(dt * F - (G - G_prev), 0.0, dt * dF[j]);
      F_prev = F;
      G_prev = G;
    }
  }
  // First-jump density from the start law, as nodal values of hat functions
  // carrying its exact mass and first moment on each cell. Point values
  // would miss thin exit layers of start points near the boundary. The end
  // value is taken pointwise.
  std::vector<double> exited(steps + 1, 0.0), exited_integral(steps + 1, 0.0);
  const double mass = start_.mass();
  for (int j = 1; j <= steps; ++j) {
    exited[j] = mass - start_.survival(j * dt);
    exited_integral[j] = start_.exit_cdf_integral(j * dt);
  }
  const double end_value = start_.exit_density(t);
  auto lumped = [&](int stride) {
    const int n = steps / stride;
    const double step = stride * dt;
    std::vector<double> dH(n + 2, 0.0), M(n + 2, 0.0), value(n + 1);
    for (int i = 1; i <= n; ++i) {
      const int r = i * stride, l = r - stride;
      dH[i] = exited[r] - exited[l];
      M[i] = std::clamp(step * exited[r] - (exited_integral[r] - exited_integral[l]), 0.0, step * dH[i]);
    }
    value[0] = 2.0 * (dH[1] - M[1] / step) / step;
    for (int i = 1; i < n; ++i) value[i] = (M[i] / step + dH[i + 1] - M[i + 1] / step) / step;
    value[n] = end_value;
    return value;
  };
  std::vector<double> h = lumped(1);

  // The same data on the mesh of twice the step, for Richardson extrapolation.
  const int half = steps / 2;
  std::vector<double> h2 = lumped(2), dF2(half + 1, 0.0), M12(half + 1, 0.0);
  for (int j = 1; j <= half; ++j) {
    dF2[j] = dF[2 * j - 1] + dF[2 * j];
    M12[j] = M1[2 * j - 1] + M1[2 * j] + dt * dF[2 * j];
  }

  const std::vector<double> rate = renewal_rate(std::move(h), dF, M1, dt, jumps_);
  const std::vector<double> rate2 = renewal_rate(std::move(h2), dF2, M12, 2.0 * dt, jumps_);
  const double w = options.extrapolate ? 1.0 / 3.0 : 0.0;
  rate_end_ = (1.0 + w) * rate[steps] - w * rate2[half];

  const SpectralBasis basis(I, options.modes);
  projection_.resize(options.modes);
  remainder_.resize(options.modes);
  for (int n = 0; n < options.modes; ++n) {
    projection_[n] = basis.project(n, nu_);
    const double lambda = basis.eigenvalue(n);
    remainder_[n] = (1.0 + w) * rate_remainder(lambda, rate, dt) - w * rate_remainder(lambda, rate2, 2.0 * dt);
  }
}

double LawAtTime::jump_part(double y, bool integrated) const {
  const Interval& I = nu_.interval();
  const SpectralBasis basis(I, static_cast<int>(projection_.size()));
  double green_term = integrated ? green_measure_integral(nu_, y) : green_measure(nu_, y);
  double series = 0.0;
  for (std::size_t n = 0; n < projection_.size(); ++n) {
    const int k = static_cast<int>(n);
    const double phi = integrated ? basis.primitive(k, y) : basis.eigenfunction(k, y);
    const double lambda = basis.eigenvalue(k);
    green_term -= projection_[n] * phi * std::exp(-lambda * t_) / lambda;
    series += projection_[n] * phi * remainder_[n];
  }
  return rate_end_ * green_term + series;
}

double LawAtTime::density(double y) const {
  const Interval& I = nu_.interval();
  if (!I.contains(y)) return 0.0;
  return start_.killed_density(t_, y) + jump_part(y, false);
}

double LawAtTime::cdf(double y) const {
  const Interval& I = nu_.interval();
  if (y <= I.a()) return 0.0;
  y = std::min(y, I.b());
  return start_.killed_cdf(t_, y) + jump_part(y, true);
}

LawGrid LawAtTime::grid(int points) const {
  if (points < 2) throw DomainError("law grid needs at least two points");
  const Interval& I = nu_.interval();
  LawGrid g{t_, {}, {}, jumps_, bound_, alpha_};
  for (int i = 0; i < points; ++i) {
    const double y = I.a() + I.length() * i / (points - 1);
    g.y.push_back(y);
    g.density.push_back(density(y));
  }
  return g;
}

LawAtTime law_at_time(const StartLaw& start, const JumpMeasure& nu, double t,
                      const LawOptions& options) {
  return LawAtTime(StartPoints::from(start, nu.interval()), nu, t, options);
}

// ---------------------------------------------------------------------------
// Conditioned law

double conditioned_density(const StartPoints& start, double t, double y) {
  const double alive = start.survival(t);
  if (!(alive > 0.0)) throw NumericalError("conditioned_density: survival underflows");
  return start.killed_density(t, y) / alive;
}

double quasistationary_check(const StartPoints& start, double t) {
  const Interval& I = start.interval();
  const JumpMeasure qsd = JumpMeasure::quasistationary(I);
  const double alive = start.survival(t);
  if (!(alive > 0.0)) throw NumericalError("quasistationary_check: survival underflows");
  double worst = 0.0;
  constexpr int points = 401;
  for (int i = 1; i < points - 1; ++i) {
    const double y = I.a() + I.length() * i / (points - 1);
    worst = std::max(worst, std::abs(start.killed_density(t, y) / alive - qsd.density(y)));
  }
  return worst;
}

double quasistationary_check(const Interval& interval, double t) {
  // Quadrature nodes rather than the closed form, so the check is not circular.
  const JumpMeasure qsd = JumpMeasure::quasistationary(interval);
  return quasistationary_check(StartPoints::density(interval, [&](double y) { return qsd.density(y); }), t);
}

}  // namespace bmjb
