#include "bmjb/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Dense>
#include <boost/math/distributions/chi_squared.hpp>

namespace bmjb {

namespace {

int bin_of(double x, const Interval& interval, int bins) {
  const int i = static_cast<int>((x - interval.a()) / interval.length() * bins);
  return std::clamp(i, 0, bins - 1);
}

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace

std::vector<double> histogram(const std::vector<double>& samples, const Interval& interval,
                              int bins) {
  if (bins < 1) throw DomainError("histogram needs at least one bin");
  std::vector<double> counts(bins, 0.0);
  for (double x : samples) counts[bin_of(x, interval, bins)] += 1.0;
  return counts;
}

double tv_plugin(const std::vector<double>& counts, const std::vector<double>& probs) {
  if (counts.size() != probs.size()) throw DomainError("tv_plugin: size mismatch");
  const double n = std::accumulate(counts.begin(), counts.end(), 0.0);
  if (!(n > 0.0)) throw DomainError("tv_plugin: empty sample");
  double sum = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) sum += std::abs(counts[i] / n - probs[i]);
  return 0.5 * sum;
}

CrossFitTv tv_crossfit(const std::vector<double>& samples, const Interval& interval,
                       const std::vector<double>& probs) {
  const int bins = static_cast<int>(probs.size());
  if (samples.size() < 4) throw DomainError("tv_crossfit: sample too small");
  std::vector<double> half[2];
  for (std::size_t k = 0; k < samples.size(); ++k) half[k % 2].push_back(samples[k]);
  double estimate = 0.0, variance = 0.0;
  for (int h = 0; h < 2; ++h) {
    const std::vector<double> counts = histogram(half[1 - h], interval, bins);
    const double n_sign = static_cast<double>(half[1 - h].size());
    std::vector<double> s(bins);
    double offset = 0.0;
    for (int i = 0; i < bins; ++i) {
      s[i] = sign(counts[i] / n_sign - probs[i]);
      offset += s[i] * probs[i];
    }
    // Mean of 1/2 s(bin(X)) over the other half, minus 1/2 sum s p.
    double m = 0.0, m2 = 0.0;
    for (double x : half[h]) {
      const double z = 0.5 * s[bin_of(x, interval, bins)];
      m += z;
      m2 += z * z;
    }
    const double n = static_cast<double>(half[h].size());
    m /= n;
    estimate += 0.5 * (m - 0.5 * offset);
    variance += 0.25 * std::max(0.0, m2 / n - m * m) / n;
  }
  return {estimate, std::sqrt(variance)};
}

CrossFitTv tv_crossfit_paired(const std::vector<double>& xs, const std::vector<double>& ys,
                              const Interval& interval, int bins) {
  if (xs.size() != ys.size()) throw DomainError("tv_crossfit_paired: size mismatch");
  if (xs.size() < 4) throw DomainError("tv_crossfit_paired: sample too small");
  double estimate = 0.0, variance = 0.0;
  for (int h = 0; h < 2; ++h) {
    std::vector<double> diff(bins, 0.0);
    for (std::size_t k = 1 - h; k < xs.size(); k += 2) {
      diff[bin_of(xs[k], interval, bins)] += 1.0;
      diff[bin_of(ys[k], interval, bins)] -= 1.0;
    }
    double m = 0.0, m2 = 0.0, n = 0.0;
    for (std::size_t k = h; k < xs.size(); k += 2) {
      const double z =
          0.5 * (sign(diff[bin_of(xs[k], interval, bins)]) - sign(diff[bin_of(ys[k], interval, bins)]));
      m += z;
      m2 += z * z;
      n += 1.0;
    }
    m /= n;
    estimate += 0.5 * m;
    variance += 0.25 * std::max(0.0, m2 / n - m * m) / n;
  }
  return {estimate, std::sqrt(variance)};
}

TestResult chi_square_test(const std::vector<double>& counts, const std::vector<double>& probs,
                           double min_expected) {
  if (counts.size() != probs.size() || counts.empty())
    throw DomainError("chi_square_test: size mismatch");
  const double n = std::accumulate(counts.begin(), counts.end(), 0.0);
  const double total_p = std::accumulate(probs.begin(), probs.end(), 0.0);
  std::vector<double> obs, expect;
  double o = 0.0, e = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    o += counts[i];
    e += n * probs[i] / total_p;
    if (e >= min_expected) {
      obs.push_back(o);
      expect.push_back(e);
      o = e = 0.0;
    }
  }
  if (e > 0.0 || o > 0.0) {
    if (expect.empty()) {
      obs.push_back(o);
      expect.push_back(e);
    } else {
      obs.back() += o;
      expect.back() += e;
    }
  }
  if (expect.size() < 2) throw NumericalError("chi_square_test: fewer than two usable cells");
  double stat = 0.0;
  for (std::size_t i = 0; i < obs.size(); ++i) {
    const double d = obs[i] - expect[i];
    stat += d * d / expect[i];
  }
  const double dof = static_cast<double>(obs.size() - 1);
  boost::math::chi_squared dist(dof);
  return {stat, dof, boost::math::cdf(boost::math::complement(dist, stat))};
}

double kolmogorov_q(double lambda) {
  if (lambda < 1e-3) return 1.0;
  double sum = 0.0, sign_j = 1.0;
  for (int j = 1; j <= 200; ++j) {
    const double term = sign_j * std::exp(-2.0 * j * j * lambda * lambda);
    sum += term;
    if (std::abs(term) < 1e-16 * std::abs(sum)) break;
    sign_j = -sign_j;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

TestResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw DomainError("ks_two_sample: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == v) ++i;
    while (j < b.size() && b[j] == v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  const double en = std::sqrt(na * nb / (na + nb));
  return {d, 0.0, kolmogorov_q((en + 0.12 + 0.11 / en) * d)};
}

LinearFit weighted_linear_fit(const std::vector<double>& x, const std::vector<double>& y,
                              const std::vector<double>& w) {
  const auto n = static_cast<Eigen::Index>(x.size());
  if (n < 2 || y.size() != x.size() || w.size() != x.size())
    throw DomainError("weighted_linear_fit: need at least two matching points");
  Eigen::MatrixXd A(n, 2);
  Eigen::VectorXd rhs(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double sw = std::sqrt(w[i]);
    A(i, 0) = sw * x[i];
    A(i, 1) = sw;
    rhs[i] = sw * y[i];
  }
  const Eigen::Matrix2d normal = A.transpose() * A;
  const Eigen::Vector2d beta = normal.ldlt().solve(A.transpose() * rhs);
  const Eigen::Matrix2d cov = normal.inverse();
  return {beta[0], beta[1], std::sqrt(std::max(0.0, cov(0, 0)))};
}

double empirical_survival(const std::vector<double>& sorted, double t) {
  const auto it = std::upper_bound(sorted.begin(), sorted.end(), t);
  return static_cast<double>(sorted.end() - it) / static_cast<double>(sorted.size());
}

TailFit fit_tail_exponent(std::vector<double> samples, double s_low, double s_high, int points) {
  if (samples.size() < 10) throw NumericalError("fit_tail_exponent: too few samples");
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  if (s_low * n < 5.0) throw NumericalError("fit_tail_exponent: tail window below sample resolution");
  auto quantile_time = [&](double s) {
    const auto k = static_cast<std::size_t>(std::floor((1.0 - s) * n));
    return samples[std::min(k, samples.size() - 1)];
  };
  const double t0 = quantile_time(s_high), t1 = quantile_time(s_low);
  std::vector<double> ts, ys, ws;
  for (int i = 0; i < points; ++i) {
    const double t = t0 + (t1 - t0) * i / (points - 1);
    const double s = empirical_survival(samples, t);
    if (s <= 0.0 || s < 0.5 * s_low || s > std::min(1.0, 2.0 * s_high)) continue;
    ts.push_back(t);
    ys.push_back(std::log(s));
    ws.push_back(n * s / (1.0 - s));
  }
  if (ts.size() < 3) throw NumericalError("fit_tail_exponent: window holds fewer than 3 points");
  const LinearFit fit = weighted_linear_fit(ts, ys, ws);
  return {-fit.slope, fit.slope_stderr, static_cast<int>(ts.size())};
}

MeanEstimate mean_estimate(const std::vector<double>& values) {
  if (values.empty()) throw DomainError("mean_estimate: empty sample");
  const double n = static_cast<double>(values.size());
  double m = 0.0;
  for (double v : values) m += v;
  m /= n;
  double v2 = 0.0;
  for (double v : values) v2 += (v - m) * (v - m);
  const double var = values.size() > 1 ? v2 / (n - 1.0) : 0.0;
  return {m, std::sqrt(var / n)};
}

}  // namespace bmjb
