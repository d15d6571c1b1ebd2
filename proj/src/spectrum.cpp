#include "bmjb/spectrum.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "bmjb/dirichlet.hpp"
#include "bmjb/parallel.hpp"
#include "bmjb/quadrature.hpp"

namespace bmjb {

namespace {

constexpr double kSeriesThreshold = 1e-2;
constexpr double kSplitFraction = 0.5123;
constexpr int kMaxNudges = 5;
constexpr int kMaxPanels = 2048;
constexpr int kMoments = 4;

}  // namespace

// ---------------------------------------------------------------------------
// Basis functions

EntireValues entire_series(complex q) {
  // Terms q^m / (2m)!, q^m / (2m+1)!, q^m / (2m+2)!.
  EntireValues v{};
  complex power = 1.0, previous_power = 0.0;
  double f0 = 1.0, f1 = 1.0, f2 = 2.0;  // (2m)!, (2m+1)!, (2m+2)!
  for (int m = 0; m < 200; ++m) {
    v.e0 += power / f0;
    v.e1 += power / f1;
    v.e2 += power / f2;
    if (m > 0) {
      v.d0 += static_cast<double>(m) * previous_power / f0;
      v.d1 += static_cast<double>(m) * previous_power / f1;
      v.d2 += static_cast<double>(m) * previous_power / f2;
    }
    const double term = (std::abs(power) + m * std::abs(previous_power)) / f0;
    if (m > 2 && term < 1e-18 * (std::abs(v.e0) + std::abs(v.d0))) break;
    previous_power = power;
    power *= q;
    f0 = f1 * (2 * m + 2);
    f1 = f0 * (2 * m + 3);
    f2 = f1 * (2 * m + 4);
  }
  return v;
}

EntireValues entire_trig(complex q) {
  if (q == 0.0) return entire_series(q);
  // Every function involved is even in z, so the branch of sqrt is irrelevant.
  const complex z = std::sqrt(-q);
  const complex half = std::sin(0.5 * z) / (0.5 * z);
  EntireValues v;
  v.e0 = std::cos(z);
  v.e1 = std::sin(z) / z;
  v.e2 = 0.5 * half * half;
  v.d0 = 0.5 * v.e1;
  v.d1 = (v.e0 - v.e1) / (2.0 * q);
  v.d2 = (v.e1 - 2.0 * v.e2) / (2.0 * q);
  return v;
}

EntireValues entire_values(complex q) {
  return std::abs(q) < kSeriesThreshold ? entire_series(q) : entire_trig(q);
}

complex basis_sine(complex lambda, double u) { return u * entire_values(-2.0 * lambda * u * u).e1; }

complex basis_cosine(complex lambda, double u) { return entire_values(-2.0 * lambda * u * u).e0; }

namespace {

// s, c, and the primitive P of s at u, with lambda-derivatives.
struct BasisPoint {
  complex s, c, p;
  complex ds, dc, dp;
};

BasisPoint basis_point(complex lambda, double u) {
  const EntireValues v = entire_values(-2.0 * lambda * u * u);
  const double u2 = u * u;
  return {u * v.e1, v.e0, u2 * v.e2, -2.0 * u * u2 * v.d1, -2.0 * u2 * v.d0, -2.0 * u2 * u2 * v.d2};
}

}  // namespace

// ---------------------------------------------------------------------------
// CharacteristicSystem

CharacteristicSystem::Side CharacteristicSystem::side_of(const JumpMeasure& nu) {
  Side side;
  const Interval& I = nu.interval();
  if (const auto* grid = std::get_if<JumpMeasure::GridDensity>(&nu.kind())) {
    // Piecewise-constant density: int s = sum over breakpoints of jump * P.
    const std::size_t n = grid->values.size();
    const double h = I.length() / static_cast<double>(n);
    for (std::size_t k = 0; k <= n; ++k) {
      const double before = k > 0 ? grid->values[k - 1] : 0.0;
      const double after = k < n ? grid->values[k] : 0.0;
      if (before != after) side.edges.push_back({static_cast<double>(k) * h, before - after});
    }
    return side;
  }
  for (const Atom& node : nu.quadrature()) side.nodes.push_back({node.point - I.a(), node.weight});
  return side;
}

CharacteristicSystem::CharacteristicSystem(const JumpMeasure& nu)
    : interval_(nu.interval()), two_measure_(false), left_(side_of(nu)), right_(left_) {}

CharacteristicSystem::CharacteristicSystem(const JumpMeasure& left, const JumpMeasure& right)
    : interval_(left.interval()), two_measure_(true), left_(side_of(left)), right_(side_of(right)) {
  if (!(left.interval() == right.interval()))
    throw ValidationError("boundary laws live on different intervals");
}

MeasureMoments CharacteristicSystem::side_moments(const Side& side, complex lambda) const {
  MeasureMoments m{};
  for (const Atom& node : side.nodes) {
    const BasisPoint b = basis_point(lambda, node.point);
    m.sine += node.weight * b.s;
    m.cosine += node.weight * b.c;
    m.dsine += node.weight * b.ds;
    m.dcosine += node.weight * b.dc;
  }
  for (const Edge& edge : side.edges) {
    const BasisPoint b = basis_point(lambda, edge.u);
    m.sine += edge.jump * b.p;
    m.cosine += edge.jump * b.s;
    m.dsine += edge.jump * b.dp;
    m.dcosine += edge.jump * b.ds;
  }
  return m;
}

MeasureMoments CharacteristicSystem::moments(complex lambda, bool right) const {
  return side_moments(right ? right_ : left_, lambda);
}

std::pair<complex, complex> CharacteristicSystem::determinant_with_derivative(complex lambda) const {
  const MeasureMoments ma = side_moments(left_, lambda);
  const MeasureMoments mb = two_measure_ ? side_moments(right_, lambda) : ma;
  const BasisPoint end = basis_point(lambda, interval_.length());
  // Rows: [S_a, C_a - 1] and [s(b) - S_b, c(b) - C_b].
  const complex r1 = end.s - mb.sine, r2 = end.c - mb.cosine;
  const complex dr1 = end.ds - mb.dsine, dr2 = end.dc - mb.dcosine;
  const complex det = ma.sine * r2 - (ma.cosine - 1.0) * r1;
  const complex ddet = ma.dsine * r2 + ma.sine * dr2 - ma.dcosine * r1 - (ma.cosine - 1.0) * dr1;
  return {det, ddet};
}

complex CharacteristicSystem::determinant(complex lambda) const {
  return determinant_with_derivative(lambda).first;
}

double CharacteristicSystem::scale(complex lambda) const {
  const MeasureMoments ma = side_moments(left_, lambda);
  const MeasureMoments mb = two_measure_ ? side_moments(right_, lambda) : ma;
  const BasisPoint end = basis_point(lambda, interval_.length());
  return (std::abs(ma.sine) + std::abs(ma.cosine) + 1.0) *
         (std::abs(end.s) + std::abs(mb.sine) + std::abs(end.c) + std::abs(mb.cosine));
}

complex char_det(complex lambda, const CharacteristicSystem& system) {
  return system.determinant(lambda);
}

// ---------------------------------------------------------------------------
// Root search

SearchRegion default_region(const Interval& interval) {
  const double lambda2 = dirichlet_eigenvalue(interval, 2);
  SearchRegion region;
  region.re_min = 1e-6 / (interval.length() * interval.length());
  region.re_max = 8.0 * lambda2;
  region.im_max = 4.0 * lambda2;
  return region;
}

int SpectrumResult::total_multiplicity() const {
  int n = 0;
  for (const SpectralRoot& r : roots) n += r.multiplicity;
  return n;
}

double SpectrumResult::max_imaginary() const {
  double m = 0.0;
  for (const SpectralRoot& r : roots) m = std::max(m, std::abs(r.value.imag()));
  return m;
}

namespace {

struct Rect {
  double re0, re1, im0, im1;
  complex center() const { return {0.5 * (re0 + re1), 0.5 * (im0 + im1)}; }
  double extent() const { return std::max(re1 - re0, im1 - im0); }
};

struct Winding {
  int count = 0;
  std::array<complex, kMoments> moments{};  // (1/2 pi i) oint (z - center)^p f'/f
};

// Moments of the logarithmic derivative of D(z)/z along the boundary with a
// fixed number of Gauss-Legendre panels per side.
bool contour_moments(const CharacteristicSystem& system, const Rect& rect, int panels,
                     std::array<complex, kMoments>& out) {
  const GaussRule& rule = gauss_legendre(8);
  const complex corners[5] = {{rect.re0, rect.im0}, {rect.re1, rect.im0}, {rect.re1, rect.im1},
                              {rect.re0, rect.im1}, {rect.re0, rect.im0}};
  const complex c = rect.center();
  out.fill(0.0);
  for (int side = 0; side < 4; ++side) {
    const complex z0 = corners[side], dz = corners[side + 1] - corners[side];
    for (int p = 0; p < panels; ++p) {
      for (int i = 0; i < 8; ++i) {
        const double s = (p + 0.5 + 0.5 * rule.nodes[i]) / panels;
        const complex z = z0 + s * dz;
        const auto [det, ddet] = system.determinant_with_derivative(z);
        if (det == 0.0 || !std::isfinite(std::abs(det))) return false;
        const complex g = ddet / det - 1.0 / z;
        const complex w = (0.5 * rule.weights[i] / panels) * dz * g;
        complex power = 1.0;
        for (int k = 0; k < kMoments; ++k) {
          out[k] += w * power;
          power *= z - c;
        }
      }
    }
  }
  const complex factor = 1.0 / complex(0.0, 2.0 * std::numbers::pi);
  for (complex& m : out) m *= factor;
  return true;
}

std::optional<Winding> winding(const CharacteristicSystem& system, const Rect& rect,
                               int initial_points) {
  int panels = std::max(1, initial_points / 8);
  std::array<complex, kMoments> coarse{}, fine{};
  if (!contour_moments(system, rect, panels, coarse)) return std::nullopt;
  while (panels < kMaxPanels) {
    panels *= 2;
    if (!contour_moments(system, rect, panels, fine)) return std::nullopt;
    const double n = fine[0].real();
    const double rounded = std::round(n);
    if (std::abs(n - rounded) < 1e-3 && std::abs(fine[0].imag()) < 1e-3 &&
        std::round(coarse[0].real()) == rounded && std::abs(fine[0] - coarse[0]) < 1e-3) {
      if (rounded < 0.0) return std::nullopt;
      return Winding{static_cast<int>(rounded), fine};
    }
    coarse = fine;
  }
  return std::nullopt;
}

complex polish(const CharacteristicSystem& system, complex z, int multiplicity) {
  for (int iter = 0; iter < 60; ++iter) {
    const auto [det, ddet] = system.determinant_with_derivative(z);
    if (det == 0.0) break;
    const complex f = det / z;
    const complex df = ddet / z - det / (z * z);
    if (df == 0.0) break;
    const complex step = static_cast<double>(multiplicity) * f / df;
    z -= step;
    if (std::abs(step) < 1e-15 * (1.0 + std::abs(z))) break;
  }
  return z;
}

SpectralRoot make_root(const CharacteristicSystem& system, complex z, int multiplicity) {
  z = polish(system, z, multiplicity);
  return {z, multiplicity, std::abs(system.determinant(z)) / system.scale(z)};
}

struct Cell {
  Rect rect;
  Winding winding;
  int depth;
};

struct CellOutcome {
  std::vector<SpectralRoot> roots;
  std::vector<Cell> children;
  int nudges = 0;
};

double nudge_amount(int retry) { return retry == 0 ? 0.0 : 1e-6 * std::pow(10.0, retry - 1); }

CellOutcome process(const CharacteristicSystem& system, const Cell& cell, const SearchRegion& region) {
  CellOutcome out;
  const Winding& w = cell.winding;
  if (w.count == 0) return out;
  const complex c = cell.rect.center();
  const double n = static_cast<double>(w.count);
  const complex mean = w.moments[1] / n;
  if (w.count == 1) {
    out.roots.push_back(make_root(system, c + mean, 1));
    return out;
  }
  // A cluster of coincident roots has vanishing central power sums.
  if (w.count <= kMoments - 1) {
    const complex p2 = w.moments[2] - 2.0 * mean * w.moments[1] + mean * mean * n;
    const complex p3 = w.moments[3] - 3.0 * mean * w.moments[2] + 3.0 * mean * mean * w.moments[1] -
                       mean * mean * mean * n;
    const double spread = std::max(std::sqrt(std::abs(p2)), std::cbrt(std::abs(p3)));
    const double tol = 1e-6 * (1.0 + std::abs(c + mean));
    if (spread < tol || cell.depth >= region.max_depth) {
      out.roots.push_back(make_root(system, c + mean, w.count));
      return out;
    }
  } else if (cell.depth >= region.max_depth) {
    throw NumericalError("find_spectrum: unresolved root cluster of size " + std::to_string(w.count));
  }

  const Rect& r = cell.rect;
  for (int retry = 0; retry <= kMaxNudges; ++retry) {
    const double f = kSplitFraction + nudge_amount(retry);
    const double xm = r.re0 + f * (r.re1 - r.re0);
    const double ym = r.im0 + f * (r.im1 - r.im0);
    const Rect parts[4] = {{r.re0, xm, r.im0, ym}, {xm, r.re1, r.im0, ym},
                           {r.re0, xm, ym, r.im1}, {xm, r.re1, ym, r.im1}};
    std::vector<Cell> children;
    int total = 0;
    bool ok = true;
    for (const Rect& part : parts) {
      const auto wc = winding(system, part, region.initial_points);
      if (!wc) {
        ok = false;
        break;
      }
      total += wc->count;
      if (wc->count > 0) children.push_back({part, *wc, cell.depth + 1});
    }
    if (ok && total == w.count) {
      out.children = std::move(children);
      return out;
    }
    ++out.nudges;
  }
  throw NumericalError("find_spectrum: winding counts unstable after subdivision nudges");
}

}  // namespace

int winding_count(const CharacteristicSystem& system, const SearchRegion& region) {
  const auto w = winding(system, {region.re_min, region.re_max, -region.im_max, region.im_max},
                         region.initial_points);
  if (!w) throw NumericalError("winding_count: contour integral did not stabilize");
  return w->count;
}

SpectrumResult find_spectrum(const CharacteristicSystem& system, const SearchRegion& region,
                             unsigned workers) {
  if (!(region.re_max > region.re_min) || !(region.im_max > 0.0) || !(region.re_min > 0.0))
    throw DomainError("find_spectrum: need 0 < re_min < re_max and im_max > 0");
  SpectrumResult result;
  std::optional<Winding> top;
  Rect rect{};
  for (int retry = 0; retry <= kMaxNudges; ++retry) {
    const double shift = nudge_amount(retry) * (region.re_max - region.re_min);
    rect = {region.re_min + shift, region.re_max + shift, -region.im_max - shift,
            region.im_max + shift};
    top = winding(system, rect, region.initial_points);
    if (top) break;
    ++result.nudges;
  }
  if (!top) throw NumericalError("find_spectrum: boundary winding unstable after nudges");
  result.winding = top->count;

  std::vector<Cell> frontier{{rect, *top, 0}};
  while (!frontier.empty()) {
    result.cells += static_cast<int>(frontier.size());
    const auto outcomes = parallel_map(
        frontier.size(), [&](std::size_t i) { return process(system, frontier[i], region); }, workers);
    std::vector<Cell> next;
    for (const CellOutcome& o : outcomes) {
      result.nudges += o.nudges;
      result.roots.insert(result.roots.end(), o.roots.begin(), o.roots.end());
      next.insert(next.end(), o.children.begin(), o.children.end());
    }
    frontier = std::move(next);
  }
  std::sort(result.roots.begin(), result.roots.end(), [](const SpectralRoot& x, const SpectralRoot& y) {
    if (x.value.real() != y.value.real()) return x.value.real() < y.value.real();
    return x.value.imag() < y.value.imag();
  });
  if (!result.roots.empty()) result.gap = result.roots.front().value.real();
  return result;
}

double spectral_gap(const CharacteristicSystem& system, unsigned workers) {
  const Interval& I = system.interval();
  SearchRegion region = default_region(I);
  const double lambda2 = dirichlet_eigenvalue(I, 2);
  region.re_max = 2.0 * lambda2;
  for (int expansion = 0; expansion < 8; ++expansion) {
    const SpectrumResult result = find_spectrum(system, region, workers);
    if (result.total_multiplicity() >= 3 && result.gap) return *result.gap;
    region.re_max *= 2.0;
  }
  throw NumericalError("spectral_gap: no nonzero root found up to Re = " +
                       std::to_string(region.re_max));
}

double spectral_gap(const JumpMeasure& nu, unsigned workers) {
  return spectral_gap(CharacteristicSystem(nu), workers);
}

double spectral_gap(const JumpMeasure& left, const JumpMeasure& right, unsigned workers) {
  return spectral_gap(CharacteristicSystem(left, right), workers);
}

SweepTable continuity_sweep(const JumpMeasure& nu, const std::vector<int>& levels, SweepKind kind,
                            const std::optional<JumpMeasure>& partner, unsigned workers) {
  auto gap_of = [&](const JumpMeasure& m) {
    return partner ? spectral_gap(m, *partner, 1) : spectral_gap(m, 1);
  };
  SweepTable table;
  table.limit = partner ? spectral_gap(nu, *partner, workers) : spectral_gap(nu, workers);
  const auto gaps = parallel_map(
      levels.size(),
      [&](std::size_t i) {
        const int n = levels[i];
        if (n < 1) throw DomainError("continuity_sweep: levels must be positive");
        const JumpMeasure perturbed =
            kind == SweepKind::quantize ? quantize(nu, n) : truncate(nu, nu.interval().length() / n);
        return gap_of(perturbed);
      },
      workers);
  for (std::size_t i = 0; i < levels.size(); ++i) {
    table.rows.push_back({static_cast<double>(levels[i]), gaps[i]});
    table.max_deviation = std::max(table.max_deviation, std::abs(gaps[i] - table.limit));
  }
  return table;
}

SweepTable parameter_sweep(const std::vector<double>& parameters,
                           const std::function<MeasurePair(double)>& family, unsigned workers) {
  const auto gaps = parallel_map(
      parameters.size(),
      [&](std::size_t i) {
        const MeasurePair pair = family(parameters[i]);
        return spectral_gap(pair.first, pair.second, 1);
      },
      workers);
  SweepTable table;
  table.limit = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t i = 0; i < parameters.size(); ++i) {
    table.rows.push_back({parameters[i], gaps[i]});
    if (i > 0) table.max_deviation = std::max(table.max_deviation, std::abs(gaps[i] - gaps[i - 1]));
  }
  return table;
}

}  // namespace bmjb
