#include "bmjb/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

#include "bmjb/quadrature.hpp"

namespace bmjb {

namespace {

constexpr double kNormTol = 1e-12;
constexpr double kPi = std::numbers::pi;

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

std::string describe(double x) {
  std::ostringstream os;
  os.precision(17);
  os << x;
  return os.str();
}

// Cell-average density of the quasistationary law, used when it has to be
// represented on a grid.
std::vector<double> quasistationary_cells(const Interval& interval, int cells) {
  std::vector<double> values(cells);
  const double h = interval.length() / cells;
  for (int i = 0; i < cells; ++i) {
    const double lo = std::cos(kPi * i / cells);
    const double hi = std::cos(kPi * (i + 1) / cells);
    values[i] = 0.5 * (lo - hi) / h;
  }
  return values;
}

// int_l^r u^p du for p = 0, 1, 2.
PartialMoments power_integrals(double l, double r) {
  return {r - l, 0.5 * (r * r - l * l), (r * r * r - l * l * l) / 3.0};
}

}  // namespace

Interval::Interval(double a, double b) : a_(a), b_(b) {
  if (!(a < b) || !std::isfinite(a) || !std::isfinite(b))
    throw ValidationError("interval requires finite a < b, got (" + describe(a) + ", " +
                          describe(b) + ")");
}

double reflect(double x, const Interval& interval) {
  if (!interval.contains_closed(x))
    throw DomainError("reflect: point " + describe(x) + " outside the closed interval");
  return interval.a() + interval.b() - x;
}

RandomStream::RandomStream(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                    0x62a9d9edU};
  engine_.seed(seq);
}

double RandomStream::uniform() {
  for (;;) {
    const double u = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    if (u > 0.0) return u;
  }
}

double RandomStream::normal() { return normal_(engine_); }

// ---------------------------------------------------------------------------

JumpMeasure::JumpMeasure(Interval interval, Kind kind)
    : interval_(interval), kind_(std::move(kind)) {
  build();
}

JumpMeasure JumpMeasure::dirac(const Interval& interval, double point) {
  if (!interval.contains(point))
    throw ValidationError("jump measure charges a point outside the open interval: " +
                          describe(point));
  return JumpMeasure(interval, Dirac{point});
}

JumpMeasure JumpMeasure::mixture(const Interval& interval, std::vector<Atom> atoms) {
  if (atoms.empty()) throw ValidationError("mixture needs at least one atom");
  double total = 0.0;
  for (const Atom& atom : atoms) {
    if (!interval.contains(atom.point))
      throw ValidationError("jump measure charges a point outside the open interval: " +
                            describe(atom.point));
    if (!(atom.weight >= 0.0) || !std::isfinite(atom.weight))
      throw ValidationError("mixture weight must be nonnegative, got " + describe(atom.weight));
    total += atom.weight;
  }
  if (std::abs(total - 1.0) > kNormTol)
    throw ValidationError("mixture weights sum to " + describe(total) + ", expected 1");
  std::erase_if(atoms, [](const Atom& atom) { return atom.weight == 0.0; });
  std::sort(atoms.begin(), atoms.end(),
            [](const Atom& l, const Atom& r) { return l.point < r.point; });
  return JumpMeasure(interval, Mixture{std::move(atoms)});
}

JumpMeasure JumpMeasure::grid(const Interval& interval, std::vector<double> values,
                              bool normalize) {
  if (values.empty()) throw ValidationError("grid density needs at least one cell");
  const double h = interval.length() / static_cast<double>(values.size());
  double total = 0.0;
  for (double v : values) {
    if (!(v >= 0.0) || !std::isfinite(v))
      throw ValidationError("grid density must be nonnegative, got " + describe(v));
    total += v * h;
  }
  if (!(total > 0.0)) throw ValidationError("grid density has zero mass");
  if (normalize) {
    for (double& v : values) v /= total;
  } else if (std::abs(total - 1.0) > kNormTol) {
    throw ValidationError("grid density integrates to " + describe(total) + ", expected 1");
  }
  return JumpMeasure(interval, GridDensity{std::move(values)});
}

JumpMeasure JumpMeasure::quasistationary(const Interval& interval) {
  return JumpMeasure(interval, Quasistationary{});
}

void JumpMeasure::build() {
  const double a = interval_.a();
  const double length = interval_.length();
  nodes_.clear();
  cumulative_.clear();
  std::visit(
      overloaded{
          [&](const Dirac& d) {
            nodes_.push_back({d.point, 1.0});
            cumulative_.push_back(1.0);
          },
          [&](const Mixture& m) {
            double running = 0.0;
            for (const Atom& atom : m.atoms) {
              nodes_.push_back(atom);
              running += atom.weight;
              cumulative_.push_back(running);
            }
            cumulative_.back() = 1.0;
          },
          [&](const GridDensity& g) {
            const GaussRule& rule = gauss_legendre(8);
            const double h = length / static_cast<double>(g.values.size());
            double running = 0.0;
            for (std::size_t i = 0; i < g.values.size(); ++i) {
              running += g.values[i] * h;
              cumulative_.push_back(running);
              if (g.values[i] == 0.0) continue;
              const double mid = a + (static_cast<double>(i) + 0.5) * h;
              for (int k = 0; k < 8; ++k)
                nodes_.push_back({mid + 0.5 * h * rule.nodes[k],
                                  g.values[i] * 0.5 * h * rule.weights[k]});
            }
            for (double& c : cumulative_) c /= running;
          },
          [&](const Quasistationary&) {
            const GaussRule& rule = gauss_legendre(8);
            constexpr int panels = 64;
            const double h = length / panels;
            for (int p = 0; p < panels; ++p) {
              const double mid = a + (p + 0.5) * h;
              for (int k = 0; k < 8; ++k) {
                const double x = mid + 0.5 * h * rule.nodes[k];
                nodes_.push_back({x, density(x) * 0.5 * h * rule.weights[k]});
              }
            }
          },
      },
      kind_);
}

std::string_view JumpMeasure::kind_name() const {
  return std::visit(overloaded{[](const Dirac&) { return std::string_view("dirac"); },
                               [](const Mixture&) { return std::string_view("mixture"); },
                               [](const GridDensity&) { return std::string_view("grid"); },
                               [](const Quasistationary&) {
                                 return std::string_view("quasistationary");
                               }},
                    kind_);
}

bool JumpMeasure::is_discrete() const {
  return std::holds_alternative<Dirac>(kind_) || std::holds_alternative<Mixture>(kind_);
}

double JumpMeasure::support_min() const {
  const double a = interval_.a();
  return std::visit(
      overloaded{[](const Dirac& d) { return d.point; },
                 [](const Mixture& m) { return m.atoms.front().point; },
                 [&](const GridDensity& g) {
                   const double h = interval_.length() / static_cast<double>(g.values.size());
                   std::size_t i = 0;
                   while (g.values[i] == 0.0) ++i;
                   return a + static_cast<double>(i) * h;
                 },
                 [&](const Quasistationary&) { return a; }},
      kind_);
}

double JumpMeasure::support_max() const {
  const double b = interval_.b();
  return std::visit(
      overloaded{[](const Dirac& d) { return d.point; },
                 [](const Mixture& m) { return m.atoms.back().point; },
                 [&](const GridDensity& g) {
                   const double h = interval_.length() / static_cast<double>(g.values.size());
                   std::size_t i = g.values.size();
                   while (g.values[i - 1] == 0.0) --i;
                   return b - static_cast<double>(g.values.size() - i) * h;
                 },
                 [&](const Quasistationary&) { return b; }},
      kind_);
}

double JumpMeasure::support_distance() const {
  return std::min(support_min() - interval_.a(), interval_.b() - support_max());
}

double JumpMeasure::density(double x) const {
  const double a = interval_.a();
  const double length = interval_.length();
  if (!interval_.contains(x)) return 0.0;
  return std::visit(
      overloaded{[](const Dirac&) { return 0.0; }, [](const Mixture&) { return 0.0; },
                 [&](const GridDensity& g) {
                   const auto n = g.values.size();
                   const auto i = std::min(
                       n - 1, static_cast<std::size_t>((x - a) / length * static_cast<double>(n)));
                   return g.values[i];
                 },
                 [&](const Quasistationary&) {
                   return 0.5 * kPi / length * std::sin(kPi * (x - a) / length);
                 }},
      kind_);
}

double JumpMeasure::cdf(double x) const {
  const double a = interval_.a();
  const double length = interval_.length();
  if (x <= a) return 0.0;
  if (x >= interval_.b()) return 1.0;
  return std::visit(
      overloaded{
          [&](const Dirac& d) { return x >= d.point ? 1.0 : 0.0; },
          [&](const Mixture& m) {
            auto it = std::upper_bound(m.atoms.begin(), m.atoms.end(), x,
                                       [](double v, const Atom& atom) { return v < atom.point; });
            const auto k = static_cast<std::size_t>(it - m.atoms.begin());
            return k == 0 ? 0.0 : cumulative_[k - 1];
          },
          [&](const GridDensity& g) {
            const auto n = g.values.size();
            const double s = (x - a) / length * static_cast<double>(n);
            const auto i = std::min(n - 1, static_cast<std::size_t>(s));
            const double below = i == 0 ? 0.0 : cumulative_[i - 1];
            return below + (cumulative_[i] - below) * (s - static_cast<double>(i));
          },
          [&](const Quasistationary&) {
            return 0.5 * (1.0 - std::cos(kPi * (x - a) / length));
          }},
      kind_);
}

double JumpMeasure::quantile(double q) const {
  if (!(q >= 0.0 && q <= 1.0)) throw DomainError("quantile level outside [0, 1]");
  const double a = interval_.a();
  const double length = interval_.length();
  return std::visit(
      overloaded{
          [&](const Dirac& d) { return d.point; },
          [&](const Mixture& m) {
            // Smallest atom whose cumulative weight reaches q, with a round-off allowance.
            std::size_t k = 0;
            while (k + 1 < m.atoms.size() && cumulative_[k] < q - 1e-14) ++k;
            return m.atoms[k].point;
          },
          [&](const GridDensity& g) {
            const auto n = g.values.size();
            const double h = length / static_cast<double>(n);
            std::size_t i = 0;
            while (i + 1 < n && (cumulative_[i] < q || g.values[i] == 0.0)) ++i;
            const double below = i == 0 ? 0.0 : cumulative_[i - 1];
            const double mass = cumulative_[i] - below;
            const double frac = mass > 0.0 ? std::clamp((q - below) / mass, 0.0, 1.0) : 0.5;
            return a + (static_cast<double>(i) + frac) * h;
          },
          [&](const Quasistationary&) {
            return a + length / kPi * std::acos(std::clamp(1.0 - 2.0 * q, -1.0, 1.0));
          }},
      kind_);
}

PartialMoments JumpMeasure::partial_moments(double y) const {
  const double a = interval_.a();
  const double length = interval_.length();
  const double v = std::clamp(y - a, 0.0, length);
  auto add_atom = [](PartialMoments& acc, double u, double w) {
    acc.mass += w;
    acc.first += w * u;
    acc.second += w * u * u;
  };
  return std::visit(
      overloaded{
          [&](const Dirac& d) {
            PartialMoments acc;
            if (d.point < y) add_atom(acc, d.point - a, 1.0);
            return acc;
          },
          [&](const Mixture& m) {
            PartialMoments acc;
            for (const Atom& atom : m.atoms) {
              if (!(atom.point < y)) break;
              add_atom(acc, atom.point - a, atom.weight);
            }
            return acc;
          },
          [&](const GridDensity& g) {
            PartialMoments acc;
            const auto n = g.values.size();
            const double h = length / static_cast<double>(n);
            for (std::size_t i = 0; i < n; ++i) {
              const double l = static_cast<double>(i) * h;
              if (l >= v) break;
              const double r = std::min(v, l + h);
              const PartialMoments p = power_integrals(l, r);
              acc.mass += g.values[i] * p.mass;
              acc.first += g.values[i] * p.first;
              acc.second += g.values[i] * p.second;
            }
            return acc;
          },
          [&](const Quasistationary&) {
            const double k = kPi / length;
            const double theta = k * v;
            const double c = std::cos(theta), s = std::sin(theta);
            PartialMoments acc;
            acc.mass = 0.5 * (1.0 - c);
            acc.first = 0.5 * (s / k - v * c);
            acc.second = 0.5 * (-v * v * c + 2.0 * v * s / k + 2.0 * (c - 1.0) / (k * k));
            return acc;
          }},
      kind_);
}

PartialMoments JumpMeasure::total_moments() const {
  return partial_moments(interval_.b() + interval_.length());
}

double JumpMeasure::sample(RandomStream& rng) const {
  const double a = interval_.a();
  const double length = interval_.length();
  return std::visit(
      overloaded{
          [](const Dirac& d) { return d.point; },
          [&](const Mixture& m) {
            const double u = rng.uniform();
            auto it = std::lower_bound(cumulative_.begin(), cumulative_.end(), u);
            const auto k = std::min(static_cast<std::size_t>(it - cumulative_.begin()),
                                    m.atoms.size() - 1);
            return m.atoms[k].point;
          },
          [&](const GridDensity& g) {
            const double u = rng.uniform();
            auto it = std::lower_bound(cumulative_.begin(), cumulative_.end(), u);
            auto k = std::min(static_cast<std::size_t>(it - cumulative_.begin()),
                              g.values.size() - 1);
            while (g.values[k] == 0.0 && k > 0) --k;
            const double h = length / static_cast<double>(g.values.size());
            return a + (static_cast<double>(k) + rng.uniform()) * h;
          },
          [&](const Quasistationary&) {
            return a + length / kPi * std::acos(1.0 - 2.0 * rng.uniform());
          }},
      kind_);
}

JumpMeasure JumpMeasure::reflected() const {
  const Interval& I = interval_;
  return std::visit(overloaded{[&](const Dirac& d) { return dirac(I, reflect(d.point, I)); },
                               [&](const Mixture& m) {
                                 std::vector<Atom> atoms;
                                 for (const Atom& atom : m.atoms)
                                   atoms.push_back({reflect(atom.point, I), atom.weight});
                                 return JumpMeasure(I, Mixture{[&] {
                                   std::reverse(atoms.begin(), atoms.end());
                                   return atoms;
                                 }()});
                               },
                               [&](const GridDensity& g) {
                                 std::vector<double> values(g.values.rbegin(), g.values.rend());
                                 return JumpMeasure(I, GridDensity{std::move(values)});
                               },
                               [&](const Quasistationary&) { return quasistationary(I); }},
                    kind_);
}

bool JumpMeasure::is_symmetric(double tol) const {
  const JumpMeasure mirror = reflected();
  return wasserstein1(*this, mirror) <= tol * interval_.length();
}

// ---------------------------------------------------------------------------

JumpMeasure quantize(const JumpMeasure& nu, int n) {
  if (n < 1) throw DomainError("quantize: n must be at least 1");
  std::vector<Atom> atoms;
  for (int k = 1; k <= n; ++k) {
    const double x = nu.quantile((k - 0.5) / n);
    if (!atoms.empty() && atoms.back().point == x)
      atoms.back().weight += 1.0 / n;
    else
      atoms.push_back({x, 1.0 / n});
  }
  if (atoms.size() == 1) return JumpMeasure::dirac(nu.interval(), atoms.front().point);
  double total = 0.0;
  for (const Atom& atom : atoms) total += atom.weight;
  for (Atom& atom : atoms) atom.weight /= total;
  return JumpMeasure::mixture(nu.interval(), std::move(atoms));
}

JumpMeasure truncate(const JumpMeasure& nu, double margin) {
  const Interval& I = nu.interval();
  const double lo = I.a() + margin;
  const double hi = I.b() - margin;
  if (!(lo < hi)) throw ValidationError("truncate: margin leaves no admissible points");
  auto keep = [&](double x) { return x > lo && x < hi; };
  return std::visit(
      overloaded{
          [&](const JumpMeasure::Dirac& d) {
            if (!keep(d.point)) throw ValidationError("truncate: Dirac atom removed by margin");
            return nu;
          },
          [&](const JumpMeasure::Mixture& m) {
            std::vector<Atom> atoms;
            double total = 0.0;
            for (const Atom& atom : m.atoms)
              if (keep(atom.point)) {
                atoms.push_back(atom);
                total += atom.weight;
              }
            if (atoms.empty()) throw ValidationError("truncate: all atoms removed by margin");
            for (Atom& atom : atoms) atom.weight /= total;
            if (atoms.size() == 1) return JumpMeasure::dirac(I, atoms.front().point);
            return JumpMeasure::mixture(I, std::move(atoms));
          },
          [&](const auto& density_kind) {
            // Densities: keep the fraction of each cell lying inside (lo, hi).
            std::vector<double> values;
            if constexpr (std::is_same_v<std::decay_t<decltype(density_kind)>,
                                         JumpMeasure::GridDensity>)
              values = density_kind.values;
            else
              values = quasistationary_cells(I, 4096);
            const double h = I.length() / static_cast<double>(values.size());
            for (std::size_t i = 0; i < values.size(); ++i) {
              const double l = I.a() + static_cast<double>(i) * h;
              const double overlap = std::max(0.0, std::min(l + h, hi) - std::max(l, lo));
              values[i] *= overlap / h;
            }
            if (std::all_of(values.begin(), values.end(), [](double v) { return v == 0.0; }))
              throw ValidationError("truncate: density removed by margin");
            return JumpMeasure::grid(I, std::move(values), true);
          }},
      nu.kind());
}

double wasserstein1(const JumpMeasure& lhs, const JumpMeasure& rhs) {
  if (!(lhs.interval() == rhs.interval()))
    throw ValidationError("wasserstein1: measures live on different intervals");
  const Interval& I = lhs.interval();
  // Breakpoints: all atoms; densities contribute smooth pieces handled by panels.
  std::vector<double> cuts{I.a(), I.b()};
  for (const JumpMeasure* m : {&lhs, &rhs})
    if (m->is_discrete())
      for (const Atom& atom : m->quadrature()) cuts.push_back(atom.point);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double l = cuts[i], r = cuts[i + 1];
    total += integrate_panels(
        [&](double x) { return std::abs(lhs.cdf(x) - rhs.cdf(x)); }, l, r,
        std::max(1, static_cast<int>(std::ceil(64.0 * (r - l) / I.length()))));
  }
  return total;
}

void RunConfig::validate(const Interval& interval) const {
  if (replicates < 1) throw ValidationError("run config: replicates must be >= 1");
  if (!(horizon > 0.0)) throw ValidationError("run config: horizon must be positive");
  if (const double* x = std::get_if<double>(&initial); x && !interval.contains(*x))
    throw ValidationError("run config: initial point " + describe(*x) +
                          " outside the open interval");
  if (const JumpMeasure* rho = std::get_if<JumpMeasure>(&initial);
      rho && !(rho->interval() == interval))
    throw ValidationError("run config: initial law lives on a different interval");
}

}  // namespace bmjb
