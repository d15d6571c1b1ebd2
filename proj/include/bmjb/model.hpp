#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "bmjb/errors.hpp"

namespace bmjb {

// Open interval (a, b); the state space of the process.
class Interval {
 public:
  Interval(double a, double b);

  double a() const { return a_; }
  double b() const { return b_; }
  double length() const { return b_ - a_; }
  double center() const { return 0.5 * (a_ + b_); }

  bool contains(double x) const { return x > a_ && x < b_; }
  bool contains_closed(double x) const { return x >= a_ && x <= b_; }

  friend bool operator==(const Interval&, const Interval&) = default;

 private:
  double a_;
  double b_;
};

// x -> a + b - x. Throws DomainError outside [a, b].
double reflect(double x, const Interval& interval);

// Independent, reproducible variate stream for one replicate. Identical
// (seed, index) pairs give identical sequences regardless of scheduling.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::uint64_t index);

  // Uniform on the open interval (0, 1).
  double uniform();
  double normal();

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_;
};

struct Atom {
  double point;
  double weight;
};

// Sub-moments of a measure over {x < y}, in the shifted coordinate u = x - a.
struct PartialMoments {
  double mass = 0.0;    // nu(x < y)
  double first = 0.0;   // int_{x<y} u dnu
  double second = 0.0;  // int_{x<y} u^2 dnu
};

// Probability measure on the open interval used as the redistribution law at
// boundary hits. Immutable after construction.
class JumpMeasure {
 public:
  struct Dirac {
    double point;
  };
  struct Mixture {
    std::vector<Atom> atoms;  // sorted by point
  };
  // Piecewise-constant density on values.size() equal cells covering (a, b).
  struct GridDensity {
    std::vector<double> values;
  };
  // Density proportional to the principal Dirichlet eigenfunction.
  struct Quasistationary {};

  using Kind = std::variant<Dirac, Mixture, GridDensity, Quasistationary>;

  static JumpMeasure dirac(const Interval& interval, double point);
  static JumpMeasure mixture(const Interval& interval, std::vector<Atom> atoms);
  // With normalize = false the density must already integrate to 1 (1e-12).
  static JumpMeasure grid(const Interval& interval, std::vector<double> values,
                          bool normalize = false);
  static JumpMeasure quasistationary(const Interval& interval);

  const Interval& interval() const { return interval_; }
  const Kind& kind() const { return kind_; }
  std::string_view kind_name() const;
  bool is_discrete() const;

  // Closed convex hull of the support.
  double support_min() const;
  double support_max() const;
  // dist(supp nu, {a, b}); for grids measured to the outer edge of the
  // outermost charged cells.
  double support_distance() const;

  double cdf(double x) const;
  // Left-continuous generalized inverse of cdf.
  double quantile(double q) const;
  PartialMoments partial_moments(double y) const;
  PartialMoments total_moments() const;

  // Nodes and weights integrating smooth functions against the measure
  // (exact for atoms, Gauss-Legendre panels for densities).
  const std::vector<Atom>& quadrature() const { return nodes_; }

  template <class F>
  auto integrate(F&& f) const -> decltype(f(0.0)) {
    decltype(f(0.0)) sum{};
    for (const Atom& node : nodes_) sum += node.weight * f(node.point);
    return sum;
  }

  double density(double x) const;  // 0 for discrete measures
  double sample(RandomStream& rng) const;

  // Image measure under reflect().
  JumpMeasure reflected() const;
  bool is_symmetric(double tol = 1e-12) const;

 private:
  JumpMeasure(Interval interval, Kind kind);
  void build();

  Interval interval_;
  Kind kind_;
  std::vector<Atom> nodes_;
  std::vector<double> cumulative_;  // atom / cell cumulative weights
};

// n-atom quantization at the midpoint quantiles (k - 1/2)/n; coincident atoms
// are merged, a single remaining atom yields a Dirac measure.
JumpMeasure quantize(const JumpMeasure& nu, int n);

// nu conditioned on {x : dist(x, {a,b}) > margin}. For densities the kept part
// of a cut cell is spread over that cell, so the cdf is exact at cell edges.
JumpMeasure truncate(const JumpMeasure& nu, double margin);

// Wasserstein-1 distance on the line, int |F - G| dx.
double wasserstein1(const JumpMeasure& lhs, const JumpMeasure& rhs);

struct RunConfig {
  std::uint64_t seed = 1;
  std::size_t replicates = 1;
  std::variant<double, JumpMeasure> initial = 0.0;
  double horizon = 1.0;
  std::map<std::string, double> tolerances;

  void validate(const Interval& interval) const;
};

}  // namespace bmjb
