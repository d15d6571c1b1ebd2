#pragma once

#include <complex>
#include <functional>
#include <optional>
#include <vector>

#include "bmjb/model.hpp"

namespace bmjb {

using complex = std::complex<double>;

// Entire functions of q = -2 lambda u^2 behind the basis solutions:
// e0 = cos z, e1 = sin z / z, e2 = (1 - cos z) / z^2 with z^2 = -q, and their
// q-derivatives d0, d1, d2.
struct EntireValues {
  complex e0, e1, e2;
  complex d0, d1, d2;
};
EntireValues entire_series(complex q);
EntireValues entire_trig(complex q);
// Series for |q| < 1e-2, trigonometric form otherwise.
EntireValues entire_values(complex q);

// Basis solutions of u'' = -2 lambda u with s(a) = 0, s'(a) = 1, c(a) = 1,
// c'(a) = 0, evaluated at x = a + u.
complex basis_sine(complex lambda, double u);
complex basis_cosine(complex lambda, double u);

// Integrals of the basis solutions against a measure and their lambda-derivatives.
struct MeasureMoments {
  complex sine, cosine;
  complex dsine, dcosine;
};

// The eigenvalue problem u'' = -2 lambda u on (a, b) with the nonlocal
// conditions u(a) = int u d(nu_left) and u(b) = int u d(nu_right). A single
// measure uses the same law on both sides.
class CharacteristicSystem {
 public:
  explicit CharacteristicSystem(const JumpMeasure& nu);
  CharacteristicSystem(const JumpMeasure& left, const JumpMeasure& right);

  const Interval& interval() const { return interval_; }
  bool two_measure() const { return two_measure_; }

  MeasureMoments moments(complex lambda, bool right) const;

  // Determinant of the boundary system in the coefficients of u = A s + B c.
  complex determinant(complex lambda) const;
  // Determinant and its lambda-derivative.
  std::pair<complex, complex> determinant_with_derivative(complex lambda) const;
  // Product of the row magnitudes of the boundary system; residuals are relative to it.
  double scale(complex lambda) const;

 private:
  // Jump of a piecewise-constant density at a breakpoint.
  struct Edge {
    double u;
    double jump;
  };
  struct Side {
    std::vector<Atom> nodes;  // shifted to u = x - a
    std::vector<Edge> edges;
  };
  static Side side_of(const JumpMeasure& nu);
  MeasureMoments side_moments(const Side& side, complex lambda) const;

  Interval interval_;
  bool two_measure_;
  Side left_, right_;
};

complex char_det(complex lambda, const CharacteristicSystem& system);

struct SearchRegion {
  double re_min = 0.0;
  double re_max = 0.0;
  double im_max = 0.0;
  int max_depth = 40;
  int initial_points = 256;  // contour points per rectangle side
};

// Re in (1e-6 / L^2, 8 lambda_2], |Im| <= 4 lambda_2.
SearchRegion default_region(const Interval& interval);

struct SpectralRoot {
  complex value;
  int multiplicity = 1;
  double residual = 0.0;  // |D| / scale
};

struct SpectrumResult {
  std::vector<SpectralRoot> roots;  // sorted by real part, then imaginary part
  int winding = 0;                  // root count of the outer contour
  int cells = 0;                    // rectangles examined
  int nudges = 0;                   // contour relocations
  std::optional<double> gap;        // min Re over the roots found

  int total_multiplicity() const;
  double max_imaginary() const;
};

// Zeros of D(lambda)/lambda inside the region by winding counts, recursive
// quadrisection and Newton polishing.
SpectrumResult find_spectrum(const CharacteristicSystem& system, const SearchRegion& region,
                             unsigned workers = 0);

// Winding number of D(lambda)/lambda around the rectangle boundary.
int winding_count(const CharacteristicSystem& system, const SearchRegion& region);

// gamma_1: smallest real part of a nonzero root. The search region starts at
// Re <= 2 lambda_2 and doubles until at least three roots are enclosed.
double spectral_gap(const JumpMeasure& nu, unsigned workers = 0);
double spectral_gap(const JumpMeasure& left, const JumpMeasure& right, unsigned workers = 0);
double spectral_gap(const CharacteristicSystem& system, unsigned workers = 0);

struct SweepRow {
  double parameter;
  double gap;
};

struct SweepTable {
  std::vector<SweepRow> rows;
  double limit = 0.0;          // gap of the unperturbed problem
  double max_deviation = 0.0;  // max |gap - limit|
};

enum class SweepKind { quantize, truncate };

// Gap of quantize(nu, n) (or of nu conditioned on dist > 1/n) for each level
// n. With a partner the perturbed measure is the left law of a two-measure
// problem whose right law is the partner.
SweepTable continuity_sweep(const JumpMeasure& nu, const std::vector<int>& levels,
                            SweepKind kind = SweepKind::quantize,
                            const std::optional<JumpMeasure>& partner = std::nullopt,
                            unsigned workers = 0);

// Gap of a parametrized family of boundary laws; max_deviation holds the
// largest jump between adjacent parameters.
using MeasurePair = std::pair<JumpMeasure, JumpMeasure>;
SweepTable parameter_sweep(const std::vector<double>& parameters,
                           const std::function<MeasurePair(double)>& family,
                           unsigned workers = 0);

}  // namespace bmjb
