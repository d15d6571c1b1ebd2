#pragma once

#include <vector>

#include "bmjb/model.hpp"

namespace bmjb {

std::vector<double> histogram(const std::vector<double>& samples, const Interval& interval,
                              int bins);

// 1/2 sum |counts/n - probs|
double tv_plugin(const std::vector<double>& counts, const std::vector<double>& probs);

struct CrossFitTv {
  double tv;
  double stderr_;
};

// TV between the binned empirical law and exact bin masses. Signs of the
// bin differences are estimated on one half of the sample and applied to the
// other, which removes the upward bias of the plug-in estimator.
CrossFitTv tv_crossfit(const std::vector<double>& samples, const Interval& interval,
                       const std::vector<double>& probs);
// Same for two paired samples of equal size.
CrossFitTv tv_crossfit_paired(const std::vector<double>& xs, const std::vector<double>& ys,
                              const Interval& interval, int bins);

struct TestResult {
  double statistic;
  double dof;
  double p_value;
};

// Pearson chi-square goodness of fit; cells with expected count below
// min_expected are merged with their neighbours.
TestResult chi_square_test(const std::vector<double>& counts, const std::vector<double>& probs,
                           double min_expected = 5.0);

// Two-sample Kolmogorov-Smirnov test (asymptotic p-value).
TestResult ks_two_sample(std::vector<double> a, std::vector<double> b);
double kolmogorov_q(double lambda);

struct LinearFit {
  double slope;
  double intercept;
  double slope_stderr;
};

LinearFit weighted_linear_fit(const std::vector<double>& x, const std::vector<double>& y,
                              const std::vector<double>& w);

struct TailFit {
  double rate;
  double stderr_;
  int points;
};

// Exponential tail rate from weighted least squares on the empirical log
// survival, over times where the survival lies in [s_low, s_high]. Weights
// are inverse Greenwood variances.
TailFit fit_tail_exponent(std::vector<double> samples, double s_low = 1e-4, double s_high = 0.5,
                          int points = 40);

// Fraction of samples strictly greater than t (samples sorted ascending).
double empirical_survival(const std::vector<double>& sorted, double t);

struct MeanEstimate {
  double mean;
  double stderr_;
};
MeanEstimate mean_estimate(const std::vector<double>& values);

}  // namespace bmjb
