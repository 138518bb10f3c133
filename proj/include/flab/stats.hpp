#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "flab/common.hpp"

namespace flab::stats {

double normal_pdf(double x);
double normal_cdf(double x);
// Inverse normal CDF, |error| < 1e-14 after Halley refinement.
double normal_quantile(double p);

double mean(const std::vector<double>& xs);
// Unbiased sample variance (n-1 denominator).
double variance(const std::vector<double>& xs);
double stdev(const std::vector<double>& xs);
// Standard error of the sample mean.
double mean_se(const std::vector<double>& xs);

struct LinFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  double slope_se = 0.0;
  double intercept_se = 0.0;
};

LinFit linfit(const std::vector<double>& x, const std::vector<double>& y);

// One-sided p-value for H1: E[d] > 0, normal approximation to the paired t.
double p_mean_positive(const std::vector<double>& diffs);

struct CI {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double v) const { return v >= lo && v <= hi; }
};

// Percentile bootstrap CI of a statistic of one sample. Deterministic in seed.
CI bootstrap_ci(const std::vector<double>& xs,
                const std::function<double(const std::vector<double>&)>& stat,
                int n_resamples, std::uint64_t seed, double level = 0.95);

// Bootstrap standard error of a statistic.
double bootstrap_se(const std::vector<double>& xs,
                    const std::function<double(const std::vector<double>&)>& stat,
                    int n_resamples, std::uint64_t seed);

}  // namespace flab::stats
