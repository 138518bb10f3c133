#include "flab/stats.hpp"

#include <algorithm>
#include <cmath>

#include "flab/rng.hpp"

namespace flab::stats {

namespace {
constexpr double kSqrt2 = 1.4142135623730950488;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;
}  // namespace

double normal_pdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

double normal_cdf(double x) { return 0.5 * std::erfc(-x / kSqrt2); }

double normal_quantile(double p) {
  require(p > 0.0 && p < 1.0, "normal_quantile needs p in (0,1)");
  // Acklam's rational approximation, then one Halley step against erfc.
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  double x;
  if (p < plow) {
    double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - plow) {
    double q = p - 0.5;
    double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) *
        q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  // Halley refinement.
  double e = normal_cdf(x) - p;
  double u = e / normal_pdf(x);
  x -= u / (1.0 + 0.5 * x * u);
  return x;
}

double mean(const std::vector<double>& xs) {
  require(!xs.empty(), "mean of empty sample");
  return ksum(xs) / static_cast<double>(xs.size());
}

double variance(const std::vector<double>& xs) {
  require(xs.size() >= 2, "variance needs at least 2 points");
  double m = mean(xs);
  KahanSum s;
  for (double x : xs) s.add((x - m) * (x - m));
  return s.value() / static_cast<double>(xs.size() - 1);
}

double stdev(const std::vector<double>& xs) { return std::sqrt(variance(xs)); }

double mean_se(const std::vector<double>& xs) {
  return stdev(xs) / std::sqrt(static_cast<double>(xs.size()));
}

LinFit linfit(const std::vector<double>& x, const std::vector<double>& y) {
  require(x.size() == y.size() && x.size() >= 2, "linfit needs n>=2 pairs");
  const double n = static_cast<double>(x.size());
  double mx = mean(x), my = mean(y);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  require(sxx > 0.0, "linfit with degenerate x");
  LinFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double ssr = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double e = y[i] - (f.intercept + f.slope * x[i]);
    ssr += e * e;
  }
  f.r2 = (syy > 0.0) ? 1.0 - ssr / syy : 1.0;
  if (x.size() > 2) {
    double s2 = ssr / (n - 2.0);
    f.slope_se = std::sqrt(s2 / sxx);
    f.intercept_se = std::sqrt(s2 * (1.0 / n + mx * mx / sxx));
  }
  return f;
}

double p_mean_positive(const std::vector<double>& diffs) {
  require(diffs.size() >= 2, "paired test needs n>=2");
  double se = mean_se(diffs);
  if (se == 0.0) {
    double m = mean(diffs);
    return m > 0.0 ? 0.0 : 1.0;
  }
  double t = mean(diffs) / se;
  return 1.0 - normal_cdf(t);
}

namespace {

std::vector<double> resample(const std::vector<double>& xs, std::uint64_t seed,
                             std::uint32_t rep) {
  NoiseStream ns(seed, rep);
  std::vector<double> out(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    double u = ns.uniform(static_cast<std::uint32_t>(i >> 16),
                          static_cast<std::uint32_t>(i & 0xFFFF));
    auto j = static_cast<std::size_t>(u * static_cast<double>(xs.size()));
    if (j >= xs.size()) j = xs.size() - 1;
    out[i] = xs[j];
  }
  return out;
}

std::vector<double> bootstrap_stats(
    const std::vector<double>& xs,
    const std::function<double(const std::vector<double>&)>& stat,
    int n_resamples, std::uint64_t seed) {
  require(!xs.empty() && n_resamples >= 8, "bootstrap needs data and >=8 reps");
  std::vector<double> vals(n_resamples);
  for (int r = 0; r < n_resamples; ++r)
    vals[r] = stat(resample(xs, seed, static_cast<std::uint32_t>(r)));
  return vals;
}

}  // namespace

CI bootstrap_ci(const std::vector<double>& xs,
                const std::function<double(const std::vector<double>&)>& stat,
                int n_resamples, std::uint64_t seed, double level) {
  auto vals = bootstrap_stats(xs, stat, n_resamples, seed);
  std::sort(vals.begin(), vals.end());
  double tail = 0.5 * (1.0 - level);
  auto pick = [&](double q) {
    double pos = q * static_cast<double>(vals.size() - 1);
    auto lo = static_cast<std::size_t>(pos);
    auto hi = std::min(lo + 1, vals.size() - 1);
    double w = pos - static_cast<double>(lo);
    return (1.0 - w) * vals[lo] + w * vals[hi];
  };
  return CI{pick(tail), pick(1.0 - tail)};
}

double bootstrap_se(const std::vector<double>& xs,
                    const std::function<double(const std::vector<double>&)>& stat,
                    int n_resamples, std::uint64_t seed) {
  auto vals = bootstrap_stats(xs, stat, n_resamples, seed);
  return stdev(vals);
}

}  // namespace flab::stats
