#include "flab/risk.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "flab/stats.hpp"

namespace flab::risk {

void LossSample::validate() const {
  require(!values.empty(), "empty loss sample");
  for (double v : values) require(std::isfinite(v), "non-finite loss value");
  if (!weights.empty()) {
    require(weights.size() == values.size(), "weights size mismatch");
    double s = 0.0;
    for (double w : weights) {
      require(w >= 0.0, "negative weight");
      s += w;
    }
    require(std::abs(s - 1.0) < 1e-9, "weights must sum to 1");
  }
}

void RiskSpec::validate() const {
  switch (kind) {
    case RiskKind::cvar:
    case RiskKind::expectile:
      require(level > 0.0 && level < 1.0, "level must be in (0,1)");
      break;
    case RiskKind::entropic:
      require(level > 0.0, "entropic gamma must be > 0");
      break;
  }
  require(aversion >= 0.0, "risk aversion must be >= 0");
}

namespace {

struct SortedSample {
  std::vector<double> v;  // ascending
  std::vector<double> w;  // aligned weights
};

SortedSample sorted(const LossSample& sample) {
  sample.validate();
  const std::size_t n = sample.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return sample.values[a] < sample.values[b];
  });
  SortedSample s;
  s.v.resize(n);
  s.w.resize(n);
  double wdef = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    s.v[i] = sample.values[idx[i]];
    s.w[i] = sample.weights.empty() ? wdef : sample.weights[idx[i]];
  }
  return s;
}

double cvar_sorted(const SortedSample& s, double alpha) {
  // Average of the upper (1 - alpha) tail with a fractional atom at the cut.
  double tail = 1.0 - alpha;
  double acc = 0.0, remaining = tail;
  for (std::size_t i = s.v.size(); i-- > 0;) {
    double take = std::min(remaining, s.w[i]);
    acc += take * s.v[i];
    remaining -= take;
    if (remaining <= 1e-16) break;
  }
  return acc / tail;
}

}  // namespace

double cvar_ru(const LossSample& sample, double alpha) {
  require(alpha > 0.0 && alpha < 1.0, "alpha must be in (0,1)");
  return cvar_sorted(sorted(sample), alpha);
}

double var_alpha(const LossSample& sample, double alpha) {
  require(alpha > 0.0 && alpha < 1.0, "alpha must be in (0,1)");
  auto s = sorted(sample);
  double cum = 0.0;
  for (std::size_t i = 0; i < s.v.size(); ++i) {
    cum += s.w[i];
    if (cum >= alpha - 1e-16) return s.v[i];
  }
  return s.v.back();
}

GaussianTail gaussian_tail_proxy(double mu, double sigma, double alpha) {
  require(sigma >= 0.0, "sigma must be >= 0");
  require(alpha > 0.0 && alpha < 1.0, "alpha must be in (0,1)");
  GaussianTail g;
  if (sigma == 0.0) {
    g.var = mu;
    g.cvar = mu;
    return g;
  }
  double z = stats::normal_quantile(alpha);
  g.var = mu + sigma * z;
  g.cvar = mu + sigma * stats::normal_pdf(z) / (1.0 - alpha);
  return g;
}

double entropic(const LossSample& sample, double gamma) {
  sample.validate();
  require(gamma > 0.0, "entropic gamma must be > 0");
  auto s = sorted(sample);
  double zmax = gamma * s.v.back();
  KahanSum acc;
  for (std::size_t i = 0; i < s.v.size(); ++i)
    acc.add(s.w[i] * std::exp(gamma * s.v[i] - zmax));
  double lse = zmax + std::log(acc.value());
  if (!std::isfinite(lse)) throw NumericError("entropic risk overflow");
  return lse / gamma;
}

double expectile(const LossSample& sample, double tau) {
  sample.validate();
  require(tau > 0.0 && tau < 1.0, "expectile tau in (0,1)");
  auto s = sorted(sample);
  auto foc = [&](double e) {
    double up = 0.0, down = 0.0;
    for (std::size_t i = 0; i < s.v.size(); ++i) {
      double d = s.v[i] - e;
      if (d > 0.0)
        up += s.w[i] * d;
      else
        down += s.w[i] * (-d);
    }
    return tau * up - (1.0 - tau) * down;  // strictly decreasing in e
  };
  double lo = s.v.front(), hi = s.v.back();
  if (lo == hi) return lo;
  for (int it = 0; it < 200 && hi - lo > 1e-10 * (1.0 + std::abs(hi)); ++it) {
    double mid = 0.5 * (lo + hi);
    (foc(mid) > 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

double evaluate(const LossSample& sample, const RiskSpec& spec) {
  spec.validate();
  switch (spec.kind) {
    case RiskKind::cvar:
      return cvar_ru(sample, spec.level);
    case RiskKind::entropic:
      return entropic(sample, spec.level);
    case RiskKind::expectile:
      return expectile(sample, spec.level);
  }
  throw ValidationError("unknown risk kind");
}

double bpoe(const LossSample& sample, double threshold) {
  sample.validate();
  auto s = sorted(sample);
  double vmax = s.v.back();
  double mean = 0.0;
  for (std::size_t i = 0; i < s.v.size(); ++i) mean += s.w[i] * s.v[i];
  if (threshold >= vmax) return 0.0;
  if (threshold <= mean) return 1.0;  // boundary convention

  // CVaR_alpha is continuous and nondecreasing in alpha, from mean to max.
  double lo = 0.0, hi = 1.0 - 1e-15;
  for (int it = 0; it < 200; ++it) {
    double alpha = 0.5 * (lo + hi);
    double c = alpha <= 0.0 ? mean : cvar_sorted(s, alpha);
    (c <= threshold ? lo : hi) = alpha;
  }
  return 1.0 - lo;
}

PositivityBounds positivity_bounds(double mu, double sigma,
                                   const std::vector<double>* sample,
                                   bool with_chernoff) {
  require(sigma >= 0.0, "sigma must be >= 0");
  PositivityBounds out;
  if (mu == 0.0 && sigma == 0.0) {
    out.lower = 1.0;
    out.upper = 1.0;
  } else {
    double s2 = sigma * sigma;
    out.lower = mu > 0.0 ? mu * mu / (s2 + mu * mu) : 0.0;
    out.upper = mu < 0.0 ? s2 / (s2 + mu * mu) : 1.0;
  }
  if (sample && !sample->empty()) {
    long npos = 0;
    for (double z : *sample)
      if (z >= 0.0) ++npos;
    out.empirical_p = static_cast<double>(npos) / static_cast<double>(sample->size());
    if (with_chernoff) {
      // inf over a theta grid of the empirical E[exp(-theta Z)],
      // log-sum-exp stabilized; bounds P[Z < 0].
      double best = 1.0;
      for (int g = 0; g <= 60; ++g) {
        double theta = std::pow(10.0, -3.0 + 0.1 * g);
        double zmax = 0.0;
        for (double z : *sample) zmax = std::max(zmax, -theta * z);
        KahanSum acc;
        for (double z : *sample) acc.add(std::exp(-theta * z - zmax));
        double lmgf = zmax + std::log(acc.value() /
                                      static_cast<double>(sample->size()));
        best = std::min(best, std::exp(std::min(lmgf, 0.0)));
      }
      out.chernoff_negativity = best;
    }
  }
  return out;
}

}  // namespace flab::risk
