#pragma once

#include <optional>
#include <vector>

#include "flab/common.hpp"

namespace flab::risk {

// Loss sign convention everywhere in this library: larger loss = worse.
// PnL enters as L = -dX.
struct LossSample {
  std::vector<double> values;
  std::vector<double> weights;  // empty -> equal weights; else sums to 1

  void validate() const;
  std::size_t size() const { return values.size(); }
};

enum class RiskKind { cvar, entropic, expectile };

struct RiskSpec {
  RiskKind kind = RiskKind::cvar;
  double level = 0.95;     // alpha for cvar, gamma for entropic, tau for expectile
  double aversion = 0.0;   // lambda^rho multiplier used by objectives

  void validate() const;
};

// Exact Rockafellar-Uryasev CVaR on the empirical distribution: sorted-tail
// average with a fractional atom at the alpha-quantile.
double cvar_ru(const LossSample& sample, double alpha);

// Empirical alpha-quantile (VaR) under the same atom handling.
double var_alpha(const LossSample& sample, double alpha);

struct GaussianTail {
  double var = 0.0;
  double cvar = 0.0;
};

// Closed-form normal proxies: VaR = mu + sigma z_a, CVaR = mu + sigma
// pdf(z_a)/(1-alpha).
GaussianTail gaussian_tail_proxy(double mu, double sigma, double alpha);

// (1/gamma) log E exp(gamma Z), log-sum-exp stabilized.
double entropic(const LossSample& sample, double gamma);

// Unique root of the asymmetric first-order condition, bisection to 1e-10.
double expectile(const LossSample& sample, double tau);

double evaluate(const LossSample& sample, const RiskSpec& spec);

// Buffered probability of exceedance: 1 - sup{alpha : CVaR_alpha <= tau},
// found by monotone bisection on alpha. Returns 1 when tau is at or below
// the sample mean, 0 when tau >= max.
double bpoe(const LossSample& sample, double threshold);

struct PositivityBounds {
  double lower = 0.0;  // Cantelli lower bound on P[Z >= 0]
  double upper = 1.0;  // Cantelli upper bound
  std::optional<double> empirical_p;
  std::optional<double> chernoff_negativity;  // bound on P[Z < 0]
};

// Cantelli bracket for P[Z >= 0] from (mu, sigma); empirical frequency and a
// Chernoff bound from the sample log-mgf (theta grid) when a sample is given.
PositivityBounds positivity_bounds(double mu, double sigma,
                                   const std::vector<double>* sample = nullptr,
                                   bool with_chernoff = false);

}  // namespace flab::risk
