#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "flab/common.hpp"
#include "flab/mo.hpp"
#include "flab/rng.hpp"

namespace flab::rl {

// Linear-in-features policy: speed = reshape(theta, N x F) * features.
struct PolicyParams {
  Vec theta;
  int n_assets = 1;
  int n_features = 1;
  // (market state, position, impact state) -> feature vector of size F
  std::function<Vec(const Vec&, const Vec&, const Vec&)> features;
  bool clip_to_feasible = false;
  mo::FeasibleSet feasible;

  void validate() const;
  Mat theta_matrix() const;  // N x F view of theta (row-major by asset)
  Vec action(const Vec& state, const Vec& position, const Vec& impact) const;
};

// Objective to be maximized by stochastic gradient ascent. `gradient`
// returns the exact (or batched Monte Carlo) ascent direction;
// `gradient_sample` returns one stochastic draw (step k, member b of the
// batch). Either may be absent depending on the experiment.
struct Objective {
  int dim = 0;
  std::function<double(const Vec&)> value;
  std::function<Vec(const Vec&)> gradient;
  std::function<Vec(const Vec&, const NoiseStream&, std::uint32_t, int)>
      gradient_sample;
  std::optional<double> optimum;  // J* when known

  void validate() const;
};

// Strongly concave testbed J(theta) = -1/2 theta^T A theta with optional
// injected gradient noise of known per-coordinate scale. J* = 0.
Objective quadratic_testbed(const Mat& a_matrix, double noise_scale);

enum class GradientEstimator { pathwise, score };

struct GradientEstimate {
  Vec gradient;
  double covariance_trace = 0.0;  // trace of the per-draw sample covariance
};

// Batch-mean policy gradient with a per-coordinate variance estimate.
GradientEstimate estimate_policy_gradient(const Objective& obj,
                                          const Vec& theta, int batch,
                                          GradientEstimator method,
                                          std::uint64_t seed,
                                          std::uint32_t step);

struct StepSchedule {
  enum class Kind { constant, decreasing } kind = Kind::constant;
  double eta = 0.1;     // constant step
  double c = 1.0;       // decreasing: eta_k = c / (k + k0)
  double k0 = 1.0;

  double at(long k) const {
    return kind == Kind::constant ? eta : c / (static_cast<double>(k) + k0);
  }
};

struct OptimizerConfig {
  StepSchedule schedule;
  int batch = 1;
  Mat preconditioner;  // empty -> identity
  long max_iters = 100;
  double divergence_guard = 1e6;

  void validate() const;
};

struct Contamination {
  enum class Kind { none, additive_bias } kind = Kind::none;
  std::function<Vec(const Vec&)> bias;  // b(theta)

  Vec at(const Vec& theta) const {
    if (kind == Kind::none || !bias) return Vec::Zero(theta.size());
    return bias(theta);
  }
};

struct TrainRecord {
  long iter = 0;
  double eta = 0.0;
  double objective = 0.0;
  double gap = 0.0;  // J* - J(theta) when J* known, else NaN
  Vec theta;
  Vec grad_naive;    // stochastic estimate before contamination
  Vec bias;          // b_k
  double grad_variance = 0.0;
  double self_bias_increment = 0.0;  // eta_k <b_k, g_impl,k>
};

struct TrainTrace {
  std::vector<TrainRecord> records;
  bool diverged = false;
  Vec theta_final;

  double self_bias_cum() const;
};

// Preconditioned stochastic gradient ascent
//   theta_{k+1} = theta_k + eta_k G^{-1} (g_hat_k + b(theta_k)).
// With zero noise and exact gradients this is bit-identical to the
// deterministic preconditioned ascent flow discretization.
TrainTrace train(const Vec& theta0, const OptimizerConfig& cfg,
                 const Objective& obj, const Contamination& contamination,
                 std::uint64_t seed);

// eta-weighted accumulation of <b_k, g_impl(theta_k)> over the trace.
double self_bias_accumulate(const TrainTrace& trace);

}  // namespace flab::rl
