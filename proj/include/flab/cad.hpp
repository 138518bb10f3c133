#pragma once

#include <functional>

#include "flab/common.hpp"
#include "flab/sde.hpp"

namespace flab::cad {

// (t, y, position, speed) -> drift shift in R^M
using FeedbackFn = std::function<Vec(double, const Vec&, const Vec&, const Vec&)>;
// (t, y, position) -> trading speed in R^N
using SpeedPolicy = std::function<Vec(double, const Vec&, const Vec&)>;

// Baseline market plus a control-to-drift feedback channel scaled by
// epsilon. Diffusion feedback is not wired into the built-in experiments;
// consumers that need it handle the elliptic-weight term themselves.
struct CadModel {
  sde::SdeModel base;
  FeedbackFn drift_feedback;  // F0; empty -> no feedback
  // d F0 / d speed at (t, y), M x N; required by the premium estimator.
  std::function<Mat(double, const Vec&)> drift_feedback_speed_jac;
  int n_assets = 1;
  double epsilon = 0.0;

  void validate() const;
};

struct CadPathResult {
  sde::MarketPath augmented;  // Y^eps under feedback
  sde::MarketPath baseline;   // Y^0, common noise
  Mat first_variation;        // (n_steps + 1) x M, dY/deps at eps = 0
  Mat baseline_positions;     // (n_steps + 1) x N
  Mat baseline_speeds;        // n_steps x N
  Mat augmented_positions;
  Mat augmented_speeds;
};

// Simulates the augmented dynamics and, along the common-noise baseline
// path, integrates the linear first-variation equation driven by the full
// feedback value.
CadPathResult simulate_cad(const CadModel& model, const SpeedPolicy& policy,
                           const sde::PathGrid& grid, const Vec& y0,
                           const Vec& phi0, std::uint64_t seed,
                           std::int64_t path_index);

struct CadPremium {
  Vec chi;  // per-asset first-order value density of the drift feedback
  Vec se;
  bool diffusion_term_skipped = true;
  long n_paths = 0;
};

// chi at the initial decision time: E[ (dF0/dspeed)^T J_{T<-0}^T g_T(Y_T) ]
// over baseline paths. The diffusion-feedback term is skipped (no diffusion
// feedback channel in this model family) and flagged.
CadPremium cad_premium(const CadModel& model, const SpeedPolicy& policy,
                       const std::function<Vec(const Vec&)>& grad_terminal,
                       const sde::PathGrid& grid, const Vec& y0,
                       const Vec& phi0, long n_paths, std::uint64_t seed,
                       int n_threads = 1);

}  // namespace flab::cad
