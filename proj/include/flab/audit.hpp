#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "flab/common.hpp"
#include "flab/rl.hpp"
#include "flab/sde.hpp"
#include "flab/stats.hpp"

namespace flab::audit {

// Single-asset audit market: dP = ell dt + sigma dB. Under filtration
// enlargement the driving noise carries an information drift, so the true
// price drift becomes ell + sigma * info_alpha while the causal baseline
// still credits only ell.
struct AuditScenario {
  double ell = 0.0;
  double sigma = 0.1;
  double info_alpha = 0.0;  // 0 = no enlargement
  sde::PathGrid grid;

  void validate() const;
};

// Position policy assembled from audited channels:
//  - constant / informed: deterministic positions (informed uses the
//    enlarged-filtration drift, position += informed_gain * sigma * alpha);
//  - lookahead: c * integral over [t, t+dt_look] of the future driver
//    displacement (a forward-label artifact with Malliavin derivative
//    proportional to the window length);
//  - momentum: adapted speed-integrated feedback, the honest control case.
struct AuditPolicy {
  double constant = 0.0;
  double informed_gain = 0.0;
  double lookahead_gain = 0.0;
  int lookahead_steps = 0;
  double momentum_gain = 0.0;
  double momentum_speed_cap = 1e18;

  int max_lookahead() const { return lookahead_gain != 0.0 ? lookahead_steps : 0; }
};

struct PhantomReport {
  double pi_ph = 0.0;
  double se = 0.0;
  stats::CI ci;             // path bootstrap
  double baseline_mean = 0.0;
  double analytic_info_premium = 0.0;  // exact for deterministic overlays
  long n_paths = 0;
};

// Midpoint (Stratonovich-consistent) MtM gain of the policy minus the
// causal baseline credit. Strictly adapted speed-integrated policies have
// zero phantom profit in expectation; anticipative ones do not.
PhantomReport phantom_profit(const AuditScenario& scenario,
                             const AuditPolicy& policy, long n_paths,
                             std::uint64_t seed, int n_threads = 1,
                             int n_boot = 200);

// Per-path phantom contributions (used by bound checks and experiments).
struct PhantomPaths {
  std::vector<double> phantom;      // per-path Gain - baseline
  std::vector<double> exposure_l2;  // per-path int (sigma phi)^2 dt
};
PhantomPaths phantom_paths(const AuditScenario& scenario,
                           const AuditPolicy& policy, long n_paths,
                           std::uint64_t seed, int n_threads = 1);

struct DecompReport {
  PhantomReport none;
  PhantomReport info_only;   // information premium I
  PhantomReport look_only;   // Skorokhod correction S
  PhantomReport both;
  double additivity_residual = 0.0;
  double residual_combined_hw = 0.0;  // 95% half-width for the residual
};

// 2x2 design over (enlargement on/off) x (lookahead on/off), common random
// numbers across cells.
DecompReport decompose_phantom(const AuditScenario& scenario,
                               const AuditPolicy& policy, long n_paths,
                               std::uint64_t seed, int n_threads = 1);

// Leaky training construction: a scalar policy phi = theta * psi where psi
// is the unit-gain lookahead signal. The implemented (leaky) objective is
//   J_impl(theta) = theta * Pi_psi - 0.5 * penalty_eff * theta^2,
// the honest objective drops the phantom term, so the contamination is the
// constant b = Pi_psi. Both Pi_psi and penalty_eff are closed-form.
struct LeakTrainSetup {
  AuditScenario scenario;
  int lookahead_steps = 4;
  double penalty = 1.0;          // quadratic holding-cost scale
  double gradient_noise = 0.0;   // injected per-step gradient noise
  rl::OptimizerConfig optimizer;

  double pi_psi() const;        // phantom profit per unit theta
  double penalty_eff() const;   // E int psi^2 dt scaled by penalty
  rl::Objective honest_objective() const;
  rl::Contamination leak_contamination() const;
};

struct LeakTrainResult {
  rl::TrainTrace implemented;
  rl::TrainTrace clean;
  double theta_impl = 0.0;
  double theta_clean = 0.0;
};

LeakTrainResult train_with_leak(const LeakTrainSetup& setup, std::uint64_t seed);

struct SolutionBiasReport {
  double b_sol = 0.0;  // measured wealth-path difference, impl minus clean
  double b_sol_se = 0.0;
  double z_term = 0.0;        // contamination projection
  double m_term = 0.0;        // base mismatch
  double i_term = 0.0;        // information premium of the implemented policy
  double s_term = 0.0;        // Skorokhod correction of the implemented policy
  double residual = 0.0;      // b_sol - (I + S + Z + M)
  double theta_impl = 0.0, theta_clean = 0.0;
};

// Decomposition of the backtest-evaluated wealth difference between the
// contaminated and clean solutions. cost_weights is the projection vector C.
// impl_uses_leak = false evaluates the implemented run on the adapted signal
// too (the clean-vs-clean control case).
SolutionBiasReport solution_bias(const LeakTrainSetup& setup,
                                 const LeakTrainResult& runs,
                                 const Vec& cost_weights, long n_paths,
                                 std::uint64_t seed, int n_threads = 1,
                                 bool impl_uses_leak = true);

// ---- Positive-bias probability ----------------------------------------

struct CgfCallables {
  std::function<double(double)> K;
  std::function<double(double)> K1;
  std::function<double(double)> K2;
};

// Lugannani-Rice upper tail P[X >= z] for a cgf; exact for Gaussian cgfs.
// Returns nullopt when the saddlepoint bracket fails.
std::optional<double> lr_tail_upper(const CgfCallables& cgf, double z,
                                    double t_lo, double t_hi);

enum class BiasProbMethod { normal_proxy, lr_kernel };

struct BiasProbResult {
  double p = 0.5;
  double z_eff = 0.0;
  bool used_fallback = false;  // lr bracket failure fell back to the proxy
};

// P[Z + Delta > 0] from paired samples: the normal proxy uses
// z_eff = (E Z + E Delta) / sqrt(Var Z + Var Delta + 2 Cov); the LR kernel
// bins Delta into equal-mass bins and averages the conditional saddlepoint
// tail of Z per bin.
BiasProbResult positive_bias_prob(const std::vector<double>& z_samples,
                                  const std::vector<double>& delta_samples,
                                  BiasProbMethod method, int n_bins = 20);

}  // namespace flab::audit
