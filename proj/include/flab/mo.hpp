#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "flab/common.hpp"
#include "flab/frictions.hpp"
#include "flab/sde.hpp"

namespace flab::mo {

// One-step separable gain: linear drift, quadratic inventory penalty,
// l1 trading cost, quadratic temporary impact, optional holding-cost
// gradient hook.
struct SeparableGain {
  Vec drift;             // mu_tilde
  Mat inventory_penalty; // Q, PSD
  Vec l1_cost;           // lambda >= 0, componentwise
  Mat temp_impact;       // Xi, positive definite
  std::function<Vec(const Vec&)> holding_cost_gradient;  // empty -> 0

  void validate() const;
  double xi_min_eigenvalue() const;
};

struct FeasibleSet {
  Vec position_low;   // empty -> unbounded
  Vec position_high;
  double speed_cap = 0.0;  // l2 cap on speed; <= 0 means none
  Vec speed_cap_vec;       // componentwise |v_i| cap; empty -> none
  double participation_cap = 0.0;  // |phi|/ADV <= cap; <= 0 means none
  Vec adv;
  double step_dt = 0.0;  // used for post-step position feasibility
  std::optional<double> risk_budget;  // CVaR cap per decision window

  void validate() const;
  bool has_position_box() const { return position_low.size() > 0; }
};

// Euclidean projection onto [lo, hi] intersected with the centered l2 ball
// of radius `radius` (radius <= 0: no ball), via Dykstra's algorithm.
Vec project_box_ball(const Vec& v, const Vec& lo, const Vec& hi, double radius,
                     double tol = 1e-10, int max_iters = 2000);

// Projection of a position onto the box/participation constraints.
Vec project_feasible_position(const Vec& position, const FeasibleSet& fs);

// Projection of a trading speed onto speed caps plus post-step position
// feasibility of position + speed * step_dt.
Vec project_feasible_speed(const Vec& speed, const Vec& position,
                           const FeasibleSet& fs);

// Discrete transient-impact convolution on a uniform grid: weights match
// TradeHistory::convolve on grid-aligned samples.
// I_k = h * sum_j c_{kj} K((k-j) h) speed_j over j in [max(k-w,0), k].
std::vector<Vec> discrete_convolution(const frictions::KernelFn& kernel,
                                      const std::vector<Vec>& speeds, double h,
                                      int window_steps);

struct AdjointState {
  std::vector<Vec> p;  // costate per grid node; back() is exactly zero
  double h = 0.0;
};

// Exact discrete adjoint of discrete_convolution: transfers the gain
// sensitivity to the transient-impact state onto the control, so
// sum_k <dI_gain_k, I_k> h == sum_j <p_j, speed_j> h to machine precision.
AdjointState volterra_adjoint(const frictions::KernelFn& kernel,
                              double tau_fill,
                              const std::vector<Vec>& dI_gain, double h);

enum class GradientMethod { pathwise, bel };

struct ShadowPrice {
  Vec value;             // estimator of E[V(t,Y_t)^T J_{T<-t}^T grad f(Y_T)]
  Vec se;                // per-coordinate Monte Carlo standard error
  GradientMethod method = GradientMethod::pathwise;
  long n_paths = 0;
};

// Risk shadow price for a terminal functional f over the window, by the
// pathwise first-variation estimator or the elliptic weight estimator.
// Both target the same vector; they must agree within Monte Carlo error.
ShadowPrice shadow_price(const sde::SdeModel& model, const sde::PathGrid& grid,
                         const Vec& y0, const sde::FlowWindow& window,
                         const std::function<double(const Vec&)>& f,
                         const std::function<Vec(const Vec&)>& grad_f,
                         GradientMethod method, long n_paths,
                         std::uint64_t seed, int n_threads = 1);

// Soft-threshold rebalancing step. Inside the no-trade wedge
// (|drive_i| <= lambda_i for all i) the speed is exactly zero; otherwise the
// coupled sign fixed point is solved by cyclic coordinate proximal
// iteration and the result is projected onto the feasible set.
Vec myopic_step(const SeparableGain& gain, const Vec& position,
                const Vec& lambda_risk, const FeasibleSet& fs);

// The drive vector mu_tilde - Q phi - grad HC(phi) - lambda_risk.
Vec myopic_drive(const SeparableGain& gain, const Vec& position,
                 const Vec& lambda_risk);

struct KktMultipliers {
  Vec alpha;                 // upper-box multipliers, >= 0
  Vec beta;                  // lower-box multipliers, >= 0
  std::vector<double> eta;   // generic constraint multipliers, >= 0
};

// Projected-gradient fixed-point norm + constraint-violation norm +
// complementarity norm. `gradient` is the ascent direction of the objective
// at `position`; `constraints` are generic values with feasibility c <= 0.
double kkt_residual(const Vec& gradient, const Vec& position,
                    const KktMultipliers& mult, const FeasibleSet& fs,
                    const std::vector<double>& constraints = {});

struct RiskBudgetProxy {
  Vec ell;      // forecast drift of the liquidation price
  Mat sigma;    // forecast price sensitivity, N x d
  double window = 1.0;
  double alpha = 0.95;
};

// Ex-post budget enforcement: scales the speed down by bisection until the
// Gaussian-proxy CVaR of the post-step exposure meets the budget.
Vec scale_to_risk_budget(const Vec& speed, const Vec& position, double dt,
                         const RiskBudgetProxy& proxy, double budget);

}  // namespace flab::mo
