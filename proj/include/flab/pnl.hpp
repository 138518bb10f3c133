#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "flab/common.hpp"
#include "flab/risk.hpp"
#include "flab/stats.hpp"

namespace flab::pnl {

enum class Mode { taker, maker };

// Inputs for the predictable cash-gain kernel. Taker mode uses the
// speed/price fields; maker mode the quote/intensity fields. Carry and
// holding costs are common.
struct ReducedHamiltonianInput {
  Mode mode = Mode::taker;
  Vec position;
  Vec drift;  // ell, drift of the liquidation price
  double correction_kappa = 0.0;

  // taker
  Vec p_liq;
  Vec p_exec;
  Vec speed;
  Vec mid;

  // maker (single asset)
  double maker_p_liq = 0.0;
  double maker_mid = 0.0;
  double bid = 0.0, ask = 0.0;
  double lambda_bid = 0.0, lambda_ask = 0.0;

  // costs and carry
  double holding_cost = 0.0;
  double credit_rate = 0.0, funding_rate = 0.0, cash = 0.0;
  double tax_rate = 0.0;
};

double reduced_hamiltonian(const ReducedHamiltonianInput& in);

// kappa = Tr( d_y(Sigma^T phi) V R ) by central finite differences of the
// exposure map at y.
double kappa_correction(const std::function<Vec(const Vec&)>& exposure,
                        const Vec& y, const Mat& V, const Mat& R);

struct SplitPart {
  double mean = 0.0;
  double se = 0.0;
};

struct SplitResult {
  SplitPart drift;
  SplitPart martingale;
  std::optional<SplitPart> compensated_jump;
};

// Per-path totals: PnL increments minus integrated gain-rate; maker books
// additionally report the compensated fill component.
SplitResult semimartingale_split(
    const std::vector<double>& pnl_totals,
    const std::vector<double>& integrated_gain,
    const std::vector<double>* compensated_jump_totals = nullptr);

struct FeatureCI {
  double value = 0.0;
  stats::CI ci;
};

struct PnlDistribution {
  FeatureCI mean;
  FeatureCI variance;
  FeatureCI cvar_loss;
  FeatureCI p_positive;
  long n_paths = 0;
  risk::GaussianTail gaussian_proxy;    // from sample (mu, sigma)
  risk::PositivityBounds cantelli;      // bracket for P[dX >= 0]
};

PnlDistribution distribution_features(const std::vector<double>& pnl,
                                      double alpha, int n_boot = 200,
                                      std::uint64_t seed = 1);

struct DominanceReport {
  double mean_gap = 0.0;      // mean(MO) - mean(RL)
  double var_gap = 0.0;       // Var(RL) - Var(MO)
  double cvar_gap = 0.0;      // CVaR_loss(RL) - CVaR_loss(MO)
  double ppos_gap = 0.0;      // P+(MO) - P+(RL)
  double p_mean = 1.0, p_var = 1.0, p_cvar = 1.0, p_ppos = 1.0;
  bool mean_ok = false, var_ok = false, cvar_ok = false, ppos_ok = false;
  double predicted_mean_gap = 0.0;
  double cantelli_lower_mo = 0.0, cantelli_lower_rl = 0.0;
  risk::GaussianTail proxy_mo, proxy_rl;
};

// Paired (common-random-number) comparison of per-path PnL samples. The
// perturbed sample is the same strategy plus mean-zero action noise with
// floor sigma_star^2; the predicted mean gap is the quadratic expansion
// 1/2 mu_curvature sigma_star^2 T.
DominanceReport dominance_report(const std::vector<double>& mo_pnl,
                                 const std::vector<double>& rl_pnl,
                                 double alpha, double mu_curvature,
                                 double sigma_star2, double horizon,
                                 std::uint64_t seed = 7);

}  // namespace flab::pnl
