#include "flab/pnl.hpp"

#include <cmath>

#include "flab/rng.hpp"
#include "flab/stats.hpp"

namespace flab::pnl {

double reduced_hamiltonian(const ReducedHamiltonianInput& in) {
  double carry = in.credit_rate * std::max(in.cash, 0.0) -
                 in.funding_rate * std::max(-in.cash, 0.0);
  double g = in.position.dot(in.drift) + 0.5 * in.correction_kappa -
             in.holding_cost + carry;
  if (in.mode == Mode::taker) {
    require(in.speed.size() == in.position.size(), "taker speed size");
    if (in.speed.size() > 0 && in.p_liq.size() == in.speed.size() &&
        in.p_exec.size() == in.speed.size())
      g += (in.p_liq - in.p_exec).dot(in.speed);
    for (Eigen::Index i = 0; i < in.speed.size(); ++i)
      g -= in.tax_rate * in.mid[i] * std::abs(in.speed[i]);
  } else {
    g += (in.maker_p_liq - in.bid) * in.lambda_bid -
         (in.maker_p_liq - in.ask) * in.lambda_ask;
    g -= in.tax_rate * in.maker_mid * (in.lambda_bid + in.lambda_ask);
  }
  return g;
}

double kappa_correction(const std::function<Vec(const Vec&)>& exposure,
                        const Vec& y, const Mat& V, const Mat& R) {
  require(static_cast<bool>(exposure), "kappa needs an exposure map");
  const auto M = y.size();
  const auto d = V.cols();
  Mat jac(d, M);  // d u / d y
  for (Eigen::Index j = 0; j < M; ++j) {
    double h = 1e-6 * (1.0 + std::abs(y[j]));
    Vec yp = y, ym = y;
    yp[j] += h;
    ym[j] -= h;
    jac.col(j) = (exposure(yp) - exposure(ym)) / (2.0 * h);
  }
  return (jac * V * R).trace();
}

namespace {

SplitPart part_of(const std::vector<double>& xs) {
  SplitPart p;
  p.mean = stats::mean(xs);
  p.se = stats::mean_se(xs);
  return p;
}

}  // namespace

SplitResult semimartingale_split(
    const std::vector<double>& pnl_totals,
    const std::vector<double>& integrated_gain,
    const std::vector<double>* compensated_jump_totals) {
  require(pnl_totals.size() == integrated_gain.size() && pnl_totals.size() >= 2,
          "split needs paired per-path totals");
  SplitResult out;
  out.drift = part_of(integrated_gain);
  std::vector<double> mart(pnl_totals.size());
  for (std::size_t i = 0; i < pnl_totals.size(); ++i)
    mart[i] = pnl_totals[i] - integrated_gain[i];
  if (compensated_jump_totals) {
    require(compensated_jump_totals->size() == pnl_totals.size(),
            "jump totals size mismatch");
    out.compensated_jump = part_of(*compensated_jump_totals);
  }
  out.martingale = part_of(mart);
  return out;
}

PnlDistribution distribution_features(const std::vector<double>& pnl,
                                      double alpha, int n_boot,
                                      std::uint64_t seed) {
  require(pnl.size() >= 100, "distribution features need n_paths >= 100");
  PnlDistribution out;
  out.n_paths = static_cast<long>(pnl.size());

  auto mean_stat = [](const std::vector<double>& xs) { return stats::mean(xs); };
  auto var_stat = [](const std::vector<double>& xs) {
    return stats::variance(xs);
  };
  auto cvar_stat = [alpha](const std::vector<double>& xs) {
    std::vector<double> losses(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) losses[i] = -xs[i];
    return risk::cvar_ru(risk::LossSample{losses, {}}, alpha);
  };
  auto ppos_stat = [](const std::vector<double>& xs) {
    long n = 0;
    for (double x : xs)
      if (x >= 0.0) ++n;
    return static_cast<double>(n) / static_cast<double>(xs.size());
  };

  out.mean.value = mean_stat(pnl);
  out.variance.value = var_stat(pnl);
  out.cvar_loss.value = cvar_stat(pnl);
  out.p_positive.value = ppos_stat(pnl);
  out.mean.ci = stats::bootstrap_ci(pnl, mean_stat, n_boot, seed);
  out.variance.ci = stats::bootstrap_ci(pnl, var_stat, n_boot, seed + 1);
  out.cvar_loss.ci = stats::bootstrap_ci(pnl, cvar_stat, n_boot, seed + 2);
  out.p_positive.ci = stats::bootstrap_ci(pnl, ppos_stat, n_boot, seed + 3);

  double mu = out.mean.value;
  double sd = std::sqrt(out.variance.value);
  // Loss-side proxy: L = -dX has mean -mu, same sigma.
  out.gaussian_proxy = risk::gaussian_tail_proxy(-mu, sd, alpha);
  out.cantelli = risk::positivity_bounds(mu, sd, &pnl);
  return out;
}

DominanceReport dominance_report(const std::vector<double>& mo_pnl,
                                 const std::vector<double>& rl_pnl,
                                 double alpha, double mu_curvature,
                                 double sigma_star2, double horizon,
                                 std::uint64_t seed) {
  require(mo_pnl.size() == rl_pnl.size() && mo_pnl.size() >= 100,
          "dominance needs paired samples, n >= 100");
  const std::size_t n = mo_pnl.size();
  DominanceReport rep;

  double mean_mo = stats::mean(mo_pnl), mean_rl = stats::mean(rl_pnl);
  double var_mo = stats::variance(mo_pnl), var_rl = stats::variance(rl_pnl);
  rep.mean_gap = mean_mo - mean_rl;
  rep.var_gap = var_rl - var_mo;
  rep.predicted_mean_gap = 0.5 * mu_curvature * sigma_star2 * horizon;

  // Mean: paired one-sided t on per-path differences.
  std::vector<double> diffs(n);
  for (std::size_t i = 0; i < n; ++i) diffs[i] = mo_pnl[i] - rl_pnl[i];
  rep.p_mean = stats::p_mean_positive(diffs);
  rep.mean_ok = rep.mean_gap > 0.0;

  // Variance: paired one-sided t on centered-square differences.
  std::vector<double> sqdiffs(n);
  for (std::size_t i = 0; i < n; ++i) {
    double a = rl_pnl[i] - mean_rl, b = mo_pnl[i] - mean_mo;
    sqdiffs[i] = a * a - b * b;
  }
  rep.p_var = stats::p_mean_positive(sqdiffs);
  rep.var_ok = rep.var_gap > 0.0;

  // CVaR of loss: paired bootstrap over path indices.
  auto cvar_of = [alpha](const std::vector<double>& xs) {
    std::vector<double> losses(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) losses[i] = -xs[i];
    return risk::cvar_ru(risk::LossSample{losses, {}}, alpha);
  };
  double cvar_mo = cvar_of(mo_pnl), cvar_rl = cvar_of(rl_pnl);
  rep.cvar_gap = cvar_rl - cvar_mo;
  rep.cvar_ok = rep.cvar_gap > 0.0;
  {
    const int B = 200;
    int n_nonpos = 0;
    NoiseStream ns(seed, 1);
    std::vector<double> mo_b(n), rl_b(n);
    for (int r = 0; r < B; ++r) {
      for (std::size_t i = 0; i < n; ++i) {
        double u = ns.uniform(static_cast<std::uint32_t>(r),
                              static_cast<std::uint32_t>(i));
        auto j = std::min(static_cast<std::size_t>(u * n), n - 1);
        mo_b[i] = mo_pnl[j];
        rl_b[i] = rl_pnl[j];
      }
      if (cvar_of(rl_b) - cvar_of(mo_b) <= 0.0) ++n_nonpos;
    }
    rep.p_cvar = (n_nonpos + 1.0) / (B + 1.0);
  }

  // Positivity: paired one-sided t on indicator differences.
  std::vector<double> ind(n);
  for (std::size_t i = 0; i < n; ++i)
    ind[i] = (mo_pnl[i] >= 0.0 ? 1.0 : 0.0) - (rl_pnl[i] >= 0.0 ? 1.0 : 0.0);
  double ppos_mo = 0.0, ppos_rl = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ppos_mo += mo_pnl[i] >= 0.0 ? 1.0 : 0.0;
    ppos_rl += rl_pnl[i] >= 0.0 ? 1.0 : 0.0;
  }
  ppos_mo /= static_cast<double>(n);
  ppos_rl /= static_cast<double>(n);
  rep.ppos_gap = ppos_mo - ppos_rl;
  rep.ppos_ok = rep.ppos_gap > 0.0;
  rep.p_ppos = stats::p_mean_positive(ind);

  rep.proxy_mo = risk::gaussian_tail_proxy(-mean_mo, std::sqrt(var_mo), alpha);
  rep.proxy_rl = risk::gaussian_tail_proxy(-mean_rl, std::sqrt(var_rl), alpha);
  rep.cantelli_lower_mo = risk::positivity_bounds(mean_mo, std::sqrt(var_mo)).lower;
  rep.cantelli_lower_rl = risk::positivity_bounds(mean_rl, std::sqrt(var_rl)).lower;
  return rep;
}

}  // namespace flab::pnl
