#include "flab/audit.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>

namespace flab::audit {

void AuditScenario::validate() const {
  require(sigma > 0.0, "audit scenario needs sigma > 0");
  grid.validate();
}

namespace {

struct PathEval {
  double phantom = 0.0;
  double gain = 0.0;
  double baseline = 0.0;
  double exposure_l2 = 0.0;
  double quad_cost = 0.0;  // int phi^2 dt, left rule
};

struct PolicyView {
  const AuditPolicy* pol;
  bool use_trailing = false;    // adapted mirror of the lookahead signal
  double signal_scale = 1.0;    // multiplies the (forward or trailing) signal
};

// One audited path: builds the position sequence and the midpoint
// (Stratonovich-consistent) MtM gain against the causal drift credit.
PathEval eval_path(const AuditScenario& sc, const PolicyView& pv,
                   const NoiseStream& ns) {
  const int n = sc.grid.n_steps;
  const double h = sc.grid.step();
  const double sqh = std::sqrt(h);
  const AuditPolicy& pol = *pv.pol;
  const int j = pol.lookahead_steps;
  const int extra = (pol.lookahead_gain != 0.0 && !pv.use_trailing) ? j : 0;

  std::vector<double> dW(n + extra);
  for (int k = 0; k < n + extra; ++k)
    dW[k] = sqh * ns.normal(static_cast<std::uint32_t>(k), 0);

  const double drift_true = sc.ell + sc.sigma * sc.info_alpha;
  std::vector<double> dP(n);
  for (int k = 0; k < n; ++k) dP[k] = drift_true * h + sc.sigma * dW[k];

  const double base = pol.constant + pol.informed_gain * sc.sigma * sc.info_alpha;

  std::vector<double> phi(n + 1, 0.0);
  double mom = 0.0;
  for (int k = 0; k <= n; ++k) {
    double p = base;
    if (pol.lookahead_gain != 0.0) {
      double sig = 0.0;
      if (!pv.use_trailing) {
        // c * integral over [t, t + j h] of the future driver displacement.
        for (int i = k; i < k + j && i < n + extra; ++i)
          sig += static_cast<double>(k + j - i) * dW[i];
      } else {
        // Adapted mirror: trailing window, most recent increment heaviest.
        int i0 = std::max(k - j, 0);
        for (int i = i0; i < k; ++i)
          sig += static_cast<double>(i - (k - j) + 1) * dW[i];
      }
      p += pol.lookahead_gain * pv.signal_scale * h * sig;
    }
    p += mom;
    phi[k] = p;
    // Speed over [t_k, t_{k+1}) decided at t_k from the last seen increment.
    if (pol.momentum_gain != 0.0 && k < n) {
      double speed = k >= 1 ? pol.momentum_gain * dP[k - 1] / h : 0.0;
      speed = std::clamp(speed, -pol.momentum_speed_cap,
                         pol.momentum_speed_cap);
      mom += speed * h;
    }
  }

  PathEval ev;
  for (int k = 0; k < n; ++k) {
    double mid_pos = 0.5 * (phi[k] + phi[k + 1]);
    ev.gain += mid_pos * dP[k];
    ev.baseline += mid_pos * sc.ell * h;
    ev.exposure_l2 += (sc.sigma * phi[k]) * (sc.sigma * phi[k]) * h;
    ev.quad_cost += phi[k] * phi[k] * h;
  }
  ev.phantom = ev.gain - ev.baseline;
  return ev;
}

std::vector<PathEval> eval_paths(const AuditScenario& sc, const PolicyView& pv,
                                 long n_paths, std::uint64_t seed,
                                 int n_threads) {
  sc.validate();
  std::vector<PathEval> out(n_paths);
  parallel_for(n_paths, n_threads, [&](std::int64_t i) {
    out[i] = eval_path(sc, pv, NoiseStream(seed, i));
  });
  return out;
}

PhantomReport summarize(const AuditScenario& sc, const AuditPolicy& pol,
                        const std::vector<PathEval>& evs, int n_boot,
                        std::uint64_t seed) {
  PhantomReport rep;
  rep.n_paths = static_cast<long>(evs.size());
  std::vector<double> ph(evs.size()), bl(evs.size());
  for (std::size_t i = 0; i < evs.size(); ++i) {
    ph[i] = evs[i].phantom;
    bl[i] = evs[i].baseline;
  }
  rep.pi_ph = stats::mean(ph);
  rep.se = stats::mean_se(ph);
  rep.baseline_mean = stats::mean(bl);
  rep.ci = stats::bootstrap_ci(
      ph, [](const std::vector<double>& xs) { return stats::mean(xs); }, n_boot,
      seed ^ 0x9E3779B97F4A7C15ull);
  double sa = sc.sigma * sc.info_alpha;
  rep.analytic_info_premium =
      (pol.constant + pol.informed_gain * sa) * sa * sc.grid.horizon;
  return rep;
}

}  // namespace

PhantomReport phantom_profit(const AuditScenario& scenario,
                             const AuditPolicy& policy, long n_paths,
                             std::uint64_t seed, int n_threads, int n_boot) {
  require(n_paths >= 2, "phantom profit needs n_paths >= 2");
  PolicyView pv{&policy, false, 1.0};
  auto evs = eval_paths(scenario, pv, n_paths, seed, n_threads);
  return summarize(scenario, policy, evs, n_boot, seed);
}

PhantomPaths phantom_paths(const AuditScenario& scenario,
                           const AuditPolicy& policy, long n_paths,
                           std::uint64_t seed, int n_threads) {
  PolicyView pv{&policy, false, 1.0};
  auto evs = eval_paths(scenario, pv, n_paths, seed, n_threads);
  PhantomPaths out;
  out.phantom.resize(evs.size());
  out.exposure_l2.resize(evs.size());
  for (std::size_t i = 0; i < evs.size(); ++i) {
    out.phantom[i] = evs[i].phantom;
    out.exposure_l2[i] = evs[i].exposure_l2;
  }
  return out;
}

DecompReport decompose_phantom(const AuditScenario& scenario,
                               const AuditPolicy& policy, long n_paths,
                               std::uint64_t seed, int n_threads) {
  require(n_paths >= 2, "decomposition needs n_paths >= 2");
  auto cell = [&](bool info_on, bool look_on) {
    AuditScenario sc = scenario;
    if (!info_on) sc.info_alpha = 0.0;
    AuditPolicy pol = policy;
    if (!look_on) pol.lookahead_gain = 0.0;
    PolicyView pv{&pol, false, 1.0};
    return std::pair<std::vector<PathEval>, AuditPolicy>(
        eval_paths(sc, pv, n_paths, seed, n_threads), pol);
  };

  auto [ev_none, p_none] = cell(false, false);
  auto [ev_info, p_info] = cell(true, false);
  auto [ev_look, p_look] = cell(false, true);
  auto [ev_both, p_both] = cell(true, true);

  DecompReport rep;
  {
    AuditScenario off = scenario;
    off.info_alpha = 0.0;
    rep.none = summarize(off, p_none, ev_none, 200, seed + 11);
    rep.info_only = summarize(scenario, p_info, ev_info, 200, seed + 13);
    rep.look_only = summarize(off, p_look, ev_look, 200, seed + 17);
    rep.both = summarize(scenario, p_both, ev_both, 200, seed + 19);
  }

  // Interaction contrast on common random numbers: per-path residual of
  // additivity, with an honest standard error.
  std::vector<double> inter(ev_both.size());
  for (std::size_t i = 0; i < inter.size(); ++i)
    inter[i] = ev_both[i].phantom - ev_info[i].phantom - ev_look[i].phantom +
               ev_none[i].phantom;
  rep.additivity_residual = stats::mean(inter);
  rep.residual_combined_hw = 1.96 * stats::mean_se(inter);
  return rep;
}

// ---- Leaky training construction ----------------------------------------

double LeakTrainSetup::pi_psi() const {
  const double h = scenario.grid.step();
  const double dt_look = lookahead_steps * h;
  const double sj = static_cast<double>(lookahead_steps) *
                    (lookahead_steps + 1.0) * (2.0 * lookahead_steps + 1.0) /
                    6.0;
  const double signal_sd = std::sqrt(h * h * h * sj);
  return 0.5 * scenario.sigma * dt_look * scenario.grid.horizon / signal_sd;
}

double LeakTrainSetup::penalty_eff() const {
  return penalty * scenario.grid.horizon;
}

rl::Objective LeakTrainSetup::honest_objective() const {
  rl::Objective obj;
  obj.dim = 1;
  const double p_eff = penalty_eff();
  obj.value = [p_eff](const Vec& th) { return -0.5 * p_eff * th[0] * th[0]; };
  obj.gradient = [p_eff](const Vec& th) {
    return Vec::Constant(1, -p_eff * th[0]);
  };
  const double noise = gradient_noise;
  obj.gradient_sample = [p_eff, noise](const Vec& th, const NoiseStream& ns,
                                       std::uint32_t step, int member) {
    Vec g = Vec::Constant(1, -p_eff * th[0]);
    if (noise > 0.0)
      g[0] += noise * ns.normal(step, static_cast<std::uint32_t>(member));
    return g;
  };
  obj.optimum = 0.0;
  return obj;
}

rl::Contamination LeakTrainSetup::leak_contamination() const {
  rl::Contamination c;
  c.kind = rl::Contamination::Kind::additive_bias;
  const double b = pi_psi();
  c.bias = [b](const Vec& th) { return Vec::Constant(th.size(), b); };
  return c;
}

LeakTrainResult train_with_leak(const LeakTrainSetup& setup,
                                std::uint64_t seed) {
  Vec theta0 = Vec::Zero(1);
  rl::Objective obj = setup.honest_objective();
  LeakTrainResult out;
  out.implemented =
      rl::train(theta0, setup.optimizer, obj, setup.leak_contamination(), seed);
  out.clean = rl::train(theta0, setup.optimizer, obj, rl::Contamination{}, seed);
  out.theta_impl = out.implemented.theta_final[0];
  out.theta_clean = out.clean.theta_final[0];
  return out;
}

SolutionBiasReport solution_bias(const LeakTrainSetup& setup,
                                 const LeakTrainResult& runs,
                                 const Vec& cost_weights, long n_paths,
                                 std::uint64_t seed, int n_threads,
                                 bool impl_uses_leak) {
  require(cost_weights.size() == 1, "scalar testbed expects C of size 1");
  const double h = setup.scenario.grid.step();
  const double sj = static_cast<double>(setup.lookahead_steps) *
                    (setup.lookahead_steps + 1.0) *
                    (2.0 * setup.lookahead_steps + 1.0) / 6.0;
  const double signal_scale = 1.0 / std::sqrt(h * h * h * sj);

  // Backtest evaluation of both solutions with common random numbers: the
  // implemented policy trades the forward (leaky) signal, the clean one its
  // adapted trailing mirror.
  auto wealth = [&](double theta, bool trailing, std::int64_t i) {
    AuditPolicy pol;
    pol.lookahead_gain = theta;
    pol.lookahead_steps = setup.lookahead_steps;
    PolicyView pv{&pol, trailing, signal_scale};
    PathEval ev = eval_path(setup.scenario, pv, NoiseStream(seed, i));
    return ev.gain - 0.5 * setup.penalty * ev.quad_cost;
  };

  std::vector<double> diffs(n_paths);
  parallel_for(n_paths, n_threads, [&](std::int64_t i) {
    diffs[i] = wealth(runs.theta_impl, !impl_uses_leak, i) -
               wealth(runs.theta_clean, true, i);
  });

  SolutionBiasReport rep;
  rep.theta_impl = runs.theta_impl;
  rep.theta_clean = runs.theta_clean;
  rep.b_sol = stats::mean(diffs);
  rep.b_sol_se = stats::mean_se(diffs);

  const double c0 = cost_weights[0];
  KahanSum z_acc, m_acc;
  for (const auto& r : runs.implemented.records) {
    z_acc.add(r.eta * c0 * r.bias[0]);
    m_acc.add(r.eta * c0 * r.grad_naive[0]);
  }
  for (const auto& r : runs.clean.records)
    m_acc.add(-r.eta * c0 * r.grad_naive[0]);
  rep.z_term = z_acc.value();
  rep.m_term = m_acc.value();

  // Phantom decomposition of the implemented policy (no enlargement in this
  // testbed, so the information premium cell is a pure noise check).
  AuditPolicy impl_pol;
  impl_pol.lookahead_gain = impl_uses_leak ? runs.theta_impl * signal_scale : 0.0;
  impl_pol.lookahead_steps = setup.lookahead_steps;
  DecompReport dec =
      decompose_phantom(setup.scenario, impl_pol, n_paths, seed + 1, n_threads);
  rep.i_term = dec.info_only.pi_ph;
  rep.s_term = dec.look_only.pi_ph;

  rep.residual =
      rep.b_sol - (rep.i_term + rep.s_term + rep.z_term + rep.m_term);
  return rep;
}

// ---- Positive-bias probability -------------------------------------------

std::optional<double> lr_tail_upper(const CgfCallables& cgf, double z,
                                    double t_lo, double t_hi) {
  require(static_cast<bool>(cgf.K) && static_cast<bool>(cgf.K1) &&
              static_cast<bool>(cgf.K2),
          "cgf callables required");
  double flo = cgf.K1(t_lo) - z;
  double fhi = cgf.K1(t_hi) - z;
  if (flo > 0.0 || fhi < 0.0) return std::nullopt;
  double lo = t_lo, hi = t_hi;
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    (cgf.K1(mid) - z <= 0.0 ? lo : hi) = mid;
  }
  double t_hat = 0.5 * (lo + hi);
  double k2 = cgf.K2(t_hat);
  if (!(k2 > 0.0)) return std::nullopt;

  double w2 = 2.0 * (t_hat * z - cgf.K(t_hat));
  if (w2 < 0.0) w2 = 0.0;
  double omega = (t_hat >= 0.0 ? 1.0 : -1.0) * std::sqrt(w2);
  double u = t_hat * std::sqrt(k2);

  double p;
  if (std::abs(omega) < 1e-5 || std::abs(u) < 1e-12) {
    // Near-mean limit of the tail expansion.
    double k2_0 = cgf.K2(0.0);
    if (!(k2_0 > 0.0)) return std::nullopt;
    double hstep = 1e-4 * std::max(std::sqrt(k2_0), 1e-8);
    double k3 = (cgf.K2(hstep) - cgf.K2(-hstep)) / (2.0 * hstep);
    p = 0.5 - k3 / (6.0 * std::sqrt(2.0 * M_PI) * std::pow(k2_0, 1.5)) -
        (z - cgf.K1(0.0)) / std::sqrt(2.0 * M_PI * k2_0);
  } else {
    p = 1.0 - stats::normal_cdf(omega) +
        stats::normal_pdf(omega) * (1.0 / u - 1.0 / omega);
  }
  return std::clamp(p, 0.0, 1.0);
}

namespace {

CgfCallables empirical_cgf(std::shared_ptr<std::vector<double>> zs) {
  auto moments = [zs](double t) {
    double zmax = -1e300;
    for (double z : *zs) zmax = std::max(zmax, t * z);
    double s0 = 0.0, s1 = 0.0, s2 = 0.0;
    for (double z : *zs) {
      double w = std::exp(t * z - zmax);
      s0 += w;
      s1 += w * z;
      s2 += w * z * z;
    }
    double m1 = s1 / s0;
    double m2 = std::max(s2 / s0 - m1 * m1, 0.0);
    double k = zmax + std::log(s0 / static_cast<double>(zs->size()));
    return std::array<double, 3>{k, m1, m2};
  };
  CgfCallables c;
  c.K = [moments](double t) { return moments(t)[0]; };
  c.K1 = [moments](double t) { return moments(t)[1]; };
  c.K2 = [moments](double t) { return moments(t)[2]; };
  return c;
}

}  // namespace

BiasProbResult positive_bias_prob(const std::vector<double>& z_samples,
                                  const std::vector<double>& delta_samples,
                                  BiasProbMethod method, int n_bins) {
  require(!z_samples.empty() && !delta_samples.empty(),
          "positive_bias_prob needs samples");
  BiasProbResult out;

  double mz = stats::mean(z_samples), md = stats::mean(delta_samples);
  double vz = z_samples.size() > 1 ? stats::variance(z_samples) : 0.0;
  double vd = delta_samples.size() > 1 ? stats::variance(delta_samples) : 0.0;
  double cov = 0.0;
  if (z_samples.size() == delta_samples.size() && z_samples.size() > 1) {
    for (std::size_t i = 0; i < z_samples.size(); ++i)
      cov += (z_samples[i] - mz) * (delta_samples[i] - md);
    cov /= static_cast<double>(z_samples.size() - 1);
  }
  double denom = std::sqrt(std::max(vz + vd + 2.0 * cov, 0.0));
  out.z_eff = denom > 0.0 ? (mz + md) / denom
                          : (mz + md > 0.0 ? 1e9 : (mz + md < 0.0 ? -1e9 : 0.0));
  double p_normal = stats::normal_cdf(std::clamp(out.z_eff, -38.0, 38.0));
  if (method == BiasProbMethod::normal_proxy) {
    out.p = p_normal;
    return out;
  }

  // LR kernel: equal-mass bins of Delta, conditional empirical cgf of Z.
  require(z_samples.size() == delta_samples.size(),
          "lr kernel needs paired samples");
  const std::size_t n = z_samples.size();
  int bins = std::max(1, std::min<int>(n_bins, static_cast<int>(n / 5)));
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return delta_samples[a] < delta_samples[b];
  });

  double p_acc = 0.0, w_acc = 0.0;
  for (int b = 0; b < bins; ++b) {
    std::size_t i0 = n * b / bins, i1 = n * (b + 1) / bins;
    if (i1 <= i0) continue;
    auto zb = std::make_shared<std::vector<double>>();
    double dbar = 0.0;
    for (std::size_t i = i0; i < i1; ++i) {
      zb->push_back(z_samples[idx[i]]);
      dbar += delta_samples[idx[i]];
    }
    dbar /= static_cast<double>(i1 - i0);
    double zcut = -dbar;  // P[Z >= -delta]
    double zmin = *std::min_element(zb->begin(), zb->end());
    double zmax = *std::max_element(zb->begin(), zb->end());
    double pb;
    if (zcut <= zmin) {
      pb = 1.0;
    } else if (zcut > zmax) {
      pb = 0.0;
    } else {
      double sd = zb->size() > 1 ? stats::stdev(*zb) : 0.0;
      double trange = sd > 0.0 ? 200.0 / sd : 1.0;
      auto p_lr = lr_tail_upper(empirical_cgf(zb), zcut, -trange, trange);
      if (p_lr) {
        pb = *p_lr;
      } else {
        out.used_fallback = true;
        double mb = stats::mean(*zb);
        pb = sd > 0.0
                 ? 1.0 - stats::normal_cdf((zcut - mb) / sd)
                 : (mb >= zcut ? 1.0 : 0.0);
      }
    }
    double w = static_cast<double>(i1 - i0);
    p_acc += w * pb;
    w_acc += w;
  }
  out.p = w_acc > 0.0 ? p_acc / w_acc : p_normal;
  return out;
}

}  // namespace flab::audit
