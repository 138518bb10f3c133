#include "flab/mo.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

#include "flab/risk.hpp"
#include "flab/rng.hpp"
#include "flab/stats.hpp"

namespace flab::mo {

void SeparableGain::validate() const {
  const auto n = drift.size();
  require(n >= 1, "gain needs at least one asset");
  require(inventory_penalty.rows() == n && inventory_penalty.cols() == n,
          "Q must be N x N");
  require(l1_cost.size() == n && l1_cost.minCoeff() >= 0.0,
          "l1 cost must be nonnegative N-vector");
  require(temp_impact.rows() == n && temp_impact.cols() == n,
          "Xi must be N x N");
  require(xi_min_eigenvalue() > 0.0, "Xi must be positive definite");
}

double SeparableGain::xi_min_eigenvalue() const {
  Eigen::SelfAdjointEigenSolver<Mat> es(temp_impact);
  return es.eigenvalues().minCoeff();
}

void FeasibleSet::validate() const {
  if (position_low.size() > 0) {
    require(position_high.size() == position_low.size(),
            "position box needs both bounds");
    require((position_high - position_low).minCoeff() >= 0.0,
            "inconsistent position box");
  }
  if (participation_cap > 0.0)
    require(adv.size() > 0 && adv.minCoeff() > 0.0,
            "participation cap needs positive ADV");
}

Vec project_box_ball(const Vec& v, const Vec& lo, const Vec& hi, double radius,
                     double tol, int max_iters) {
  const auto n = v.size();
  auto clip = [&](const Vec& x) {
    Vec y = x;
    if (lo.size() > 0)
      for (Eigen::Index i = 0; i < n; ++i)
        y[i] = std::min(std::max(y[i], lo[i]), hi[i]);
    return y;
  };
  auto ball = [&](const Vec& x) {
    if (radius <= 0.0) return x;
    double nrm = x.norm();
    return nrm <= radius ? x : Vec((radius / nrm) * x);
  };
  if (radius <= 0.0) return clip(v);
  if (lo.size() == 0) return ball(v);

  // Dykstra's alternating projections for the exact Euclidean projection.
  Vec x = v, p = Vec::Zero(n), q = Vec::Zero(n);
  for (int it = 0; it < max_iters; ++it) {
    Vec y = clip(x + p);
    Vec p_new = x + p - y;
    Vec z = ball(y + q);
    Vec q_new = y + q - z;
    double delta = (x - z).norm() + (p - p_new).norm() + (q - q_new).norm();
    x = z;
    p = p_new;
    q = q_new;
    if (delta < tol) break;
  }
  return x;
}

namespace {

// Combined interval box for a position: hard box intersected with the
// participation band.
void position_box(const FeasibleSet& fs, Eigen::Index n, Vec& lo, Vec& hi) {
  constexpr double kInf = 1e300;
  lo = Vec::Constant(n, -kInf);
  hi = Vec::Constant(n, kInf);
  if (fs.has_position_box()) {
    lo = lo.cwiseMax(fs.position_low);
    hi = hi.cwiseMin(fs.position_high);
  }
  if (fs.participation_cap > 0.0) {
    for (Eigen::Index i = 0; i < n; ++i) {
      double cap = fs.participation_cap * fs.adv[i];
      lo[i] = std::max(lo[i], -cap);
      hi[i] = std::min(hi[i], cap);
    }
  }
}

}  // namespace

Vec project_feasible_position(const Vec& position, const FeasibleSet& fs) {
  fs.validate();
  Vec lo, hi;
  position_box(fs, position.size(), lo, hi);
  Vec out = position;
  for (Eigen::Index i = 0; i < out.size(); ++i)
    out[i] = std::min(std::max(out[i], lo[i]), hi[i]);
  return out;
}

Vec project_feasible_speed(const Vec& speed, const Vec& position,
                           const FeasibleSet& fs) {
  fs.validate();
  const auto n = speed.size();
  constexpr double kInf = 1e300;
  Vec lo = Vec::Constant(n, -kInf), hi = Vec::Constant(n, kInf);
  if (fs.speed_cap_vec.size() > 0) {
    lo = lo.cwiseMax(-fs.speed_cap_vec);
    hi = hi.cwiseMin(fs.speed_cap_vec);
  }
  if (fs.step_dt > 0.0) {
    Vec plo, phi_hi;
    position_box(fs, n, plo, phi_hi);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (plo[i] > -kInf) lo[i] = std::max(lo[i], (plo[i] - position[i]) / fs.step_dt);
      if (phi_hi[i] < kInf) hi[i] = std::min(hi[i], (phi_hi[i] - position[i]) / fs.step_dt);
    }
  }
  for (Eigen::Index i = 0; i < n; ++i)
    if (lo[i] > hi[i]) {
      // Position already outside its box: take the nearest-recovery speed.
      double mid = 0.5 * (lo[i] + hi[i]);
      lo[i] = hi[i] = mid;
    }
  return project_box_ball(speed, lo, hi, fs.speed_cap > 0.0 ? fs.speed_cap : 0.0);
}

std::vector<Vec> discrete_convolution(const frictions::KernelFn& kernel,
                                      const std::vector<Vec>& speeds, double h,
                                      int window_steps) {
  require(h > 0.0 && window_steps >= 0, "bad convolution grid");
  const int n = static_cast<int>(speeds.size());
  std::vector<Vec> out(n);
  // Uniform node mass h per strictly-past sample at lags h .. window_steps*h.
  // Uniform weights keep the transposed operator a consistent quadrature of
  // the continuous adjoint at every node, including near the grid start.
  for (int k = 0; k < n; ++k) {
    Vec acc = Vec::Zero(speeds[0].size());
    int j0 = std::max(k - window_steps, 0);
    for (int j = j0; j <= k - 1; ++j)
      acc += h * (kernel(h * (k - j)) * speeds[j]);
    out[k] = acc;
  }
  return out;
}

AdjointState volterra_adjoint(const frictions::KernelFn& kernel,
                              double tau_fill,
                              const std::vector<Vec>& dI_gain, double h) {
  require(h > 0.0 && tau_fill >= 0.0, "bad adjoint grid");
  require(!dI_gain.empty(), "adjoint needs gain sensitivities");
  const int n = static_cast<int>(dI_gain.size()) - 1;  // nodes 0..n
  const int w = static_cast<int>(std::floor(tau_fill / h + 1e-9));

  AdjointState adj;
  adj.h = h;
  adj.p.assign(n + 1, Vec::Zero(dI_gain[0].size()));
  // Exact transpose of discrete_convolution. Nothing pairs with the
  // terminal node, so p.back() is exactly zero.
  for (int j = 0; j < n; ++j) {
    Vec acc = Vec::Zero(dI_gain[0].size());
    int kmax = std::min(j + w, n);
    for (int k = j + 1; k <= kmax; ++k)
      acc += h * (kernel(h * (k - j)).transpose() * dI_gain[k]);
    adj.p[j] = acc;
  }
  return adj;
}

ShadowPrice shadow_price(const sde::SdeModel& model, const sde::PathGrid& grid,
                         const Vec& y0, const sde::FlowWindow& window,
                         const std::function<double(const Vec&)>& f,
                         const std::function<Vec(const Vec&)>& grad_f,
                         GradientMethod method, long n_paths,
                         std::uint64_t seed, int n_threads) {
  require(n_paths >= 2, "shadow price needs n_paths >= 2");
  if (method == GradientMethod::pathwise)
    require(static_cast<bool>(grad_f), "pathwise method needs grad f");
  model.validate();
  grid.validate();

  const int d = model.dim_noise;
  Mat L = model.correlation_chol();
  Mat Linv_t = L.transpose().partialPivLu().inverse();

  std::vector<Vec> draws(n_paths);
  parallel_for(n_paths, n_threads, [&](std::int64_t i) {
    sde::MarketPath path = sde::simulate_one(model, grid, y0, seed, i);
    if (path.blown_up) {
      draws[i] = Vec::Zero(d);
      return;
    }
    Vec y_end = path.states.row(window.end_index).transpose();
    if (method == GradientMethod::pathwise) {
      auto [flow, cov] = sde::flow_and_malliavin(model, grid, path, window);
      (void)cov;
      double t0 = grid.time(window.start_index);
      Vec y_t = path.states.row(window.start_index).transpose();
      Mat V = model.diffusion(t0, y_t);
      draws[i] = V.transpose() * flow.jacobians.back().transpose() * grad_f(y_end);
    } else {
      Vec H = sde::bel_weight(model, grid, path, window);
      // Map the weight onto the Brownian-shock coordinates so both
      // estimators target the same vector for any correlation.
      draws[i] = Linv_t * (f(y_end) * H);
    }
  });

  ShadowPrice sp;
  sp.method = method;
  sp.n_paths = n_paths;
  sp.value = Vec::Zero(d);
  sp.se = Vec::Zero(d);
  for (int c = 0; c < d; ++c) {
    std::vector<double> xs(n_paths);
    for (long i = 0; i < n_paths; ++i) xs[i] = draws[i][c];
    sp.value[c] = stats::mean(xs);
    sp.se[c] = stats::mean_se(xs);
  }
  return sp;
}

Vec myopic_drive(const SeparableGain& gain, const Vec& position,
                 const Vec& lambda_risk) {
  Vec d = gain.drift - gain.inventory_penalty * position;
  if (gain.holding_cost_gradient) d -= gain.holding_cost_gradient(position);
  if (lambda_risk.size() > 0) d -= lambda_risk;
  return d;
}

Vec myopic_step(const SeparableGain& gain, const Vec& position,
                const Vec& lambda_risk, const FeasibleSet& fs) {
  gain.validate();
  fs.validate();
  const auto n = gain.drift.size();
  Vec d = myopic_drive(gain, position, lambda_risk);

  // No-trade wedge: zero is optimal iff the drive sits inside the l1 box.
  bool wedge = true;
  for (Eigen::Index i = 0; i < n; ++i)
    if (std::abs(d[i]) > gain.l1_cost[i]) {
      wedge = false;
      break;
    }
  Vec v = Vec::Zero(n);
  if (!wedge) {
    const Mat& Xi = gain.temp_impact;
    // Cyclic coordinate proximal iteration for the coupled soft-threshold
    // fixed point; for diagonal Xi the first sweep is exact.
    const int max_sweeps = 500;
    const double tol = 1e-10;
    double delta = 0.0;
    int sweep = 0;
    for (; sweep < max_sweeps; ++sweep) {
      delta = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        double cross = 0.0;
        for (Eigen::Index j = 0; j < n; ++j)
          if (j != i) cross += Xi(i, j) * v[j];
        double target = d[i] - cross;
        double vi = sgn0(target) *
                    std::max(std::abs(target) - gain.l1_cost[i], 0.0) / Xi(i, i);
        delta = std::max(delta, std::abs(vi - v[i]));
        v[i] = vi;
      }
      if (delta < tol) break;
    }
    if (sweep == max_sweeps && delta >= tol)
      throw NumericError("soft-threshold fixed point did not converge, residual " +
                         std::to_string(delta));
  }
  return project_feasible_speed(v, position, fs);
}

double kkt_residual(const Vec& gradient, const Vec& position,
                    const KktMultipliers& mult, const FeasibleSet& fs,
                    const std::vector<double>& constraints) {
  Vec stepped = project_feasible_position(position + gradient, fs);
  double res = (stepped - position).norm();

  double viol2 = 0.0, comp2 = 0.0;
  for (double c : constraints) viol2 += std::max(c, 0.0) * std::max(c, 0.0);
  for (std::size_t k = 0; k < mult.eta.size() && k < constraints.size(); ++k)
    comp2 += (mult.eta[k] * constraints[k]) * (mult.eta[k] * constraints[k]);
  if (fs.has_position_box()) {
    for (Eigen::Index i = 0; i < position.size(); ++i) {
      double vu = std::max(position[i] - fs.position_high[i], 0.0);
      double vl = std::max(fs.position_low[i] - position[i], 0.0);
      viol2 += vu * vu + vl * vl;
      if (mult.alpha.size() == position.size()) {
        double ca = mult.alpha[i] * (position[i] - fs.position_high[i]);
        comp2 += ca * ca;
      }
      if (mult.beta.size() == position.size()) {
        double cb = mult.beta[i] * (fs.position_low[i] - position[i]);
        comp2 += cb * cb;
      }
    }
  }
  return res + std::sqrt(viol2) + std::sqrt(comp2);
}

Vec scale_to_risk_budget(const Vec& speed, const Vec& position, double dt,
                         const RiskBudgetProxy& proxy, double budget) {
  require(dt > 0.0 && proxy.window > 0.0, "risk budget needs dt, window > 0");
  auto proxy_cvar = [&](double s) {
    Vec post = position + s * dt * speed;
    double mu_pnl = post.dot(proxy.ell) * proxy.window;
    double sig = (proxy.sigma.transpose() * post).norm() * std::sqrt(proxy.window);
    return risk::gaussian_tail_proxy(-mu_pnl, sig, proxy.alpha).cvar;
  };
  if (proxy_cvar(1.0) <= budget) return speed;
  if (proxy_cvar(0.0) > budget) return Vec::Zero(speed.size());
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 100; ++it) {
    double mid = 0.5 * (lo + hi);
    (proxy_cvar(mid) <= budget ? lo : hi) = mid;
  }
  return lo * speed;
}

}  // namespace flab::mo
