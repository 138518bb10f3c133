#include "flab/cad.hpp"

#include <cmath>

#include "flab/rng.hpp"
#include "flab/stats.hpp"

namespace flab::cad {

void CadModel::validate() const {
  base.validate();
  require(n_assets >= 1, "cad model needs n_assets >= 1");
  require(std::abs(epsilon) <= 1.0, "|epsilon| must be <= 1");
}

namespace {

Mat base_drift_jacobian(const sde::SdeModel& m, double t, const Vec& y) {
  if (m.drift_jacobian) return m.drift_jacobian(t, y);
  Mat J(m.dim_state, m.dim_state);
  for (int j = 0; j < m.dim_state; ++j) {
    double h = 1e-6 * (1.0 + std::abs(y[j]));
    Vec yp = y, ym = y;
    yp[j] += h;
    ym[j] -= h;
    J.col(j) = (m.drift_ito(t, yp) - m.drift_ito(t, ym)) / (2.0 * h);
  }
  return J;
}

Mat base_diffusion_col_jacobian(const sde::SdeModel& m, double t, const Vec& y,
                                int col) {
  if (m.diffusion_col_jacobian) return m.diffusion_col_jacobian(t, y, col);
  Mat J(m.dim_state, m.dim_state);
  for (int j = 0; j < m.dim_state; ++j) {
    double h = 1e-6 * (1.0 + std::abs(y[j]));
    Vec yp = y, ym = y;
    yp[j] += h;
    ym[j] -= h;
    J.col(j) = (m.diffusion(t, yp).col(col) - m.diffusion(t, ym).col(col)) /
               (2.0 * h);
  }
  return J;
}

}  // namespace

CadPathResult simulate_cad(const CadModel& model, const SpeedPolicy& policy,
                           const sde::PathGrid& grid, const Vec& y0,
                           const Vec& phi0, std::uint64_t seed,
                           std::int64_t path_index) {
  model.validate();
  grid.validate();
  require(static_cast<bool>(policy), "cad simulation needs a policy");
  const int M = model.base.dim_state;
  const int d = model.base.dim_noise;
  const int N = model.n_assets;
  const int n = grid.n_steps;
  const double h = grid.step();
  const double sqh = std::sqrt(h);
  Mat L = model.base.correlation_chol();

  CadPathResult r;
  r.augmented.states = Mat::Zero(n + 1, M);
  r.augmented.brownian_increments = Mat::Zero(n, d);
  r.augmented.seed = seed;
  r.augmented.path_index = path_index;
  r.baseline = r.augmented;
  r.first_variation = Mat::Zero(n + 1, M);
  r.baseline_positions = Mat::Zero(n + 1, N);
  r.baseline_speeds = Mat::Zero(n, N);
  r.augmented_positions = Mat::Zero(n + 1, N);
  r.augmented_speeds = Mat::Zero(n, N);

  r.augmented.states.row(0) = y0.transpose();
  r.baseline.states.row(0) = y0.transpose();
  r.baseline_positions.row(0) = phi0.transpose();
  r.augmented_positions.row(0) = phi0.transpose();

  NoiseStream ns(seed, static_cast<std::uint64_t>(path_index));
  Vec y_aug = y0, y_base = y0, dy = Vec::Zero(M);
  Vec phi_aug = phi0, phi_base = phi0;

  for (int k = 0; k < n; ++k) {
    double t = grid.time(k);
    Vec z = ns.normals(static_cast<std::uint32_t>(k), d);
    Vec dB = sqh * (L * z);
    r.augmented.brownian_increments.row(k) = dB.transpose();
    r.baseline.brownian_increments.row(k) = dB.transpose();

    Vec v_base = policy(t, y_base, phi_base);
    Vec v_aug = policy(t, y_aug, phi_aug);
    r.baseline_speeds.row(k) = v_base.transpose();
    r.augmented_speeds.row(k) = v_aug.transpose();

    // First variation along the baseline path, forced by the feedback value.
    Vec force = model.drift_feedback
                    ? model.drift_feedback(t, y_base, phi_base, v_base)
                    : Vec::Zero(M);
    Vec dy_next = dy + (base_drift_jacobian(model.base, t, y_base) * dy) * h +
                  force * h;
    for (int j = 0; j < d; ++j)
      dy_next += (base_diffusion_col_jacobian(model.base, t, y_base, j) * dy) *
                 dB[j];

    Vec drift_aug = model.base.drift_ito(t, y_aug);
    if (model.drift_feedback && model.epsilon > 0.0)
      drift_aug += model.epsilon * model.drift_feedback(t, y_aug, phi_aug, v_aug);
    y_aug = y_aug + drift_aug * h + model.base.diffusion(t, y_aug) * dB;
    y_base = y_base + model.base.drift_ito(t, y_base) * h +
             model.base.diffusion(t, y_base) * dB;
    dy = dy_next;
    phi_aug += v_aug * h;
    phi_base += v_base * h;

    if (!all_finite(y_aug) || !all_finite(y_base) || !all_finite(dy)) {
      r.augmented.blown_up = true;
      r.augmented.blow_up_step = k;
      for (int j = k; j < n; ++j) {
        r.augmented.states.row(j + 1) = r.augmented.states.row(k);
        r.baseline.states.row(j + 1) = r.baseline.states.row(k);
      }
      return r;
    }
    r.augmented.states.row(k + 1) = y_aug.transpose();
    r.baseline.states.row(k + 1) = y_base.transpose();
    r.first_variation.row(k + 1) = dy.transpose();
    r.baseline_positions.row(k + 1) = phi_base.transpose();
    r.augmented_positions.row(k + 1) = phi_aug.transpose();
  }
  return r;
}

CadPremium cad_premium(const CadModel& model, const SpeedPolicy& policy,
                       const std::function<Vec(const Vec&)>& grad_terminal,
                       const sde::PathGrid& grid, const Vec& y0,
                       const Vec& phi0, long n_paths, std::uint64_t seed,
                       int n_threads) {
  require(n_paths >= 2, "cad premium needs n_paths >= 2");
  require(static_cast<bool>(model.drift_feedback_speed_jac),
          "cad premium needs the feedback speed Jacobian");
  require(static_cast<bool>(grad_terminal), "cad premium needs grad_terminal");

  const int N = model.n_assets;
  Mat sens0 = model.drift_feedback_speed_jac(grid.t0, y0);
  require(sens0.rows() == model.base.dim_state && sens0.cols() == N,
          "feedback speed Jacobian must be M x N");

  std::vector<Vec> draws(n_paths);
  parallel_for(n_paths, n_threads, [&](std::int64_t i) {
    CadPathResult r = simulate_cad(model, policy, grid, y0, phi0, seed, i);
    if (r.augmented.blown_up) {
      draws[i] = Vec::Zero(N);
      return;
    }
    sde::FlowWindow w{0, grid.n_steps};
    auto [flow, cov] = sde::flow_and_malliavin(model.base, grid, r.baseline, w);
    (void)cov;
    Vec gT = grad_terminal(r.baseline.states.row(grid.n_steps).transpose());
    draws[i] = sens0.transpose() * flow.jacobians.back().transpose() * gT;
  });

  CadPremium out;
  out.n_paths = n_paths;
  out.chi = Vec::Zero(N);
  out.se = Vec::Zero(N);
  for (int c = 0; c < N; ++c) {
    std::vector<double> xs(n_paths);
    for (long i = 0; i < n_paths; ++i) xs[i] = draws[i][c];
    out.chi[c] = stats::mean(xs);
    out.se[c] = stats::mean_se(xs);
  }
  return out;
}

}  // namespace flab::cad
