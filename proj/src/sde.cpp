#include "flab/sde.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <cmath>

#include "flab/rng.hpp"

namespace flab::sde {

namespace {

double fd_step(double xj) { return 1e-6 * (1.0 + std::abs(xj)); }

Mat fd_drift_jacobian(const SdeModel& m, double t, const Vec& y) {
  Mat J(m.dim_state, m.dim_state);
  for (int j = 0; j < m.dim_state; ++j) {
    double h = fd_step(y[j]);
    Vec yp = y, ym = y;
    yp[j] += h;
    ym[j] -= h;
    J.col(j) = (m.drift_ito(t, yp) - m.drift_ito(t, ym)) / (2.0 * h);
  }
  return J;
}

Mat fd_diffusion_col_jacobian(const SdeModel& m, double t, const Vec& y,
                              int col) {
  Mat J(m.dim_state, m.dim_state);
  for (int j = 0; j < m.dim_state; ++j) {
    double h = fd_step(y[j]);
    Vec yp = y, ym = y;
    yp[j] += h;
    ym[j] -= h;
    J.col(j) = (m.diffusion(t, yp).col(col) - m.diffusion(t, ym).col(col)) /
               (2.0 * h);
  }
  return J;
}

Mat drift_jacobian(const SdeModel& m, double t, const Vec& y) {
  Mat J = m.drift_jacobian ? m.drift_jacobian(t, y) : fd_drift_jacobian(m, t, y);
  if (!all_finite(J)) throw NumericError("non-finite drift Jacobian");
  return J;
}

Mat diffusion_col_jacobian(const SdeModel& m, double t, const Vec& y, int col) {
  Mat J = m.diffusion_col_jacobian ? m.diffusion_col_jacobian(t, y, col)
                                   : fd_diffusion_col_jacobian(m, t, y, col);
  if (!all_finite(J)) throw NumericError("non-finite diffusion Jacobian");
  return J;
}

}  // namespace

void SdeModel::validate() const {
  require(dim_state >= 1 && dim_noise >= 1, "state/noise dimensions >= 1");
  require(static_cast<bool>(drift_ito) && static_cast<bool>(diffusion),
          "model needs drift and diffusion callables");
  require(correlation.rows() == dim_noise && correlation.cols() == dim_noise,
          "correlation must be d x d");
  require((correlation - correlation.transpose()).cwiseAbs().maxCoeff() <
              1e-12,
          "correlation must be symmetric");
  Eigen::SelfAdjointEigenSolver<Mat> es(correlation);
  require(es.eigenvalues().minCoeff() > 0.0,
          "correlation must be positive definite");
}

Mat SdeModel::correlation_chol() const {
  Eigen::LLT<Mat> llt(correlation);
  require(llt.info() == Eigen::Success, "correlation Cholesky failed");
  return llt.matrixL();
}

void PathGrid::validate() const {
  require(n_steps >= 1, "grid needs n_steps >= 1");
  require(horizon > 0.0, "grid needs positive horizon");
}

SdeModel gbm_model(double mu, double sigma) {
  SdeModel m;
  m.dim_state = 1;
  m.dim_noise = 1;
  m.correlation = Mat::Identity(1, 1);
  m.drift_ito = [mu](double, const Vec& y) { return Vec::Constant(1, mu * y[0]); };
  m.diffusion = [sigma](double, const Vec& y) {
    return Mat::Constant(1, 1, sigma * y[0]);
  };
  m.drift_jacobian = [mu](double, const Vec&) { return Mat::Constant(1, 1, mu); };
  m.diffusion_col_jacobian = [sigma](double, const Vec&, int) {
    return Mat::Constant(1, 1, sigma);
  };
  return m;
}

SdeModel ou_model(double kappa, double sigma) {
  SdeModel m;
  m.dim_state = 1;
  m.dim_noise = 1;
  m.correlation = Mat::Identity(1, 1);
  m.drift_ito = [kappa](double, const Vec& y) {
    return Vec::Constant(1, -kappa * y[0]);
  };
  m.diffusion = [sigma](double, const Vec&) { return Mat::Constant(1, 1, sigma); };
  m.drift_jacobian = [kappa](double, const Vec&) {
    return Mat::Constant(1, 1, -kappa);
  };
  m.diffusion_col_jacobian = [](double, const Vec&, int) {
    return Mat::Zero(1, 1);
  };
  return m;
}

SdeModel abm_model(double mu, double sigma) {
  SdeModel m;
  m.dim_state = 1;
  m.dim_noise = 1;
  m.correlation = Mat::Identity(1, 1);
  m.drift_ito = [mu](double, const Vec&) { return Vec::Constant(1, mu); };
  m.diffusion = [sigma](double, const Vec&) { return Mat::Constant(1, 1, sigma); };
  m.drift_jacobian = [](double, const Vec&) { return Mat::Zero(1, 1); };
  m.diffusion_col_jacobian = [](double, const Vec&, int) {
    return Mat::Zero(1, 1);
  };
  return m;
}

Vec contract_jacobian(const SdeModel& model, double t, const Vec& y,
                      const Mat& U) {
  Vec out = Vec::Zero(model.dim_state);
  for (int k = 0; k < model.dim_noise; ++k) {
    Mat Jk = diffusion_col_jacobian(model, t, y, k);
    out += Jk * U.col(k);
  }
  return out;
}

Vec convert_drift(const SdeModel& model, DriftDirection dir, double t,
                  const Vec& y) {
  model.validate();
  Mat V = model.diffusion(t, y);
  require(V.rows() == model.dim_state && V.cols() == model.dim_noise,
          "diffusion output must be M x d");
  Vec corr = 0.5 * contract_jacobian(model, t, y, V * model.correlation);
  if (!all_finite(corr)) throw NumericError("non-finite drift correction");
  Vec base = model.drift_ito(t, y);
  return dir == DriftDirection::ito_to_strat ? Vec(base - corr)
                                             : Vec(base + corr);
}

MarketPath simulate_one(const SdeModel& model, const PathGrid& grid,
                        const Vec& y0, std::uint64_t seed,
                        std::int64_t path_index) {
  const int M = model.dim_state, d = model.dim_noise;
  const double h = grid.step();
  const double sqh = std::sqrt(h);
  Mat L = model.correlation_chol();

  MarketPath p;
  p.seed = seed;
  p.path_index = path_index;
  p.states = Mat::Zero(grid.n_steps + 1, M);
  p.brownian_increments = Mat::Zero(grid.n_steps, d);
  p.states.row(0) = y0.transpose();

  NoiseStream ns(seed, static_cast<std::uint64_t>(path_index));
  Vec y = y0;
  for (int k = 0; k < grid.n_steps; ++k) {
    Vec z = ns.normals(static_cast<std::uint32_t>(k), d);
    Vec dB = sqh * (L * z);
    p.brownian_increments.row(k) = dB.transpose();
    double t = grid.time(k);
    y = y + model.drift_ito(t, y) * h + model.diffusion(t, y) * dB;
    if (!all_finite(y)) {
      p.blown_up = true;
      p.blow_up_step = k;
      // Hold the last finite state so downstream shapes stay valid.
      for (int j = k; j < grid.n_steps; ++j)
        p.states.row(j + 1) = p.states.row(k);
      return p;
    }
    p.states.row(k + 1) = y.transpose();
  }
  return p;
}

SimResult simulate_paths(const SdeModel& model, const PathGrid& grid,
                         const Vec& y0, long n_paths, std::uint64_t seed,
                         int n_threads) {
  model.validate();
  grid.validate();
  require(y0.size() == model.dim_state, "y0 dimension mismatch");
  require(n_paths >= 1, "n_paths >= 1");

  SimResult res;
  res.paths.resize(n_paths);
  parallel_for(n_paths, n_threads, [&](std::int64_t i) {
    res.paths[i] = simulate_one(model, grid, y0, seed, i);
  });
  for (const auto& p : res.paths)
    if (p.blown_up) ++res.n_blown_up;
  return res;
}

std::pair<FlowJacobian, MalliavinCov> flow_and_malliavin(
    const SdeModel& model, const PathGrid& grid, const MarketPath& path,
    const FlowWindow& window) {
  const int M = model.dim_state, d = model.dim_noise;
  const double h = grid.step();
  require(window.start_index >= 0 && window.end_index <= grid.n_steps &&
              window.start_index < window.end_index,
          "bad flow window");

  FlowJacobian flow;
  flow.anchor = window.start_index;
  flow.jacobians.clear();
  flow.jacobians.push_back(Mat::Identity(M, M));

  const int len = window.end_index - window.start_index;
  for (int k = 0; k < len; ++k) {
    int gk = window.start_index + k;
    double t = grid.time(gk);
    Vec y = path.states.row(gk).transpose();
    Mat step = Mat::Identity(M, M) + drift_jacobian(model, t, y) * h;
    for (int j = 0; j < d; ++j)
      step += diffusion_col_jacobian(model, t, y, j) *
              path.brownian_increments(gk, j);
    flow.jacobians.push_back(step * flow.jacobians.back());
  }

  // Gamma = integral of J_{T<-s} A(s) J_{T<-s}^T over the window, trapezoid.
  const Mat& J_end = flow.jacobians.back();
  Mat gamma = Mat::Zero(M, M);
  for (int k = 0; k <= len; ++k) {
    int gk = window.start_index + k;
    double t = grid.time(gk);
    Vec y = path.states.row(gk).transpose();
    Mat V = model.diffusion(t, y);
    Mat A = V * model.correlation * V.transpose();
    Mat J_from_k = J_end * flow.jacobians[k].partialPivLu().inverse();
    double w = (k == 0 || k == len) ? 0.5 : 1.0;
    gamma += w * h * (J_from_k * A * J_from_k.transpose());
  }
  gamma = 0.5 * (gamma + gamma.transpose());
  if (!all_finite(gamma)) throw NumericError("non-finite Malliavin covariance");

  MalliavinCov cov;
  cov.gamma = gamma;
  cov.t = grid.time(window.start_index);
  cov.horizon = h * len;
  Eigen::SelfAdjointEigenSolver<Mat> es(gamma);
  cov.min_eigenvalue = es.eigenvalues().minCoeff();
  return {flow, cov};
}

Vec bel_weight(const SdeModel& model, const PathGrid& grid,
               const MarketPath& path, const FlowWindow& window) {
  const int M = model.dim_state, d = model.dim_noise;
  if (M != d)
    throw EllipticityError("elliptic weight needs square diffusion (M == d)");
  auto [flow, cov] = flow_and_malliavin(model, grid, path, window);
  (void)cov;

  Mat L = model.correlation_chol();
  const double window_len = grid.step() * (window.end_index - window.start_index);

  double t0 = grid.time(window.start_index);
  Vec y_anchor = path.states.row(window.start_index).transpose();
  Mat sigma_anchor = model.diffusion(t0, y_anchor) * L;

  Vec H = Vec::Zero(d);
  auto solveL = L.partialPivLu();
  const int len = window.end_index - window.start_index;
  for (int k = 0; k < len; ++k) {
    int gk = window.start_index + k;
    double t = grid.time(gk);
    Vec y = path.states.row(gk).transpose();
    Mat sigma = model.diffusion(t, y) * L;
    Eigen::FullPivLU<Mat> lu(sigma);
    if (!lu.isInvertible())
      throw EllipticityError("diffusion not invertible at step " +
                             std::to_string(gk));
    Mat kernel = lu.solve(flow.jacobians[k] * sigma_anchor);
    Vec dW = solveL.solve(path.brownian_increments.row(gk).transpose());
    H += kernel.transpose() * dW;
  }
  return H / window_len;
}

}  // namespace flab::sde
