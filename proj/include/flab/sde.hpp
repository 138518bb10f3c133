#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "flab/common.hpp"

namespace flab::sde {

using DriftFn = std::function<Vec(double, const Vec&)>;      // (t, y) -> R^M
using DiffusionFn = std::function<Mat(double, const Vec&)>;  // (t, y) -> R^{M x d}

// Market-state diffusion. The drift is stored in Ito form (the form most
// model families are quoted in); convert_drift moves between conventions.
struct SdeModel {
  int dim_state = 1;  // M
  int dim_noise = 1;  // d
  DriftFn drift_ito;
  DiffusionFn diffusion;
  Mat correlation;  // R, symmetric positive definite, d x d

  // Optional analytic state Jacobians. When absent, central finite
  // differences with step 1e-6 * (1 + |x|) are used.
  std::function<Mat(double, const Vec&)> drift_jacobian;  // d(drift)/dy, M x M
  // d(diffusion column j)/dy, M x M, for j in [0, d).
  std::function<Mat(double, const Vec&, int)> diffusion_col_jacobian;

  void validate() const;
  Mat correlation_chol() const;  // lower L with L L^T = R
};

SdeModel gbm_model(double mu, double sigma);
SdeModel ou_model(double kappa, double sigma);
// dY = mu dt + sigma dB (arithmetic).
SdeModel abm_model(double mu, double sigma);

struct PathGrid {
  double t0 = 0.0;
  double horizon = 1.0;
  int n_steps = 1;

  double step() const { return horizon / n_steps; }
  double time(int k) const { return t0 + step() * k; }
  void validate() const;
};

struct MarketPath {
  Mat states;               // (n_steps + 1) x M
  Mat brownian_increments;  // n_steps x d
  std::uint64_t seed = 0;
  std::int64_t path_index = 0;
  bool blown_up = false;
  int blow_up_step = -1;
};

struct SimResult {
  std::vector<MarketPath> paths;
  long n_blown_up = 0;
};

enum class DriftDirection { ito_to_strat, strat_to_ito };

// Drift-convention conversion at a probe point: the correction is half the
// Jacobian-tensor contraction of the diffusion against V R.
Vec convert_drift(const SdeModel& model, DriftDirection dir, double t,
                  const Vec& y);

// The contraction sum_j sum_k dV_{ik}/dy_j * U_{jk} used by convert_drift.
Vec contract_jacobian(const SdeModel& model, double t, const Vec& y,
                      const Mat& U);

// Euler-Maruyama on the Ito form; increments have covariance R * step.
// Non-finite states flag the path (excluded by consumers, counted here).
SimResult simulate_paths(const SdeModel& model, const PathGrid& grid,
                         const Vec& y0, long n_paths, std::uint64_t seed,
                         int n_threads = 1);

MarketPath simulate_one(const SdeModel& model, const PathGrid& grid,
                        const Vec& y0, std::uint64_t seed,
                        std::int64_t path_index);

// First-variation flow J_{u<-s} along a realized path, anchored at grid
// index `anchor`: J[k] approximates the state Jacobian from t_anchor to
// t_{anchor+k}, with J[0] = I.
struct FlowJacobian {
  int anchor = 0;
  std::vector<Mat> jacobians;

  const Mat& at_offset(int k) const { return jacobians.at(k); }
};

struct MalliavinCov {
  Mat gamma;
  double t = 0.0;
  double horizon = 0.0;
  double min_eigenvalue = 0.0;
};

struct FlowWindow {
  int start_index = 0;  // grid index of t
  int end_index = 0;    // grid index of t + T
};

// Propagates the first-variation recursion along the path and accumulates
// the Malliavin covariance Gamma by trapezoid quadrature over the window.
std::pair<FlowJacobian, MalliavinCov> flow_and_malliavin(
    const SdeModel& model, const PathGrid& grid, const MarketPath& path,
    const FlowWindow& window);

// Elliptic integration-by-parts weight over the window; requires
// Sigma = V R^{1/2} invertible along the path (square, nondegenerate).
// The right factor is frozen at the window start so that
// E[f(Y_T) H] = E[Sigma_t^T J_{T<-t}^T grad f(Y_T)] holds exactly.
Vec bel_weight(const SdeModel& model, const PathGrid& grid,
               const MarketPath& path, const FlowWindow& window);

}  // namespace flab::sde
