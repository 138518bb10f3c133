#include "flab/rl.hpp"

#include <cmath>
#include <limits>

#include "flab/stats.hpp"

namespace flab::rl {

void PolicyParams::validate() const {
  require(n_assets >= 1 && n_features >= 1, "policy dims >= 1");
  require(theta.size() == static_cast<Eigen::Index>(n_assets) * n_features,
          "theta size must be n_assets * n_features");
  require(static_cast<bool>(features), "policy needs a feature map");
}

Mat PolicyParams::theta_matrix() const {
  Mat t(n_assets, n_features);
  for (int i = 0; i < n_assets; ++i)
    for (int j = 0; j < n_features; ++j) t(i, j) = theta[i * n_features + j];
  return t;
}

Vec PolicyParams::action(const Vec& state, const Vec& position,
                         const Vec& impact) const {
  validate();
  Vec f = features(state, position, impact);
  require(f.size() == n_features, "feature map size mismatch");
  Vec a = theta_matrix() * f;
  if (clip_to_feasible) a = mo::project_feasible_speed(a, position, feasible);
  return a;
}

void Objective::validate() const {
  require(dim >= 1, "objective dim >= 1");
  require(static_cast<bool>(value), "objective needs a value function");
}

Objective quadratic_testbed(const Mat& a_matrix, double noise_scale) {
  Objective obj;
  obj.dim = static_cast<int>(a_matrix.rows());
  Mat A = a_matrix;
  obj.value = [A](const Vec& th) { return -0.5 * th.dot(A * th); };
  obj.gradient = [A](const Vec& th) { return Vec(-(A * th)); };
  obj.gradient_sample = [A, noise_scale](const Vec& th, const NoiseStream& ns,
                                         std::uint32_t step, int member) {
    Vec g = -(A * th);
    if (noise_scale > 0.0)
      g += noise_scale * ns.normals(step, static_cast<int>(th.size()),
                                    static_cast<std::uint32_t>(member) * 64u);
    return g;
  };
  obj.optimum = 0.0;
  return obj;
}

GradientEstimate estimate_policy_gradient(const Objective& obj,
                                          const Vec& theta, int batch,
                                          GradientEstimator method,
                                          std::uint64_t seed,
                                          std::uint32_t step) {
  obj.validate();
  require(batch >= 1, "batch must be >= 1");
  (void)method;  // both estimators arrive through gradient_sample
  require(static_cast<bool>(obj.gradient_sample) ||
              static_cast<bool>(obj.gradient),
          "objective provides no gradient path");

  if (!obj.gradient_sample) {
    return GradientEstimate{obj.gradient(theta), 0.0};
  }
  NoiseStream ns(seed, 0);
  Mat draws(theta.size(), batch);
  for (int b = 0; b < batch; ++b)
    draws.col(b) = obj.gradient_sample(theta, ns, step, b);
  GradientEstimate est;
  est.gradient = draws.rowwise().mean();
  if (batch >= 2) {
    for (Eigen::Index c = 0; c < theta.size(); ++c) {
      double m = est.gradient[c];
      double acc = 0.0;
      for (int b = 0; b < batch; ++b)
        acc += (draws(c, b) - m) * (draws(c, b) - m);
      est.covariance_trace += acc / static_cast<double>(batch - 1);
    }
  }
  return est;
}

void OptimizerConfig::validate() const {
  require(max_iters >= 1, "max_iters >= 1");
  require(batch >= 1, "batch >= 1");
  require(schedule.at(0) > 0.0, "step schedule must start positive");
  require(divergence_guard > 0.0, "divergence guard must be positive");
}

double TrainTrace::self_bias_cum() const {
  KahanSum s;
  for (const auto& r : records) s.add(r.self_bias_increment);
  return s.value();
}

TrainTrace train(const Vec& theta0, const OptimizerConfig& cfg,
                 const Objective& obj, const Contamination& contamination,
                 std::uint64_t seed) {
  cfg.validate();
  obj.validate();
  require(theta0.size() == obj.dim, "theta0 dimension mismatch");

  const bool precondition = cfg.preconditioner.size() > 0;
  Eigen::PartialPivLU<Mat> glu;
  if (precondition) {
    require(cfg.preconditioner.rows() == obj.dim &&
                cfg.preconditioner.cols() == obj.dim,
            "preconditioner must be p x p");
    glu = Eigen::PartialPivLU<Mat>(cfg.preconditioner);
  }

  TrainTrace trace;
  trace.records.reserve(cfg.max_iters);
  Vec theta = theta0;
  for (long k = 0; k < cfg.max_iters; ++k) {
    GradientEstimate est = estimate_policy_gradient(
        obj, theta, cfg.batch, GradientEstimator::pathwise,
        seed + static_cast<std::uint64_t>(k), static_cast<std::uint32_t>(k));
    Vec b = contamination.at(theta);
    Vec g_impl = est.gradient + b;
    double eta = cfg.schedule.at(k);

    TrainRecord rec;
    rec.iter = k;
    rec.eta = eta;
    rec.theta = theta;
    rec.objective = obj.value(theta);
    rec.gap = obj.optimum ? (*obj.optimum - rec.objective)
                          : std::numeric_limits<double>::quiet_NaN();
    rec.grad_naive = est.gradient;
    rec.bias = b;
    rec.grad_variance = est.covariance_trace;
    rec.self_bias_increment = eta * b.dot(g_impl);
    trace.records.push_back(std::move(rec));

    theta = precondition ? Vec(theta + eta * glu.solve(g_impl))
                         : Vec(theta + eta * g_impl);
    if (theta.norm() > cfg.divergence_guard || !all_finite(theta)) {
      trace.diverged = true;
      break;
    }
  }
  trace.theta_final = theta;
  return trace;
}

double self_bias_accumulate(const TrainTrace& trace) {
  return trace.self_bias_cum();
}

}  // namespace flab::rl
