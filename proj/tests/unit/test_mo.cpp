#include <cmath>

#include "doctest.h"
#include "flab/mo.hpp"
#include "flab/risk.hpp"
#include "flab/rng.hpp"
#include "flab/stats.hpp"

using namespace flab;
using namespace flab::mo;

namespace {

SeparableGain scalar_gain(double drift, double lambda, double xi) {
  SeparableGain g;
  g.drift = Vec::Constant(1, drift);
  g.inventory_penalty = Mat::Zero(1, 1);
  g.l1_cost = Vec::Constant(1, lambda);
  g.temp_impact = Mat::Constant(1, 1, xi);
  return g;
}

}  // namespace

TEST_CASE("volterra adjoint: terminal costate is exactly zero") {
  auto kernel = [](double u) { return Mat::Constant(1, 1, std::exp(-u)); };
  std::vector<Vec> g(65, Vec::Constant(1, 1.0));
  auto adj = volterra_adjoint(kernel, 0.5, g, 1.0 / 64.0);
  CHECK(adj.p.back().norm() == 0.0);
}

TEST_CASE("volterra adjoint: exponential kernel closed form") {
  const double h = 1.0 / 512.0, T = 1.0;
  const int n = static_cast<int>(T / h);
  auto kernel = [](double u) { return Mat::Constant(1, 1, std::exp(-u)); };
  std::vector<Vec> g(n + 1, Vec::Constant(1, 1.0));
  auto adj = volterra_adjoint(kernel, 2.0, g, h);  // window covers the horizon
  for (int j : {0, n / 4, n / 2, 3 * n / 4}) {
    double t = j * h;
    double expect = 1.0 - std::exp(-(T - t));
    CHECK(std::abs(adj.p[j][0] - expect) < 2.0 * h);
  }
}

TEST_CASE("adjoint identity vs brute-force double sum, random instances") {
  // <dI_gain, I>_h must equal <p, speed>_h to machine precision, where I is
  // the discrete convolution itself.
  NoiseStream ns(99, 0);
  for (int rep = 0; rep < 5; ++rep) {
    const int n = 40 + rep * 13;
    const double h = 0.013;
    const int w = 7 + rep;
    const int dim = 1 + rep % 2;
    auto kernel = [rep](double u) {
      Mat k = Mat::Constant(2, 2, 0.3 * std::exp(-2.0 * u));
      k(0, 0) = std::exp(-u);
      k(1, 1) = std::cos(u) * std::exp(-u);
      return k;
    };
    frictions::KernelFn kfn;
    if (dim == 1) {
      kfn = [kernel](double u) { return Mat::Constant(1, 1, kernel(u)(0, 0)); };
    } else {
      kfn = kernel;
    }
    std::vector<Vec> speeds(n + 1), gains(n + 1);
    for (int k = 0; k <= n; ++k) {
      speeds[k] = Vec(dim);
      gains[k] = Vec(dim);
      for (int c = 0; c < dim; ++c) {
        speeds[k][c] = ns.normal(rep * 1000 + k, c);
        gains[k][c] = ns.normal(rep * 1000 + 500 + k, c);
      }
    }
    auto I = discrete_convolution(kfn, speeds, h, w);
    auto adj = volterra_adjoint(kfn, w * h, gains, h);
    double lhs = 0.0, rhs = 0.0;
    for (int k = 0; k <= n; ++k) {
      lhs += h * gains[k].dot(I[k]);
      rhs += h * adj.p[k].dot(speeds[k]);
    }
    CHECK(std::abs(lhs - rhs) < 1e-8 * (1.0 + std::abs(lhs)));
  }
}

TEST_CASE("shadow price: constant terminal functional gives zero") {
  auto model = sde::gbm_model(0.05, 0.2);
  sde::PathGrid grid{0.0, 1.0, 32};
  auto sp = shadow_price(
      model, grid, Vec::Constant(1, 1.0), {0, 32},
      [](const Vec&) { return 3.0; }, [](const Vec&) { return Vec::Zero(1); },
      GradientMethod::pathwise, 2000, 5);
  CHECK(std::abs(sp.value[0]) < 3.0 * sp.se[0] + 1e-12);
}

TEST_CASE("shadow price: constant diffusion, identity functional is sigma") {
  const double sigma = 0.7;
  auto model = sde::abm_model(0.0, sigma);
  sde::PathGrid grid{0.0, 1.0, 16};
  auto sp = shadow_price(
      model, grid, Vec::Constant(1, 0.0), {0, 16},
      [](const Vec& y) { return y[0]; },
      [](const Vec&) { return Vec::Constant(1, 1.0); },
      GradientMethod::pathwise, 500, 5);
  // D of the terminal state along constant diffusion is sigma, pathwise exact.
  CHECK(sp.value[0] == doctest::Approx(sigma).epsilon(1e-10));
  CHECK(sp.se[0] < 1e-10);
}

TEST_CASE("shadow price: pathwise and elliptic-weight estimators agree") {
  auto model = sde::gbm_model(0.05, 0.25);
  sde::PathGrid grid{0.0, 1.0, 64};
  auto f = [](const Vec& y) { return y[0] * y[0]; };
  auto df = [](const Vec& y) { return Vec(2.0 * y); };
  const long n = 40000;
  auto pw = shadow_price(model, grid, Vec::Constant(1, 1.0), {0, 64}, f, df,
                         GradientMethod::pathwise, n, 42, 4);
  auto bel = shadow_price(model, grid, Vec::Constant(1, 1.0), {0, 64}, f, df,
                          GradientMethod::bel, n, 43, 4);
  double se = std::sqrt(pw.se[0] * pw.se[0] + bel.se[0] * bel.se[0]);
  CHECK(std::abs(pw.value[0] - bel.value[0]) < 3.0 * se);
  // Sanity: analytic E[2 sigma Y_T^2] for the pathwise target.
  double analytic = 2.0 * 0.25 * std::exp(2.0 * 0.05 + 0.25 * 0.25);
  CHECK(std::abs(pw.value[0] - analytic) < 4.0 * pw.se[0]);
}

TEST_CASE("myopic step: wedge, closed form, and speed cap") {
  FeasibleSet fs;
  SUBCASE("inside the no-trade wedge the speed is exactly zero") {
    auto g = scalar_gain(0.05, 0.1, 1.0);
    Vec v = myopic_step(g, Vec::Zero(1), Vec(), fs);
    CHECK(v[0] == 0.0);
  }
  SUBCASE("outside the wedge: scalar soft threshold (d - lambda)/Xi") {
    auto g = scalar_gain(0.5, 0.1, 1.0);
    Vec v = myopic_step(g, Vec::Zero(1), Vec(), fs);
    CHECK(v[0] == doctest::Approx(0.4).epsilon(1e-12));
  }
  SUBCASE("speed cap binds") {
    auto g = scalar_gain(0.5, 0.1, 1.0);
    fs.speed_cap = 0.3;
    Vec v = myopic_step(g, Vec::Zero(1), Vec(), fs);
    CHECK(v[0] == doctest::Approx(0.3).epsilon(1e-10));
  }
}

TEST_CASE("no-trade wedge on a drive grid") {
  auto g = scalar_gain(0.0, 0.25, 2.0);
  FeasibleSet fs;
  for (double d = -0.25; d <= 0.25; d += 0.05) {
    g.drift = Vec::Constant(1, d);
    CHECK(myopic_step(g, Vec::Zero(1), Vec(), fs)[0] == 0.0);
  }
  // Soft-threshold map is continuous and nondecreasing in the drive.
  double prev = -1e9;
  for (double d = -1.0; d <= 1.0; d += 0.01) {
    g.drift = Vec::Constant(1, d);
    double v = myopic_step(g, Vec::Zero(1), Vec(), fs)[0];
    CHECK(v >= prev - 1e-12);
    prev = v;
  }
}

TEST_CASE("coupled soft threshold agrees with a dense grid search") {
  // 2-asset coupled Xi; oracle maximizes <d,v> - |v|^T l1 - v^T Xi v / 2
  // on a fine grid.
  SeparableGain g;
  g.drift = (Vec(2) << 0.8, -0.3).finished();
  g.inventory_penalty = Mat::Zero(2, 2);
  g.l1_cost = (Vec(2) << 0.1, 0.15).finished();
  g.temp_impact = (Mat(2, 2) << 1.0, 0.3, 0.3, 1.5).finished();
  FeasibleSet fs;
  Vec v = myopic_step(g, Vec::Zero(2), Vec(), fs);

  auto objective = [&](double a, double b) {
    Vec x(2);
    x << a, b;
    return g.drift.dot(x) - g.l1_cost.dot(x.cwiseAbs()) -
           0.5 * x.dot(g.temp_impact * x);
  };
  double best = -1e300, ba = 0.0, bb = 0.0;
  for (double a = -1.2; a <= 1.2; a += 0.002)
    for (double b = -0.8; b <= 0.8; b += 0.002) {
      double val = objective(a, b);
      if (val > best) {
        best = val;
        ba = a;
        bb = b;
      }
    }
  CHECK(std::abs(v[0] - ba) < 5e-3);
  CHECK(std::abs(v[1] - bb) < 5e-3);
  CHECK(objective(v[0], v[1]) >= best - 1e-6);
}

TEST_CASE("projection: idempotence, box clip, participation cap") {
  FeasibleSet fs;
  fs.position_low = Vec::Constant(1, -1.0);
  fs.position_high = Vec::Constant(1, 2.0);
  CHECK(project_feasible_position(Vec::Constant(1, 5.0), fs)[0] == 2.0);
  CHECK(project_feasible_position(Vec::Constant(1, 1.5), fs)[0] == 1.5);

  FeasibleSet part;
  part.participation_cap = 0.1;
  part.adv = Vec::Constant(1, 10.0);
  CHECK(project_feasible_position(Vec::Constant(1, 2.0), part)[0] ==
        doctest::Approx(1.0));
  // Idempotence.
  Vec once = project_feasible_position(Vec::Constant(1, 2.0), part);
  CHECK(project_feasible_position(once, part)[0] == doctest::Approx(once[0]));
}

TEST_CASE("dykstra projection onto box cap ball is the euclidean projection") {
  Vec lo = Vec::Constant(2, -0.5), hi = Vec::Constant(2, 2.0);
  Vec v = (Vec(2) << 3.0, 1.8).finished();
  Vec p = project_box_ball(v, lo, hi, 2.2);
  // Oracle: dense search over the feasible set.
  double best = 1e300;
  Vec bx(2);
  for (double a = -0.5; a <= 2.0; a += 0.001)
    for (double b = -0.5; b <= 2.0; b += 0.001) {
      if (a * a + b * b > 2.2 * 2.2) continue;
      double d = (a - 3.0) * (a - 3.0) + (b - 1.8) * (b - 1.8);
      if (d < best) {
        best = d;
        bx << a, b;
      }
    }
  CHECK((p - bx).norm() < 5e-3);
}

TEST_CASE("post-step position feasibility constrains the speed") {
  FeasibleSet fs;
  fs.position_low = Vec::Constant(1, -1.0);
  fs.position_high = Vec::Constant(1, 1.0);
  fs.step_dt = 0.5;
  Vec v = project_feasible_speed(Vec::Constant(1, 3.0), Vec::Constant(1, 0.5), fs);
  CHECK(v[0] == doctest::Approx(1.0));  // (1.0 - 0.5) / 0.5
}

TEST_CASE("kkt residual: stationary point, interior gradient, active bound") {
  FeasibleSet fs;
  fs.position_low = Vec::Constant(1, -10.0);
  fs.position_high = Vec::Constant(1, 10.0);
  KktMultipliers mult;

  // Unconstrained quadratic at its maximizer: gradient zero.
  CHECK(kkt_residual(Vec::Zero(1), Vec::Constant(1, 2.0), mult, fs) < 1e-10);

  // Strictly interior point: residual equals the gradient norm.
  Vec g = Vec::Constant(1, 0.3);
  CHECK(kkt_residual(g, Vec::Constant(1, 2.0), mult, fs) ==
        doctest::Approx(0.3).epsilon(1e-10));

  // Active upper bound with the exact multiplier: all terms vanish.
  mult.alpha = Vec::Constant(1, 0.7);
  Vec g_out = Vec::Constant(1, 0.7);
  CHECK(kkt_residual(g_out, Vec::Constant(1, 10.0), mult, fs) < 1e-10);
}

TEST_CASE("kkt residual decreases along a projected-ascent solve") {
  // Concave quadratic with a box; residual must fall below 1e-6.
  const double a = 2.0, target = 1.4;
  FeasibleSet fs;
  fs.position_low = Vec::Constant(1, 0.0);
  fs.position_high = Vec::Constant(1, 3.0);
  Vec x = Vec::Constant(1, 0.0);
  KktMultipliers mult;
  double prev = 1e300;
  double res = prev;
  for (int it = 0; it < 200; ++it) {
    Vec g = Vec::Constant(1, -a * (x[0] - target));
    res = kkt_residual(g, x, mult, fs);
    CHECK(res < prev + 1e-9);
    prev = res;
    x = project_feasible_position(x + 0.4 * g, fs);
  }
  CHECK(res <= 1e-6);
}

TEST_CASE("risk budget scaling meets the proxy budget") {
  RiskBudgetProxy proxy;
  proxy.ell = Vec::Constant(1, 0.0);
  proxy.sigma = Mat::Constant(1, 1, 1.0);
  proxy.window = 1.0;
  proxy.alpha = 0.95;
  Vec speed = Vec::Constant(1, 10.0);
  Vec pos = Vec::Zero(1);
  // Unconstrained proxy CVaR of the post-step exposure is about 2.06 * 10,
  // cap it at 5: speed must shrink.
  Vec scaled = scale_to_risk_budget(speed, pos, 1.0, proxy, 5.0);
  CHECK(scaled[0] < speed[0]);
  Vec post = pos + scaled;
  double cvar = risk::gaussian_tail_proxy(0.0, post.norm(), 0.95).cvar;
  CHECK(cvar <= 5.0 + 1e-6);
  CHECK(cvar >= 5.0 - 1e-3);  // binds tightly
  // Slack budget leaves the speed unchanged.
  Vec same = scale_to_risk_budget(Vec::Constant(1, 0.1), pos, 1.0, proxy, 5.0);
  CHECK(same[0] == 0.1);
}
