#pragma once

#include <deque>
#include <functional>
#include <optional>

#include "flab/common.hpp"
#include "flab/rng.hpp"

namespace flab::frictions {

using KernelFn = std::function<Mat(double)>;    // lag -> N x N
using OverflowFn = std::function<Vec(const Vec&)>;  // |q|/D -> price penalty

// Ring buffer of (time, trading speed) spanning at most tau_fill, used for
// the transient-impact convolution. Path-local state; never shared.
//
// The convolution integrates strictly-past samples (lags step..tau_fill):
// the instantaneous term of a trade is the temporary impact, the transient
// memory kicks in from the next step. This right-open convention is what
// makes the discrete Volterra adjoint an exact transpose with a terminal
// costate of exactly zero.
class TradeHistory {
 public:
  TradeHistory(double tau_fill, double step) : tau_fill_(tau_fill), step_(step) {
    require(tau_fill >= 0.0, "tau_fill must be >= 0");
    require(step > 0.0, "step must be > 0");
  }

  void record(double t, const Vec& speed);
  void clear() { samples_.clear(); }
  std::size_t size() const { return samples_.size(); }
  double tau_fill() const { return tau_fill_; }

  // Trapezoid quadrature of K(t - u) speed_u du over buffered samples in
  // [t - tau_fill, t - step]. Empty history -> zero.
  Vec convolve(const KernelFn& kernel, double t, int n_assets) const;

 private:
  double tau_fill_;
  double step_;
  std::deque<std::pair<double, Vec>> samples_;
};

struct TakerModel {
  int n_assets = 1;
  std::function<Vec(const Vec&)> mid;          // Y -> m
  std::function<Vec(const Vec&)> half_spread;  // Y -> s >= 0
  std::function<Vec(const Vec&)> depth;        // Y -> D (may be empty: no cap)
  Mat temp_impact;                             // Xi, N x N, PSD
  KernelFn kernel;                             // empty -> no transient impact
  double tau_fill = 0.0;
  OverflowFn overflow;                         // empty -> 0; g(0) = 0, convex

  void validate() const;
};

// Executable price for aggressive trading: mid, spread crossing with
// sgn(0) = 0, temporary impact, transient-impact convolution, and the
// convex overflow penalty on |q|/depth.
Vec exec_price_taker(const TakerModel& model, const Vec& state_y,
                     const Vec& speed, const Vec& order,
                     const TradeHistory& history, double t);

struct MakerModel {
  double base_intensity_bid = 1.0;  // fills per unit time at zero offset
  double base_intensity_ask = 1.0;
  double decay_bid = 1.0;  // intensity decay per unit of quote distance
  double decay_ask = 1.0;
  double offset_min = 0.0;  // bounds on |quote offset|
  double offset_max = 1e18;

  void validate() const;
  // lambda(delta) = Lambda * exp(-k |delta|)
  double intensity_bid(double offset) const;
  double intensity_ask(double offset) const;
};

struct MakerFills {
  long n_bid = 0;
  long n_ask = 0;
  double bid_price = 0.0;  // b = m + delta_bid (delta_bid <= 0)
  double ask_price = 0.0;  // a = m + delta_ask (delta_ask >= 0)
};

// Poisson fill counts over dt at quote offsets delta_bid <= 0 <= delta_ask.
// Draw addressing (step, slot0/slot0+1) keeps paired scenarios CRN-aligned.
MakerFills sample_maker_fills(const MakerModel& model, double delta_bid,
                              double delta_ask, double mid, double dt,
                              const NoiseStream& noise, std::uint32_t step,
                              std::uint32_t slot0 = 0);

struct LiquidationModel {
  Vec adv;              // average daily volume, per asset, > 0
  double tau_liq = 1.0; // liquidation horizon
  // discount(size_ratio, tau) -> price >= 0; default c_h * x / sqrt(tau)
  std::function<double(double, double)> discount;
  double c_h = 0.0;

  void validate() const;
  double discount_at(double size_ratio) const;
};

// Prudent mark: m - s sgn(phi) - H(|phi|/ADV, tau_liq). Flat positions mark
// at mid exactly.
Vec liq_price(const LiquidationModel& model, const Vec& mid,
              const Vec& half_spread, const Vec& position);

}  // namespace flab::frictions
