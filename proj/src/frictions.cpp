#include "flab/frictions.hpp"

#include <cmath>

namespace flab::frictions {

void TradeHistory::record(double t, const Vec& speed) {
  if (!samples_.empty())
    require(t >= samples_.back().first, "history entries must be time-ordered");
  samples_.emplace_back(t, speed);
  while (!samples_.empty() && samples_.front().first < t - tau_fill_ - 1e-15)
    samples_.pop_front();
}

Vec TradeHistory::convolve(const KernelFn& kernel, double t,
                           int n_assets) const {
  Vec acc = Vec::Zero(n_assets);
  if (!kernel || samples_.empty()) return acc;

  std::vector<const std::pair<double, Vec>*> pts;
  pts.reserve(samples_.size());
  const double eps = 1e-9 * step_;
  for (const auto& s : samples_) {
    if (s.first >= t - tau_fill_ - eps && s.first <= t - step_ + eps)
      pts.push_back(&s);
  }
  if (pts.empty()) return acc;
  // Uniform node mass per sample; matches mo::discrete_convolution on
  // aligned grids so the Volterra adjoint is the exact transpose.
  for (const auto* s : pts) acc += step_ * (kernel(t - s->first) * s->second);
  return acc;
}

void TakerModel::validate() const {
  require(n_assets >= 1, "taker model needs n_assets >= 1");
  require(static_cast<bool>(mid) && static_cast<bool>(half_spread),
          "taker model needs mid and half_spread");
  require(temp_impact.rows() == n_assets && temp_impact.cols() == n_assets,
          "temp_impact must be N x N");
  require(tau_fill >= 0.0, "tau_fill >= 0");
}

Vec exec_price_taker(const TakerModel& model, const Vec& state_y,
                     const Vec& speed, const Vec& order,
                     const TradeHistory& history, double t) {
  model.validate();
  const int N = model.n_assets;
  require(speed.size() == N && order.size() == N, "speed/order must be N-dim");

  Vec m = model.mid(state_y);
  Vec s = model.half_spread(state_y);
  Vec p = m + s.cwiseProduct(sgn0(speed)) + model.temp_impact * speed;
  p += history.convolve(model.kernel, t, N);

  if (model.overflow) {
    require(static_cast<bool>(model.depth), "overflow penalty needs depth");
    Vec D = model.depth(state_y);
    Vec ratio(N);
    for (int i = 0; i < N; ++i) {
      if (D[i] <= 0.0) {
        if (order[i] != 0.0)
          throw NumericError("depth exhausted with nonzero order");
        ratio[i] = 0.0;
      } else {
        ratio[i] = std::abs(order[i]) / D[i];
      }
    }
    p += model.overflow(ratio);
  }
  if (!all_finite(p)) throw NumericError("non-finite executable price");
  return p;
}

void MakerModel::validate() const {
  require(base_intensity_bid > 0.0 && base_intensity_ask > 0.0,
          "maker base intensities must be > 0");
  require(decay_bid > 0.0 && decay_ask > 0.0, "maker decays must be > 0");
  require(offset_min >= 0.0 && offset_max >= offset_min,
          "bad quote offset bounds");
}

double MakerModel::intensity_bid(double offset) const {
  return base_intensity_bid * std::exp(-decay_bid * std::abs(offset));
}

double MakerModel::intensity_ask(double offset) const {
  return base_intensity_ask * std::exp(-decay_ask * std::abs(offset));
}

MakerFills sample_maker_fills(const MakerModel& model, double delta_bid,
                              double delta_ask, double mid, double dt,
                              const NoiseStream& noise, std::uint32_t step,
                              std::uint32_t slot0) {
  model.validate();
  require(dt > 0.0, "dt must be positive");
  require(delta_bid <= 0.0 && delta_ask >= 0.0,
          "quote convention: delta_bid <= 0 <= delta_ask");
  double ab = std::abs(delta_bid), aa = std::abs(delta_ask);
  require(ab >= model.offset_min && ab <= model.offset_max &&
              aa >= model.offset_min && aa <= model.offset_max,
          "quote offset outside bounds");

  MakerFills f;
  f.bid_price = mid + delta_bid;
  f.ask_price = mid + delta_ask;
  f.n_bid = noise.poisson(model.intensity_bid(delta_bid) * dt, step, slot0);
  f.n_ask = noise.poisson(model.intensity_ask(delta_ask) * dt, step, slot0 + 1);
  return f;
}

void LiquidationModel::validate() const {
  require(adv.size() >= 1 && adv.minCoeff() > 0.0, "ADV must be positive");
  require(tau_liq > 0.0, "tau_liq must be positive");
  require(c_h >= 0.0, "c_h must be >= 0");
}

double LiquidationModel::discount_at(double size_ratio) const {
  if (discount) return discount(size_ratio, tau_liq);
  return c_h * size_ratio / std::sqrt(tau_liq);
}

Vec liq_price(const LiquidationModel& model, const Vec& mid,
              const Vec& half_spread, const Vec& position) {
  model.validate();
  const auto N = mid.size();
  require(half_spread.size() == N && position.size() == N &&
              model.adv.size() == N,
          "liq_price dimension mismatch");
  Vec p(N);
  for (Eigen::Index i = 0; i < N; ++i) {
    double hc = model.discount_at(std::abs(position[i]) / model.adv[i]);
    require(hc >= 0.0, "liquidation discount must be >= 0");
    p[i] = mid[i] - half_spread[i] * sgn0(position[i]) - hc;
  }
  return p;
}

}  // namespace flab::frictions
