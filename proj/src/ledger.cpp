#include "flab/ledger.hpp"

#include <cmath>

namespace flab::ledger {

double HoldingCostModel::cost(const Vec& position) const {
  double c = 0.0;
  for (Eigen::Index i = 0; i < position.size(); ++i) {
    c += c_lend * std::max(-position[i], 0.0);
    c += c_hold * std::abs(position[i]);
  }
  if (margin && margin_penalty > 0.0)
    c += margin_penalty * std::max(margin(position) - free_cash, 0.0);
  return c;
}

Vec HoldingCostModel::gradient(const Vec& position) const {
  Vec g = Vec::Zero(position.size());
  for (Eigen::Index i = 0; i < position.size(); ++i) {
    if (position[i] < 0.0) g[i] -= c_lend;
    g[i] += c_hold * sgn0(position[i]);
  }
  if (margin && margin_penalty > 0.0 && margin_breach(position)) {
    for (Eigen::Index i = 0; i < position.size(); ++i) {
      double h = 1e-6 * (1.0 + std::abs(position[i]));
      Vec pp = position, pm = position;
      pp[i] += h;
      pm[i] -= h;
      g[i] += margin_penalty * (margin(pp) - margin(pm)) / (2.0 * h);
    }
  }
  return g;
}

bool HoldingCostModel::margin_breach(const Vec& position) const {
  if (!margin) return false;
  return margin(position) > free_cash;
}

LedgerState LedgerState::flat(int n_assets, double cash0) {
  LedgerState st;
  st.cash = cash0;
  st.position = Vec::Zero(n_assets);
  st.mtm_value = 0.0;
  st.wealth = cash0;
  return st;
}

void LedgerState::mark(const Vec& p_liq) {
  mtm_value = position.dot(p_liq);
  wealth = mtm_value + cash;
}

double gain_rate(const LedgerState& st, const CashRates& rates,
                 const HoldingCostModel& hc, const Vec& exec_price,
                 const Vec& speed, const Vec& mid) {
  rates.validate();
  double g = -exec_price.dot(speed) - hc.cost(st.position);
  g += rates.credit * std::max(st.cash, 0.0);
  g -= rates.funding * std::max(-st.cash, 0.0);
  for (Eigen::Index i = 0; i < speed.size(); ++i)
    g -= rates.tax * mid[i] * std::abs(speed[i]);
  return g;
}

void step_taker(LedgerState& st, const CashRates& rates,
                const HoldingCostModel& hc, const Vec& p_liq_new,
                const Vec& p_liq_prev, const Vec& exec_price, const Vec& speed,
                const Vec& mid, double dt) {
  require(dt > 0.0, "dt must be positive");
  const Vec phi_old = st.position;

  double g = gain_rate(st, rates, hc, exec_price, speed, mid);
  st.cash += g * dt;
  st.position = phi_old + speed * dt;

  double mtm_incr = phi_old.dot(p_liq_new - p_liq_prev);
  double realized_incr = (st.position - phi_old).dot(p_liq_new) + g * dt;

  st.mtm_pnl_cum += mtm_incr;
  st.realized_pnl_cum += realized_incr;
  st.mark(p_liq_new);
  st.margin_breached = hc.margin_breach(st.position);
}

void step_maker(LedgerState& st, const CashRates& rates,
                const HoldingCostModel& hc, double p_liq_new,
                double p_liq_prev, const frictions::MakerFills& fills,
                double mid, double dt, bool apply_tax) {
  require(dt > 0.0, "dt must be positive");
  require(st.position.size() == 1, "maker ledger is single-asset");
  rates.validate();

  const double phi_old = st.position[0];
  const double dphi = static_cast<double>(fills.n_bid - fills.n_ask);

  double db = fills.ask_price * static_cast<double>(fills.n_ask) -
              fills.bid_price * static_cast<double>(fills.n_bid);
  db -= hc.cost(st.position) * dt;
  db += rates.credit * std::max(st.cash, 0.0) * dt;
  db -= rates.funding * std::max(-st.cash, 0.0) * dt;
  if (apply_tax)
    db -= rates.tax * mid * static_cast<double>(fills.n_bid + fills.n_ask);

  st.cash += db;
  st.position[0] = phi_old + dphi;

  double dp = p_liq_new - p_liq_prev;
  // Price move on inherited inventory plus the jump cross-term.
  double mtm_incr = phi_old * dp + dphi * dp;
  double realized_incr = dphi * p_liq_prev + db;

  st.mtm_pnl_cum += mtm_incr;
  st.realized_pnl_cum += realized_incr;
  st.mark(Vec::Constant(1, p_liq_new));
  st.margin_breached = hc.margin_breach(st.position);
}

}  // namespace flab::ledger
