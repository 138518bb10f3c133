#pragma once

#include <functional>

#include "flab/common.hpp"
#include "flab/frictions.hpp"

namespace flab::ledger {

struct CashRates {
  double credit = 0.0;   // r+ on positive balances
  double funding = 0.0;  // r- on negative balances
  double tax = 0.0;      // proportional transaction tax on traded notional

  void validate() const {
    require(credit >= 0.0 && funding >= 0.0 && tax >= 0.0,
            "cash rates must be nonnegative");
  }
};

struct HoldingCostModel {
  double c_lend = 0.0;
  double c_hold = 0.0;
  double margin_penalty = 0.0;  // zeta
  std::function<double(const Vec&)> margin;  // Margin(phi); empty -> 0
  double free_cash = 0.0;

  double cost(const Vec& position) const;
  // Canonical subgradient selection (0 at kinks), used by controllers.
  Vec gradient(const Vec& position) const;
  bool margin_breach(const Vec& position) const;
};

struct LedgerState {
  double cash = 0.0;       // B
  double mtm_value = 0.0;  // V = <phi, P_liq>
  double wealth = 0.0;     // X = V + B
  Vec position;            // phi
  double realized_pnl_cum = 0.0;
  double mtm_pnl_cum = 0.0;
  bool margin_breached = false;

  static LedgerState flat(int n_assets, double cash0 = 0.0);
  // Establish V and X from a mark without trading.
  void mark(const Vec& p_liq);
};

// Cash running gain rate in continuous (taker) trading:
// -<P_exec, speed> - HC(phi) + r+ B+ - r- B- - tax <m, |speed|>.
double gain_rate(const LedgerState& st, const CashRates& rates,
                 const HoldingCostModel& hc, const Vec& exec_price,
                 const Vec& speed, const Vec& mid);

// One taker step of length dt: trades speed*dt at exec_price, accrues the
// gain rate into cash, re-marks at p_liq_new. The realized/MtM split is
// exact on the grid: the two accumulators sum to the wealth change.
void step_taker(LedgerState& st, const CashRates& rates,
                const HoldingCostModel& hc, const Vec& p_liq_new,
                const Vec& p_liq_prev, const Vec& exec_price, const Vec& speed,
                const Vec& mid, double dt);

// One maker step: point fills at the quoted prices, carry and holding costs
// on dt, optional tax on filled notional, jump-aware re-marking.
// Single-asset book.
void step_maker(LedgerState& st, const CashRates& rates,
                const HoldingCostModel& hc, double p_liq_new,
                double p_liq_prev, const frictions::MakerFills& fills,
                double mid, double dt, bool apply_tax = false);

}  // namespace flab::ledger
