#include <cmath>

#include "doctest.h"
#include "flab/frictions.hpp"
#include "flab/ledger.hpp"
#include "flab/rng.hpp"
#include "flab/stats.hpp"

using namespace flab;
using namespace flab::ledger;

TEST_CASE("gain rate terms") {
  HoldingCostModel hc;
  CashRates rates;
  LedgerState st = LedgerState::flat(1);

  SUBCASE("empty book") {
    double g = gain_rate(st, rates, hc, Vec::Constant(1, 100.0), Vec::Zero(1),
                         Vec::Constant(1, 100.0));
    CHECK(g == 0.0);
  }
  SUBCASE("execution outflow") {
    double g = gain_rate(st, rates, hc, Vec::Constant(1, 100.06),
                         Vec::Constant(1, 1.0), Vec::Constant(1, 100.0));
    CHECK(g == doctest::Approx(-100.06));
  }
  SUBCASE("carry on positive cash") {
    st.cash = 100.0;
    rates.credit = 0.02;
    double g = gain_rate(st, rates, hc, Vec::Constant(1, 100.0), Vec::Zero(1),
                         Vec::Constant(1, 100.0));
    CHECK(g == doctest::Approx(2.0));
  }
  SUBCASE("tax on traded notional") {
    rates.tax = 0.001;
    double g = gain_rate(st, rates, hc, Vec::Constant(1, 100.0),
                         Vec::Constant(1, -1.0), Vec::Constant(1, 100.0));
    CHECK(g == doctest::Approx(100.0 - 0.1));
  }
}

TEST_CASE("holding cost: canonical specification and gradient selection") {
  HoldingCostModel hc;
  hc.c_lend = 0.3;
  hc.c_hold = 0.1;
  Vec pos(2);
  pos << 2.0, -1.0;
  CHECK(hc.cost(pos) == doctest::Approx(0.3 * 1.0 + 0.1 * 3.0));
  Vec g = hc.gradient(pos);
  CHECK(g[0] == doctest::Approx(0.1));
  CHECK(g[1] == doctest::Approx(-0.3 - 0.1));
  CHECK(hc.gradient(Vec::Zero(2)).norm() == 0.0);

  hc.margin = [](const Vec& p) { return p.cwiseAbs().sum(); };
  hc.margin_penalty = 2.0;
  hc.free_cash = 1.0;
  CHECK(hc.margin_breach(pos));
  CHECK(hc.cost(pos) == doctest::Approx(0.3 + 0.3 + 2.0 * (3.0 - 1.0)));
}

TEST_CASE("taker step: accounting identity and flat-book invariance") {
  CashRates rates;
  HoldingCostModel hc;
  LedgerState st = LedgerState::flat(1, 50.0);
  Vec p_liq = Vec::Constant(1, 100.0);
  st.mark(p_liq);
  for (int k = 0; k < 16; ++k) {
    step_taker(st, rates, hc, p_liq, p_liq, Vec::Constant(1, 100.0),
               Vec::Zero(1), Vec::Constant(1, 100.0), 0.1);
    CHECK(std::abs(st.wealth - (st.mtm_value + st.cash)) <
          1e-9 * (1.0 + std::abs(st.wealth)));
  }
  CHECK(st.wealth == doctest::Approx(50.0));  // flat book, zero rates
}

TEST_CASE("round trip at constant mid loses twice the half-spread plus tax") {
  CashRates rates;
  rates.tax = 0.0001;
  HoldingCostModel hc;
  const double m = 100.0, s = 0.05;
  LedgerState st = LedgerState::flat(1);
  st.mark(Vec::Zero(1));
  double x0 = st.wealth;

  // Buy one unit over dt = 1 at m + s, marked long at m - s.
  step_taker(st, rates, hc, Vec::Constant(1, m - s), Vec::Constant(1, m),
             Vec::Constant(1, m + s), Vec::Constant(1, 1.0),
             Vec::Constant(1, m), 1.0);
  // Sell it back at m - s, marked flat at m.
  step_taker(st, rates, hc, Vec::Constant(1, m), Vec::Constant(1, m - s),
             Vec::Constant(1, m - s), Vec::Constant(1, -1.0),
             Vec::Constant(1, m), 1.0);

  CHECK(st.position[0] == doctest::Approx(0.0));
  double expected = -2.0 * s - 2.0 * rates.tax * m;
  CHECK(st.wealth - x0 == doctest::Approx(expected).epsilon(1e-12));
  // Split sums to the total wealth change.
  CHECK(st.realized_pnl_cum + st.mtm_pnl_cum ==
        doctest::Approx(st.wealth - x0).epsilon(1e-12));
}

TEST_CASE("maker step: no fills means carry and holding cost only") {
  CashRates rates;
  rates.credit = 0.01;
  HoldingCostModel hc;
  hc.c_hold = 0.2;
  LedgerState st = LedgerState::flat(1, 100.0);
  st.position[0] = 2.0;
  st.mark(Vec::Constant(1, 99.9));
  double cash0 = st.cash;
  frictions::MakerFills none{};
  step_maker(st, rates, hc, 99.9, 99.9, none, 100.0, 0.5);
  CHECK(st.cash - cash0 ==
        doctest::Approx((0.01 * 100.0 - 0.2 * 2.0) * 0.5).epsilon(1e-12));
  CHECK(st.mtm_pnl_cum == 0.0);
}

TEST_CASE("maker step: one fill each side captures the spread") {
  CashRates rates;
  HoldingCostModel hc;
  LedgerState st = LedgerState::flat(1);
  st.mark(Vec::Constant(1, 100.0));
  frictions::MakerFills f;
  f.n_bid = 1;
  f.n_ask = 1;
  f.bid_price = 99.95;
  f.ask_price = 100.05;
  step_maker(st, rates, hc, 100.0, 100.0, f, 100.0, 0.1);
  CHECK(st.position[0] == 0.0);
  CHECK(st.wealth == doctest::Approx(0.10).epsilon(1e-12));
  CHECK(st.realized_pnl_cum == doctest::Approx(0.10).epsilon(1e-12));
  CHECK(st.mtm_pnl_cum == 0.0);  // continuous mark: no jump cross-term
}

TEST_CASE("maker tax flag charges filled notional") {
  CashRates rates;
  rates.tax = 0.001;
  HoldingCostModel hc;
  LedgerState st = LedgerState::flat(1);
  st.mark(Vec::Constant(1, 100.0));
  frictions::MakerFills f;
  f.n_bid = 2;
  f.n_ask = 1;
  f.bid_price = 99.9;
  f.ask_price = 100.1;
  LedgerState st_tax = st;
  step_maker(st, rates, hc, 100.0, 100.0, f, 100.0, 0.1, false);
  step_maker(st_tax, rates, hc, 100.0, 100.0, f, 100.0, 0.1, true);
  CHECK(st.cash - st_tax.cash == doctest::Approx(0.001 * 100.0 * 3.0));
}

TEST_CASE("frictionless adapted trading: wealth drift matches position drift") {
  // dP = ell dt + sigma dB with zero frictions: E[X_T - X_0] equals
  // E[int phi ell dt] within Monte Carlo error.
  const double ell = 0.4, sigma = 0.8, h = 0.02;
  const int n_steps = 50;
  const long n_paths = 20000;
  CashRates rates;
  HoldingCostModel hc;

  std::vector<double> xT(n_paths), drift_int(n_paths);
  for (long i = 0; i < n_paths; ++i) {
    NoiseStream ns(31, i);
    LedgerState st = LedgerState::flat(1);
    double p = 100.0;
    st.mark(Vec::Constant(1, p));
    double x0 = st.wealth;
    double acc = 0.0;
    for (int k = 0; k < n_steps; ++k) {
      // Adapted speed feedback on the current price level.
      double speed = 0.1 * std::tanh(100.0 - p);
      double p_next = p + ell * h + sigma * std::sqrt(h) * ns.normal(k, 0);
      acc += st.position[0] * ell * h + speed * h * ell * h;
      step_taker(st, rates, hc, Vec::Constant(1, p_next), Vec::Constant(1, p),
                 Vec::Constant(1, p), Vec::Constant(1, speed),
                 Vec::Constant(1, p), h);
      p = p_next;
    }
    xT[i] = st.wealth - x0;
    drift_int[i] = acc;
  }
  std::vector<double> diff(n_paths);
  for (long i = 0; i < n_paths; ++i) diff[i] = xT[i] - drift_int[i];
  CHECK(std::abs(stats::mean(diff)) < 3.0 * stats::mean_se(diff));
}
