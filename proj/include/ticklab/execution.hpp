#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ticklab/marketdata.hpp"

namespace ticklab::exec {

enum class Liquidity { Taker, Maker };

struct Fill {
    std::int64_t ts = 0;
    int side = 0;  // +1 buy, -1 sell
    double price = 0.0;
    double qty = 0.0;  // base currency
    Liquidity liquidity = Liquidity::Taker;
    double fee = 0.0;
    double cash_after = 0.0;  // net of fees
    double inventory_after = 0.0;
};

struct SignalPolicy {
    double theta = 0.0;
    double notional = 1000.0;  // quote units per unit position
    double taker_fee_rate = 0.0;
    double maker_fee_rate = 0.0;  // negative = rebate
    int requote_ticks = 1;
    double initial_cash = 10000.0;
};

// Single-asset account replay. Gross and net tracks share the same fills and
// differ only by accumulated fees. Equity marks inventory to the unfavorable
// touch: longs to the bid, shorts to the ask.
struct Account {
    std::vector<std::int64_t> ts;
    std::vector<double> equity_gross;
    std::vector<double> equity_net;
    std::vector<Fill> fills;
    std::size_t signal_changes = 0;
    double initial_cash = 0.0;
    double final_inventory = 0.0;
};

// Thresholded sign signal: direction = sign(pred) while |pred| > theta, else
// the previous direction is held. Position size is notional/mid frozen at
// each signal change; trades execute the difference at the touch.
Account run_taker(const md::AlignedSeries& s, std::span<const double> preds,
                  const SignalPolicy& policy);

// Same signal, but entries rest at the passive touch: buys post at the best
// bid, sells at the best ask, joining behind the displayed size. Per bucket,
// prints through the order price fill the remainder; prints at the price
// first consume the queue ahead. Orders reprice (fresh queue) when the touch
// moves away by more than requote_ticks; a quote crossing the order fills it
// at the posted price.
Account run_maker(const md::AlignedSeries& s, std::span<const double> preds,
                  const SignalPolicy& policy);

// Half capital in each leg: equity is the pointwise mean.
Account run_blend(const Account& taker, const Account& maker);

// One taker buy of notional/mid at the first valid ask, held to the end.
Account run_buy_hold(const md::AlignedSeries& s, const SignalPolicy& policy);

void write_trades_csv(const Account& a, const std::string& path);
void write_equity_csv(const Account& a, const std::string& path);

}  // namespace ticklab::exec
