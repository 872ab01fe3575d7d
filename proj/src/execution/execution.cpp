#include "ticklab/execution.hpp"

#include <cmath>

#include "ticklab/errors.hpp"
#include "ticklab/io.hpp"

namespace ticklab::exec {

namespace {

void validate(const md::AlignedSeries& s, std::span<const double> preds,
              const SignalPolicy& policy) {
    if (preds.size() != s.size())
        throw UsageError("predictions and series are misaligned: " +
                         std::to_string(preds.size()) + " vs " +
                         std::to_string(s.size()) + " rows");
    if (std::isnan(policy.theta) || policy.theta < 0)
        throw UsageError("theta must be >= 0");
    if (!(policy.notional > 0)) throw UsageError("notional must be > 0");
    if (policy.requote_ticks < 0) throw UsageError("requote_ticks must be >= 0");
    if (!(policy.initial_cash >= 0)) throw UsageError("initial_cash must be >= 0");
}

struct Books {
    double bid = 0.0;
    double ask = 0.0;
};

struct Ledger {
    double cash_gross;
    double cash_net;
    double inventory = 0.0;

    void fill(Account& a, std::int64_t ts, int side, double price, double qty,
              Liquidity liq, double fee_rate) {
        const double fee = fee_rate * price * qty;
        cash_gross += -side * price * qty;
        cash_net += -side * price * qty - fee;
        inventory += side * qty;
        a.fills.push_back({ts, side, price, qty, liq, fee, cash_net, inventory});
    }

    void mark(Account& a, std::int64_t ts, const Books& b) {
        const double px = inventory > 0 ? b.bid : inventory < 0 ? b.ask : 0.0;
        a.ts.push_back(ts);
        a.equity_gross.push_back(cash_gross + inventory * px);
        a.equity_net.push_back(cash_net + inventory * px);
    }
};

}  // namespace

Account run_taker(const md::AlignedSeries& s, std::span<const double> preds,
                  const SignalPolicy& policy) {
    validate(s, preds, policy);
    Account a;
    a.initial_cash = policy.initial_cash;
    Ledger led{policy.initial_cash, policy.initial_cash};
    Books b;
    int dir = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s.valid[i]) {
            const std::size_t base = i * static_cast<std::size_t>(s.depth);
            b.bid = s.tick * static_cast<double>(s.bid_px[base]);
            b.ask = s.tick * static_cast<double>(s.ask_px[base]);
            if (std::fabs(preds[i]) > policy.theta) {
                const int d = preds[i] > 0 ? 1 : -1;
                if (d != dir) {
                    ++a.signal_changes;
                    dir = d;
                    const double target = d * policy.notional / s.mid_price(i);
                    const double delta = target - led.inventory;
                    const int side = delta > 0 ? 1 : -1;
                    led.fill(a, s.grid_ts[i], side, side > 0 ? b.ask : b.bid,
                             std::fabs(delta), Liquidity::Taker,
                             policy.taker_fee_rate);
                }
            }
        }
        led.mark(a, s.grid_ts[i], b);
    }
    a.final_inventory = led.inventory;
    return a;
}

Account run_maker(const md::AlignedSeries& s, std::span<const double> preds,
                  const SignalPolicy& policy) {
    validate(s, preds, policy);
    Account a;
    a.initial_cash = policy.initial_cash;
    Ledger led{policy.initial_cash, policy.initial_cash};
    Books b;
    int dir = 0;

    struct Order {
        int side = 0;
        std::int64_t px = 0;  // ticks
        double qty = 0.0;
        double queue = 0.0;
        bool open = false;
    } order;

    for (std::size_t i = 0; i < s.size(); ++i) {
        if (order.open) {
            for (const auto& tr : s.bucket(i)) {
                if (tr.side == order.side) continue;  // prints on the far side
                const bool through =
                    order.side > 0 ? tr.px < order.px : tr.px > order.px;
                const double px_q = s.tick * static_cast<double>(order.px);
                if (through) {
                    led.fill(a, s.grid_ts[i], order.side, px_q, order.qty,
                             Liquidity::Maker, policy.maker_fee_rate);
                    order.open = false;
                    break;
                }
                if (tr.px == order.px) {
                    const double consumed = std::min(order.queue, tr.qty);
                    order.queue -= consumed;
                    const double leftover = tr.qty - consumed;
                    if (leftover > 0) {
                        const double q = std::min(order.qty, leftover);
                        led.fill(a, s.grid_ts[i], order.side, px_q, q,
                                 Liquidity::Maker, policy.maker_fee_rate);
                        order.qty -= q;
                        if (order.qty <= 0) {
                            order.open = false;
                            break;
                        }
                    }
                }
            }
        }
        if (s.valid[i]) {
            const std::size_t base = i * static_cast<std::size_t>(s.depth);
            const std::int64_t bid_t = s.bid_px[base];
            const std::int64_t ask_t = s.ask_px[base];
            b.bid = s.tick * static_cast<double>(bid_t);
            b.ask = s.tick * static_cast<double>(ask_t);
            if (order.open) {
                const bool crossed =
                    order.side > 0 ? ask_t <= order.px : bid_t >= order.px;
                if (crossed) {
                    led.fill(a, s.grid_ts[i], order.side,
                             s.tick * static_cast<double>(order.px), order.qty,
                             Liquidity::Maker, policy.maker_fee_rate);
                    order.open = false;
                }
            }
            if (order.open) {
                if (order.side > 0 && bid_t - order.px > policy.requote_ticks) {
                    order.px = bid_t;
                    order.queue = s.bid_qty[base];
                } else if (order.side < 0 &&
                           order.px - ask_t > policy.requote_ticks) {
                    order.px = ask_t;
                    order.queue = s.ask_qty[base];
                }
            }
            if (std::fabs(preds[i]) > policy.theta) {
                const int d = preds[i] > 0 ? 1 : -1;
                if (d != dir) {
                    ++a.signal_changes;
                    dir = d;
                    const double target = d * policy.notional / s.mid_price(i);
                    const double delta = target - led.inventory;
                    order.side = delta > 0 ? 1 : -1;
                    order.qty = std::fabs(delta);
                    order.px = order.side > 0 ? bid_t : ask_t;
                    order.queue = order.side > 0 ? s.bid_qty[base] : s.ask_qty[base];
                    order.open = order.qty > 0;
                }
            }
        }
        led.mark(a, s.grid_ts[i], b);
    }
    a.final_inventory = led.inventory;
    return a;
}

Account run_blend(const Account& taker, const Account& maker) {
    if (taker.ts.size() != maker.ts.size())
        throw UsageError("blend legs have different lengths");
    Account a;
    a.initial_cash = 0.5 * (taker.initial_cash + maker.initial_cash);
    a.ts = taker.ts;
    a.equity_gross.resize(taker.ts.size());
    a.equity_net.resize(taker.ts.size());
    for (std::size_t i = 0; i < taker.ts.size(); ++i) {
        if (taker.ts[i] != maker.ts[i])
            throw UsageError("blend legs have different time grids");
        a.equity_gross[i] = 0.5 * (taker.equity_gross[i] + maker.equity_gross[i]);
        a.equity_net[i] = 0.5 * (taker.equity_net[i] + maker.equity_net[i]);
    }
    return a;
}

Account run_buy_hold(const md::AlignedSeries& s, const SignalPolicy& policy) {
    if (s.size() == 0) throw UsageError("empty series");
    Account a;
    a.initial_cash = policy.initial_cash;
    Ledger led{policy.initial_cash, policy.initial_cash};
    Books b;
    bool bought = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s.valid[i]) {
            const std::size_t base = i * static_cast<std::size_t>(s.depth);
            b.bid = s.tick * static_cast<double>(s.bid_px[base]);
            b.ask = s.tick * static_cast<double>(s.ask_px[base]);
            if (!bought) {
                bought = true;
                ++a.signal_changes;
                led.fill(a, s.grid_ts[i], 1, b.ask,
                         policy.notional / s.mid_price(i), Liquidity::Taker,
                         policy.taker_fee_rate);
            }
        }
        led.mark(a, s.grid_ts[i], b);
    }
    a.final_inventory = led.inventory;
    return a;
}

void write_trades_csv(const Account& a, const std::string& path) {
    io::LineWriter w(path);
    w.write("ts,side,price,qty,liquidity,fee,cash_after,inventory_after");
    std::string line;
    for (const auto& f : a.fills) {
        line.clear();
        line += std::to_string(f.ts);
        line += ',';
        line += std::to_string(f.side);
        line += ',';
        io::append_double(line, f.price);
        line += ',';
        io::append_double(line, f.qty);
        line += f.liquidity == Liquidity::Taker ? ",taker," : ",maker,";
        io::append_double(line, f.fee);
        line += ',';
        io::append_double(line, f.cash_after);
        line += ',';
        io::append_double(line, f.inventory_after);
        w.write(line);
    }
    w.close();
}

void write_equity_csv(const Account& a, const std::string& path) {
    io::LineWriter w(path);
    w.write("ts,equity_gross,equity_net");
    std::string line;
    for (std::size_t i = 0; i < a.ts.size(); ++i) {
        line.clear();
        line += std::to_string(a.ts[i]);
        line += ',';
        io::append_double(line, a.equity_gross[i]);
        line += ',';
        io::append_double(line, a.equity_net[i]);
        w.write(line);
    }
    w.close();
}

}  // namespace ticklab::exec
