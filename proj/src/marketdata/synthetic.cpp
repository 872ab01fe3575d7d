#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "ticklab/errors.hpp"
#include "ticklab/io.hpp"
#include "ticklab/marketdata.hpp"
#include "ticklab/rng.hpp"

namespace ticklab::md {

namespace {

// Integer mid step with the exact expected drift: floor plus a Bernoulli on
// the fractional part, so E[step] equals the real-valued increment.
std::int64_t stochastic_round(double incr, Rng& rng) {
    const double base = std::floor(incr);
    const double frac = incr - base;
    return static_cast<std::int64_t>(base) + (rng.bernoulli(frac) ? 1 : 0);
}

}  // namespace

void gen_synthetic(std::uint64_t seed, std::int64_t n_seconds, const SynthRegime& rg,
                   const std::string& book_path, const std::string& trades_path) {
    if (n_seconds < 10) throw UsageError("gen_synthetic: n_seconds must be >= 10");
    if (rg.tick <= 0.0 || rg.mid0 <= 0.0 || rg.depth_levels < 1 ||
        rg.depth_mean <= 0.0 || rg.trade_rate < 0.0)
        throw UsageError("gen_synthetic: invalid regime");

    Rng rng(seed);
    const int d = rg.depth_levels;
    std::int64_t m = std::llround(rg.mid0 / rg.tick);  // mid in ticks
    const std::int64_t m_floor = d + 2;                // keep the full ladder positive
    m = std::max(m, m_floor + 10);

    double imb = rg.imb_sigma * rng.normal();
    const double imb_innov = rg.imb_sigma * std::sqrt(1.0 - rg.imb_rho * rg.imb_rho);

    io::LineWriter book(book_path);
    io::LineWriter trades(trades_path);
    {
        std::string header = "ts_ms";
        for (int l = 0; l < d; ++l) {
            const std::string i = std::to_string(l);
            header += ",bid_px_" + i + ",bid_qty_" + i + ",ask_px_" + i + ",ask_qty_" + i;
        }
        book.write(header);
    }
    trades.write("ts_ms,price,qty,side");

    std::string line;
    std::vector<double> bq(static_cast<std::size_t>(d)), aq(static_cast<std::size_t>(d));

    const auto emit_book = [&](std::int64_t ts_ms) {
        const double tilt = std::clamp(imb, -0.98, 0.98);
        for (int l = 0; l < d; ++l) {
            const double scale = rg.depth_mean * std::pow(rg.depth_decay, l);
            const double jb = std::exp(rg.qty_noise * rng.normal());
            const double ja = std::exp(rg.qty_noise * rng.normal());
            // Only the touch carries the imbalance tilt; deeper levels are
            // plain replenishing depth.
            const double tb = l == 0 ? 1.0 + tilt : 1.0;
            const double ta = l == 0 ? 1.0 - tilt : 1.0;
            bq[static_cast<std::size_t>(l)] = std::max(scale * tb * jb, 1e-3);
            aq[static_cast<std::size_t>(l)] = std::max(scale * ta * ja, 1e-3);
        }
        line = std::to_string(ts_ms);
        for (int l = 0; l < d; ++l) {
            line += ',';
            io::append_double(line, static_cast<double>(m - 1 - l) * rg.tick);
            line += ',';
            io::append_double(line, bq[static_cast<std::size_t>(l)]);
            line += ',';
            io::append_double(line, static_cast<double>(m + 1 + l) * rg.tick);
            line += ',';
            io::append_double(line, aq[static_cast<std::size_t>(l)]);
        }
        book.write(line);
    };

    emit_book(0);

    for (std::int64_t s = 1; s <= n_seconds; ++s) {
        // Trades during (s-1, s] hit the touch as of the start of the second.
        const int n_tr = rng.poisson(rg.trade_rate);
        std::vector<std::int64_t> offsets(static_cast<std::size_t>(n_tr));
        for (auto& o : offsets) o = 1 + static_cast<std::int64_t>(rng.below(1000));
        std::sort(offsets.begin(), offsets.end());
        const double p_buy =
            std::clamp(0.5 + 0.5 * rg.flow_bias * std::clamp(imb, -1.0, 1.0), 0.02, 0.98);
        for (std::int64_t o : offsets) {
            const bool buy = rng.bernoulli(p_buy);
            const std::int64_t px = buy ? m + 1 : m - 1;
            const double qty = rg.trade_qty_mean * 0.05 + rng.exponential(rg.trade_qty_mean);
            line = std::to_string((s - 1) * 1000 + o);
            line += ',';
            io::append_double(line, static_cast<double>(px) * rg.tick);
            line += ',';
            io::append_double(line, qty);
            line += buy ? ",B" : ",S";
            trades.write(line);
        }

        // Latent imbalance persists; the mid drifts with it when gain > 0.
        const double drift = rg.gain * imb;
        m += stochastic_round(rg.vol_ticks * rng.normal() + drift, rng);
        m = std::max(m, m_floor);
        imb = rg.imb_rho * imb + imb_innov * rng.normal();

        emit_book(s * 1000);
    }
    book.close();
    trades.close();
}

}  // namespace ticklab::md
