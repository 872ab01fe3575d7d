#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace ticklab::md {

// Prices are integer tick multiples throughout; `tick` converts to quote
// currency. This keeps tick-grid analytics exact and CSV round-trips lossless.

struct Trade {
    std::int64_t ts_ms = 0;
    std::int64_t px = 0;  // ticks
    double qty = 0.0;
    int side = 0;  // +1 aggressor buy, -1 aggressor sell

    bool operator==(const Trade&) const = default;
};

struct BookSnapshot {
    std::int64_t ts_ms = 0;
    std::vector<std::int64_t> bid_px, ask_px;  // level 0 first, ticks
    std::vector<double> bid_qty, ask_qty;

    int depth() const { return static_cast<int>(bid_px.size()); }
};

struct IngestConfig {
    double tick = 0.01;
    int depth_levels = 5;
    std::int64_t max_ffill_ms = 5000;
};

struct IngestReport {
    std::size_t book_rows_read = 0;
    std::size_t book_rows_crossed = 0;   // ask <= bid at level 0
    std::size_t book_rows_invalid = 0;   // other invariant violations
    std::size_t trades_read = 0;
    std::size_t trades_out_of_range = 0;  // outside the grid's bucket span
    std::size_t grid_points = 0;
    std::size_t valid_points = 0;
    std::size_t stale_points = 0;  // fill gap above the staleness bound
    std::int64_t max_fill_gap_ms = 0;
};

// Book states forward-filled onto a 1-second grid plus trades bucketed into
// (t-1s, t]. Level data is flattened as [i * depth + level].
struct AlignedSeries {
    double tick = 0.01;
    int depth = 0;
    std::vector<std::int64_t> grid_ts;    // seconds, strictly increasing by 1
    std::vector<std::int64_t> src_ts_ms;  // timestamp of the filled book state
    std::vector<std::uint8_t> valid;
    std::vector<std::int64_t> bid_px, ask_px;
    std::vector<double> bid_qty, ask_qty;
    std::vector<std::uint32_t> bucket_begin;  // size n+1, offsets into trades
    std::vector<Trade> trades;

    std::size_t size() const { return grid_ts.size(); }
    std::span<const Trade> bucket(std::size_t i) const {
        return {trades.data() + bucket_begin[i], trades.data() + bucket_begin[i + 1]};
    }
    BookSnapshot snapshot(std::size_t i) const;

    // Quote-currency mid at grid point i.
    double mid_price(std::size_t i) const {
        return 0.5 * tick * static_cast<double>(bid_px[i * depth] + ask_px[i * depth]);
    }

    bool operator==(const AlignedSeries&) const = default;
};

double mid(const BookSnapshot& s, double tick);

// ln(mid_{t+h} / mid_t); NaN marks rows where either endpoint is invalid
// or out of range.
std::vector<double> label(const AlignedSeries& s, int horizon_s = 3);

AlignedSeries ingest(const std::string& book_path, const std::string& trades_path,
                     const IngestConfig& cfg, IngestReport* report = nullptr);

// Writes the series back out in the ingest formats (book rows at grid
// timestamps, so sub-second source offsets are not preserved).
void serialize(const AlignedSeries& s, const std::string& book_path,
               const std::string& trades_path);

// Synthetic market: tick-grid random-walk mid whose drift follows a
// persistent latent imbalance, book depth tilted by the same imbalance,
// Poisson trades with aggressor sign aligned to it. With gain > 0 the
// displayed imbalance genuinely predicts short-horizon returns.
struct SynthRegime {
    double tick = 0.01;
    double mid0 = 100.0;
    int depth_levels = 5;
    double depth_mean = 60.0;    // level-0 displayed size scale
    double depth_decay = 0.8;    // per-level falloff
    double qty_noise = 0.25;     // lognormal sigma on displayed sizes
    double imb_rho = 0.94;       // AR(1) persistence of the latent imbalance
    double imb_sigma = 0.45;     // stationary std of the latent imbalance
    double vol_ticks = 0.9;      // diffusion per second, in ticks
    double gain = 0.0;           // imbalance-to-drift gain, ticks per second
    double trade_rate = 3.0;     // Poisson intensity per second
    double trade_qty_mean = 1.5;
    double flow_bias = 0.6;      // aggressor-sign alignment with imbalance
};

void gen_synthetic(std::uint64_t seed, std::int64_t n_seconds, const SynthRegime& regime,
                   const std::string& book_path, const std::string& trades_path);

}  // namespace ticklab::md
