#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ticklab/marketdata.hpp"

namespace ticklab::feat {

// Column order is fixed and part of the CSV/cache contract.
enum class Id {
    L1Imbalance = 0,
    SpreadRel,
    NetOrderFlow,
    VwapBuyToMid,
    VwapSellToMid,
    Volatility,
    VolumeTraded,
    NTrades,
    TradePriceVariance,
    VolumeConcentration,
};
inline constexpr std::size_t kNumFeatures = 10;
inline constexpr std::array<std::string_view, kNumFeatures> kFeatureNames = {
    "l1_imbalance",     "spread_rel", "net_order_flow",
    "vwap_buy_to_mid",  "vwap_sell_to_mid", "volatility",
    "volume_traded",    "n_trades",   "trade_price_variance",
    "volume_concentration",
};

struct FeatureConfig {
    int trade_window_s = 1;  // trailing trade window, in 1 s buckets
    int vol_window = 60;     // trailing 1 s returns entering volatility
    int label_horizon_s = 3;
};

// Row flags noting zero-filled VWAP deviations (empty side in the window).
inline constexpr std::uint8_t kNoBuys = 1;
inline constexpr std::uint8_t kNoSells = 2;

struct FeatureFrame {
    std::vector<std::int64_t> grid_ts;
    std::array<std::vector<double>, kNumFeatures> cols;
    std::vector<double> label;  // NaN where missing
    std::vector<std::uint8_t> valid;
    std::vector<std::uint8_t> flags;

    std::size_t size() const { return grid_ts.size(); }
    std::vector<double>& col(Id id) { return cols[static_cast<std::size_t>(id)]; }
    const std::vector<double>& col(Id id) const {
        return cols[static_cast<std::size_t>(id)];
    }
};

// Book-only features (tick size cancels in all of them).
double l1_imbalance(const md::BookSnapshot& s);
double spread_rel(const md::BookSnapshot& s);
double volume_concentration(const md::BookSnapshot& s);

struct TradeWindowFeatures {
    double net_order_flow = 0.0;
    double volume_traded = 0.0;
    double n_trades = 0.0;
    double vwap_buy_to_mid = 0.0;
    double vwap_sell_to_mid = 0.0;
    double trade_price_variance = 0.0;
    bool no_buys = true;
    bool no_sells = true;
};

// Stats over a trailing trade window against the current mid (quote
// currency). Empty window or empty side zero-fills, flagged by the bools.
TradeWindowFeatures trade_window_features(std::span<const md::Trade> trades,
                                          double mid_now, double tick);

// All ten features plus label per grid point; strictly trailing windows.
// A row is valid when its book state, volatility window, and label are all
// available and finite.
FeatureFrame build_frame(const md::AlignedSeries& s, const FeatureConfig& cfg);

void write_csv(const FeatureFrame& f, const std::string& path);
FeatureFrame read_csv(const std::string& path);

// Bit-exact binary round trip, for keyed caching of built frames.
void write_cache(const FeatureFrame& f, const std::string& path);
FeatureFrame read_cache(const std::string& path);

}  // namespace ticklab::feat
