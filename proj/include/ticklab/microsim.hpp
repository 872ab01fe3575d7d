#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace ticklab::microsim {

// Latent efficient price X diffuses continuously; the quoted cell is the
// tick-aligned interval [bid, bid+tick) that contains it. Displayed depths
// chase targets tilted toward X's fractional position inside the cell, so
// book imbalance carries the information a coarse mid hides. Coarser ticks
// give the replenishment dynamics more time per cell, strengthening that
// signal; finer ticks outrun it.
struct SimConfig {
    double tick = 0.1;
    double initial_mid = 100.0;
    double depth_mean = 50.0;
    double replenish_rate = 0.25;  // per-step pull toward the depth target
    double imbalance_gain = 0.6;   // depth tilt per unit of cell position
    double latent_sigma = 0.03;    // efficient-price vol per step, price units
    double depth_noise = 0.15;     // depth shock scale, relative to depth_mean
    std::int64_t steps = 10000;
    std::uint64_t seed = 1;
};

struct SimPath {
    double tick = 0.0;
    double initial_mid = 0.0;
    std::vector<double> ticked_mid;
    std::vector<double> bid_qty;
    std::vector<double> ask_qty;
    std::vector<double> imbalance;   // (bid_qty - ask_qty)/(bid_qty + ask_qty)
    std::vector<double> microprice;  // mid + half-tick * imbalance, clamped
    std::vector<double> latent;
    std::vector<int> next_move;  // signed ticks to the next recorded mid

    std::size_t size() const { return ticked_mid.size(); }
};

SimPath simulate(const SimConfig& cfg);

// Pearson correlation between the microprice deviation from the mid and the
// sign of the next nonzero mid move.
double microprice_anticipation(const SimPath& path);

// 2*(mid_fut - bid_spot)/(ask_spot - bid_spot) - 1; unclamped, NaN on a
// degenerate spread.
double spread_position(double mid_fut, double bid_spot, double ask_spot);

double position_imbalance_corr(std::span<const double> positions,
                               std::span<const double> imbalances);

// Coarse and fine runs share the latent walk (same seed); returns the
// correlation between the fine mid's position inside the coarse spread and
// the coarse book imbalance.
double twin_position_correlation(const SimConfig& coarse, int fine_factor);

struct LadderRung {
    double tick_mult = 0.0;
    double rel_tick = 0.0;  // tick / initial_mid
    double anticipation = 0.0;
    double shift_q95 = 0.0;  // 0.95-quantile of |microprice - mid|/initial_mid
};

struct LadderResult {
    std::vector<LadderRung> rungs;
    double assoc_anticipation = 0.0;  // Spearman vs rel_tick
    double assoc_shift_q95 = 0.0;
};

// Mean statistics per tick multiplier over seeds base.seed .. base.seed+n-1.
LadderResult run_ladder(const SimConfig& base,
                        std::span<const double> tick_multipliers, int n_seeds);

void write_path_csv(const SimPath& path, const std::string& out_path);
nlohmann::json ladder_json(const LadderResult& r);

}  // namespace ticklab::microsim
