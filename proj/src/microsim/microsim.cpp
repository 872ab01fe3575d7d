#include "ticklab/microsim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ticklab/errors.hpp"
#include "ticklab/io.hpp"
#include "ticklab/kernels.hpp"
#include "ticklab/rng.hpp"
#include "ticklab/stats.hpp"

namespace ticklab::microsim {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr std::uint64_t kDepthStreamSalt = 0x9E3779B97F4A7C15ULL;

void validate(const SimConfig& cfg) {
    if (!(cfg.tick > 0.0)) throw UsageError("microsim: tick must be positive");
    if (!(cfg.initial_mid > 0.0)) throw UsageError("microsim: initial_mid must be positive");
    if (!(cfg.depth_mean > 0.0)) throw UsageError("microsim: depth_mean must be positive");
    if (!(cfg.replenish_rate >= 0.0 && cfg.replenish_rate <= 1.0))
        throw UsageError("microsim: replenish_rate must lie in [0, 1]");
    if (!(cfg.latent_sigma >= 0.0)) throw UsageError("microsim: latent_sigma must be non-negative");
    if (!(cfg.depth_noise >= 0.0)) throw UsageError("microsim: depth_noise must be non-negative");
    if (cfg.steps < 1) throw UsageError("microsim: steps must be at least 1");
}

}  // namespace

SimPath simulate(const SimConfig& cfg) {
    validate(cfg);
    const auto n = static_cast<std::size_t>(cfg.steps);
    SimPath path;
    path.tick = cfg.tick;
    path.initial_mid = cfg.initial_mid;
    path.ticked_mid.reserve(n);
    path.bid_qty.reserve(n);
    path.ask_qty.reserve(n);
    path.imbalance.reserve(n);
    path.microprice.reserve(n);
    path.latent.reserve(n);
    path.next_move.reserve(n);

    // Separate streams keep the latent walk identical across tick sizes for
    // the same seed; each step consumes one latent and two depth draws.
    Rng latent_rng(cfg.seed);
    Rng depth_rng(cfg.seed ^ kDepthStreamSalt);

    const double tick = cfg.tick;
    const double half = 0.5 * tick;
    const double kappa = std::clamp(cfg.imbalance_gain, 0.0, 0.95);
    double bid = cfg.initial_mid - half;
    double x = cfg.initial_mid;
    double bq = cfg.depth_mean;
    double aq = cfg.depth_mean;

    for (std::size_t t = 0; t < n; ++t) {
        const double mid = bid + half;
        const double ask = bid + tick;
        const double imb = (bq - aq) / (bq + aq);
        const double micro = std::clamp(mid + half * imb, bid, ask);
        path.ticked_mid.push_back(mid);
        path.bid_qty.push_back(bq);
        path.ask_qty.push_back(aq);
        path.imbalance.push_back(imb);
        path.microprice.push_back(micro);
        path.latent.push_back(x);

        x += cfg.latent_sigma * latent_rng.normal();
        int moved = 0;
        while (x >= bid + tick) {
            bid += tick;
            ++moved;
        }
        while (x < bid) {
            bid -= tick;
            --moved;
        }
        path.next_move.push_back(moved);

        const double f = std::clamp((x - bid) / tick, 0.0, 1.0);
        const double tilt = kappa * (2.0 * f - 1.0);
        const double shock = cfg.depth_mean * cfg.depth_noise;
        bq += cfg.replenish_rate * (cfg.depth_mean * (1.0 + tilt) - bq) +
              shock * depth_rng.normal();
        aq += cfg.replenish_rate * (cfg.depth_mean * (1.0 - tilt) - aq) +
              shock * depth_rng.normal();
        bq = std::max(bq, 0.5);
        aq = std::max(aq, 0.5);
    }
    return path;
}

double microprice_anticipation(const SimPath& path) {
    const std::size_t n = path.size();
    if (n < 100) throw UsageError("microsim: path too short for anticipation");
    std::vector<double> devs;
    std::vector<double> signs;
    devs.reserve(n);
    signs.reserve(n);
    double pending = 0.0;
    std::vector<double> next_sign(n, 0.0);
    for (std::size_t i = n; i-- > 0;) {
        if (path.next_move[i] != 0) pending = path.next_move[i] > 0 ? 1.0 : -1.0;
        next_sign[i] = pending;
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (next_sign[i] == 0.0) break;  // tail rows with no future move
        devs.push_back(path.microprice[i] - path.ticked_mid[i]);
        signs.push_back(next_sign[i]);
    }
    if (devs.size() < 2) return kNaN;
    return kernels::pearson(devs, signs);
}

double spread_position(double mid_fut, double bid_spot, double ask_spot) {
    const double spread = ask_spot - bid_spot;
    if (!(spread > 0.0)) return kNaN;
    return 2.0 * (mid_fut - bid_spot) / spread - 1.0;
}

double position_imbalance_corr(std::span<const double> positions,
                               std::span<const double> imbalances) {
    if (positions.size() != imbalances.size())
        throw UsageError("microsim: positions and imbalances must have equal length");
    if (positions.size() < 3)
        throw UsageError("microsim: need at least 3 rows for a correlation");
    return kernels::pearson(positions, imbalances);
}

double twin_position_correlation(const SimConfig& coarse, int fine_factor) {
    if (fine_factor < 2) throw UsageError("microsim: fine_factor must be at least 2");
    SimConfig fine = coarse;
    fine.tick = coarse.tick / static_cast<double>(fine_factor);
    const SimPath cp = simulate(coarse);
    const SimPath fp = simulate(fine);
    std::vector<double> positions(cp.size());
    const double half = 0.5 * coarse.tick;
    for (std::size_t i = 0; i < cp.size(); ++i) {
        positions[i] = spread_position(fp.ticked_mid[i], cp.ticked_mid[i] - half,
                                       cp.ticked_mid[i] + half);
    }
    return position_imbalance_corr(positions, cp.imbalance);
}

LadderResult run_ladder(const SimConfig& base,
                        std::span<const double> tick_multipliers, int n_seeds) {
    if (tick_multipliers.empty()) throw UsageError("microsim: empty tick ladder");
    if (n_seeds < 1) throw UsageError("microsim: n_seeds must be at least 1");
    LadderResult out;
    for (const double mult : tick_multipliers) {
        if (!(mult > 0.0)) throw UsageError("microsim: tick multipliers must be positive");
        SimConfig cfg = base;
        cfg.tick = base.tick * mult;
        double sum_ant = 0.0;
        double sum_q95 = 0.0;
        for (int s = 0; s < n_seeds; ++s) {
            cfg.seed = base.seed + static_cast<std::uint64_t>(s);
            const SimPath path = simulate(cfg);
            sum_ant += microprice_anticipation(path);
            std::vector<double> shifts(path.size());
            for (std::size_t i = 0; i < path.size(); ++i)
                shifts[i] = std::fabs(path.microprice[i] - path.ticked_mid[i]) / base.initial_mid;
            sum_q95 += stats::quantile(std::move(shifts), 0.95);
        }
        LadderRung rung;
        rung.tick_mult = mult;
        rung.rel_tick = cfg.tick / base.initial_mid;
        rung.anticipation = sum_ant / n_seeds;
        rung.shift_q95 = sum_q95 / n_seeds;
        out.rungs.push_back(rung);
    }
    std::vector<double> rel(out.rungs.size());
    std::vector<double> ant(out.rungs.size());
    std::vector<double> q95(out.rungs.size());
    for (std::size_t i = 0; i < out.rungs.size(); ++i) {
        rel[i] = out.rungs[i].rel_tick;
        ant[i] = out.rungs[i].anticipation;
        q95[i] = out.rungs[i].shift_q95;
    }
    out.assoc_anticipation = stats::spearman(rel, ant);
    out.assoc_shift_q95 = stats::spearman(rel, q95);
    return out;
}

void write_path_csv(const SimPath& path, const std::string& out_path) {
    io::LineWriter w(out_path);
    w.write("step,ticked_mid,bid_qty,ask_qty,imbalance,microprice");
    std::string line;
    for (std::size_t i = 0; i < path.size(); ++i) {
        line.clear();
        line += std::to_string(i);
        line.push_back(',');
        io::append_double(line, path.ticked_mid[i]);
        line.push_back(',');
        io::append_double(line, path.bid_qty[i]);
        line.push_back(',');
        io::append_double(line, path.ask_qty[i]);
        line.push_back(',');
        io::append_double(line, path.imbalance[i]);
        line.push_back(',');
        io::append_double(line, path.microprice[i]);
        w.write(line);
    }
}

nlohmann::json ladder_json(const LadderResult& r) {
    nlohmann::json rungs = nlohmann::json::array();
    for (const auto& rung : r.rungs) {
        rungs.push_back({{"tick_mult", rung.tick_mult},
                         {"rel_tick", rung.rel_tick},
                         {"anticipation", rung.anticipation},
                         {"shift_q95", rung.shift_q95}});
    }
    return nlohmann::json{{"rungs", rungs},
                          {"assoc_anticipation", r.assoc_anticipation},
                          {"assoc_shift_q95", r.assoc_shift_q95}};
}

}  // namespace ticklab::microsim
