#include "ticklab/microsim.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "ticklab/errors.hpp"
#include "ticklab/io.hpp"
#include "ticklab/rng.hpp"

namespace ms = ticklab::microsim;
using ticklab::Rng;
using ticklab::UsageError;

namespace {

ms::SimConfig slow_cell_config() {
    ms::SimConfig cfg;
    cfg.tick = 0.5;
    cfg.latent_sigma = 0.05;
    cfg.replenish_rate = 0.3;
    cfg.imbalance_gain = 0.8;
    cfg.steps = 100000;
    cfg.seed = 11;
    return cfg;
}

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST(Microsim, ConfigValidation) {
    ms::SimConfig cfg;
    cfg.tick = 0.0;
    EXPECT_THROW(ms::simulate(cfg), UsageError);
    cfg = ms::SimConfig{};
    cfg.steps = 0;
    EXPECT_THROW(ms::simulate(cfg), UsageError);
    cfg = ms::SimConfig{};
    cfg.replenish_rate = 1.5;
    EXPECT_THROW(ms::simulate(cfg), UsageError);
    cfg = ms::SimConfig{};
    cfg.depth_mean = -1.0;
    EXPECT_THROW(ms::simulate(cfg), UsageError);
}

TEST(Microsim, DeterministicUnderSeed) {
    ms::SimConfig cfg;
    cfg.steps = 2000;
    cfg.seed = 7;
    const auto a = ms::simulate(cfg);
    const auto b = ms::simulate(cfg);
    EXPECT_EQ(a.ticked_mid, b.ticked_mid);
    EXPECT_EQ(a.bid_qty, b.bid_qty);
    EXPECT_EQ(a.ask_qty, b.ask_qty);
    EXPECT_EQ(a.imbalance, b.imbalance);
    EXPECT_EQ(a.microprice, b.microprice);
    EXPECT_EQ(a.latent, b.latent);
    EXPECT_EQ(a.next_move, b.next_move);

    cfg.seed = 8;
    const auto c = ms::simulate(cfg);
    EXPECT_NE(a.ticked_mid, c.ticked_mid);
}

TEST(Microsim, BalancedBookMakesMicropriceEqualMid) {
    ms::SimConfig cfg;
    cfg.steps = 5000;
    const auto path = ms::simulate(cfg);
    EXPECT_EQ(path.microprice[0], path.ticked_mid[0]);
    EXPECT_EQ(path.imbalance[0], 0.0);

    // Without gain or noise the depths never leave depth_mean.
    cfg.imbalance_gain = 0.0;
    cfg.depth_noise = 0.0;
    const auto flat = ms::simulate(cfg);
    for (std::size_t i = 0; i < flat.size(); ++i) {
        ASSERT_EQ(flat.bid_qty[i], cfg.depth_mean);
        ASSERT_EQ(flat.ask_qty[i], cfg.depth_mean);
        ASSERT_EQ(flat.imbalance[i], 0.0);
        ASSERT_EQ(flat.microprice[i], flat.ticked_mid[i]);
    }
}

TEST(Microsim, PathInvariantsHoldEverywhere) {
    Rng rng(404);
    for (int rep = 0; rep < 5; ++rep) {
        ms::SimConfig cfg;
        cfg.tick = rng.uniform(0.05, 1.0);
        cfg.latent_sigma = rng.uniform(0.01, 0.2);
        cfg.imbalance_gain = rng.uniform(0.0, 1.5);
        cfg.depth_noise = rng.uniform(0.0, 0.4);
        cfg.replenish_rate = rng.uniform(0.05, 0.9);
        cfg.steps = 4000;
        cfg.seed = 100 + static_cast<std::uint64_t>(rep);
        const auto path = ms::simulate(cfg);
        const double half = 0.5 * cfg.tick;
        for (std::size_t i = 0; i < path.size(); ++i) {
            const double bid = path.ticked_mid[i] - half;
            const double ask = path.ticked_mid[i] + half;
            ASSERT_GE(path.microprice[i], bid);
            ASSERT_LE(path.microprice[i], ask);
            ASSERT_LE(std::fabs(path.imbalance[i]), 1.0);
            ASSERT_GE(path.bid_qty[i], 0.5);
            ASSERT_GE(path.ask_qty[i], 0.5);
            // The latent price stays inside the recorded cell.
            ASSERT_GE(path.latent[i], bid - 1e-9);
            ASSERT_LT(path.latent[i], ask + 1e-9);
            if (i + 1 < path.size()) {
                ASSERT_NEAR(path.ticked_mid[i + 1] - path.ticked_mid[i],
                            cfg.tick * path.next_move[i], 1e-9);
            }
        }
    }
}

TEST(Microsim, ZeroGainMoveDirectionIsSymmetric) {
    ms::SimConfig cfg;
    cfg.tick = 0.1;
    cfg.latent_sigma = 0.05;
    cfg.imbalance_gain = 0.0;
    cfg.steps = 100000;
    cfg.seed = 21;
    const auto path = ms::simulate(cfg);
    std::int64_t up = 0;
    std::int64_t down = 0;
    for (const int m : path.next_move) {
        if (m > 0) ++up;
        if (m < 0) ++down;
    }
    const double n = static_cast<double>(up + down);
    ASSERT_GT(n, 1000.0);
    const double freq = static_cast<double>(up) / n;
    const double band = 3.0 * 0.5 / std::sqrt(n);
    EXPECT_NEAR(freq, 0.5, band);
}

TEST(Microsim, ImbalancePredictsNextMoveWithGain) {
    const auto cfg = slow_cell_config();
    const auto path = ms::simulate(cfg);
    std::vector<double> moves(path.size());
    for (std::size_t i = 0; i < path.size(); ++i)
        moves[i] = static_cast<double>(path.next_move[i]);
    const double r = ms::position_imbalance_corr(path.imbalance, moves);
    const double n = static_cast<double>(path.size());
    const double t = r * std::sqrt(n - 2.0) / std::sqrt(1.0 - r * r);
    EXPECT_GT(r, 0.0);
    EXPECT_GT(t, 3.1);  // one-sided p < 0.001
}

TEST(Microsim, AnticipationPositiveWithGainAndNullWithout) {
    auto cfg = slow_cell_config();
    const auto strong = ms::simulate(cfg);
    const double with_gain = ms::microprice_anticipation(strong);
    EXPECT_GT(with_gain, 0.05);

    cfg.imbalance_gain = 0.0;
    const auto null_path = ms::simulate(cfg);
    const double without = ms::microprice_anticipation(null_path);
    EXPECT_LT(std::fabs(without), 0.035);

    ms::SimConfig tiny;
    tiny.steps = 50;
    EXPECT_THROW(ms::microprice_anticipation(ms::simulate(tiny)), UsageError);
}

TEST(Microsim, LadderAssociationIsPositive) {
    ms::SimConfig base;
    base.tick = 0.1;
    base.latent_sigma = 0.05;
    base.replenish_rate = 0.3;
    base.imbalance_gain = 0.8;
    base.steps = 4000;
    base.seed = 500;
    const std::vector<double> mults = {1.0, 2.0, 5.0, 10.0};
    const auto ladder = ms::run_ladder(base, mults, 10);
    ASSERT_EQ(ladder.rungs.size(), 4u);
    for (std::size_t i = 0; i < mults.size(); ++i) {
        EXPECT_DOUBLE_EQ(ladder.rungs[i].tick_mult, mults[i]);
        EXPECT_DOUBLE_EQ(ladder.rungs[i].rel_tick, base.tick * mults[i] / base.initial_mid);
    }
    EXPECT_GT(ladder.assoc_shift_q95, 0.0);
    EXPECT_GT(ladder.assoc_anticipation, 0.0);
    EXPECT_GT(ladder.rungs.back().anticipation, ladder.rungs.front().anticipation);
    EXPECT_GT(ladder.rungs.back().shift_q95, ladder.rungs.front().shift_q95);

    EXPECT_THROW(ms::run_ladder(base, mults, 0), UsageError);
    const std::vector<double> empty;
    EXPECT_THROW(ms::run_ladder(base, empty, 5), UsageError);
}

TEST(Microsim, SpreadPositionAnchorsAndInverse) {
    EXPECT_DOUBLE_EQ(ms::spread_position(100.0, 100.0, 101.0), -1.0);
    EXPECT_DOUBLE_EQ(ms::spread_position(101.0, 100.0, 101.0), 1.0);
    EXPECT_DOUBLE_EQ(ms::spread_position(100.5, 100.0, 101.0), 0.0);
    EXPECT_DOUBLE_EQ(ms::spread_position(102.0, 100.0, 101.0), 3.0);
    EXPECT_TRUE(std::isnan(ms::spread_position(100.0, 101.0, 101.0)));
    EXPECT_TRUE(std::isnan(ms::spread_position(100.0, 101.0, 100.5)));

    Rng rng(77);
    for (int i = 0; i < 1000; ++i) {
        const double bid = rng.uniform(50.0, 150.0);
        const double ask = bid + rng.uniform(0.05, 2.0);
        const double x = rng.uniform(-1.5, 1.5);
        const double mid = bid + (x + 1.0) / 2.0 * (ask - bid);
        EXPECT_NEAR(ms::spread_position(mid, bid, ask), x, 1e-12);
    }
}

TEST(Microsim, PositionImbalanceCorrAnchors) {
    const std::vector<double> x = {1.0, 2.0, 3.0, 4.0, 5.0};
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = 2.0 * x[i] + 3.0;
    EXPECT_NEAR(ms::position_imbalance_corr(x, y), 1.0, 1e-12);
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = -x[i];
    EXPECT_NEAR(ms::position_imbalance_corr(x, y), -1.0, 1e-12);
    const std::vector<double> flat(x.size(), 2.0);
    EXPECT_TRUE(std::isnan(ms::position_imbalance_corr(flat, y)));

    const std::vector<double> two = {1.0, 2.0};
    EXPECT_THROW(ms::position_imbalance_corr(two, two), UsageError);
    EXPECT_THROW(ms::position_imbalance_corr(x, two), UsageError);
}

TEST(Microsim, TwinRunsShareLatentWalkAndCorrelate) {
    auto cfg = slow_cell_config();
    cfg.steps = 8000;
    cfg.latent_sigma = 0.04;
    cfg.replenish_rate = 0.45;
    cfg.imbalance_gain = 0.9;
    cfg.depth_noise = 0.08;
    ms::SimConfig fine = cfg;
    fine.tick = cfg.tick / 10.0;
    const auto coarse_path = ms::simulate(cfg);
    const auto fine_path = ms::simulate(fine);
    EXPECT_EQ(coarse_path.latent, fine_path.latent);

    const double corr = ms::twin_position_correlation(cfg, 10);
    EXPECT_GT(corr, 0.8);
    EXPECT_THROW(ms::twin_position_correlation(cfg, 1), UsageError);
}

TEST(Microsim, PathCsvRoundTrips) {
    ms::SimConfig cfg;
    cfg.steps = 3;
    const auto path = ms::simulate(cfg);
    const std::string file = temp_path("ticklab_microsim_path.csv");
    ms::write_path_csv(path, file);
    const std::string text = ticklab::io::read_text_file(file);
    std::remove(file.c_str());

    std::vector<std::string> lines;
    std::size_t start = 0;
    while (start < text.size()) {
        const auto end = text.find('\n', start);
        lines.push_back(text.substr(start, end - start));
        if (end == std::string::npos) break;
        start = end + 1;
    }
    if (!lines.empty() && lines.back().empty()) lines.pop_back();
    ASSERT_EQ(lines.size(), 4u);
    EXPECT_EQ(lines[0], "step,ticked_mid,bid_qty,ask_qty,imbalance,microprice");
    std::vector<std::string_view> fields;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        ticklab::io::split_csv(lines[i], fields);
        ASSERT_EQ(fields.size(), 6u);
        const std::size_t row = i - 1;
        EXPECT_EQ(fields[0], std::to_string(row));
        EXPECT_EQ(ticklab::io::parse_double(fields[1]), path.ticked_mid[row]);
        EXPECT_EQ(ticklab::io::parse_double(fields[2]), path.bid_qty[row]);
        EXPECT_EQ(ticklab::io::parse_double(fields[3]), path.ask_qty[row]);
        EXPECT_EQ(ticklab::io::parse_double(fields[4]), path.imbalance[row]);
        EXPECT_EQ(ticklab::io::parse_double(fields[5]), path.microprice[row]);
    }
}

TEST(Microsim, LadderJsonShape) {
    ms::SimConfig base;
    base.steps = 500;
    base.latent_sigma = 0.05;
    const std::vector<double> mults = {1.0, 4.0};
    const auto ladder = ms::run_ladder(base, mults, 2);
    const auto j = ms::ladder_json(ladder);
    ASSERT_TRUE(j.contains("rungs"));
    ASSERT_EQ(j["rungs"].size(), 2u);
    EXPECT_TRUE(j["rungs"][0].contains("tick_mult"));
    EXPECT_TRUE(j["rungs"][0].contains("rel_tick"));
    EXPECT_TRUE(j["rungs"][0].contains("anticipation"));
    EXPECT_TRUE(j["rungs"][0].contains("shift_q95"));
    EXPECT_TRUE(j.contains("assoc_anticipation"));
    EXPECT_TRUE(j.contains("assoc_shift_q95"));
    EXPECT_EQ(j["rungs"][1]["tick_mult"].get<double>(), 4.0);
}
