#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "ticklab/errors.hpp"
#include "ticklab/features.hpp"
#include "ticklab/io.hpp"
#include "ticklab/marketdata.hpp"
#include "ticklab/microsim.hpp"
#include "ticklab/pipeline.hpp"

namespace tk = ticklab;
namespace fs = std::filesystem;

namespace {

struct SynthArgs {
    std::string out_dir;
    std::uint64_t seed = 1;
    std::int64_t n_seconds = 3600;
    std::vector<std::string> overrides;
};

int cmd_synth(const SynthArgs& args) {
    const auto regime = tk::pipeline::regime_from_overrides(args.overrides);
    const auto res =
        tk::pipeline::run_synth(args.seed, args.n_seconds, regime, args.out_dir);
    std::printf("book %s: %zu rows (%s)\n", res.book_path.string().c_str(),
                res.book_rows, res.book_hash.c_str());
    std::printf("trades %s: %zu rows (%s)\n", res.trades_path.string().c_str(),
                res.trade_rows, res.trades_hash.c_str());
    std::printf("provenance %s\n", res.provenance_path.string().c_str());
    return 0;
}

struct IngestArgs {
    std::string book, trades, out_dir;
    std::string name = "asset";
    double tick = 0.01;
    int depth = 5;
    std::int64_t max_ffill_ms = 5000;
};

int cmd_ingest(const IngestArgs& args) {
    tk::md::IngestConfig cfg;
    cfg.tick = args.tick;
    cfg.depth_levels = args.depth;
    cfg.max_ffill_ms = args.max_ffill_ms;
    tk::md::IngestReport report;
    const auto series = tk::md::ingest(args.book, args.trades, cfg, &report);
    const fs::path out = tk::pipeline::resolve_output_dir(args.out_dir);
    fs::create_directories(out);
    const fs::path book_out = out / (args.name + "_book.csv");
    const fs::path trades_out = out / (args.name + "_trades.csv");
    tk::md::serialize(series, book_out.string(), trades_out.string());
    const nlohmann::json doc{
        {"book_rows_read", report.book_rows_read},
        {"book_rows_crossed", report.book_rows_crossed},
        {"book_rows_invalid", report.book_rows_invalid},
        {"trades_read", report.trades_read},
        {"trades_out_of_range", report.trades_out_of_range},
        {"grid_points", report.grid_points},
        {"valid_points", report.valid_points},
        {"stale_points", report.stale_points},
        {"max_fill_gap_ms", report.max_fill_gap_ms}};
    const fs::path report_out = out / (args.name + "_ingest.json");
    tk::io::write_text_file(report_out.string(), doc.dump(2) + "\n");
    std::printf("grid %zu points (%zu valid), trades %zu; wrote %s, %s, %s\n",
                report.grid_points, report.valid_points, report.trades_read,
                book_out.string().c_str(), trades_out.string().c_str(),
                report_out.string().c_str());
    return 0;
}

struct FeaturesArgs {
    std::string book, trades, out;
    double tick = 0.01;
    int depth = 5;
    std::int64_t max_ffill_ms = 5000;
    tk::feat::FeatureConfig fc;
};

int cmd_features(const FeaturesArgs& args) {
    tk::md::IngestConfig cfg;
    cfg.tick = args.tick;
    cfg.depth_levels = args.depth;
    cfg.max_ffill_ms = args.max_ffill_ms;
    const auto series = tk::md::ingest(args.book, args.trades, cfg, nullptr);
    const auto frame = tk::feat::build_frame(series, args.fc);
    const fs::path out = tk::pipeline::resolve_output_dir(
        fs::path(args.out).parent_path().empty()
            ? "."
            : fs::path(args.out).parent_path().string());
    fs::create_directories(out);
    const fs::path file = out / fs::path(args.out).filename();
    tk::feat::write_csv(frame, file.string());
    std::size_t valid = 0;
    for (const auto v : frame.valid) valid += v;
    std::printf("features %s: %zu rows (%zu valid)\n", file.string().c_str(),
                frame.size(), valid);
    return 0;
}

struct RunArgs {
    std::string config_path;
    std::string output_dir;  // overrides config when set
    std::int64_t seed = -1;
    int budget = -1;
    int workers = -1;
};

int cmd_run(const RunArgs& args) {
    auto cfg = tk::pipeline::load_run_config(args.config_path);
    if (!args.output_dir.empty()) cfg.output_dir = args.output_dir;
    if (args.seed >= 0) cfg.seed = static_cast<std::uint64_t>(args.seed);
    if (args.budget >= 0) cfg.budget = args.budget;
    if (args.workers >= 0) cfg.workers = args.workers;
    const auto outputs = tk::pipeline::run(cfg);
    std::printf("run complete: %s\n", outputs.out_dir.string().c_str());
    std::printf("manifest hash %s\n", outputs.manifest_hash.c_str());
    for (const auto& stage : outputs.manifest["timing"]["stages"]) {
        std::printf("  %-8s %-12s %8.2fs\n",
                    stage["stage"].get<std::string>().c_str(),
                    stage["asset"].get<std::string>().c_str(),
                    stage["seconds"].get<double>());
    }
    return 0;
}

struct SimArgs {
    std::string out_dir;
    tk::microsim::SimConfig cfg;
    std::string ladder;  // comma-separated tick multipliers; empty = path mode
    int seeds = 20;
};

std::vector<double> parse_mults(const std::string& text) {
    std::vector<double> mults;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto comma = text.find(',', start);
        const auto len = comma == std::string::npos ? text.size() - start
                                                    : comma - start;
        mults.push_back(tk::io::parse_double(text.substr(start, len)));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return mults;
}

int cmd_sim(const SimArgs& args) {
    const fs::path out = tk::pipeline::resolve_output_dir(args.out_dir);
    fs::create_directories(out);
    if (!args.ladder.empty()) {
        const auto mults = parse_mults(args.ladder);
        const auto ladder = tk::microsim::run_ladder(args.cfg, mults, args.seeds);
        const fs::path json_out = out / "ladder.json";
        tk::io::write_text_file(json_out.string(),
                                tk::microsim::ladder_json(ladder).dump(2) + "\n");
        const fs::path csv_out = out / "ladder.csv";
        tk::io::LineWriter w(csv_out.string());
        w.write("tick_mult,rel_tick,anticipation,shift_q95");
        std::string line;
        for (const auto& rung : ladder.rungs) {
            line.clear();
            tk::io::append_double(line, rung.tick_mult);
            line += ',';
            tk::io::append_double(line, rung.rel_tick);
            line += ',';
            tk::io::append_double(line, rung.anticipation);
            line += ',';
            tk::io::append_double(line, rung.shift_q95);
            w.write(line);
        }
        w.close();
        std::printf("ladder: %zu rungs, assoc_anticipation %.4f, assoc_shift_q95 %.4f\n",
                    ladder.rungs.size(), ladder.assoc_anticipation,
                    ladder.assoc_shift_q95);
        std::printf("wrote %s, %s\n", json_out.string().c_str(),
                    csv_out.string().c_str());
        return 0;
    }
    const auto path = tk::microsim::simulate(args.cfg);
    const fs::path csv_out = out / "path.csv";
    tk::microsim::write_path_csv(path, csv_out.string());
    const double anticipation = tk::microsim::microprice_anticipation(path);
    const nlohmann::json doc{{"seed", args.cfg.seed},
                             {"steps", args.cfg.steps},
                             {"tick", args.cfg.tick},
                             {"initial_mid", args.cfg.initial_mid},
                             {"depth_mean", args.cfg.depth_mean},
                             {"replenish_rate", args.cfg.replenish_rate},
                             {"imbalance_gain", args.cfg.imbalance_gain},
                             {"latent_sigma", args.cfg.latent_sigma},
                             {"depth_noise", args.cfg.depth_noise},
                             {"anticipation", anticipation},
                             {"version", tk::pipeline::version_string()}};
    const fs::path json_out = out / "summary.json";
    tk::io::write_text_file(json_out.string(), doc.dump(2) + "\n");
    std::printf("path: %zu steps, anticipation %.4f\n", path.size(), anticipation);
    std::printf("wrote %s, %s\n", csv_out.string().c_str(),
                json_out.string().c_str());
    return 0;
}

int cmd_report(const std::string& run_dir) {
    const auto path = tk::pipeline::rebuild_reports(run_dir);
    const std::string text = tk::io::read_text_file(path.string());
    std::fputs(text.c_str(), stdout);
    std::printf("wrote %s\n", path.string().c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"limit-order-book research pipeline"};
    app.require_subcommand(1);

    SynthArgs synth;
    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic market");
    synth_cmd->add_option("--out-dir", synth.out_dir, "output directory")->required();
    synth_cmd->add_option("--seed", synth.seed, "RNG seed");
    synth_cmd->add_option("--n-seconds", synth.n_seconds, "grid length in seconds");
    synth_cmd->add_option("--set", synth.overrides,
                          "regime override key=value (repeatable)");

    IngestArgs ingest;
    auto* ingest_cmd =
        app.add_subcommand("ingest", "align book and trades onto the 1s grid");
    ingest_cmd->add_option("--book", ingest.book, "book CSV path")->required();
    ingest_cmd->add_option("--trades", ingest.trades, "trades CSV path")->required();
    ingest_cmd->add_option("--out-dir", ingest.out_dir, "output directory")
        ->required();
    ingest_cmd->add_option("--name", ingest.name, "asset name for output files");
    ingest_cmd->add_option("--tick", ingest.tick, "price tick size");
    ingest_cmd->add_option("--depth", ingest.depth, "book levels to keep");
    ingest_cmd->add_option("--max-ffill-ms", ingest.max_ffill_ms,
                           "staleness bound for forward fills");

    FeaturesArgs features;
    auto* features_cmd =
        app.add_subcommand("features", "build the feature frame CSV");
    features_cmd->add_option("--book", features.book, "book CSV path")->required();
    features_cmd->add_option("--trades", features.trades, "trades CSV path")
        ->required();
    features_cmd->add_option("--out", features.out, "output CSV path")->required();
    features_cmd->add_option("--tick", features.tick, "price tick size");
    features_cmd->add_option("--depth", features.depth, "book levels to keep");
    features_cmd->add_option("--max-ffill-ms", features.max_ffill_ms,
                             "staleness bound for forward fills");
    features_cmd->add_option("--trade-window", features.fc.trade_window_s,
                             "trailing trade window in seconds");
    features_cmd->add_option("--vol-window", features.fc.vol_window,
                             "volatility window in seconds");
    features_cmd->add_option("--horizon", features.fc.label_horizon_s,
                             "label horizon in seconds");

    RunArgs run_args;
    auto* run_cmd = app.add_subcommand("run", "execute the full pipeline");
    run_cmd->add_option("--config", run_args.config_path, "run config JSON")
        ->required();
    run_cmd->add_option("--output-dir", run_args.output_dir,
                        "override the config output directory");
    run_cmd->add_option("--seed", run_args.seed, "override the config seed");
    run_cmd->add_option("--budget", run_args.budget,
                        "override the search budget");
    run_cmd->add_option("--workers", run_args.workers,
                        "override the worker pool size");

    SimArgs sim;
    auto* sim_cmd = app.add_subcommand("sim", "run the tick-cell microsimulation");
    sim_cmd->add_option("--out-dir", sim.out_dir, "output directory")->required();
    sim_cmd->add_option("--seed", sim.cfg.seed, "RNG seed");
    sim_cmd->add_option("--steps", sim.cfg.steps, "simulation steps");
    sim_cmd->add_option("--tick", sim.cfg.tick, "tick size");
    sim_cmd->add_option("--mid", sim.cfg.initial_mid, "initial mid price");
    sim_cmd->add_option("--depth-mean", sim.cfg.depth_mean, "mean displayed depth");
    sim_cmd->add_option("--replenish", sim.cfg.replenish_rate,
                        "depth replenish rate per step");
    sim_cmd->add_option("--gain", sim.cfg.imbalance_gain,
                        "depth tilt per unit cell position");
    sim_cmd->add_option("--latent-sigma", sim.cfg.latent_sigma,
                        "latent price vol per step");
    sim_cmd->add_option("--depth-noise", sim.cfg.depth_noise,
                        "depth shock scale");
    sim_cmd->add_option("--ladder", sim.ladder,
                        "comma-separated tick multipliers; enables ladder mode");
    sim_cmd->add_option("--seeds", sim.seeds, "seeds per ladder rung");

    std::string report_dir;
    auto* report_cmd =
        app.add_subcommand("report", "rebuild reports from an existing run");
    report_cmd->add_option("--run-dir", report_dir, "run output directory")
        ->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (synth_cmd->parsed()) return cmd_synth(synth);
        if (ingest_cmd->parsed()) return cmd_ingest(ingest);
        if (features_cmd->parsed()) return cmd_features(features);
        if (run_cmd->parsed()) return cmd_run(run_args);
        if (sim_cmd->parsed()) return cmd_sim(sim);
        if (report_cmd->parsed()) return cmd_report(report_dir);
    } catch (const tk::UsageError& e) {
        std::fprintf(stderr, "usage error: %s\n", e.what());
        return 2;
    } catch (const tk::DataError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return 3;
    } catch (const tk::NumericError& e) {
        std::fprintf(stderr, "numeric error: %s\n", e.what());
        return 4;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
