#include "ticklab/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <map>
#include <mutex>
#include <thread>
#include <utility>

#include "ticklab/errors.hpp"
#include "ticklab/io.hpp"
#include "ticklab/perfmetrics.hpp"
#include "ticklab/shapley.hpp"

#ifndef TICKLAB_VERSION
#define TICKLAB_VERSION "0.1.0+unknown"
#endif

namespace ticklab::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

std::string version_string() { return TICKLAB_VERSION; }

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const char c : bytes) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hash_hex(std::string_view bytes) {
    static const char* digits = "0123456789abcdef";
    const std::uint64_t h = fnv1a64(bytes);
    std::string out(16, '0');
    for (int i = 0; i < 16; ++i)
        out[static_cast<std::size_t>(i)] = digits[(h >> (60 - 4 * i)) & 0xF];
    return out;
}

std::string file_hash_hex(const std::string& path) {
    return hash_hex(io::read_text_file(path));
}

fs::path resolve_output_dir(const std::string& dir) {
    if (dir.empty()) throw UsageError("output directory is empty");
    fs::path p(dir);
    const char* root = std::getenv("TICKLAB_OUTPUT_ROOT");
    if (root != nullptr && *root != '\0' && p.is_relative()) return fs::path(root) / p;
    return p;
}

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

namespace {

void check_keys(const json& obj, std::initializer_list<std::string_view> allowed,
                const std::string& where) {
    for (const auto& [key, value] : obj.items()) {
        (void)value;
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
            throw UsageError("config: unknown key \"" + key + "\" in " + where);
    }
}

template <typename T>
void read_field(const json& obj, const char* key, T& out) {
    if (obj.contains(key)) out = obj.at(key).get<T>();
}

}  // namespace

RunConfig parse_run_config(const json& doc) {
    RunConfig cfg;
    try {
        if (!doc.is_object()) throw UsageError("config: top level must be an object");
        check_keys(doc,
                   {"assets", "features", "cv", "search", "budget", "seed", "gmadl",
                    "policy", "ingest", "workers", "output_dir"},
                   "the top level");
        if (!doc.contains("assets") || !doc.at("assets").is_array() ||
            doc.at("assets").empty())
            throw UsageError("config: \"assets\" must be a non-empty array");
        for (const auto& a : doc.at("assets")) {
            check_keys(a, {"name", "book_path", "trades_path", "tick"}, "an asset");
            AssetConfig asset;
            asset.name = a.at("name").get<std::string>();
            asset.book_path = a.at("book_path").get<std::string>();
            asset.trades_path = a.at("trades_path").get<std::string>();
            read_field(a, "tick", asset.tick);
            if (asset.name.empty()) throw UsageError("config: empty asset name");
            // Asset names become file-name stems, so keep them path-safe.
            for (const char c : asset.name)
                if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' ||
                      c == '_' || c == '.'))
                    throw UsageError("config: asset name \"" + asset.name +
                                     "\" may use only letters, digits, '.', '-', '_'");
            if (!(asset.tick > 0.0))
                throw UsageError("config: asset \"" + asset.name + "\" needs tick > 0");
            cfg.assets.push_back(std::move(asset));
        }
        for (std::size_t i = 0; i < cfg.assets.size(); ++i)
            for (std::size_t k = i + 1; k < cfg.assets.size(); ++k)
                if (cfg.assets[i].name == cfg.assets[k].name)
                    throw UsageError("config: duplicate asset name \"" +
                                     cfg.assets[i].name + "\"");
        if (doc.contains("features")) {
            const auto& f = doc.at("features");
            check_keys(f, {"trade_window_s", "vol_window", "label_horizon_s"},
                       "\"features\"");
            read_field(f, "trade_window_s", cfg.features.trade_window_s);
            read_field(f, "vol_window", cfg.features.vol_window);
            read_field(f, "label_horizon_s", cfg.features.label_horizon_s);
        }
        if (doc.contains("cv")) {
            const auto& c = doc.at("cv");
            check_keys(c, {"train_len", "test_len", "gap", "step"}, "\"cv\"");
            read_field(c, "train_len", cfg.cv.train_len);
            read_field(c, "test_len", cfg.cv.test_len);
            read_field(c, "gap", cfg.cv.gap);
            read_field(c, "step", cfg.cv.step);
        }
        if (doc.contains("search")) {
            const auto& s = doc.at("search");
            check_keys(s,
                       {"depth", "iterations", "learning_rate", "l2_leaf",
                        "subsample", "bins"},
                       "\"search\"");
            read_field(s, "depth", cfg.search.depth);
            read_field(s, "iterations", cfg.search.iterations);
            read_field(s, "learning_rate", cfg.search.learning_rate);
            read_field(s, "l2_leaf", cfg.search.l2_leaf);
            read_field(s, "subsample", cfg.search.subsample);
            read_field(s, "bins", cfg.search.bins);
            if (cfg.search.depth.empty() || cfg.search.iterations.empty() ||
                cfg.search.learning_rate.empty() || cfg.search.l2_leaf.empty() ||
                cfg.search.subsample.empty() || cfg.search.bins.empty())
                throw UsageError("config: search lists must be non-empty");
        }
        read_field(doc, "budget", cfg.budget);
        read_field(doc, "seed", cfg.seed);
        if (doc.contains("gmadl")) {
            const auto& g = doc.at("gmadl");
            check_keys(g, {"a", "b"}, "\"gmadl\"");
            read_field(g, "a", cfg.gmadl.a);
            read_field(g, "b", cfg.gmadl.b);
        }
        if (doc.contains("policy")) {
            const auto& p = doc.at("policy");
            check_keys(p,
                       {"theta", "notional", "taker_fee_rate", "maker_fee_rate",
                        "requote_ticks", "initial_cash"},
                       "\"policy\"");
            read_field(p, "theta", cfg.policy.theta);
            read_field(p, "notional", cfg.policy.notional);
            read_field(p, "taker_fee_rate", cfg.policy.taker_fee_rate);
            read_field(p, "maker_fee_rate", cfg.policy.maker_fee_rate);
            read_field(p, "requote_ticks", cfg.policy.requote_ticks);
            read_field(p, "initial_cash", cfg.policy.initial_cash);
        }
        if (doc.contains("ingest")) {
            const auto& g = doc.at("ingest");
            check_keys(g, {"depth_levels", "max_ffill_ms"}, "\"ingest\"");
            read_field(g, "depth_levels", cfg.depth_levels);
            read_field(g, "max_ffill_ms", cfg.max_ffill_ms);
        }
        read_field(doc, "workers", cfg.workers);
        read_field(doc, "output_dir", cfg.output_dir);
    } catch (const json::exception& e) {
        throw UsageError(std::string("config: ") + e.what());
    }
    if (cfg.budget < 1) throw UsageError("config: budget must be at least 1");
    if (cfg.workers < 1) throw UsageError("config: workers must be at least 1");
    return cfg;
}

json config_json(const RunConfig& cfg) {
    json assets = json::array();
    for (const auto& a : cfg.assets) {
        assets.push_back({{"name", a.name},
                          {"book_path", a.book_path},
                          {"trades_path", a.trades_path},
                          {"tick", a.tick}});
    }
    return json{
        {"assets", assets},
        {"features",
         {{"trade_window_s", cfg.features.trade_window_s},
          {"vol_window", cfg.features.vol_window},
          {"label_horizon_s", cfg.features.label_horizon_s}}},
        {"cv",
         {{"train_len", cfg.cv.train_len},
          {"test_len", cfg.cv.test_len},
          {"gap", cfg.cv.gap},
          {"step", cfg.cv.step}}},
        {"search",
         {{"depth", cfg.search.depth},
          {"iterations", cfg.search.iterations},
          {"learning_rate", cfg.search.learning_rate},
          {"l2_leaf", cfg.search.l2_leaf},
          {"subsample", cfg.search.subsample},
          {"bins", cfg.search.bins}}},
        {"budget", cfg.budget},
        {"seed", cfg.seed},
        {"gmadl", {{"a", cfg.gmadl.a}, {"b", cfg.gmadl.b}}},
        {"policy",
         {{"theta", cfg.policy.theta},
          {"notional", cfg.policy.notional},
          {"taker_fee_rate", cfg.policy.taker_fee_rate},
          {"maker_fee_rate", cfg.policy.maker_fee_rate},
          {"requote_ticks", cfg.policy.requote_ticks},
          {"initial_cash", cfg.policy.initial_cash}}},
        {"ingest",
         {{"depth_levels", cfg.depth_levels}, {"max_ffill_ms", cfg.max_ffill_ms}}},
        {"workers", cfg.workers},
        {"output_dir", cfg.output_dir}};
}

RunConfig load_run_config(const std::string& path) {
    const std::string text = io::read_text_file(path);
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw UsageError("config parse (" + path + "): " + e.what());
    }
    return parse_run_config(doc);
}

// ---------------------------------------------------------------------------
// Synth
// ---------------------------------------------------------------------------

md::SynthRegime regime_from_overrides(const std::vector<std::string>& overrides) {
    md::SynthRegime r;
    const std::map<std::string, double*> doubles = {
        {"tick", &r.tick},
        {"mid0", &r.mid0},
        {"depth_mean", &r.depth_mean},
        {"depth_decay", &r.depth_decay},
        {"qty_noise", &r.qty_noise},
        {"imb_rho", &r.imb_rho},
        {"imb_sigma", &r.imb_sigma},
        {"vol_ticks", &r.vol_ticks},
        {"gain", &r.gain},
        {"trade_rate", &r.trade_rate},
        {"trade_qty_mean", &r.trade_qty_mean},
        {"flow_bias", &r.flow_bias}};
    for (const auto& kv : overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw UsageError("regime override \"" + kv + "\" is not key=value");
        const std::string key = kv.substr(0, eq);
        const std::string value = kv.substr(eq + 1);
        if (key == "depth_levels") {
            r.depth_levels = static_cast<int>(io::parse_i64(value));
        } else if (auto it = doubles.find(key); it != doubles.end()) {
            *it->second = io::parse_double(value);
        } else {
            throw UsageError("unknown regime key \"" + key + "\"");
        }
    }
    return r;
}

namespace {

std::size_t count_data_rows(const std::string& path) {
    io::LineReader reader(path);
    std::string line;
    std::size_t rows = 0;
    while (reader.next(line)) ++rows;
    return rows == 0 ? 0 : rows - 1;  // header
}

json regime_json(const md::SynthRegime& r) {
    return json{{"tick", r.tick},
                {"mid0", r.mid0},
                {"depth_levels", r.depth_levels},
                {"depth_mean", r.depth_mean},
                {"depth_decay", r.depth_decay},
                {"qty_noise", r.qty_noise},
                {"imb_rho", r.imb_rho},
                {"imb_sigma", r.imb_sigma},
                {"vol_ticks", r.vol_ticks},
                {"gain", r.gain},
                {"trade_rate", r.trade_rate},
                {"trade_qty_mean", r.trade_qty_mean},
                {"flow_bias", r.flow_bias}};
}

}  // namespace

SynthResult run_synth(std::uint64_t seed, std::int64_t n_seconds,
                      const md::SynthRegime& regime, const std::string& out_dir) {
    const fs::path out = resolve_output_dir(out_dir);
    fs::create_directories(out);
    SynthResult res;
    res.book_path = out / "book.csv";
    res.trades_path = out / "trades.csv";
    res.provenance_path = out / "provenance.json";
    md::gen_synthetic(seed, n_seconds, regime, res.book_path.string(),
                      res.trades_path.string());
    res.book_rows = count_data_rows(res.book_path.string());
    res.trade_rows = count_data_rows(res.trades_path.string());
    res.book_hash = file_hash_hex(res.book_path.string());
    res.trades_hash = file_hash_hex(res.trades_path.string());
    const json doc{{"seed", seed},
                   {"n_seconds", n_seconds},
                   {"regime", regime_json(regime)},
                   {"book",
                    {{"file", "book.csv"},
                     {"rows", res.book_rows},
                     {"hash", res.book_hash}}},
                   {"trades",
                    {{"file", "trades.csv"},
                     {"rows", res.trade_rows},
                     {"hash", res.trades_hash}}},
                   {"version", version_string()}};
    io::write_text_file(res.provenance_path.string(), doc.dump(2) + "\n");
    return res;
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

namespace {

const char* const kEngines[] = {"taker", "maker", "blend", "bh"};

struct MetricsRow {
    std::string name;
    perf::MetricsReport report;
};

void write_metrics_csv(const std::vector<MetricsRow>& rows, const std::string& path) {
    io::LineWriter w(path);
    w.write("name,arc,asd,ir_star,mdd,mld_years,ir_double_star,n_obs,t_stat,p_value");
    std::string line;
    for (const auto& row : rows) {
        line.clear();
        line += row.name;
        line += ',';
        io::append_double(line, row.report.arc);
        line += ',';
        io::append_double(line, row.report.asd);
        line += ',';
        io::append_double(line, row.report.ir_star);
        line += ',';
        io::append_double(line, row.report.mdd);
        line += ',';
        io::append_double(line, row.report.mld_years);
        line += ',';
        io::append_double(line, row.report.ir_double_star);
        line += ',';
        line += std::to_string(row.report.n_obs);
        line += ',';
        io::append_double(line, row.report.t_stat);
        line += ',';
        io::append_double(line, row.report.p_value);
        w.write(line);
    }
    w.close();
}

std::vector<double> read_equity_net(const std::string& path) {
    io::LineReader reader(path);
    std::string line;
    if (!reader.next(line) || line != "ts,equity_gross,equity_net")
        throw DataError(path + ": not an equity file");
    std::vector<double> net;
    std::vector<std::string_view> fields;
    while (reader.next(line)) {
        io::split_csv(line, fields);
        if (fields.size() != 3)
            throw DataError(path + ": bad equity row \"" + line + "\"");
        net.push_back(io::parse_double(fields[2]));
    }
    return net;
}

std::vector<MetricsRow> metrics_rows_from_backtests(const fs::path& backtests_dir) {
    std::map<std::string, std::map<std::string, std::vector<double>>> by_asset;
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(backtests_dir)) {
        if (entry.path().filename().string().ends_with("_equity.csv"))
            files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
        std::string stem = file.filename().string();
        stem.resize(stem.size() - std::string("_equity.csv").size());
        const auto sep = stem.rfind('_');
        if (sep == std::string::npos)
            throw DataError(file.string() + ": expected <asset>_<engine>_equity.csv");
        const std::string asset = stem.substr(0, sep);
        const std::string engine = stem.substr(sep + 1);
        if (std::find(std::begin(kEngines), std::end(kEngines), engine) ==
            std::end(kEngines))
            throw DataError(file.string() + ": unknown engine \"" + engine + "\"");
        by_asset[asset][engine] = read_equity_net(file.string());
    }
    if (by_asset.empty())
        throw DataError(backtests_dir.string() + ": no equity files");
    std::vector<MetricsRow> rows;
    for (const auto& [asset, engines] : by_asset) {
        const auto bh = engines.find("bh");
        if (bh == engines.end())
            throw DataError("asset \"" + asset + "\" has no bh backtest");
        for (const char* engine : kEngines) {
            const auto it = engines.find(engine);
            if (it == engines.end())
                throw DataError("asset \"" + asset + "\" has no " +
                                std::string(engine) + " backtest");
            MetricsRow row;
            row.name = asset + "-" + engine;
            row.report =
                std::string_view(engine) == "bh"
                    ? perf::compute(it->second, {}, perf::kCryptoPeriodsPerYear)
                    : perf::compute(it->second, bh->second,
                                    perf::kCryptoPeriodsPerYear);
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

}  // namespace

fs::path rebuild_reports(const std::string& run_dir) {
    const fs::path dir(run_dir);
    if (!fs::is_directory(dir / "backtests"))
        throw DataError(run_dir + ": no backtests directory");
    const auto rows = metrics_rows_from_backtests(dir / "backtests");
    fs::create_directories(dir / "reports");
    const fs::path out = dir / "reports" / "metrics.csv";
    write_metrics_csv(rows, out.string());
    return out;
}

// ---------------------------------------------------------------------------
// Run
// ---------------------------------------------------------------------------

namespace {

struct Recorder {
    fs::path out_dir;
    std::mutex mu;
    std::map<std::string, std::string> files;  // relative path -> content hash
    std::vector<std::pair<std::string, double>> timings;  // "stage/asset", s

    void record(const fs::path& rel) {
        const std::string hash = file_hash_hex((out_dir / rel).string());
        std::lock_guard lock(mu);
        files[rel.generic_string()] = hash;
    }
    void time(const std::string& stage, const std::string& asset, double seconds) {
        std::lock_guard lock(mu);
        timings.emplace_back(stage + "/" + asset, seconds);
    }
};

int stage_rank(std::string_view stage) {
    static constexpr std::string_view order[] = {"ingest",  "features", "cv",
                                                 "explain", "backtest", "metrics",
                                                 "reports"};
    for (int i = 0; i < 7; ++i)
        if (order[static_cast<std::size_t>(i)] == stage) return i;
    return 7;
}

template <typename Fn>
auto timed_stage(Recorder& rec, const std::string& stage, const std::string& asset,
                 Fn&& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::string where =
        "stage " + stage + (asset.empty() ? "" : " (asset " + asset + ")") + ": ";
    try {
        if constexpr (std::is_void_v<decltype(fn())>) {
            fn();
            rec.time(stage, asset,
                     std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                                   t0)
                         .count());
        } else {
            auto result = fn();
            rec.time(stage, asset,
                     std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                                   t0)
                         .count());
            return result;
        }
    } catch (const UsageError& e) {
        throw UsageError(where + e.what());
    } catch (const DataError& e) {
        throw DataError(where + e.what());
    } catch (const NumericError& e) {
        throw NumericError(where + e.what());
    } catch (const std::exception& e) {
        throw DataError(where + e.what());
    }
}

shapley::Rows dataset_rows(const gbdt::Dataset& ds) {
    shapley::Rows rows(ds.n_rows(), std::vector<double>(ds.n_features()));
    for (std::size_t f = 0; f < ds.n_features(); ++f)
        for (std::size_t i = 0; i < ds.n_rows(); ++i) rows[i][f] = ds.cols[f][i];
    return rows;
}

struct AssetOutputs {
    shapley::AssetImportance importance;
    std::vector<MetricsRow> metrics;
};

AssetOutputs process_asset(const RunConfig& cfg, const AssetConfig& asset,
                           Recorder& rec) {
    const fs::path& out = rec.out_dir;
    const std::string& name = asset.name;

    md::IngestReport ingest_report;
    const md::AlignedSeries series = timed_stage(rec, "ingest", name, [&] {
        md::IngestConfig icfg;
        icfg.tick = asset.tick;
        icfg.depth_levels = cfg.depth_levels;
        icfg.max_ffill_ms = cfg.max_ffill_ms;
        auto s = md::ingest(asset.book_path, asset.trades_path, icfg, &ingest_report);
        const json doc{{"book_rows_read", ingest_report.book_rows_read},
                       {"book_rows_crossed", ingest_report.book_rows_crossed},
                       {"book_rows_invalid", ingest_report.book_rows_invalid},
                       {"trades_read", ingest_report.trades_read},
                       {"trades_out_of_range", ingest_report.trades_out_of_range},
                       {"grid_points", ingest_report.grid_points},
                       {"valid_points", ingest_report.valid_points},
                       {"stale_points", ingest_report.stale_points},
                       {"max_fill_gap_ms", ingest_report.max_fill_gap_ms}};
        const fs::path rel = fs::path("reports") / (name + "_ingest.json");
        io::write_text_file((out / rel).string(), doc.dump(2) + "\n");
        rec.record(rel);
        return s;
    });

    const feat::FeatureFrame frame = timed_stage(rec, "features", name, [&] {
        auto f = feat::build_frame(series, cfg.features);
        const fs::path rel = fs::path("features") / (name + ".csv");
        feat::write_csv(f, (out / rel).string());
        rec.record(rel);
        return f;
    });

    validation::FoldPlan plan;
    std::vector<validation::FoldRun> runs;
    validation::OuterResult outer;
    timed_stage(rec, "cv", name, [&] {
        plan = validation::make_plan(frame.size(), cfg.cv.train_len, cfg.cv.test_len,
                                     cfg.cv.gap, cfg.cv.step);
        for (std::size_t i = 0; i < plan.folds.size(); ++i) {
            runs.push_back(validation::run_fold(
                frame, plan.folds[i], i, cfg.search, cfg.budget,
                validation::fold_seed(cfg.seed, i), plan.gap, cfg.gmadl));
            const fs::path rel =
                fs::path("models") / (name + "_fold" + std::to_string(i) + ".json");
            io::write_text_file((out / rel).string(),
                                gbdt::serialize(runs.back().model) + "\n");
            rec.record(rel);
        }
        outer = validation::collect_outer(runs, cfg.gmadl);
        const fs::path oof_rel = fs::path("oof") / (name + ".csv");
        validation::write_oof_csv(outer, (out / oof_rel).string());
        rec.record(oof_rel);
        const fs::path sum_rel = fs::path("oof") / (name + "_summary.json");
        io::write_text_file((out / sum_rel).string(),
                            validation::summary_json(outer, plan, cfg.seed).dump(2) +
                                "\n");
        rec.record(sum_rel);
    });

    AssetOutputs result;
    timed_stage(rec, "explain", name, [&] {
        std::vector<double> abs_sum(feat::kNumFeatures, 0.0);
        std::size_t n_rows = 0;
        std::vector<std::array<double, 2>> dependence;
        for (std::size_t i = 0; i < runs.size(); ++i) {
            const auto& fold = plan.folds[i];
            const auto background_ds =
                validation::slice_dataset(frame, fold.train_begin, fold.train_end);
            const auto test_ds =
                validation::slice_dataset(frame, fold.purge_end, fold.test_end);
            const auto background = dataset_rows(background_ds);
            const auto X = dataset_rows(test_ds);
            const auto shap = shapley::explain(runs[i].model, X, background);
            const fs::path rel =
                fs::path("shap") / (name + "_fold" + std::to_string(i) + ".csv");
            shapley::write_csv(shap, (out / rel).string());
            rec.record(rel);
            for (const auto& row : shap.values)
                for (std::size_t f = 0; f < feat::kNumFeatures; ++f)
                    abs_sum[f] += std::fabs(row[f]);
            n_rows += shap.n_rows();
            const auto pairs = shapley::dependence_export(shap, X, "l1_imbalance");
            dependence.insert(dependence.end(), pairs.begin(), pairs.end());
        }
        result.importance.asset = name;
        for (std::size_t f = 0; f < feat::kNumFeatures; ++f) {
            result.importance.features.emplace_back(feat::kFeatureNames[f]);
            result.importance.s.push_back(
                n_rows == 0 ? 0.0 : abs_sum[f] / static_cast<double>(n_rows));
        }
        const fs::path dep_rel =
            fs::path("shap") / (name + "_dependence_l1_imbalance.csv");
        io::LineWriter w((out / dep_rel).string());
        w.write("feature_value,shap_value");
        std::string line;
        for (const auto& pair : dependence) {
            line.clear();
            io::append_double(line, pair[0]);
            line += ',';
            io::append_double(line, pair[1]);
            w.write(line);
        }
        w.close();
        rec.record(dep_rel);
    });

    timed_stage(rec, "backtest", name, [&] {
        std::vector<double> preds(series.size(),
                                  std::numeric_limits<double>::quiet_NaN());
        const std::int64_t t0 = series.grid_ts.front();
        for (std::size_t k = 0; k < outer.oof_ts.size(); ++k) {
            const auto idx = static_cast<std::size_t>(outer.oof_ts[k] - t0);
            preds[idx] = outer.oof_pred[k];
        }
        const exec::Account taker = exec::run_taker(series, preds, cfg.policy);
        const exec::Account maker = exec::run_maker(series, preds, cfg.policy);
        const exec::Account blend = exec::run_blend(taker, maker);
        const exec::Account bh = exec::run_buy_hold(series, cfg.policy);
        const exec::Account* accounts[] = {&taker, &maker, &blend, &bh};
        for (int e = 0; e < 4; ++e) {
            const std::string base = name + "_" + kEngines[e];
            const fs::path eq_rel = fs::path("backtests") / (base + "_equity.csv");
            exec::write_equity_csv(*accounts[e], (out / eq_rel).string());
            rec.record(eq_rel);
            const fs::path tr_rel = fs::path("backtests") / (base + "_trades.csv");
            exec::write_trades_csv(*accounts[e], (out / tr_rel).string());
            rec.record(tr_rel);
        }
    });

    timed_stage(rec, "metrics", name, [&] {
        const auto bh_net = read_equity_net(
            (out / "backtests" / (name + "_bh_equity.csv")).string());
        json per_engine;
        for (const char* engine : kEngines) {
            const fs::path eq = out / "backtests" /
                                (name + "_" + std::string(engine) + "_equity.csv");
            const auto net = read_equity_net(eq.string());
            MetricsRow row;
            row.name = name + "-" + engine;
            row.report = std::string_view(engine) == "bh"
                             ? perf::compute(net, {}, perf::kCryptoPeriodsPerYear)
                             : perf::compute(net, bh_net,
                                             perf::kCryptoPeriodsPerYear);
            per_engine[engine] = perf::report_json(row.report);
            result.metrics.push_back(std::move(row));
        }
        const fs::path rel = fs::path("reports") / (name + "_metrics.json");
        io::write_text_file((out / rel).string(), per_engine.dump(2) + "\n");
        rec.record(rel);
    });

    return result;
}

}  // namespace

RunOutputs run(const RunConfig& cfg) {
    if (cfg.assets.empty()) throw UsageError("run: no assets configured");
    if (cfg.workers < 1) throw UsageError("run: workers must be at least 1");
    const fs::path out = resolve_output_dir(cfg.output_dir);
    for (const char* sub :
         {"features", "models", "oof", "shap", "backtests", "reports"})
        fs::create_directories(out / sub);

    Recorder rec;
    rec.out_dir = out;
    const json canonical = config_json(cfg);
    const std::string cfg_hash = hash_hex(canonical.dump());

    std::vector<AssetOutputs> results(cfg.assets.size());
    std::exception_ptr first_error;
    {
        std::atomic<std::size_t> next{0};
        std::atomic<bool> failed{false};
        std::mutex err_mu;
        auto worker = [&] {
            while (!failed.load()) {
                const std::size_t i = next.fetch_add(1);
                if (i >= cfg.assets.size()) break;
                try {
                    results[i] = process_asset(cfg, cfg.assets[i], rec);
                } catch (...) {
                    std::lock_guard lock(err_mu);
                    if (!first_error) first_error = std::current_exception();
                    failed.store(true);
                    break;
                }
            }
        };
        const std::size_t n_workers = std::min<std::size_t>(
            static_cast<std::size_t>(cfg.workers), cfg.assets.size());
        if (n_workers <= 1) {
            worker();
        } else {
            std::vector<std::thread> pool;
            for (std::size_t i = 0; i < n_workers; ++i) pool.emplace_back(worker);
            for (auto& t : pool) t.join();
        }
    }

    auto write_manifest = [&](const char* status, const std::string& error) {
        json files(json::value_t::object);
        for (const auto& [rel, hash] : rec.files) files[rel] = hash;
        json content{{"config_hash", cfg_hash},
                     {"version", version_string()},
                     {"files", files}};
        json manifest{{"content", content},
                      {"manifest_hash", hash_hex(content.dump())},
                      {"status", status}};
        if (!error.empty()) manifest["error"] = error;
        std::sort(rec.timings.begin(), rec.timings.end(),
                  [](const auto& a, const auto& b) {
                      const auto slash_a = a.first.find('/');
                      const auto slash_b = b.first.find('/');
                      std::string asset_a = a.first.substr(slash_a + 1);
                      std::string asset_b = b.first.substr(slash_b + 1);
                      if (asset_a.empty()) asset_a = "\x7f";  // cross-asset last
                      if (asset_b.empty()) asset_b = "\x7f";
                      if (asset_a != asset_b) return asset_a < asset_b;
                      return stage_rank(a.first.substr(0, slash_a)) <
                             stage_rank(b.first.substr(0, slash_b));
                  });
        json timing = json::array();
        double total = 0.0;
        for (const auto& [key, seconds] : rec.timings) {
            const auto slash = key.find('/');
            timing.push_back({{"stage", key.substr(0, slash)},
                              {"asset", key.substr(slash + 1)},
                              {"seconds", seconds}});
            total += seconds;
        }
        manifest["timing"] = {{"stages", timing}, {"total_seconds", total}};
        io::write_text_file((out / "manifest.json").string(),
                            manifest.dump(2) + "\n");
        return manifest;
    };

    if (first_error) {
        std::string message = "unknown error";
        try {
            std::rethrow_exception(first_error);
        } catch (const std::exception& e) {
            message = e.what();
        }
        write_manifest("stale", message);
        std::rethrow_exception(first_error);
    }

    try {
        timed_stage(rec, "reports", "", [&] {
        const auto rows = metrics_rows_from_backtests(out / "backtests");
        const fs::path metrics_rel = fs::path("reports") / "metrics.csv";
        write_metrics_csv(rows, (out / metrics_rel).string());
        rec.record(metrics_rel);

        std::vector<shapley::AssetImportance> importances;
        for (const auto& r : results) importances.push_back(r.importance);
        std::sort(importances.begin(), importances.end(),
                  [](const auto& a, const auto& b) { return a.asset < b.asset; });
        const auto matrix = importances.size() < 2
                                ? std::vector<std::vector<double>>{{1.0}}
                                : shapley::rank_correlation(importances);
        json names = json::array();
        for (const auto& imp : importances) names.push_back(imp.asset);
        const json doc{{"assets", names}, {"matrix", matrix}};
        const fs::path rc_rel = fs::path("reports") / "rank_correlation.json";
        io::write_text_file((out / rc_rel).string(), doc.dump(2) + "\n");
        rec.record(rc_rel);

        json imp_doc(json::value_t::object);
        for (const auto& imp : importances) {
            json entries = json::array();
            for (std::size_t f = 0; f < imp.features.size(); ++f)
                entries.push_back({{"feature", imp.features[f]}, {"mean_abs_shap", imp.s[f]}});
            imp_doc[imp.asset] = entries;
        }
        const fs::path imp_rel = fs::path("reports") / "importance.json";
        io::write_text_file((out / imp_rel).string(), imp_doc.dump(2) + "\n");
        rec.record(imp_rel);
        });
    } catch (const std::exception& e) {
        write_manifest("stale", e.what());
        throw;
    }

    RunOutputs outputs;
    outputs.out_dir = out;
    outputs.manifest = write_manifest("complete", "");
    outputs.manifest_hash = outputs.manifest["manifest_hash"].get<std::string>();
    return outputs;
}

}  // namespace ticklab::pipeline
