#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "ticklab/execution.hpp"
#include "ticklab/features.hpp"
#include "ticklab/gbdt.hpp"
#include "ticklab/marketdata.hpp"
#include "ticklab/validation.hpp"

namespace ticklab::pipeline {

struct AssetConfig {
    std::string name;
    std::string book_path;
    std::string trades_path;
    double tick = 0.01;
};

struct CvConfig {
    std::size_t train_len = 12000;
    std::size_t test_len = 4000;
    std::size_t gap = 60;
    std::size_t step = 4000;
};

struct RunConfig {
    std::vector<AssetConfig> assets;
    feat::FeatureConfig features;
    CvConfig cv;
    validation::SearchSpace search;
    int budget = 12;
    std::uint64_t seed = 1;
    gbdt::GmadlParams gmadl;
    exec::SignalPolicy policy;
    int depth_levels = 5;
    std::int64_t max_ffill_ms = 5000;
    int workers = 1;
    std::string output_dir;
};

// Strict: unknown keys anywhere are usage errors, so typos cannot silently
// fall back to defaults.
RunConfig parse_run_config(const nlohmann::json& doc);

// Canonical round trip with every default filled in; its dump is what the
// config hash covers.
nlohmann::json config_json(const RunConfig& cfg);

// Reads and parses; relative asset paths stay relative to the process cwd.
RunConfig load_run_config(const std::string& path);

std::string version_string();

std::uint64_t fnv1a64(std::string_view bytes);
std::string hash_hex(std::string_view bytes);
std::string file_hash_hex(const std::string& path);

// Relative directories resolve under $TICKLAB_OUTPUT_ROOT when it is set.
std::filesystem::path resolve_output_dir(const std::string& dir);

struct RunOutputs {
    std::filesystem::path out_dir;
    std::string manifest_hash;
    nlohmann::json manifest;
};

// Executes ingest -> features -> cv -> explain -> backtest -> metrics per
// asset (fanned out over a bounded worker pool), then the cross-asset
// reports, writing the artifact tree and manifest.json under the resolved
// output directory. On a stage failure a manifest with status "stale" is
// written before the error propagates.
RunOutputs run(const RunConfig& cfg);

struct SynthResult {
    std::filesystem::path book_path;
    std::filesystem::path trades_path;
    std::filesystem::path provenance_path;
    std::size_t book_rows = 0;
    std::size_t trade_rows = 0;
    std::string book_hash;
    std::string trades_hash;
};

SynthResult run_synth(std::uint64_t seed, std::int64_t n_seconds,
                      const md::SynthRegime& regime, const std::string& out_dir);

// Applies "key=value" overrides to the default regime; unknown keys are
// usage errors.
md::SynthRegime regime_from_overrides(const std::vector<std::string>& overrides);

// Recomputes reports/metrics.csv from the backtests of an existing run
// directory; returns the file path. Byte-identical to the original when the
// backtests are unchanged.
std::filesystem::path rebuild_reports(const std::string& run_dir);

}  // namespace ticklab::pipeline
