#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "ticklab/features.hpp"
#include "ticklab/gbdt.hpp"
#include "ticklab/rng.hpp"

namespace ticklab::validation {

// Half-open grid-index ranges: train [train_begin, train_end),
// purge [train_end, purge_end), test [purge_end, test_end).
struct Fold {
    std::size_t train_begin = 0;
    std::size_t train_end = 0;
    std::size_t purge_end = 0;
    std::size_t test_end = 0;
};

struct FoldPlan {
    std::vector<Fold> folds;
    std::size_t gap = 0;
    std::size_t train_len = 0;
    std::size_t test_len = 0;
    std::size_t step = 0;
};

// Maximal rolling sequence of purged folds. Requires
// train_len + gap + test_len <= n and step >= test_len (test disjointness).
FoldPlan make_plan(std::size_t n, std::size_t train_len, std::size_t test_len,
                   std::size_t gap, std::size_t step);

struct SearchSpace {
    std::vector<int> depth{2, 3, 4, 5, 6};
    std::vector<int> iterations{50, 100, 200, 400};
    std::vector<double> learning_rate{0.02, 0.05, 0.1, 0.2};
    std::vector<double> l2_leaf{0.0, 1.0, 5.0, 20.0};
    std::vector<double> subsample{0.6, 0.8, 1.0};
    std::vector<int> bins{64, 128, 256};
};

// One uniform draw per field, consumed in declaration order so a seed fixes
// the whole candidate sequence.
gbdt::Hyperparams draw(const SearchSpace& space, Rng& rng);

struct SearchResult {
    gbdt::Hyperparams best;
    double best_gmadl = 0.0;  // mean over inner folds
    std::size_t best_draw = 0;
};

// Random search scored by mean GMADL over a 3-fold purged plan carved from
// the training rows (test length = rows/6, same gap, rolling step = test
// length). Candidates that fail to train score +inf; all failing is an error.
SearchResult search(const gbdt::Dataset& train, const SearchSpace& space,
                    int budget, std::uint64_t seed, std::size_t gap,
                    const gbdt::GmadlParams& gp = {});

struct FoldResult {
    std::size_t fold_id = 0;
    std::string model_id;
    gbdt::Hyperparams winner;
    double search_gmadl = 0.0;
    double r2 = 0.0;
    double gmadl = 0.0;
    std::size_t n_train = 0;
    std::size_t n_test = 0;
};

struct OuterResult {
    std::vector<FoldResult> folds;
    std::vector<std::int64_t> oof_ts;
    std::vector<double> oof_label;
    std::vector<double> oof_pred;
    std::vector<int> oof_fold;
    double pooled_r2 = 0.0;
    double pooled_gmadl = 0.0;
    double hit_rate = 0.0;  // sign agreements / (agreements + disagreements)
};

// Search + fit on one fold's training slice only; rows outside the slice are
// never touched, so corrupting them cannot change the model.
struct FoldRun {
    FoldResult result;
    gbdt::TreeEnsemble model;
    std::vector<std::int64_t> test_ts;
    std::vector<double> test_label;
    std::vector<double> test_pred;
};
FoldRun run_fold(const feat::FeatureFrame& frame, const Fold& fold,
                 std::size_t fold_id, const SearchSpace& space, int budget,
                 std::uint64_t fold_seed, std::size_t gap,
                 const gbdt::GmadlParams& gp = {});

std::uint64_t fold_seed(std::uint64_t seed, std::size_t fold_id);

// Pools fold runs, in order, into the out-of-fold result.
OuterResult collect_outer(const std::vector<FoldRun>& runs,
                          const gbdt::GmadlParams& gp = {});

OuterResult run_outer(const feat::FeatureFrame& frame, const FoldPlan& plan,
                      const SearchSpace& space, int budget, std::uint64_t seed,
                      const gbdt::GmadlParams& gp = {});

// Rows usable for fit/score: valid flag set and finite label.
gbdt::Dataset slice_dataset(const feat::FeatureFrame& frame, std::size_t begin,
                            std::size_t end);

void write_oof_csv(const OuterResult& r, const std::string& path);

nlohmann::json summary_json(const OuterResult& r, const FoldPlan& plan,
                            std::uint64_t seed);

}  // namespace ticklab::validation
