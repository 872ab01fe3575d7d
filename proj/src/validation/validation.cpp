#include "ticklab/validation.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "ticklab/errors.hpp"
#include "ticklab/io.hpp"
#include "ticklab/kernels.hpp"
#include "ticklab/rng.hpp"

namespace ticklab::validation {

namespace {

constexpr std::uint64_t kSeedStride = 0x9E3779B97F4A7C15ULL;

gbdt::Dataset slice_rows(const gbdt::Dataset& d, std::size_t begin,
                         std::size_t end) {
    gbdt::Dataset out;
    out.names = d.names;
    out.cols.resize(d.cols.size());
    for (std::size_t f = 0; f < d.cols.size(); ++f)
        out.cols[f].assign(d.cols[f].begin() + static_cast<std::ptrdiff_t>(begin),
                           d.cols[f].begin() + static_cast<std::ptrdiff_t>(end));
    out.y.assign(d.y.begin() + static_cast<std::ptrdiff_t>(begin),
                 d.y.begin() + static_cast<std::ptrdiff_t>(end));
    return out;
}

std::vector<double> predict_rows(const gbdt::TreeEnsemble& model,
                                 const gbdt::Dataset& d, std::size_t begin,
                                 std::size_t end) {
    std::vector<double> preds;
    preds.reserve(end - begin);
    std::vector<double> row(d.n_features());
    for (std::size_t i = begin; i < end; ++i) {
        for (std::size_t f = 0; f < d.n_features(); ++f) row[f] = d.cols[f][i];
        preds.push_back(gbdt::predict(model, row));
    }
    return preds;
}

}  // namespace

FoldPlan make_plan(std::size_t n, std::size_t train_len, std::size_t test_len,
                   std::size_t gap, std::size_t step) {
    if (train_len < 1 || test_len < 1 || step < 1)
        throw UsageError("make_plan: train_len, test_len and step must be >= 1");
    if (step < test_len)
        throw UsageError(
            "make_plan: step must be >= test_len to keep test ranges disjoint");
    const std::size_t need = train_len + gap + test_len;
    if (need > n)
        throw UsageError("make_plan: need at least " + std::to_string(need) +
                         " grid rows, have " + std::to_string(n));
    FoldPlan plan;
    plan.gap = gap;
    plan.train_len = train_len;
    plan.test_len = test_len;
    plan.step = step;
    for (std::size_t start = 0; start + need <= n; start += step) {
        Fold f;
        f.train_begin = start;
        f.train_end = start + train_len;
        f.purge_end = f.train_end + gap;
        f.test_end = f.purge_end + test_len;
        plan.folds.push_back(f);
    }
    return plan;
}

gbdt::Hyperparams draw(const SearchSpace& space, Rng& rng) {
    if (space.depth.empty() || space.iterations.empty() ||
        space.learning_rate.empty() || space.l2_leaf.empty() ||
        space.subsample.empty() || space.bins.empty())
        throw UsageError("search space has an empty dimension");
    gbdt::Hyperparams hp;
    hp.depth = space.depth[rng.below(space.depth.size())];
    hp.iterations = space.iterations[rng.below(space.iterations.size())];
    hp.learning_rate = space.learning_rate[rng.below(space.learning_rate.size())];
    hp.l2_leaf = space.l2_leaf[rng.below(space.l2_leaf.size())];
    hp.subsample = space.subsample[rng.below(space.subsample.size())];
    hp.bins = space.bins[rng.below(space.bins.size())];
    return hp;
}

SearchResult search(const gbdt::Dataset& train, const SearchSpace& space,
                    int budget, std::uint64_t seed, std::size_t gap,
                    const gbdt::GmadlParams& gp) {
    if (budget < 1) throw UsageError("search budget must be >= 1");
    const std::size_t n = train.n_rows();
    const std::size_t inner_test = n / 6;
    if (inner_test < 1 || gap + 3 * inner_test >= n)
        throw DataError("training window too small for inner validation (" +
                        std::to_string(n) + " rows)");
    const std::size_t inner_train = n - gap - 3 * inner_test;
    const FoldPlan inner =
        make_plan(n, inner_train, inner_test, gap, inner_test);

    Rng rng(seed);
    SearchResult best;
    double best_score = std::numeric_limits<double>::infinity();
    bool any = false;
    for (int d = 0; d < budget; ++d) {
        const gbdt::Hyperparams hp = draw(space, rng);
        double sum = 0.0;
        bool failed = false;
        for (std::size_t k = 0; k < inner.folds.size(); ++k) {
            const Fold& f = inner.folds[k];
            try {
                const auto sub = slice_rows(train, f.train_begin, f.train_end);
                const std::uint64_t fit_seed =
                    seed ^ (kSeedStride *
                            (static_cast<std::uint64_t>(d) * 8 + k + 1));
                const auto model = gbdt::fit(sub, hp, fit_seed);
                const auto preds = predict_rows(model, train, f.purge_end, f.test_end);
                const std::vector<double> labels(
                    train.y.begin() + static_cast<std::ptrdiff_t>(f.purge_end),
                    train.y.begin() + static_cast<std::ptrdiff_t>(f.test_end));
                sum += gbdt::gmadl(labels, preds, gp);
            } catch (const std::runtime_error&) {
                failed = true;
                break;
            }
        }
        if (failed) continue;
        const double score = sum / static_cast<double>(inner.folds.size());
        any = true;
        if (score < best_score) {
            best_score = score;
            best.best = hp;
            best.best_gmadl = score;
            best.best_draw = static_cast<std::size_t>(d);
        }
    }
    if (!any)
        throw DataError("no hyperparameter candidate trained successfully");
    return best;
}

gbdt::Dataset slice_dataset(const feat::FeatureFrame& frame, std::size_t begin,
                            std::size_t end) {
    if (end > frame.size() || begin > end)
        throw UsageError("slice_dataset: range outside frame");
    gbdt::Dataset d;
    for (auto name : feat::kFeatureNames) d.names.emplace_back(name);
    d.cols.resize(feat::kNumFeatures);
    for (std::size_t i = begin; i < end; ++i) {
        if (!frame.valid[i] || !std::isfinite(frame.label[i])) continue;
        for (std::size_t f = 0; f < feat::kNumFeatures; ++f)
            d.cols[f].push_back(frame.cols[f][i]);
        d.y.push_back(frame.label[i]);
    }
    return d;
}

std::uint64_t fold_seed(std::uint64_t seed, std::size_t fold_id) {
    return seed ^ (kSeedStride * (static_cast<std::uint64_t>(fold_id) + 1));
}

FoldRun run_fold(const feat::FeatureFrame& frame, const Fold& fold,
                 std::size_t fold_id, const SearchSpace& space, int budget,
                 std::uint64_t fold_seed, std::size_t gap,
                 const gbdt::GmadlParams& gp) {
    try {
        FoldRun run;
        run.result.fold_id = fold_id;
        const auto train = slice_dataset(frame, fold.train_begin, fold.train_end);
        const auto picked = search(train, space, budget, fold_seed, gap, gp);
        run.result.winner = picked.best;
        run.result.search_gmadl = picked.best_gmadl;
        run.model = gbdt::fit(train, picked.best, fold_seed);
        run.result.model_id = gbdt::model_id(run.model);
        run.result.n_train = train.n_rows();

        std::vector<double> row(feat::kNumFeatures);
        for (std::size_t i = fold.purge_end; i < fold.test_end; ++i) {
            if (!frame.valid[i] || !std::isfinite(frame.label[i])) continue;
            for (std::size_t f = 0; f < feat::kNumFeatures; ++f)
                row[f] = frame.cols[f][i];
            run.test_ts.push_back(frame.grid_ts[i]);
            run.test_label.push_back(frame.label[i]);
            run.test_pred.push_back(gbdt::predict(run.model, row));
        }
        run.result.n_test = run.test_ts.size();
        run.result.r2 = gbdt::r2(run.test_label, run.test_pred);
        run.result.gmadl = gbdt::gmadl(run.test_label, run.test_pred, gp);
        return run;
    } catch (const UsageError& e) {
        throw UsageError("fold " + std::to_string(fold_id) + ": " + e.what());
    } catch (const DataError& e) {
        throw DataError("fold " + std::to_string(fold_id) + ": " + e.what());
    }
}

OuterResult collect_outer(const std::vector<FoldRun>& runs,
                          const gbdt::GmadlParams& gp) {
    OuterResult out;
    for (const auto& run : runs) {
        out.folds.push_back(run.result);
        for (std::size_t k = 0; k < run.test_ts.size(); ++k) {
            out.oof_ts.push_back(run.test_ts[k]);
            out.oof_label.push_back(run.test_label[k]);
            out.oof_pred.push_back(run.test_pred[k]);
            out.oof_fold.push_back(static_cast<int>(run.result.fold_id));
        }
    }
    out.pooled_r2 = gbdt::r2(out.oof_label, out.oof_pred);
    out.pooled_gmadl = gbdt::gmadl(out.oof_label, out.oof_pred, gp);
    const auto signs = kernels::sign_stats(out.oof_label, out.oof_pred);
    const auto decided = signs.agree + signs.disagree;
    out.hit_rate = decided == 0
                       ? std::numeric_limits<double>::quiet_NaN()
                       : static_cast<double>(signs.agree) /
                             static_cast<double>(decided);
    return out;
}

OuterResult run_outer(const feat::FeatureFrame& frame, const FoldPlan& plan,
                      const SearchSpace& space, int budget, std::uint64_t seed,
                      const gbdt::GmadlParams& gp) {
    if (plan.folds.empty()) throw UsageError("run_outer: empty fold plan");
    if (plan.folds.back().test_end > frame.size())
        throw UsageError("run_outer: plan extends past the frame");
    std::vector<FoldRun> runs;
    runs.reserve(plan.folds.size());
    for (std::size_t i = 0; i < plan.folds.size(); ++i) {
        runs.push_back(run_fold(frame, plan.folds[i], i, space, budget,
                                fold_seed(seed, i), plan.gap, gp));
    }
    return collect_outer(runs, gp);
}

void write_oof_csv(const OuterResult& r, const std::string& path) {
    io::LineWriter w(path);
    w.write("grid_ts,label,pred,fold_id");
    std::string line;
    for (std::size_t i = 0; i < r.oof_ts.size(); ++i) {
        line.clear();
        line += std::to_string(r.oof_ts[i]);
        line += ',';
        io::append_double(line, r.oof_label[i]);
        line += ',';
        io::append_double(line, r.oof_pred[i]);
        line += ',';
        line += std::to_string(r.oof_fold[i]);
        w.write(line);
    }
    w.close();
}

nlohmann::json summary_json(const OuterResult& r, const FoldPlan& plan,
                            std::uint64_t seed) {
    nlohmann::json folds = nlohmann::json::array();
    for (const auto& f : plan.folds)
        folds.push_back({{"train", {f.train_begin, f.train_end}},
                         {"purge", {f.train_end, f.purge_end}},
                         {"test", {f.purge_end, f.test_end}}});
    nlohmann::json results = nlohmann::json::array();
    for (const auto& f : r.folds)
        results.push_back({{"fold_id", f.fold_id},
                           {"model_id", f.model_id},
                           {"winner",
                            {{"depth", f.winner.depth},
                             {"iterations", f.winner.iterations},
                             {"learning_rate", f.winner.learning_rate},
                             {"l2_leaf", f.winner.l2_leaf},
                             {"subsample", f.winner.subsample},
                             {"bins", f.winner.bins}}},
                           {"search_gmadl", f.search_gmadl},
                           {"r2", f.r2},
                           {"gmadl", f.gmadl},
                           {"n_train", f.n_train},
                           {"n_test", f.n_test}});
    return {{"seed", seed},
            {"plan",
             {{"gap", plan.gap},
              {"train_len", plan.train_len},
              {"test_len", plan.test_len},
              {"step", plan.step},
              {"folds", folds}}},
            {"folds", results},
            {"pooled",
             {{"r2", r.pooled_r2},
              {"gmadl", r.pooled_gmadl},
              {"hit_rate", r.hit_rate}}}};
}

}  // namespace ticklab::validation
