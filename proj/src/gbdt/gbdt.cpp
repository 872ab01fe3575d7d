#include "ticklab/gbdt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "json.hpp"
#include "ticklab/errors.hpp"
#include "ticklab/hash.hpp"
#include "ticklab/kernels.hpp"
#include "ticklab/rng.hpp"

namespace ticklab::gbdt {

namespace {

void validate(const Hyperparams& hp) {
    if (hp.depth < 1 || hp.depth > 8) throw UsageError("depth out of range 1..8");
    if (hp.iterations < 10 || hp.iterations > 1000)
        throw UsageError("iterations out of range 10..1000");
    if (hp.learning_rate < 1e-3 || hp.learning_rate > 0.3)
        throw UsageError("learning_rate out of range 1e-3..0.3");
    if (hp.l2_leaf < 0.0 || hp.l2_leaf > 100.0)
        throw UsageError("l2_leaf out of range 0..100");
    if (!(hp.subsample > 0.0) || hp.subsample > 1.0)
        throw UsageError("subsample out of range (0,1]");
    if (hp.bins < 16 || hp.bins > 512) throw UsageError("bins out of range 16..512");
    if (hp.min_leaf < 1) throw UsageError("min_leaf must be positive");
}

struct NodeRows {
    int node = 0;
    int depth = 0;
    std::vector<std::uint32_t> rows;
};

struct SplitChoice {
    double gain = 0.0;
    int feature = -1;
    int threshold = -1;
};

double leaf_value(double sum, std::size_t count, double lambda) {
    return sum / (static_cast<double>(count) + lambda);
}

}  // namespace

int bin_of(double x, const std::vector<double>& edges) {
    const auto it = std::lower_bound(edges.begin(), edges.end(), x);
    return static_cast<int>(it - edges.begin());
}

std::vector<double> quantile_edges(const std::vector<double>& col, int bins) {
    std::vector<double> v(col);
    std::sort(v.begin(), v.end());
    std::vector<double> edges;
    const std::size_t n = v.size();
    for (int k = 1; k < bins; ++k) {
        const std::size_t pos =
            static_cast<std::size_t>(k) * n / static_cast<std::size_t>(bins);
        if (pos == 0) continue;
        const double e = v[pos - 1];
        if (edges.empty() || e > edges.back()) edges.push_back(e);
    }
    return edges;
}

TreeEnsemble fit(const Dataset& data, const Hyperparams& hp, std::uint64_t seed) {
    validate(hp);
    const std::size_t n = data.n_rows();
    const std::size_t nf = data.n_features();
    if (nf == 0) throw UsageError("dataset has no features");
    for (const auto& c : data.cols)
        if (c.size() != n) throw UsageError("feature column length mismatch");
    if (n < 2 * static_cast<std::size_t>(hp.min_leaf))
        throw UsageError("too few rows: need at least 2*min_leaf");

    TreeEnsemble model;
    model.learning_rate = hp.learning_rate;
    model.feature_names = data.names.empty()
                              ? std::vector<std::string>(nf, std::string())
                              : data.names;
    model.bin_edges.reserve(nf);
    for (const auto& c : data.cols) model.bin_edges.push_back(quantile_edges(c, hp.bins));

    double ysum = 0.0;
    for (double v : data.y) ysum += v;
    model.base_score = ysum / static_cast<double>(n);

    const auto [ymin, ymax] = std::minmax_element(data.y.begin(), data.y.end());
    if (*ymin == *ymax) {
        model.base_score = *ymin;
        return model;  // constant label: zero residuals, zero trees
    }

    std::vector<std::vector<std::uint16_t>> codes(nf);
    std::size_t max_bins = 1;
    for (std::size_t f = 0; f < nf; ++f) {
        codes[f].resize(n);
        const auto& edges = model.bin_edges[f];
        for (std::size_t i = 0; i < n; ++i)
            codes[f][i] = static_cast<std::uint16_t>(bin_of(data.cols[f][i], edges));
        max_bins = std::max(max_bins, edges.size() + 1);
    }

    std::vector<double> pred(n, model.base_score);
    std::vector<double> resid(n);
    std::vector<double> hist_sum(max_bins);
    std::vector<std::size_t> hist_cnt(max_bins);
    Rng rng(seed);
    const double lambda = hp.l2_leaf;
    const auto min_leaf = static_cast<std::size_t>(hp.min_leaf);

    for (int it = 0; it < hp.iterations; ++it) {
        for (std::size_t i = 0; i < n; ++i) resid[i] = data.y[i] - pred[i];

        std::vector<std::uint32_t> rows;
        rows.reserve(n);
        if (hp.subsample >= 1.0) {
            for (std::size_t i = 0; i < n; ++i) rows.push_back(static_cast<std::uint32_t>(i));
        } else {
            for (std::size_t i = 0; i < n; ++i)
                if (rng.bernoulli(hp.subsample)) rows.push_back(static_cast<std::uint32_t>(i));
        }

        Tree tree;
        if (rows.empty()) {
            tree.nodes.push_back(TreeNode{});
            model.trees.push_back(std::move(tree));
            continue;
        }

        std::vector<NodeRows> frontier;
        tree.nodes.push_back(TreeNode{});
        frontier.push_back({0, 0, std::move(rows)});

        while (!frontier.empty()) {
            NodeRows cur = std::move(frontier.back());
            frontier.pop_back();

            double total_sum = 0.0;
            for (auto r : cur.rows) total_sum += resid[r];
            const std::size_t total_cnt = cur.rows.size();

            SplitChoice best;
            if (cur.depth < hp.depth && total_cnt >= 2 * min_leaf) {
                const double parent_score =
                    total_sum * total_sum / (static_cast<double>(total_cnt) + lambda);
                for (std::size_t f = 0; f < nf; ++f) {
                    const std::size_t nb = model.bin_edges[f].size() + 1;
                    if (nb < 2) continue;
                    std::fill(hist_sum.begin(), hist_sum.begin() + static_cast<long>(nb), 0.0);
                    std::fill(hist_cnt.begin(), hist_cnt.begin() + static_cast<long>(nb), 0u);
                    const auto& code = codes[f];
                    for (auto r : cur.rows) {
                        hist_sum[code[r]] += resid[r];
                        hist_cnt[code[r]] += 1;
                    }
                    double left_sum = 0.0;
                    std::size_t left_cnt = 0;
                    for (std::size_t t = 0; t + 1 < nb; ++t) {
                        left_sum += hist_sum[t];
                        left_cnt += hist_cnt[t];
                        const std::size_t right_cnt = total_cnt - left_cnt;
                        if (left_cnt < min_leaf) continue;
                        if (right_cnt < min_leaf) break;
                        const double right_sum = total_sum - left_sum;
                        const double gain =
                            left_sum * left_sum / (static_cast<double>(left_cnt) + lambda) +
                            right_sum * right_sum / (static_cast<double>(right_cnt) + lambda) -
                            parent_score;
                        if (gain > best.gain) {
                            best.gain = gain;
                            best.feature = static_cast<int>(f);
                            best.threshold = static_cast<int>(t);
                        }
                    }
                }
            }

            if (best.feature < 0) {
                auto& leaf = tree.nodes[static_cast<std::size_t>(cur.node)];
                leaf.feature = -1;
                leaf.value = leaf_value(total_sum, total_cnt, lambda);
                continue;
            }

            std::vector<std::uint32_t> left_rows, right_rows;
            left_rows.reserve(cur.rows.size());
            right_rows.reserve(cur.rows.size());
            const auto& code = codes[static_cast<std::size_t>(best.feature)];
            for (auto r : cur.rows) {
                if (code[r] <= best.threshold)
                    left_rows.push_back(r);
                else
                    right_rows.push_back(r);
            }
            const int left_id = static_cast<int>(tree.nodes.size());
            const int right_id = left_id + 1;
            tree.nodes.push_back(TreeNode{});
            tree.nodes.push_back(TreeNode{});
            auto& node = tree.nodes[static_cast<std::size_t>(cur.node)];
            node.feature = best.feature;
            node.bin_threshold = best.threshold;
            node.left = left_id;
            node.right = right_id;
            frontier.push_back({right_id, cur.depth + 1, std::move(right_rows)});
            frontier.push_back({left_id, cur.depth + 1, std::move(left_rows)});
        }

        for (std::size_t i = 0; i < n; ++i) {
            int id = 0;
            while (!tree.nodes[static_cast<std::size_t>(id)].is_leaf()) {
                const auto& nd = tree.nodes[static_cast<std::size_t>(id)];
                id = codes[static_cast<std::size_t>(nd.feature)][i] <= nd.bin_threshold
                         ? nd.left
                         : nd.right;
            }
            pred[i] += hp.learning_rate * tree.nodes[static_cast<std::size_t>(id)].value;
        }
        model.trees.push_back(std::move(tree));
    }
    return model;
}

double predict(const TreeEnsemble& model, std::span<const double> x) {
    if (x.size() != model.n_features())
        throw UsageError("feature vector length does not match model");
    double acc = 0.0;
    for (const auto& tree : model.trees) {
        int id = 0;
        while (!tree.nodes[static_cast<std::size_t>(id)].is_leaf()) {
            const auto& nd = tree.nodes[static_cast<std::size_t>(id)];
            const auto f = static_cast<std::size_t>(nd.feature);
            id = bin_of(x[f], model.bin_edges[f]) <= nd.bin_threshold ? nd.left
                                                                      : nd.right;
        }
        acc += tree.nodes[static_cast<std::size_t>(id)].value;
    }
    return model.base_score + model.learning_rate * acc;
}

std::vector<double> predict(const TreeEnsemble& model, const Dataset& data) {
    std::vector<std::size_t> col_of(model.n_features());
    for (std::size_t f = 0; f < model.n_features(); ++f) {
        if (data.names.empty() || model.feature_names[f].empty()) {
            col_of[f] = f;
            continue;
        }
        const auto it = std::find(data.names.begin(), data.names.end(),
                                  model.feature_names[f]);
        if (it == data.names.end())
            throw UsageError("missing feature '" + model.feature_names[f] + "'");
        col_of[f] = static_cast<std::size_t>(it - data.names.begin());
    }
    if (model.n_features() > data.n_features())
        throw UsageError("dataset has fewer features than model");

    std::vector<double> out(data.n_rows());
    std::vector<double> x(model.n_features());
    for (std::size_t i = 0; i < data.n_rows(); ++i) {
        for (std::size_t f = 0; f < model.n_features(); ++f)
            x[f] = data.cols[col_of[f]][i];
        out[i] = predict(model, x);
    }
    return out;
}

double gmadl(std::span<const double> returns, std::span<const double> preds,
             const GmadlParams& p) {
    if (returns.size() != preds.size()) throw UsageError("gmadl length mismatch");
    if (returns.empty()) throw UsageError("gmadl needs at least one sample");
    if (!(p.a > 0.0) || !(p.b > 0.0)) throw UsageError("gmadl parameters must be positive");
    return kernels::gmadl_mean(returns, preds, p.a, p.b);
}

double r2(std::span<const double> returns, std::span<const double> preds) {
    if (returns.size() != preds.size()) throw UsageError("r2 length mismatch");
    if (returns.size() < 2) throw UsageError("r2 needs at least two samples");
    const auto mv = kernels::mean_var(returns);
    if (mv.m2 == 0.0) return std::numeric_limits<double>::quiet_NaN();
    double sse = 0.0;
    for (std::size_t i = 0; i < returns.size(); ++i) {
        const double d = returns[i] - preds[i];
        sse += d * d;
    }
    return 1.0 - sse / mv.m2;
}

namespace {

void preorder_ids(const Tree& tree, int id, std::vector<int>& order) {
    order.push_back(id);
    const auto& nd = tree.nodes[static_cast<std::size_t>(id)];
    if (!nd.is_leaf()) {
        preorder_ids(tree, nd.left, order);
        preorder_ids(tree, nd.right, order);
    }
}

}  // namespace

std::string serialize(const TreeEnsemble& model) {
    nlohmann::json doc;
    doc["version"] = "tlgb-1";
    doc["base_score"] = model.base_score;
    doc["learning_rate"] = model.learning_rate;
    doc["feature_names"] = model.feature_names;
    doc["bin_edges"] = model.bin_edges;
    nlohmann::json trees = nlohmann::json::array();
    for (const auto& tree : model.trees) {
        std::vector<int> order;
        preorder_ids(tree, 0, order);
        std::vector<int> renum(tree.nodes.size());
        for (std::size_t k = 0; k < order.size(); ++k)
            renum[static_cast<std::size_t>(order[k])] = static_cast<int>(k);
        nlohmann::json nodes = nlohmann::json::array();
        for (int old_id : order) {
            const auto& nd = tree.nodes[static_cast<std::size_t>(old_id)];
            nodes.push_back(
                {{"f", nd.feature},
                 {"t", nd.bin_threshold},
                 {"l", nd.is_leaf() ? -1 : renum[static_cast<std::size_t>(nd.left)]},
                 {"r", nd.is_leaf() ? -1 : renum[static_cast<std::size_t>(nd.right)]},
                 {"v", nd.value}});
        }
        trees.push_back(std::move(nodes));
    }
    doc["trees"] = std::move(trees);
    return doc.dump();
}

TreeEnsemble deserialize(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("model parse: ") + e.what());
    }
    if (doc.value("version", "") != "tlgb-1")
        throw DataError("unsupported model version");
    TreeEnsemble model;
    model.base_score = doc.at("base_score").get<double>();
    model.learning_rate = doc.at("learning_rate").get<double>();
    model.feature_names = doc.at("feature_names").get<std::vector<std::string>>();
    model.bin_edges = doc.at("bin_edges").get<std::vector<std::vector<double>>>();
    for (const auto& col : model.bin_edges)
        for (std::size_t k = 1; k < col.size(); ++k)
            if (!(col[k - 1] < col[k]))
                throw DataError("bin edges not strictly increasing");
    for (const auto& tj : doc.at("trees")) {
        Tree tree;
        for (const auto& nj : tj) {
            TreeNode nd;
            nd.feature = nj.at("f").get<int>();
            nd.bin_threshold = nj.at("t").get<int>();
            nd.left = nj.at("l").get<int>();
            nd.right = nj.at("r").get<int>();
            nd.value = nj.at("v").get<double>();
            tree.nodes.push_back(nd);
        }
        const auto count = static_cast<int>(tree.nodes.size());
        for (const auto& nd : tree.nodes) {
            if (nd.is_leaf()) continue;
            if (nd.feature >= static_cast<int>(model.bin_edges.size()))
                throw DataError("tree split references unknown feature");
            const auto& edges = model.bin_edges[static_cast<std::size_t>(nd.feature)];
            if (nd.bin_threshold < 0 || nd.bin_threshold >= static_cast<int>(edges.size()))
                throw DataError("bin threshold outside the feature's bin count");
            if (nd.left < 0 || nd.left >= count || nd.right < 0 || nd.right >= count)
                throw DataError("tree child index out of range");
        }
        model.trees.push_back(std::move(tree));
    }
    return model;
}

std::string model_id(const TreeEnsemble& model) {
    return content_hash(serialize(model));
}

}  // namespace ticklab::gbdt
