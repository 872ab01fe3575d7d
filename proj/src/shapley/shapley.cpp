#include "ticklab/shapley.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>

#include "ticklab/errors.hpp"
#include "ticklab/io.hpp"
#include "ticklab/stats.hpp"

namespace ticklab::shapley {

namespace {

using gbdt::Tree;
using gbdt::TreeEnsemble;

int route_child(const TreeEnsemble& model, const Tree& tree, int node,
                std::span<const double> x) {
    const auto& nd = tree.nodes[static_cast<std::size_t>(node)];
    const auto f = static_cast<std::size_t>(nd.feature);
    return gbdt::bin_of(x[f], model.bin_edges[f]) <= nd.bin_threshold ? nd.left
                                                                      : nd.right;
}

std::vector<double> node_covers(const TreeEnsemble& model, const Tree& tree,
                                const Rows& background) {
    std::vector<double> cover(tree.nodes.size(), 0.0);
    for (const auto& row : background) {
        int id = 0;
        cover[0] += 1.0;
        while (!tree.nodes[static_cast<std::size_t>(id)].is_leaf()) {
            id = route_child(model, tree, id, row);
            cover[static_cast<std::size_t>(id)] += 1.0;
        }
    }
    for (std::size_t j = 0; j < cover.size(); ++j)
        if (cover[j] <= 0.0)
            throw NumericError("background leaves a tree node uncovered");
    return cover;
}

double tree_expectation(const Tree& tree, const std::vector<double>& cover) {
    double acc = 0.0;
    for (std::size_t j = 0; j < tree.nodes.size(); ++j)
        if (tree.nodes[j].is_leaf()) acc += tree.nodes[j].value * cover[j];
    return acc / cover[0];
}

struct PathElement {
    int feature = -1;
    double zero = 1.0;  // proportion of paths flowing through when excluded
    double one = 1.0;   // whether x's own path flows through when included
    double pweight = 1.0;
};

void extend(std::vector<PathElement>& m, double pz, double po, int pi) {
    const int l = static_cast<int>(m.size());
    m.push_back({pi, pz, po, l == 0 ? 1.0 : 0.0});
    for (int j = l - 1; j >= 0; --j) {
        m[static_cast<std::size_t>(j + 1)].pweight +=
            po * m[static_cast<std::size_t>(j)].pweight * (j + 1) / (l + 1);
        m[static_cast<std::size_t>(j)].pweight =
            pz * m[static_cast<std::size_t>(j)].pweight * (l - j) / (l + 1);
    }
}

void unwind(std::vector<PathElement>& m, int idx) {
    const int l = static_cast<int>(m.size());
    const double one = m[static_cast<std::size_t>(idx)].one;
    const double zero = m[static_cast<std::size_t>(idx)].zero;
    double n = m[static_cast<std::size_t>(l - 1)].pweight;
    for (int j = l - 2; j >= 0; --j) {
        auto& el = m[static_cast<std::size_t>(j)];
        if (one != 0.0) {
            const double t = el.pweight;
            el.pweight = n * l / ((j + 1) * one);
            n = t - el.pweight * zero * (l - 1 - j) / l;
        } else {
            el.pweight = el.pweight * l / (zero * (l - 1 - j));
        }
    }
    for (int j = idx; j < l - 1; ++j) {
        m[static_cast<std::size_t>(j)].feature = m[static_cast<std::size_t>(j + 1)].feature;
        m[static_cast<std::size_t>(j)].zero = m[static_cast<std::size_t>(j + 1)].zero;
        m[static_cast<std::size_t>(j)].one = m[static_cast<std::size_t>(j + 1)].one;
    }
    m.pop_back();
}

double unwound_sum(const std::vector<PathElement>& m, int idx) {
    const int l = static_cast<int>(m.size());
    const double one = m[static_cast<std::size_t>(idx)].one;
    const double zero = m[static_cast<std::size_t>(idx)].zero;
    double total = 0.0;
    if (one != 0.0) {
        double n = m[static_cast<std::size_t>(l - 1)].pweight;
        for (int j = l - 2; j >= 0; --j) {
            const double tmp = n * l / ((j + 1) * one);
            total += tmp;
            n = m[static_cast<std::size_t>(j)].pweight - tmp * zero * (l - 1 - j) / l;
        }
    } else {
        for (int j = l - 2; j >= 0; --j)
            total += m[static_cast<std::size_t>(j)].pweight * l /
                     (zero * (l - 1 - j));
    }
    return total;
}

int find_first(const std::vector<PathElement>& m, int feature) {
    for (std::size_t i = 1; i < m.size(); ++i)
        if (m[i].feature == feature) return static_cast<int>(i);
    return -1;
}

void tree_recurse(const TreeEnsemble& model, const Tree& tree,
                  const std::vector<double>& cover, std::span<const double> x,
                  int node, std::vector<PathElement> m, double pz, double po,
                  int pi, std::span<double> phi) {
    extend(m, pz, po, pi);
    const auto& nd = tree.nodes[static_cast<std::size_t>(node)];
    if (nd.is_leaf()) {
        for (int i = 1; i < static_cast<int>(m.size()); ++i) {
            const double w = unwound_sum(m, i);
            const auto& el = m[static_cast<std::size_t>(i)];
            phi[static_cast<std::size_t>(el.feature)] +=
                w * (el.one - el.zero) * nd.value;
        }
        return;
    }
    const int hot = route_child(model, tree, node, x);
    const int cold = hot == nd.left ? nd.right : nd.left;
    double iz = 1.0, io = 1.0;
    const int k = find_first(m, nd.feature);
    if (k >= 0) {
        iz = m[static_cast<std::size_t>(k)].zero;
        io = m[static_cast<std::size_t>(k)].one;
        unwind(m, k);
    }
    const double rj = cover[static_cast<std::size_t>(node)];
    tree_recurse(model, tree, cover, x, hot, m,
                 iz * cover[static_cast<std::size_t>(hot)] / rj, io, nd.feature,
                 phi);
    tree_recurse(model, tree, cover, x, cold, std::move(m),
                 iz * cover[static_cast<std::size_t>(cold)] / rj, 0.0,
                 nd.feature, phi);
}

void check_rows(const TreeEnsemble& model, const Rows& rows, const char* what) {
    if (rows.empty()) throw UsageError(std::string(what) + " must be nonempty");
    for (const auto& r : rows)
        if (r.size() != model.n_features())
            throw UsageError(std::string(what) + " feature count does not match model");
}

}  // namespace

ShapMatrix explain(const TreeEnsemble& model, const Rows& X, const Rows& background) {
    check_rows(model, X, "X");
    check_rows(model, background, "background");
    const std::size_t nf = model.n_features();

    std::vector<std::vector<double>> covers;
    covers.reserve(model.trees.size());
    double base = model.base_score;
    for (const auto& tree : model.trees) {
        covers.push_back(node_covers(model, tree, background));
        base += model.learning_rate * tree_expectation(tree, covers.back());
    }

    ShapMatrix out;
    out.base_value = base;
    out.feature_names = model.feature_names;
    out.values.resize(X.size());

    std::vector<double> phi(nf);
    for (std::size_t i = 0; i < X.size(); ++i) {
        std::vector<double> total(nf, 0.0);
        for (std::size_t t = 0; t < model.trees.size(); ++t) {
            std::fill(phi.begin(), phi.end(), 0.0);
            tree_recurse(model, model.trees[t], covers[t], X[i], 0, {}, 1.0, 1.0,
                         -1, phi);
            for (std::size_t f = 0; f < nf; ++f)
                total[f] += model.learning_rate * phi[f];
        }
        out.values[i] = std::move(total);
    }
    return out;
}

namespace {

// Independent cover router for the reference implementation.
std::vector<double> brute_covers(const TreeEnsemble& model, const Tree& tree,
                                 const Rows& background) {
    std::vector<double> cover(tree.nodes.size(), 0.0);
    for (const auto& row : background) {
        int id = 0;
        while (true) {
            cover[static_cast<std::size_t>(id)] += 1.0;
            const auto& nd = tree.nodes[static_cast<std::size_t>(id)];
            if (nd.is_leaf()) break;
            const auto f = static_cast<std::size_t>(nd.feature);
            id = gbdt::bin_of(row[f], model.bin_edges[f]) <= nd.bin_threshold
                     ? nd.left
                     : nd.right;
        }
    }
    for (double c : cover)
        if (c <= 0.0) throw NumericError("background leaves a tree node uncovered");
    return cover;
}

double expvalue(const TreeEnsemble& model, const Tree& tree,
                const std::vector<double>& cover, std::span<const double> x,
                unsigned mask, int node) {
    const auto& nd = tree.nodes[static_cast<std::size_t>(node)];
    if (nd.is_leaf()) return nd.value;
    const auto f = static_cast<std::size_t>(nd.feature);
    if (mask & (1u << f)) {
        const int next =
            gbdt::bin_of(x[f], model.bin_edges[f]) <= nd.bin_threshold ? nd.left
                                                                       : nd.right;
        return expvalue(model, tree, cover, x, mask, next);
    }
    const double wl = cover[static_cast<std::size_t>(nd.left)];
    const double wr = cover[static_cast<std::size_t>(nd.right)];
    return (wl * expvalue(model, tree, cover, x, mask, nd.left) +
            wr * expvalue(model, tree, cover, x, mask, nd.right)) /
           cover[static_cast<std::size_t>(node)];
}

}  // namespace

std::vector<double> brute_force_shap(const TreeEnsemble& model,
                                     std::span<const double> x,
                                     const Rows& background) {
    const std::size_t nf = model.n_features();
    if (nf > 16) throw UsageError("brute-force Shapley limited to 16 features");
    std::vector<std::vector<double>> covers;
    for (const auto& tree : model.trees)
        covers.push_back(brute_covers(model, tree, background));

    const unsigned full = nf >= 32 ? 0xFFFFFFFFu : (1u << nf) - 1u;
    std::vector<double> v(static_cast<std::size_t>(full) + 1, 0.0);
    for (unsigned mask = 0; mask <= full; ++mask) {
        double acc = 0.0;
        for (std::size_t t = 0; t < model.trees.size(); ++t)
            acc += expvalue(model, model.trees[t], covers[t], x, mask, 0);
        v[mask] = model.base_score + model.learning_rate * acc;
    }

    std::vector<double> fact(nf + 1, 1.0);
    for (std::size_t k = 1; k <= nf; ++k) fact[k] = fact[k - 1] * static_cast<double>(k);

    std::vector<double> phi(nf, 0.0);
    for (std::size_t j = 0; j < nf; ++j) {
        const unsigned bit = 1u << j;
        for (unsigned mask = 0; mask <= full; ++mask) {
            if (mask & bit) continue;
            const auto s = static_cast<std::size_t>(std::popcount(mask));
            const double w = fact[s] * fact[nf - s - 1] / fact[nf];
            phi[j] += w * (v[mask | bit] - v[mask]);
        }
    }
    return phi;
}

double brute_force_base(const TreeEnsemble& model, const Rows& background) {
    double acc = model.base_score;
    for (const auto& tree : model.trees) {
        const auto cover = brute_covers(model, tree, background);
        double leaves = 0.0;
        for (std::size_t j = 0; j < tree.nodes.size(); ++j)
            if (tree.nodes[j].is_leaf()) leaves += tree.nodes[j].value * cover[j];
        acc += model.learning_rate * leaves / cover[0];
    }
    return acc;
}

std::vector<std::pair<std::string, double>> global_importance(const ShapMatrix& shap) {
    if (shap.values.empty()) throw UsageError("empty shap matrix");
    const std::size_t nf = shap.n_features();
    std::vector<std::pair<std::string, double>> out(nf);
    for (std::size_t f = 0; f < nf; ++f) {
        double acc = 0.0;
        for (const auto& row : shap.values) acc += std::fabs(row[f]);
        out[f] = {shap.feature_names[f], acc / static_cast<double>(shap.n_rows())};
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    return out;
}

std::vector<std::vector<double>> rank_correlation(
    const std::vector<AssetImportance>& assets) {
    if (assets.size() < 2) throw UsageError("rank correlation needs at least 2 assets");
    for (const auto& a : assets) {
        if (a.features != assets.front().features)
            throw UsageError("feature sets differ across assets");
        if (a.s.size() != a.features.size())
            throw UsageError("importance length does not match feature set");
    }
    const std::size_t n = assets.size();
    std::vector<std::vector<double>> rho(n, std::vector<double>(n, 1.0));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double r = stats::spearman(assets[i].s, assets[j].s);
            rho[i][j] = r;
            rho[j][i] = r;
        }
    return rho;
}

std::vector<std::array<double, 2>> dependence_export(const ShapMatrix& shap,
                                                     const Rows& X,
                                                     const std::string& feature) {
    const auto it = std::find(shap.feature_names.begin(), shap.feature_names.end(),
                              feature);
    if (it == shap.feature_names.end())
        throw UsageError("unknown feature '" + feature + "'");
    const auto f = static_cast<std::size_t>(it - shap.feature_names.begin());
    if (X.size() != shap.n_rows()) throw UsageError("X/shap row count mismatch");
    std::vector<std::array<double, 2>> out;
    out.reserve(X.size());
    for (std::size_t i = 0; i < X.size(); ++i)
        out.push_back({X[i][f], shap.values[i][f]});
    return out;
}

double tick_size_association(
    const std::vector<std::pair<double, double>>& per_asset) {
    if (per_asset.size() < 3) return std::numeric_limits<double>::quiet_NaN();
    std::vector<double> ticks, hi;
    for (const auto& [t, q] : per_asset) {
        ticks.push_back(t);
        hi.push_back(q);
    }
    return stats::spearman(ticks, hi);
}

void write_csv(const ShapMatrix& shap, const std::string& path) {
    io::LineWriter w(path);
    std::string line;
    for (const auto& name : shap.feature_names) {
        line += name;
        line += ',';
    }
    line += "base_value";
    w.write(line);
    for (const auto& row : shap.values) {
        line.clear();
        for (double v : row) {
            io::append_double(line, v);
            line += ',';
        }
        io::append_double(line, shap.base_value);
        w.write(line);
    }
    w.close();
}

}  // namespace ticklab::shapley
