#pragma once

#include <array>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ticklab/gbdt.hpp"

namespace ticklab::shapley {

using Rows = std::vector<std::vector<double>>;  // row-major samples

struct ShapMatrix {
    std::vector<std::vector<double>> values;  // [row][feature]
    double base_value = 0.0;
    std::vector<std::string> feature_names;

    std::size_t n_rows() const { return values.size(); }
    std::size_t n_features() const { return feature_names.size(); }
};

// Exact path-dependent tree Shapley values with background-derived node
// covers, summed over trees and scaled by the learning rate. Every tree
// node must be reached by at least one background row.
ShapMatrix explain(const gbdt::TreeEnsemble& model, const Rows& X,
                   const Rows& background);

// Exponential-time reference: Shapley values of the same cover-conditioned
// expectation game by exhaustive subset enumeration. Usable up to ~16
// features.
std::vector<double> brute_force_shap(const gbdt::TreeEnsemble& model,
                                     std::span<const double> x,
                                     const Rows& background);
double brute_force_base(const gbdt::TreeEnsemble& model, const Rows& background);

// Mean-|SHAP| per feature, descending, ties broken by feature name.
std::vector<std::pair<std::string, double>> global_importance(const ShapMatrix& shap);

struct AssetImportance {
    std::string asset;
    std::vector<std::string> features;
    std::vector<double> s;  // mean-|SHAP| aligned with features
};

// Pairwise Spearman correlation of the importance vectors; unit diagonal.
std::vector<std::vector<double>> rank_correlation(
    const std::vector<AssetImportance>& assets);

// (feature value, shap value) pairs in input row order.
std::vector<std::array<double, 2>> dependence_export(const ShapMatrix& shap,
                                                     const Rows& X,
                                                     const std::string& feature);

// Spearman correlation between relative tick and the per-asset
// high-quantile |imbalance SHAP|; NaN below 3 points.
double tick_size_association(
    const std::vector<std::pair<double, double>>& per_asset);

void write_csv(const ShapMatrix& shap, const std::string& path);

}  // namespace ticklab::shapley
