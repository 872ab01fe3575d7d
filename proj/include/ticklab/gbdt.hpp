#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace ticklab::gbdt {

struct GmadlParams {
    double a = 1000.0;
    double b = 1.0;
};

struct Hyperparams {
    int depth = 4;
    int iterations = 100;
    double learning_rate = 0.1;
    double l2_leaf = 1.0;
    double subsample = 1.0;
    int bins = 256;
    int min_leaf = 64;
};

// Leaf nodes have feature == -1 and carry value; split nodes route
// bin(x) <= bin_threshold to left.
struct TreeNode {
    int feature = -1;
    int bin_threshold = 0;
    int left = -1;
    int right = -1;
    double value = 0.0;

    bool is_leaf() const { return feature < 0; }
};

struct Tree {
    std::vector<TreeNode> nodes;  // nodes[0] is the root, preorder
};

struct TreeEnsemble {
    double base_score = 0.0;
    double learning_rate = 0.1;
    std::vector<Tree> trees;
    std::vector<std::vector<double>> bin_edges;  // per feature, strictly increasing
    std::vector<std::string> feature_names;

    std::size_t n_features() const { return bin_edges.size(); }
};

// Column-major training matrix. All values must be finite.
struct Dataset {
    std::vector<std::vector<double>> cols;
    std::vector<double> y;
    std::vector<std::string> names;

    std::size_t n_rows() const { return y.size(); }
    std::size_t n_features() const { return cols.size(); }
};

// Bin id of x under a feature's sorted cut points: the first k with
// x <= edges[k], or edges.size() if none.
int bin_of(double x, const std::vector<double>& edges);

// Interior quantile cut points taken from the data values themselves, so
// bin assignments depend only on ranks.
std::vector<double> quantile_edges(const std::vector<double>& col, int bins);

TreeEnsemble fit(const Dataset& data, const Hyperparams& hp, std::uint64_t seed);

double predict(const TreeEnsemble& model, std::span<const double> x);
std::vector<double> predict(const TreeEnsemble& model, const Dataset& data);

// Mean of -(sigmoid(a*R*Rhat) - 1/2)*|R|^b; lower is better, 0 at Rhat==0.
double gmadl(std::span<const double> returns, std::span<const double> preds,
             const GmadlParams& p);

// 1 - SSE/SST about the evaluation-set label mean; NaN when labels are
// constant.
double r2(std::span<const double> returns, std::span<const double> preds);

std::string serialize(const TreeEnsemble& model);
TreeEnsemble deserialize(const std::string& text);
std::string model_id(const TreeEnsemble& model);

}  // namespace ticklab::gbdt
