#pragma once

#include <Eigen/Dense>
#include <vector>

#include "crimecast/rng.hpp"

namespace crimecast {

struct TreeParams {
    int max_depth = 5;
    int min_rows = 8;
    int n_bins = 64;
    // required fraction of the parent's squared error a split must remove
    double min_split_improvement = 0.0;
    double row_sample_rate = 1.0;          // consumed by the ensembles
    double col_sample_rate = 1.0;          // columns considered per split
    double col_sample_rate_per_tree = 1.0; // columns available to a whole tree
    void validate() const;
};

struct TreeNode {
    int feature = -1;        // -1 marks a leaf
    double threshold = 0.0;  // rows with x[feature] <= threshold go left
    double value = 0.0;      // leaf prediction (node mean)
    int left = -1;
    int right = -1;
    bool is_leaf() const { return feature < 0; }
};

class RegressionTree {
public:
    double predict_row(const Eigen::Ref<const Eigen::RowVectorXd>& row) const;
    Eigen::VectorXd predict(const Eigen::MatrixXd& x) const;
    const std::vector<TreeNode>& nodes() const { return nodes_; }
    std::vector<TreeNode>& nodes() { return nodes_; }
    int depth() const;

private:
    std::vector<TreeNode> nodes_;  // nodes_[0] is the root
};

// Candidate split thresholds: global quantile cut points of the training
// column (deduplicated, never the maximum).
std::vector<double> quantile_thresholds(std::vector<double> values, int n_bins);

RegressionTree fit_regression_tree(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                   const TreeParams& params, Rng& rng);

// Restriction to given rows (duplicates allowed: bootstrap resamples) and a
// column whitelist; quantiles are computed on the restricted rows.
RegressionTree fit_regression_tree_subset(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                          const std::vector<int>& rows,
                                          const std::vector<int>& cols,
                                          const TreeParams& params, Rng& rng);

}  // namespace crimecast
