#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace crimecast {

// One validation window's permutation importance: how much the MSE inflates
// when a column's values are shuffled, averaged over several shuffles.
struct ImportanceReport {
    std::vector<std::string> variables;
    std::vector<double> importance;  // mean MSE inflation; 0 for constant columns
    std::vector<int> ranks;          // permutation of 1..K, 1 = most important
};

ImportanceReport permutation_importance(
    const std::function<Eigen::VectorXd(const Eigen::MatrixXd&)>& predict,
    const Eigen::MatrixXd& x_validation, const Eigen::VectorXd& y_validation,
    const std::vector<std::string>& variable_names, std::uint64_t seed,
    int n_permutations = 5);

// Aggregation across windows: the average of each variable's per-window rank.
struct MeanRankReport {
    std::vector<std::string> variables;
    std::vector<double> mean_rank;
    std::vector<std::vector<int>> ranks_by_window;  // [window][variable]
};

MeanRankReport mean_ranks(const std::vector<ImportanceReport>& windows);

}  // namespace crimecast
