#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "crimecast/tree.hpp"

namespace crimecast {

enum class EnsembleKind { RF, GBM };

struct EnsembleFit {
    EnsembleKind kind = EnsembleKind::RF;
    std::vector<RegressionTree> trees;
    std::vector<double> stage_weights;  // boosting: learn_rate * annealing^m
    double base_prediction = 0.0;       // boosting offset (training mean)
    int n_trees_used = 0;
    std::uint64_t rng_seed = 0;
    double learn_rate = 0.0;
    double learn_rate_annealing = 1.0;
    // one (tree count, validation MSE) pair per scoring round
    std::vector<std::pair<int, double>> score_history;

    Eigen::VectorXd predict(const Eigen::MatrixXd& x) const;
};

struct RfOptions {
    int n_trees = 50;
    bool bootstrap = true;  // disabled only to make single-tree tests exact
};

EnsembleFit fit_rf(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                   const TreeParams& params, const RfOptions& options, std::uint64_t seed);

struct GbmOptions {
    double learn_rate = 0.1;
    double learn_rate_annealing = 1.0;
    int max_trees = 100;
    bool early_stopping = true;
    int score_every = 10;          // trees per scoring round
    int patience = 5;              // consecutive non-improving rounds before stopping
    double min_improvement = 1e-4; // required relative MSE decrease (0.01%)
};

// Validation rows drive early stopping; pass empty matrices only with
// early_stopping disabled.
EnsembleFit fit_gbm(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                    const Eigen::MatrixXd& x_val, const Eigen::VectorXd& y_val,
                    const TreeParams& params, const GbmOptions& options, std::uint64_t seed);

double mean_squared_error(const Eigen::VectorXd& actual, const Eigen::VectorXd& predicted);

}  // namespace crimecast
