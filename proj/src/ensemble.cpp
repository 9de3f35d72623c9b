#include "crimecast/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <utility>

#include "crimecast/errors.hpp"
#include "crimecast/parallel.hpp"

namespace crimecast {

double mean_squared_error(const Eigen::VectorXd& actual, const Eigen::VectorXd& predicted) {
    if (actual.size() != predicted.size() || actual.size() == 0)
        throw ValidationError("MSE needs equal-length non-empty vectors");
    return (actual - predicted).squaredNorm() / static_cast<double>(actual.size());
}

Eigen::VectorXd EnsembleFit::predict(const Eigen::MatrixXd& x) const {
    if (kind == EnsembleKind::RF) {
        Eigen::VectorXd acc = Eigen::VectorXd::Zero(x.rows());
        for (int m = 0; m < n_trees_used; ++m) acc += trees[m].predict(x);
        return acc / static_cast<double>(n_trees_used);
    }
    Eigen::VectorXd acc = Eigen::VectorXd::Constant(x.rows(), base_prediction);
    for (int m = 0; m < n_trees_used; ++m) acc += stage_weights[m] * trees[m].predict(x);
    return acc;
}

namespace {

std::vector<int> sample_columns(int k, double rate, Rng& rng) {
    std::vector<int> cols(k);
    std::iota(cols.begin(), cols.end(), 0);
    if (rate >= 1.0) return cols;
    const auto keep =
        std::max<size_t>(1, static_cast<size_t>(std::ceil(rate * k)));
    std::shuffle(cols.begin(), cols.end(), rng);
    cols.resize(keep);
    std::sort(cols.begin(), cols.end());
    return cols;
}

std::vector<int> sample_rows_without_replacement(int n, double rate, Rng& rng) {
    std::vector<int> rows(n);
    std::iota(rows.begin(), rows.end(), 0);
    if (rate >= 1.0) return rows;
    const auto keep =
        std::max<size_t>(1, static_cast<size_t>(std::floor(rate * n)));
    std::shuffle(rows.begin(), rows.end(), rng);
    rows.resize(keep);
    std::sort(rows.begin(), rows.end());
    return rows;
}

}  // namespace

EnsembleFit fit_rf(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                   const TreeParams& params, const RfOptions& options, std::uint64_t seed) {
    params.validate();
    if (options.n_trees < 1) throw ValidationError("forest needs at least one tree");
    if (x.rows() == 0) throw ValidationError("cannot fit a forest on empty data");
    if (x.rows() != y.size()) throw ValidationError("forest data rows and responses differ");
    const int n = static_cast<int>(x.rows());
    const int k = static_cast<int>(x.cols());

    EnsembleFit fit;
    fit.kind = EnsembleKind::RF;
    fit.rng_seed = seed;
    fit.trees.resize(options.n_trees);
    fit.n_trees_used = options.n_trees;

    parallel_for(options.n_trees, [&](size_t m) {
        Rng rng = make_rng(seed, static_cast<std::uint64_t>(m));
        std::vector<int> rows;
        if (options.bootstrap) {
            std::uniform_int_distribution<int> pick(0, n - 1);
            rows.resize(n);
            for (int i = 0; i < n; ++i) rows[i] = pick(rng);
            std::sort(rows.begin(), rows.end());
        } else {
            rows = sample_rows_without_replacement(n, params.row_sample_rate, rng);
        }
        const std::vector<int> cols = sample_columns(k, params.col_sample_rate_per_tree, rng);
        fit.trees[m] = fit_regression_tree_subset(x, y, rows, cols, params, rng);
    });
    return fit;
}

EnsembleFit fit_gbm(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                    const Eigen::MatrixXd& x_val, const Eigen::VectorXd& y_val,
                    const TreeParams& params, const GbmOptions& options, std::uint64_t seed) {
    params.validate();
    if (x.rows() == 0) throw ValidationError("cannot fit boosting on empty data");
    if (x.rows() != y.size()) throw ValidationError("boosting data rows and responses differ");
    if (!(options.learn_rate > 0.0 && options.learn_rate <= 1.0))
        throw ValidationError("learn rate must lie in (0, 1]");
    if (options.max_trees < 1) throw ValidationError("boosting needs at least one stage");
    if (options.early_stopping && x_val.rows() == 0)
        throw ValidationError("early stopping needs a validation set");
    if (x_val.rows() != y_val.size())
        throw ValidationError("validation rows and responses differ");
    const int n = static_cast<int>(x.rows());
    const int k = static_cast<int>(x.cols());

    EnsembleFit fit;
    fit.kind = EnsembleKind::GBM;
    fit.rng_seed = seed;
    fit.base_prediction = y.mean();
    fit.learn_rate = options.learn_rate;
    fit.learn_rate_annealing = options.learn_rate_annealing;

    Eigen::VectorXd resid = y.array() - fit.base_prediction;
    Eigen::VectorXd val_pred =
        Eigen::VectorXd::Constant(x_val.rows(), fit.base_prediction);

    double best_mse = std::numeric_limits<double>::infinity();       // improvement reference
    double checkpoint_mse = std::numeric_limits<double>::infinity(); // best round seen
    int checkpoint_trees = 0;
    int streak = 0;
    bool stopped = false;

    for (int m = 0; m < options.max_trees; ++m) {
        Rng rng = make_rng(seed, static_cast<std::uint64_t>(m));
        const std::vector<int> rows =
            sample_rows_without_replacement(n, params.row_sample_rate, rng);
        const std::vector<int> cols = sample_columns(k, params.col_sample_rate_per_tree, rng);
        RegressionTree tree = fit_regression_tree_subset(x, resid, rows, cols, params, rng);

        const double rate = options.learn_rate * std::pow(options.learn_rate_annealing, m);
        resid -= rate * tree.predict(x);
        if (x_val.rows() > 0) val_pred += rate * tree.predict(x_val);
        fit.stage_weights.push_back(rate);
        fit.trees.push_back(std::move(tree));

        if (options.early_stopping && (m + 1) % options.score_every == 0) {
            const double mse = mean_squared_error(y_val, val_pred);
            fit.score_history.emplace_back(m + 1, mse);
            if (mse < checkpoint_mse) {
                checkpoint_mse = mse;
                checkpoint_trees = m + 1;
            }
            if (mse < best_mse * (1.0 - options.min_improvement))
                streak = 0;
            else
                ++streak;
            best_mse = std::min(best_mse, mse);
            if (streak >= options.patience) {
                stopped = true;
                break;
            }
        }
    }

    fit.n_trees_used =
        (options.early_stopping && checkpoint_trees > 0) ? checkpoint_trees
                                                         : static_cast<int>(fit.trees.size());
    if (stopped || fit.n_trees_used < static_cast<int>(fit.trees.size())) {
        fit.trees.resize(fit.n_trees_used);
        fit.stage_weights.resize(fit.n_trees_used);
    }
    return fit;
}

}  // namespace crimecast
