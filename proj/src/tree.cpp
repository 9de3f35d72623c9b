#include "crimecast/tree.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "crimecast/errors.hpp"

namespace crimecast {

void TreeParams::validate() const {
    if (max_depth < 1) throw ValidationError("max_depth must be at least 1");
    if (min_rows < 1) throw ValidationError("min_rows must be at least 1");
    if (n_bins < 2) throw ValidationError("n_bins must be at least 2");
    if (min_split_improvement < 0.0)
        throw ValidationError("min_split_improvement must be non-negative");
    auto in_unit = [](double r) { return r > 0.0 && r <= 1.0; };
    if (!in_unit(row_sample_rate) || !in_unit(col_sample_rate) ||
        !in_unit(col_sample_rate_per_tree))
        throw ValidationError("sample rates must lie in (0, 1]");
}

double RegressionTree::predict_row(const Eigen::Ref<const Eigen::RowVectorXd>& row) const {
    int node = 0;
    while (!nodes_[node].is_leaf())
        node = row[nodes_[node].feature] <= nodes_[node].threshold ? nodes_[node].left
                                                                   : nodes_[node].right;
    return nodes_[node].value;
}

Eigen::VectorXd RegressionTree::predict(const Eigen::MatrixXd& x) const {
    Eigen::VectorXd out(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) out[i] = predict_row(x.row(i));
    return out;
}

// number of split levels: 0 for a single leaf
int RegressionTree::depth() const {
    std::vector<std::pair<int, int>> stack{{0, 0}};
    int deepest = 0;
    while (!stack.empty()) {
        auto [node, d] = stack.back();
        stack.pop_back();
        deepest = std::max(deepest, d);
        if (!nodes_[node].is_leaf()) {
            stack.emplace_back(nodes_[node].left, d + 1);
            stack.emplace_back(nodes_[node].right, d + 1);
        }
    }
    return deepest;
}

std::vector<double> quantile_thresholds(std::vector<double> values, int n_bins) {
    std::sort(values.begin(), values.end());
    const auto n = values.size();
    std::vector<double> cuts;
    if (n < 2) return cuts;
    for (int b = 1; b < n_bins; ++b) {
        const auto idx = std::min(n - 1, n * static_cast<size_t>(b) / n_bins);
        cuts.push_back(values[idx]);
    }
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    // a cut at the maximum sends every row left: useless
    while (!cuts.empty() && cuts.back() >= values.back()) cuts.pop_back();
    return cuts;
}

namespace {

struct Builder {
    const Eigen::MatrixXd& x;
    const Eigen::VectorXd& y;
    const TreeParams& params;
    Rng& rng;
    std::vector<int> cols;                       // columns this tree may use
    std::vector<std::vector<double>> thresholds; // aligned with cols
    std::vector<TreeNode> nodes;

    int build(std::vector<int>& rows, int depth) {
        const int id = static_cast<int>(nodes.size());
        nodes.emplace_back();
        const double n = static_cast<double>(rows.size());
        double sum = 0.0, sumsq = 0.0;
        for (int r : rows) {
            sum += y[r];
            sumsq += y[r] * y[r];
        }
        const double mean = sum / n;
        const double sse = std::max(sumsq - sum * sum / n, 0.0);
        nodes[id].value = mean;

        if (depth >= params.max_depth || rows.size() < 2 * static_cast<size_t>(params.min_rows) ||
            sse <= 0.0)
            return id;

        // per-split column subsample, drawn without replacement
        std::vector<int> candidates = cols;
        if (params.col_sample_rate < 1.0) {
            const auto keep = std::max<size_t>(
                1, static_cast<size_t>(std::ceil(params.col_sample_rate * cols.size())));
            std::shuffle(candidates.begin(), candidates.end(), rng);
            candidates.resize(keep);
            std::sort(candidates.begin(), candidates.end());
        }

        int best_col = -1;
        double best_threshold = 0.0;
        double best_improvement = 0.0;
        for (int ci : candidates) {
            const auto slot = static_cast<size_t>(
                std::lower_bound(cols.begin(), cols.end(), ci) - cols.begin());
            const std::vector<double>& cuts = thresholds[slot];
            if (cuts.empty()) continue;
            const int m = static_cast<int>(cuts.size());
            std::vector<double> bin_count(m + 1, 0.0), bin_sum(m + 1, 0.0),
                bin_sumsq(m + 1, 0.0);
            for (int r : rows) {
                const double v = x(r, ci);
                const int bin = static_cast<int>(
                    std::lower_bound(cuts.begin(), cuts.end(), v) - cuts.begin());
                bin_count[bin] += 1.0;
                bin_sum[bin] += y[r];
                bin_sumsq[bin] += y[r] * y[r];
            }
            double lc = 0.0, ls = 0.0, lq = 0.0;
            for (int t = 0; t < m; ++t) {
                lc += bin_count[t];
                ls += bin_sum[t];
                lq += bin_sumsq[t];
                const double rc = n - lc, rs = sum - ls, rq = sumsq - lq;
                if (lc < params.min_rows || rc < params.min_rows) continue;
                const double left_sse = std::max(lq - ls * ls / lc, 0.0);
                const double right_sse = std::max(rq - rs * rs / rc, 0.0);
                const double improvement = sse - left_sse - right_sse;
                if (improvement > best_improvement) {
                    best_improvement = improvement;
                    best_col = ci;
                    best_threshold = cuts[t];
                }
            }
        }

        if (best_col < 0 || best_improvement < params.min_split_improvement * sse ||
            best_improvement <= 0.0)
            return id;

        std::vector<int> left_rows, right_rows;
        for (int r : rows)
            (x(r, best_col) <= best_threshold ? left_rows : right_rows).push_back(r);
        rows.clear();
        rows.shrink_to_fit();

        nodes[id].feature = best_col;
        nodes[id].threshold = best_threshold;
        const int left_id = build(left_rows, depth + 1);
        const int right_id = build(right_rows, depth + 1);
        nodes[id].left = left_id;
        nodes[id].right = right_id;
        return id;
    }
};

}  // namespace

RegressionTree fit_regression_tree_subset(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                          const std::vector<int>& rows,
                                          const std::vector<int>& cols,
                                          const TreeParams& params, Rng& rng) {
    params.validate();
    if (rows.empty()) throw ValidationError("cannot fit a tree on empty data");
    if (cols.empty()) throw ValidationError("cannot fit a tree with no columns");
    if (x.rows() != y.size()) throw ValidationError("tree data rows and responses differ");

    Builder b{x, y, params, rng, cols, {}, {}};
    b.thresholds.reserve(cols.size());
    for (int c : cols) {
        std::vector<double> values;
        values.reserve(rows.size());
        for (int r : rows) values.push_back(x(r, c));
        b.thresholds.push_back(quantile_thresholds(std::move(values), params.n_bins));
    }
    std::vector<int> all_rows = rows;
    b.build(all_rows, 0);

    RegressionTree tree;
    tree.nodes() = std::move(b.nodes);
    return tree;
}

RegressionTree fit_regression_tree(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                   const TreeParams& params, Rng& rng) {
    std::vector<int> rows(x.rows());
    std::iota(rows.begin(), rows.end(), 0);
    std::vector<int> cols(x.cols());
    std::iota(cols.begin(), cols.end(), 0);
    return fit_regression_tree_subset(x, y, rows, cols, params, rng);
}

}  // namespace crimecast
