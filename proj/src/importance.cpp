#include "crimecast/importance.hpp"

#include <algorithm>
#include <numeric>

#include "crimecast/ensemble.hpp"
#include "crimecast/errors.hpp"
#include "crimecast/rng.hpp"

namespace crimecast {

ImportanceReport permutation_importance(
    const std::function<Eigen::VectorXd(const Eigen::MatrixXd&)>& predict,
    const Eigen::MatrixXd& x_validation, const Eigen::VectorXd& y_validation,
    const std::vector<std::string>& variable_names, std::uint64_t seed,
    int n_permutations) {
    const Eigen::Index n = x_validation.rows();
    const Eigen::Index k = x_validation.cols();
    if (n < 30) throw ValidationError("importance needs at least 30 validation rows");
    if (n != y_validation.size())
        throw ValidationError("validation rows and responses differ");
    if (static_cast<Eigen::Index>(variable_names.size()) != k)
        throw ValidationError("variable name count does not match columns");
    if (n_permutations < 1) throw ValidationError("need at least one permutation");

    ImportanceReport report;
    report.variables = variable_names;
    report.importance.assign(k, 0.0);

    const double base_mse = mean_squared_error(y_validation, predict(x_validation));
    std::vector<int> order(n);
    Eigen::MatrixXd scrambled = x_validation;
    for (Eigen::Index j = 0; j < k; ++j) {
        if (x_validation.col(j).maxCoeff() == x_validation.col(j).minCoeff())
            continue;  // constant column: importance stays 0 by definition
        double total = 0.0;
        for (int rep = 0; rep < n_permutations; ++rep) {
            Rng rng = make_rng(seed, static_cast<std::uint64_t>(j),
                               static_cast<std::uint64_t>(rep));
            std::iota(order.begin(), order.end(), 0);
            std::shuffle(order.begin(), order.end(), rng);
            for (Eigen::Index i = 0; i < n; ++i)
                scrambled(i, j) = x_validation(order[i], j);
            total += mean_squared_error(y_validation, predict(scrambled));
        }
        scrambled.col(j) = x_validation.col(j);
        report.importance[j] = total / n_permutations - base_mse;
    }

    // rank 1 = largest inflation; ties fall to the earlier column
    std::vector<int> by_importance(k);
    std::iota(by_importance.begin(), by_importance.end(), 0);
    std::stable_sort(by_importance.begin(), by_importance.end(), [&](int a, int b) {
        return report.importance[a] > report.importance[b];
    });
    report.ranks.assign(k, 0);
    for (int pos = 0; pos < static_cast<int>(k); ++pos)
        report.ranks[by_importance[pos]] = pos + 1;
    return report;
}

MeanRankReport mean_ranks(const std::vector<ImportanceReport>& windows) {
    if (windows.empty()) throw ValidationError("no importance windows to aggregate");
    MeanRankReport out;
    out.variables = windows.front().variables;
    const size_t k = out.variables.size();
    out.mean_rank.assign(k, 0.0);
    for (const ImportanceReport& window : windows) {
        if (window.variables != out.variables)
            throw ValidationError("importance windows disagree on variables");
        if (window.ranks.size() != k)
            throw ValidationError("importance window with malformed ranks");
        out.ranks_by_window.push_back(window.ranks);
        for (size_t j = 0; j < k; ++j) out.mean_rank[j] += window.ranks[j];
    }
    for (size_t j = 0; j < k; ++j) out.mean_rank[j] /= static_cast<double>(windows.size());
    return out;
}

}  // namespace crimecast
