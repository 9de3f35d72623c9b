#include "crimecast/grid.hpp"

#include <cmath>
#include <limits>
#include <memory>

#include "crimecast/ensemble.hpp"
#include "crimecast/errors.hpp"
#include "crimecast/mlp.hpp"
#include "crimecast/parallel.hpp"
#include "crimecast/rng.hpp"

namespace crimecast {

std::string to_string(MlKind kind) {
    switch (kind) {
        case MlKind::RF: return "rf";
        case MlKind::GBM: return "gbm";
        case MlKind::MLP: return "mlp";
    }
    throw ValidationError("unknown ml model kind");
}

MlKind ml_kind_from_string(const std::string& s) {
    if (s == "rf") return MlKind::RF;
    if (s == "gbm") return MlKind::GBM;
    if (s == "mlp") return MlKind::MLP;
    throw ValidationError("unknown ml model kind: " + s);
}

void GridSpec::validate() const {
    if (axes.empty()) throw ValidationError("grid needs at least one axis");
    for (const GridAxis& axis : axes) {
        if (axis.name.empty()) throw ValidationError("grid axis without a name");
        if (axis.values.empty())
            throw ValidationError("grid axis '" + axis.name + "' has no values");
    }
    for (size_t i = 0; i < axes.size(); ++i)
        for (size_t j = i + 1; j < axes.size(); ++j)
            if (axes[i].name == axes[j].name)
                throw ValidationError("duplicate grid axis '" + axes[i].name + "'");
}

std::size_t GridSpec::size() const {
    std::size_t total = 1;
    for (const GridAxis& axis : axes) total *= axis.values.size();
    return total;
}

std::map<std::string, double> GridSpec::cell(std::size_t index) const {
    if (index >= size()) throw ValidationError("grid cell index out of range");
    std::map<std::string, double> out;
    // first axis is the slowest-moving digit
    std::size_t stride = size();
    for (const GridAxis& axis : axes) {
        stride /= axis.values.size();
        out[axis.name] = axis.values[(index / stride) % axis.values.size()];
    }
    return out;
}

namespace {

// pop keys as they are consumed so leftovers can be reported
class ParamReader {
public:
    explicit ParamReader(const std::map<std::string, double>& params) : params_(params) {}
    double take(const std::string& key, double fallback) {
        auto it = params_.find(key);
        if (it == params_.end()) return fallback;
        const double v = it->second;
        params_.erase(it);
        return v;
    }
    int take_int(const std::string& key, int fallback) {
        const double v = take(key, static_cast<double>(fallback));
        const double rounded = std::round(v);
        if (std::abs(v - rounded) > 1e-9)
            throw ValidationError("parameter '" + key + "' must be an integer");
        return static_cast<int>(rounded);
    }
    void finish() const {
        if (!params_.empty())
            throw ValidationError("unrecognised parameter '" + params_.begin()->first + "'");
    }

private:
    std::map<std::string, double> params_;
};

TreeParams tree_params_from(ParamReader& reader) {
    TreeParams params;
    params.max_depth = reader.take_int("max_depth", params.max_depth);
    params.min_rows = reader.take_int("min_rows", params.min_rows);
    params.n_bins = reader.take_int("n_bins", params.n_bins);
    params.min_split_improvement =
        reader.take("min_split_improvement", params.min_split_improvement);
    params.row_sample_rate = reader.take("row_sample_rate", params.row_sample_rate);
    params.col_sample_rate = reader.take("col_sample_rate", params.col_sample_rate);
    params.col_sample_rate_per_tree =
        reader.take("col_sample_rate_per_tree", params.col_sample_rate_per_tree);
    return params;
}

}  // namespace

TunedModel fit_ml_model(MlKind kind, const std::map<std::string, double>& params,
                        const MlDataset& train, const MlDataset& validation,
                        std::uint64_t seed) {
    if (train.x.rows() != train.y.size())
        throw ValidationError("training rows and responses differ");
    TunedModel model;
    model.kind = kind;
    model.params = params;
    ParamReader reader(params);

    switch (kind) {
        case MlKind::RF: {
            TreeParams tree_params = tree_params_from(reader);
            RfOptions options;
            options.n_trees = reader.take_int("n_trees", options.n_trees);
            reader.finish();
            auto fit = std::make_shared<EnsembleFit>(
                fit_rf(train.x, train.y, tree_params, options, seed));
            model.predict = [fit](const Eigen::MatrixXd& x) { return fit->predict(x); };
            break;
        }
        case MlKind::GBM: {
            TreeParams tree_params = tree_params_from(reader);
            GbmOptions options;
            options.learn_rate = reader.take("learn_rate", options.learn_rate);
            options.learn_rate_annealing =
                reader.take("learn_rate_annealing", options.learn_rate_annealing);
            options.max_trees = reader.take_int("max_trees", 200);
            reader.finish();
            options.early_stopping = validation.x.rows() > 0;
            auto fit = std::make_shared<EnsembleFit>(fit_gbm(
                train.x, train.y, validation.x, validation.y, tree_params, options, seed));
            model.predict = [fit](const Eigen::MatrixXd& x) { return fit->predict(x); };
            break;
        }
        case MlKind::MLP: {
            MlpOptions options;
            const int width = reader.take_int("hidden_units", 64);
            const int layers = reader.take_int("n_layers", 1);
            if (layers < 0) throw ValidationError("n_layers must be non-negative");
            options.hidden.assign(layers, width);
            options.epochs = reader.take_int("epochs", options.epochs);
            options.decay = reader.take("decay", options.decay);
            reader.finish();
            auto scaler = std::make_shared<Standardizer>();
            scaler->fit(train.x);
            auto fit = std::make_shared<MlpFit>(
                fit_mlp(scaler->apply(train.x), train.y, options, seed));
            model.predict = [fit, scaler](const Eigen::MatrixXd& x) {
                return fit->predict(scaler->apply(x));
            };
            break;
        }
    }
    return model;
}

GridSearchResult grid_search(MlKind kind, const GridSpec& grid, const MlDataset& train,
                             const MlDataset& validation, std::uint64_t seed) {
    grid.validate();
    if (validation.x.rows() == 0) throw ValidationError("grid search needs a validation set");
    if (validation.x.rows() != validation.y.size())
        throw ValidationError("validation rows and responses differ");
    const std::size_t cells = grid.size();

    GridSearchResult result;
    result.cell_mse.assign(cells, std::numeric_limits<double>::infinity());
    parallel_for(cells, [&](std::size_t index) {
        try {
            TunedModel candidate =
                fit_ml_model(kind, grid.cell(index), train, validation, derive_seed(seed, index));
            result.cell_mse[index] =
                mean_squared_error(validation.y, candidate.predict(validation.x));
        } catch (const NumericalError&) {
            // a diverged configuration scores infinitely badly but does not
            // sink the sweep
        }
    });

    result.best_index = 0;
    result.best_mse = result.cell_mse[0];
    for (std::size_t index = 1; index < cells; ++index)
        if (result.cell_mse[index] < result.best_mse) {  // strict: earliest cell wins ties
            result.best_mse = result.cell_mse[index];
            result.best_index = index;
        }
    if (!std::isfinite(result.best_mse))
        throw NumericalError("every grid cell diverged");

    result.best_params = grid.cell(result.best_index);
    // deterministic refit reproduces the winning model exactly
    result.model = fit_ml_model(kind, result.best_params, train, validation,
                                derive_seed(seed, result.best_index));
    return result;
}

GridSpec default_grid(MlKind kind) {
    switch (kind) {
        case MlKind::GBM:
            return GridSpec{{{"learn_rate", {0.05, 0.1}},
                             {"max_depth", {3, 7, 13}},
                             {"min_rows", {8, 64}}}};
        case MlKind::RF:
            return GridSpec{{{"max_depth", {7, 13}}, {"min_rows", {8, 64}}}};
        case MlKind::MLP:
            return GridSpec{{{"hidden_units", {64}},
                             {"n_layers", {1}},
                             {"epochs", {1, 10, 20}},
                             {"decay", {0.95, 1.0}}}};
    }
    throw ValidationError("unknown ml model kind");
}

}  // namespace crimecast
