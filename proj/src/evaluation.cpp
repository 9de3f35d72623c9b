#include "crimecast/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "crimecast/errors.hpp"
#include "crimecast/parallel.hpp"
#include "crimecast/rng.hpp"

namespace crimecast {

std::string to_string(ForecasterKind kind) {
    switch (kind) {
        case ForecasterKind::LR: return "lr";
        case ForecasterKind::SAR: return "sar";
        case ForecasterKind::CAR: return "car";
        case ForecasterKind::GLM: return "glm";
        case ForecasterKind::GLMM: return "glmm";
        case ForecasterKind::RF: return "rf";
        case ForecasterKind::GBM: return "gbm";
        case ForecasterKind::MLP: return "mlp";
    }
    throw ValidationError("unknown forecaster kind");
}

ForecasterKind forecaster_from_string(const std::string& s) {
    for (ForecasterKind kind : all_forecasters())
        if (to_string(kind) == s) return kind;
    throw ValidationError("unknown forecaster '" + s +
                          "' (lr|sar|car|glm|glmm|rf|gbm|mlp)");
}

bool is_ml_kind(ForecasterKind kind) {
    return kind == ForecasterKind::RF || kind == ForecasterKind::GBM ||
           kind == ForecasterKind::MLP;
}

ModelKind econ_kind_of(ForecasterKind kind) {
    switch (kind) {
        case ForecasterKind::LR: return ModelKind::LR;
        case ForecasterKind::SAR: return ModelKind::SAR;
        case ForecasterKind::CAR: return ModelKind::CAR;
        case ForecasterKind::GLM: return ModelKind::GLM;
        case ForecasterKind::GLMM: return ModelKind::GLMM;
        default: throw ValidationError("not a statistical model kind");
    }
}

MlKind ml_kind_of(ForecasterKind kind) {
    switch (kind) {
        case ForecasterKind::RF: return MlKind::RF;
        case ForecasterKind::GBM: return MlKind::GBM;
        case ForecasterKind::MLP: return MlKind::MLP;
        default: throw ValidationError("not an ml model kind");
    }
}

std::vector<ForecasterKind> all_forecasters() {
    return {ForecasterKind::LR,  ForecasterKind::SAR, ForecasterKind::CAR,
            ForecasterKind::GLM, ForecasterKind::GLMM, ForecasterKind::RF,
            ForecasterKind::GBM, ForecasterKind::MLP};
}

int EvaluationPlan::resolved_h(int n_weeks) const {
    const int resolved = h > 0 ? h : n_weeks / 2;
    if (resolved < 2) throw ValidationError("training window too short (h must be >= 2)");
    if (resolved > n_weeks - 1)
        throw ValidationError("no forecast windows: h = " + std::to_string(resolved) +
                              " but the panel has " + std::to_string(n_weeks) + " weeks");
    return resolved;
}

std::vector<int> EvaluationPlan::window_origins(int n_weeks) const {
    const int resolved = resolved_h(n_weeks);
    std::vector<int> origins;
    for (int t = resolved; t <= n_weeks - 1; ++t) origins.push_back(t);
    return origins;
}

namespace {

// exception captured inside a window job, replayed with window context
struct WindowFailure {
    int code = 0;  // 1 validation, 2 numerical, 3 other
    std::string message;
};

Eigen::VectorXd clamp_counts(Eigen::VectorXd v) { return v.cwiseMax(0.0); }

}  // namespace

EvaluationReport run_rolling(const PanelData& panel, const SpatialWeights& w,
                             CrimeType crime_type, int setting_id, const FeatureModes& modes,
                             ForecasterKind kind, const EvaluationPlan& plan,
                             const WindowForecaster* stub) {
    panel.validate();
    if (w.size() != panel.n_units)
        throw ValidationError("spatial weights do not match the panel's units");
    const Setting setting = Setting::by_id(setting_id);
    const std::vector<int> origins = plan.window_origins(panel.n_weeks);
    const bool ml = is_ml_kind(kind);
    if (ml && origins.front() < 4)
        throw ValidationError(
            "ml kinds need h >= 4 (two validation weeks after at least one training pair)");

    EvaluationReport report;
    report.kind = kind;
    report.crime_type = crime_type;
    report.setting_id = setting_id;
    report.modes = modes;
    report.windows.resize(origins.size());

    std::vector<WindowFailure> failures(origins.size());
    const Eigen::MatrixXd& counts = panel.crime(crime_type);

    parallel_for(origins.size(), [&](std::size_t index) {
        WindowResult& window = report.windows[index];
        try {
            const int t = origins[index];
            window.window_index = static_cast<int>(index);
            window.origin_week = t;
            window.target_week = t + 1;
            window.seed = derive_seed(plan.seed, static_cast<std::uint64_t>(t));
            window.actual = counts.col(t);  // column w-1 holds week w

            const DesignMatrix next_design =
                design_for_week(panel, crime_type, setting, modes, t + 1);

            if (stub) {
                const auto [train_design, train_y] =
                    assemble_design(panel, crime_type, setting, modes, 2, t);
                WindowContext ctx{t, t + 1, train_design, train_y, next_design, window.actual};
                window.forecast = (*stub)(ctx);
            } else if (!ml) {
                const auto [train_design, train_y] =
                    assemble_design(panel, crime_type, setting, modes, 2, t);
                ModelFit fit = fit_model(econ_kind_of(kind), train_design, train_y, w);
                window.rho = fit.rho;
                window.delta = fit.delta;
                window.sigma2 = fit.sigma2;
                window.forecast = predict_one_step(fit, next_design, w).values;
            } else {
                // last two training weeks are held out to validate the tuning
                const auto [train_design, train_y] =
                    assemble_design(panel, crime_type, setting, modes, 2, t - 2);
                const auto [val_design, val_y] =
                    assemble_design(panel, crime_type, setting, modes, t - 1, t);
                const GridSpec grid =
                    plan.grid.axes.empty() ? default_grid(ml_kind_of(kind)) : plan.grid;
                GridSearchResult search =
                    grid_search(ml_kind_of(kind), grid, {train_design.x, train_y},
                                {val_design.x, val_y}, window.seed);
                window.chosen_params = search.best_params;
                window.cell_mse = search.cell_mse;
                window.forecast = clamp_counts(search.model.predict(next_design.x));
            }

            if (window.forecast.size() != panel.n_units)
                throw ValidationError("forecast length does not match the unit count");
            window.error = window.actual - window.forecast;
            window.mse = window.error.squaredNorm() / static_cast<double>(panel.n_units);
        } catch (const ValidationError& e) {
            failures[index] = {1, e.what()};
        } catch (const NumericalError& e) {
            failures[index] = {2, e.what()};
        } catch (const std::exception& e) {
            failures[index] = {3, e.what()};
        }
    });

    for (std::size_t index = 0; index < failures.size(); ++index) {
        if (failures[index].code == 0) continue;
        const std::string message = "window " + std::to_string(index) + " (target week " +
                                    std::to_string(origins[index] + 1) +
                                    "): " + failures[index].message;
        if (failures[index].code == 1) throw ValidationError(message);
        if (failures[index].code == 2) throw NumericalError(message);
        throw std::runtime_error(message);
    }

    double total = 0.0;
    for (const WindowResult& window : report.windows) total += window.mse;
    report.mse = total / static_cast<double>(report.windows.size());
    return report;
}

FeatureSelectionResult select_feature_definitions(const PanelData& panel,
                                                  const SpatialWeights& w,
                                                  CrimeType crime_type,
                                                  const EvaluationPlan& plan) {
    FeatureSelectionResult result;
    result.crime_type = crime_type;
    const PoiFeatureMode poi_modes[] = {PoiFeatureMode::Counts, PoiFeatureMode::Shares};
    const TwitterFeatureMode twitter_modes[] = {TwitterFeatureMode::All,
                                                TwitterFeatureMode::Night,
                                                TwitterFeatureMode::LogAll,
                                                TwitterFeatureMode::LogNight};
    const TaxiFeatureMode taxi_modes[] = {TaxiFeatureMode::Raw,
                                          TaxiFeatureMode::DestinationNormalised,
                                          TaxiFeatureMode::SourceNormalised};
    for (PoiFeatureMode poi : poi_modes)
        for (TwitterFeatureMode twitter : twitter_modes)
            for (TaxiFeatureMode taxi : taxi_modes) {
                FeatureModes modes{twitter, taxi, poi};
                EvaluationReport report = run_rolling(panel, w, crime_type, 8, modes,
                                                      ForecasterKind::CAR, plan);
                result.cells.push_back({modes, report.mse});
            }

    std::size_t best = 0;
    for (std::size_t i = 1; i < result.cells.size(); ++i)
        if (result.cells[i].mse < result.cells[best].mse) best = i;
    result.winner = result.cells[best].modes;
    result.winner_mse = result.cells[best].mse;
    return result;
}

SettingComparison compare_settings(const PanelData& panel, const SpatialWeights& w,
                                   CrimeType crime_type,
                                   const std::vector<ForecasterKind>& models,
                                   const std::vector<int>& setting_ids,
                                   const FeatureModes& modes, const EvaluationPlan& plan) {
    if (models.empty()) throw ValidationError("no models to compare");
    if (setting_ids.empty()) throw ValidationError("no settings to compare");
    const auto baseline_it = std::find(setting_ids.begin(), setting_ids.end(), 1);
    if (baseline_it == setting_ids.end())
        throw ValidationError("comparison needs the census-only baseline (setting 1)");
    const Eigen::Index baseline = baseline_it - setting_ids.begin();

    SettingComparison comparison;
    comparison.crime_type = crime_type;
    comparison.models = models;
    comparison.setting_ids = setting_ids;
    comparison.mse.resize(models.size(), setting_ids.size());
    comparison.pct_vs_baseline.resize(models.size(), setting_ids.size());

    comparison.reports.resize(models.size());
    for (std::size_t m = 0; m < models.size(); ++m)
        for (std::size_t s = 0; s < setting_ids.size(); ++s) {
            comparison.reports[m].push_back(
                run_rolling(panel, w, crime_type, setting_ids[s], modes, models[m], plan));
            comparison.mse(m, s) = comparison.reports[m].back().mse;
        }

    for (std::size_t m = 0; m < models.size(); ++m) {
        const double base = comparison.mse(m, baseline);
        for (std::size_t s = 0; s < setting_ids.size(); ++s)
            comparison.pct_vs_baseline(m, s) = 100.0 * (base - comparison.mse(m, s)) / base;
    }
    return comparison;
}

namespace {

double sorted_quantile(const std::vector<double>& sorted, double p) {
    const std::size_t m = sorted.size();
    if (m == 1) return sorted[0];
    const double pos = p * static_cast<double>(m - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    if (lo + 1 >= m) return sorted[m - 1];
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + (sorted[lo + 1] - sorted[lo]) * frac;
}

}  // namespace

RobustnessSummary hyperparameter_robustness(const EvaluationReport& report) {
    if (report.windows.empty()) throw ValidationError("report has no windows");
    const std::size_t cells = report.windows.front().cell_mse.size();
    if (cells == 0)
        throw ValidationError("report has no grid tables (statistical kinds have none)");
    for (const WindowResult& window : report.windows)
        if (window.cell_mse.size() != cells)
            throw ValidationError("windows disagree on grid size");

    RobustnessSummary summary;
    for (const WindowResult& window : report.windows) {
        std::vector<double> sorted = window.cell_mse;
        std::sort(sorted.begin(), sorted.end());
        summary.rows.push_back({window.window_index, sorted.front(),
                                sorted_quantile(sorted, 0.25), sorted_quantile(sorted, 0.5),
                                sorted_quantile(sorted, 0.75), sorted.back()});
    }

    summary.global_best_mse = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < cells; ++c) {
        double total = 0.0;
        for (const WindowResult& window : report.windows) total += window.cell_mse[c];
        const double average = total / static_cast<double>(report.windows.size());
        if (average < summary.global_best_mse) {
            summary.global_best_mse = average;
            summary.global_best_cell = c;
        }
    }
    return summary;
}

MeanRankReport rolling_importance(const PanelData& panel, const SpatialWeights& w,
                                  CrimeType crime_type, int setting_id,
                                  const FeatureModes& modes, ForecasterKind kind,
                                  const EvaluationPlan& plan, int n_permutations) {
    if (!is_ml_kind(kind))
        throw ValidationError("permutation importance needs a machine-learning model kind");
    panel.validate();
    if (w.size() != panel.n_units)
        throw ValidationError("spatial weights do not match the panel's units");
    const Setting setting = Setting::by_id(setting_id);
    const std::vector<int> origins = plan.window_origins(panel.n_weeks);
    if (origins.front() < 4)
        throw ValidationError(
            "ml kinds need h >= 4 (two validation weeks after at least one training pair)");

    std::vector<ImportanceReport> windows;
    for (int t : origins) {
        const std::uint64_t seed = derive_seed(plan.seed, static_cast<std::uint64_t>(t));
        const auto [train_design, train_y] =
            assemble_design(panel, crime_type, setting, modes, 2, t - 2);
        const auto [val_design, val_y] =
            assemble_design(panel, crime_type, setting, modes, t - 1, t);
        const GridSpec grid = plan.grid.axes.empty() ? default_grid(ml_kind_of(kind)) : plan.grid;
        GridSearchResult search = grid_search(ml_kind_of(kind), grid, {train_design.x, train_y},
                                              {val_design.x, val_y}, seed);
        windows.push_back(permutation_importance(search.model.predict, val_design.x, val_y,
                                                 val_design.column_names, seed,
                                                 n_permutations));
    }
    return mean_ranks(windows);
}

}  // namespace crimecast
