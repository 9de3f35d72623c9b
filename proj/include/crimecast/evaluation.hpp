#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "crimecast/econ.hpp"
#include "crimecast/features.hpp"
#include "crimecast/grid.hpp"
#include "crimecast/importance.hpp"
#include "crimecast/spatial.hpp"

namespace crimecast {

// Everything that can produce a one-step forecast: the five statistical
// models plus the tuned machine-learning baselines.
enum class ForecasterKind { LR, SAR, CAR, GLM, GLMM, RF, GBM, MLP };

std::string to_string(ForecasterKind kind);
ForecasterKind forecaster_from_string(const std::string& s);
bool is_ml_kind(ForecasterKind kind);
ModelKind econ_kind_of(ForecasterKind kind);  // statistical kinds only
MlKind ml_kind_of(ForecasterKind kind);       // ML kinds only
std::vector<ForecasterKind> all_forecasters();

// Rolling one-step protocol: fit on weeks 1..t, forecast week t+1, for
// t = h..T-1. ML kinds hold out the last two training weeks for validation.
struct EvaluationPlan {
    int h = 0;                  // minimum training length; 0 = floor(T/2)
    std::uint64_t seed = 2024;
    GridSpec grid;              // ML tuning lattice; empty = default_grid(kind)
    int resolved_h(int n_weeks) const;
    std::vector<int> window_origins(int n_weeks) const;  // the t values
};

struct WindowResult {
    int window_index = 0;  // 0-based position in the report
    int origin_week = 0;   // t: last week available for fitting
    int target_week = 0;   // t+1
    Eigen::VectorXd forecast;  // per unit, clamped at 0
    Eigen::VectorXd actual;
    Eigen::VectorXd error;     // actual - forecast
    double mse = 0.0;
    // fit metadata
    double rho = 0.0, delta = 0.0, sigma2 = 0.0;  // spatial kinds, when fitted
    std::map<std::string, double> chosen_params;  // ML winning cell
    std::vector<double> cell_mse;                 // ML per-cell validation table
    std::uint64_t seed = 0;
};

struct EvaluationReport {
    ForecasterKind kind = ForecasterKind::LR;
    CrimeType crime_type = CrimeType::Property;
    int setting_id = 1;
    FeatureModes modes;
    std::vector<WindowResult> windows;
    double mse = 0.0;  // mean of per-window MSEs (equal unit counts)
};

// Test seam: replaces model fitting for one window while the feature
// pipeline, window arithmetic, and error accounting stay real.
struct WindowContext {
    int origin_week;
    int target_week;
    const DesignMatrix& train_design;
    const Eigen::VectorXd& train_y;
    const DesignMatrix& next_design;
    const Eigen::VectorXd& actual;
};
using WindowForecaster = std::function<Eigen::VectorXd(const WindowContext&)>;

EvaluationReport run_rolling(const PanelData& panel, const SpatialWeights& w,
                             CrimeType crime_type, int setting_id, const FeatureModes& modes,
                             ForecasterKind kind, const EvaluationPlan& plan,
                             const WindowForecaster* stub = nullptr);

// The mode sweep: CAR on the all-features setting for each of the
// 4 Twitter x 3 taxi x 2 POI combinations; the argmin wins.
struct FeatureSelectionResult {
    CrimeType crime_type = CrimeType::Property;
    struct Cell {
        FeatureModes modes;
        double mse = 0.0;
    };
    std::vector<Cell> cells;  // POI-major, then Twitter rows, then taxi columns
    FeatureModes winner;
    double winner_mse = 0.0;
};

FeatureSelectionResult select_feature_definitions(const PanelData& panel,
                                                  const SpatialWeights& w,
                                                  CrimeType crime_type,
                                                  const EvaluationPlan& plan);

// MSE for every (model, setting) pair plus percentage reduction against the
// census-only baseline (positive = better than setting 1).
struct SettingComparison {
    CrimeType crime_type = CrimeType::Property;
    std::vector<ForecasterKind> models;
    std::vector<int> setting_ids;
    Eigen::MatrixXd mse;            // models x settings
    Eigen::MatrixXd pct_vs_baseline;
    std::vector<std::vector<EvaluationReport>> reports;  // [model][setting] full detail
};

SettingComparison compare_settings(const PanelData& panel, const SpatialWeights& w,
                                   CrimeType crime_type,
                                   const std::vector<ForecasterKind>& models,
                                   const std::vector<int>& setting_ids,
                                   const FeatureModes& modes, const EvaluationPlan& plan);

// Distribution of grid-cell validation MSEs per window, for the robustness
// figure: five-number summary rows plus the best single cell on average.
struct RobustnessSummary {
    struct WindowRow {
        int window_index = 0;
        double min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0;
    };
    std::vector<WindowRow> rows;
    std::size_t global_best_cell = 0;  // argmin of cross-window average
    double global_best_mse = 0.0;      // that cell's cross-window average
};

RobustnessSummary hyperparameter_robustness(const EvaluationReport& report);

// Permutation-importance mean ranks across the rolling windows: per window the
// tuned model is re-derived and column shuffles are scored on that window's
// validation rows. ML kinds only.
MeanRankReport rolling_importance(const PanelData& panel, const SpatialWeights& w,
                                  CrimeType crime_type, int setting_id,
                                  const FeatureModes& modes, ForecasterKind kind,
                                  const EvaluationPlan& plan, int n_permutations = 5);

}  // namespace crimecast
