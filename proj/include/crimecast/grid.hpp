#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace crimecast {

enum class MlKind { RF, GBM, MLP };
std::string to_string(MlKind kind);
MlKind ml_kind_from_string(const std::string& s);

// Ordered parameter lattice. Cells enumerate in mixed-radix order with the
// first axis slowest, so a cell index means the same thing on every run.
struct GridAxis {
    std::string name;
    std::vector<double> values;
};

struct GridSpec {
    std::vector<GridAxis> axes;
    std::size_t size() const;
    std::map<std::string, double> cell(std::size_t index) const;
    void validate() const;
};

struct MlDataset {
    Eigen::MatrixXd x;
    Eigen::VectorXd y;
};

// A fitted configuration ready to forecast; params records where it came from.
struct TunedModel {
    MlKind kind = MlKind::RF;
    std::map<std::string, double> params;
    std::function<Eigen::VectorXd(const Eigen::MatrixXd&)> predict;
};

struct GridSearchResult {
    std::vector<double> cell_mse;  // lattice order; +inf marks a diverged fit
    std::size_t best_index = 0;
    std::map<std::string, double> best_params;
    double best_mse = 0.0;
    TunedModel model;
};

// Fit one configuration. Unrecognised keys are rejected; missing keys fall
// back to defaults. The MLP path standardizes inputs internally with
// training statistics and bakes them into the returned predictor.
TunedModel fit_ml_model(MlKind kind, const std::map<std::string, double>& params,
                        const MlDataset& train, const MlDataset& validation,
                        std::uint64_t seed);

// Every cell is fitted with its own seed stream and scored on the validation
// set; the argmin wins, ties broken by the earliest cell.
GridSearchResult grid_search(MlKind kind, const GridSpec& grid, const MlDataset& train,
                             const MlDataset& validation, std::uint64_t seed);

// Small lattices that finish in seconds; wider sweeps belong in config files.
GridSpec default_grid(MlKind kind);

}  // namespace crimecast
