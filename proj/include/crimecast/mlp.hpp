#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace crimecast {

// Feed-forward net: ReLU hidden layers, one linear output unit, trained
// sample-by-sample with ADADELTA parameter updates. Callers are expected to
// feed standardized inputs (see Standardizer below).
enum class MlpLoss { SquaredError, PoissonDeviance };

struct MlpOptions {
    std::vector<int> hidden = {64};  // widths; empty = linear network
    int epochs = 10;
    double decay = 0.95;             // ADADELTA accumulator decay (rho)
    double epsilon = 1e-6;
    MlpLoss loss = MlpLoss::SquaredError;
    void validate() const;
};

struct MlpFit {
    std::vector<Eigen::MatrixXd> w;  // w[l]: layer l weights, rows = units
    std::vector<Eigen::VectorXd> b;
    std::vector<int> layer_sizes;    // input, hidden..., 1
    int epochs_run = 0;
    MlpLoss loss = MlpLoss::SquaredError;

    // Response-scale prediction: the linear output itself under squared
    // error, exp of it under Poisson deviance.
    double predict_row(const Eigen::VectorXd& x_row) const;
    Eigen::VectorXd predict(const Eigen::MatrixXd& x) const;
};

struct MlpGradients {
    std::vector<Eigen::MatrixXd> dw;
    std::vector<Eigen::VectorXd> db;
    double loss = 0.0;
};

// He-initialised net with no training; the starting point of fit_mlp.
MlpFit init_mlp(int n_inputs, const MlpOptions& options, std::uint64_t seed);

// Per-sample loss: 0.5*(f(x)-y)^2 under squared error, the scaled Poisson
// deviance 2*(y*log(y/mu) - (y-mu)) with mu = exp(f(x)) otherwise.
double mlp_loss(const MlpFit& net, const Eigen::VectorXd& x_row, double y);

// Exact gradients of mlp_loss with respect to every weight and bias.
MlpGradients mlp_backprop(const MlpFit& net, const Eigen::VectorXd& x_row, double y);

MlpFit fit_mlp(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
               const MlpOptions& options, std::uint64_t seed);

// Column-wise z-scoring with statistics frozen at fit time; constant columns
// keep scale 1 so they pass through centred.
struct Standardizer {
    Eigen::VectorXd mean;
    Eigen::VectorXd sd;
    void fit(const Eigen::MatrixXd& x);
    Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const;
};

}  // namespace crimecast
