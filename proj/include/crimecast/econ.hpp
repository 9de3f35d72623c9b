#pragma once

#include <Eigen/Dense>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "crimecast/features.hpp"
#include "crimecast/spatial.hpp"

namespace crimecast {

enum class ModelKind { LR, SAR, CAR, GLM, GLMM };

const char* to_string(ModelKind k);
ModelKind model_kind_from_string(const std::string& s);

// Whether forecasts live on the log (exponential-mean) scale.
bool is_count_model(ModelKind k);

struct ModelFit {
    ModelKind kind = ModelKind::LR;
    Eigen::VectorXd beta;
    std::vector<std::string> beta_names;
    Eigen::VectorXd std_errors;
    double sigma2 = std::numeric_limits<double>::quiet_NaN();
    double rho = std::numeric_limits<double>::quiet_NaN();    // spatial-lag coefficient
    double delta = std::numeric_limits<double>::quiet_NaN();  // error-dependence coefficient
    Eigen::VectorXd eta;                                      // per-unit random intercepts
    double loglik = std::numeric_limits<double>::quiet_NaN();
    double deviance = std::numeric_limits<double>::quiet_NaN();
    // per-unit residual summaries the one-step predictors need:
    // spatial-lag kind stores time-averaged structural residuals,
    // error-dependence kind stores time-averaged raw residuals
    Eigen::VectorXd residual_state;
    bool converged = true;
    std::vector<std::string> warnings;
    int n_units = 0;
    int n_obs = 0;
};

// Residual pair driving the spatial-lag profile likelihood: e0 from regressing
// y on X, eL from regressing the spatially lagged response on the same X.
struct SarConcentratedState {
    Eigen::VectorXd e0;
    Eigen::VectorXd eL;
    int n_units = 0;
    int n_weeks = 0;
};

ModelFit fit_lr(const DesignMatrix& x, const Eigen::VectorXd& y);
ModelFit fit_sar(const DesignMatrix& x, const Eigen::VectorXd& y, const SpatialWeights& w);
ModelFit fit_car(const DesignMatrix& x, const Eigen::VectorXd& y, const SpatialWeights& w);
ModelFit fit_glm(const DesignMatrix& x, const Eigen::VectorXd& y);

struct GlmmOptions {
    std::optional<double> fixed_sigma2;  // skip the variance update when set
    double initial_sigma2 = 0.5;
    int max_outer_iterations = 200;
};

ModelFit fit_glmm(const DesignMatrix& x, const Eigen::VectorXd& y, const SpatialWeights& w,
                  const GlmmOptions& options = {});

ModelFit fit_model(ModelKind kind, const DesignMatrix& x, const Eigen::VectorXd& y,
                   const SpatialWeights& w);

struct Forecast {
    Eigen::VectorXd values;  // non-negative; Gaussian kinds are clamped at 0
    Eigen::VectorXd raw;     // unclamped predictor output
};

Forecast predict_one_step(const ModelFit& fit, const DesignMatrix& x_next,
                          const SpatialWeights& w);

// Exposed for verification against from-scratch profile likelihoods.
SarConcentratedState sar_concentrate(const DesignMatrix& x, const Eigen::VectorXd& y,
                                     const SpatialWeights& w);
double sar_concentrated_nll(const SarConcentratedState& state,
                            const Eigen::VectorXd& omega, double rho);
double car_profile_nll(const DesignMatrix& x, const Eigen::VectorXd& y,
                       const SpatialWeights& w, const Eigen::VectorXd& omega, double delta);

// (I_T (x) W) v for week-major stacked vectors.
Eigen::VectorXd apply_spatial_lag(const SpatialWeights& w, const Eigen::VectorXd& v);

// Validates week-major complete blocks (units 0..N-1 per week, weeks strictly
// increasing) and returns the number of weeks.
int panel_weeks(const DesignMatrix& d, int n_units);

// Two-sided normal-approximation p-value for estimate/std_error.
double two_sided_p(double estimate, double std_error);

// Scalar minimizer (Brent). Returns argmin over [a,b] to absolute tolerance tol.
double brent_minimize(const std::function<double(double)>& f, double a, double b,
                      double tol, int max_iterations = 200);

}  // namespace crimecast
