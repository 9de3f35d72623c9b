#include "crimecast/mlp.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <vector>

#include "crimecast/errors.hpp"
#include "crimecast/rng.hpp"
#include "testutil.hpp"

using namespace crimecast;

namespace {

Eigen::MatrixXd random_matrix(int n, int k, Rng& rng) {
    std::normal_distribution<double> g(0.0, 1.0);
    Eigen::MatrixXd x(n, k);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < k; ++j) x(i, j) = g(rng);
    return x;
}

}  // namespace

static void linear_network_recovers_least_squares() {
    // no hidden layers: the net IS a linear model, and on noiseless full-rank
    // data every per-sample gradient vanishes exactly at the least-squares
    // solution, so training converges to it
    Rng rng = make_rng(211);
    const int n = 200, k = 3;
    Eigen::MatrixXd x = random_matrix(n, k, rng);
    Standardizer std_x;
    std_x.fit(x);
    Eigen::MatrixXd xs = std_x.apply(x);
    Eigen::VectorXd beta(k);
    beta << 1.5, -0.7, 0.3;
    const double intercept = 0.9;
    Eigen::VectorXd y = xs * beta;
    y.array() += intercept;

    MlpOptions options;
    options.hidden = {};
    options.epochs = 400;
    MlpFit net = fit_mlp(xs, y, options, 5);
    REQUIRE(net.w.size() == 1);
    REQUIRE(net.w[0].rows() == 1 && net.w[0].cols() == k);

    // closed-form least squares on the same design
    Eigen::MatrixXd d(n, k + 1);
    d << Eigen::VectorXd::Ones(n), xs;
    Eigen::VectorXd ols = d.colPivHouseholderQr().solve(y);
    REQUIRE_NEAR(net.b[0][0], ols[0], 1e-3);
    for (int j = 0; j < k; ++j) REQUIRE_NEAR(net.w[0](0, j), ols[j + 1], 1e-3);
}

static void backprop_matches_finite_differences() {
    Rng rng = make_rng(223);
    MlpOptions options;
    options.hidden = {8, 5};
    MlpFit net = init_mlp(4, options, 77);

    std::normal_distribution<double> g(0.0, 1.0);
    const double h = 1e-6;
    for (int point = 0; point < 10; ++point) {
        Eigen::VectorXd x_row(4);
        for (int j = 0; j < 4; ++j) x_row[j] = g(rng);
        const double y = g(rng);
        const MlpGradients grad = mlp_backprop(net, x_row, y);

        for (size_t l = 0; l < net.w.size(); ++l) {
            for (int r = 0; r < net.w[l].rows(); ++r)
                for (int c = 0; c < net.w[l].cols(); ++c) {
                    const double keep = net.w[l](r, c);
                    net.w[l](r, c) = keep + h;
                    const double up = mlp_loss(net, x_row, y);
                    net.w[l](r, c) = keep - h;
                    const double down = mlp_loss(net, x_row, y);
                    net.w[l](r, c) = keep;
                    const double fd = (up - down) / (2.0 * h);
                    const double an = grad.dw[l](r, c);
                    REQUIRE_NEAR(fd, an, 1e-4 * std::max(1.0, std::abs(an)));
                }
            for (int r = 0; r < net.b[l].size(); ++r) {
                const double keep = net.b[l][r];
                net.b[l][r] = keep + h;
                const double up = mlp_loss(net, x_row, y);
                net.b[l][r] = keep - h;
                const double down = mlp_loss(net, x_row, y);
                net.b[l][r] = keep;
                const double fd = (up - down) / (2.0 * h);
                REQUIRE_NEAR(fd, grad.db[l][r], 1e-4 * std::max(1.0, std::abs(grad.db[l][r])));
            }
        }
    }
}

static void deviance_gradient_matches_finite_differences() {
    Rng rng = make_rng(227);
    MlpOptions options;
    options.hidden = {6};
    options.loss = MlpLoss::PoissonDeviance;
    MlpFit net = init_mlp(3, options, 13);
    REQUIRE(net.loss == MlpLoss::PoissonDeviance);

    std::normal_distribution<double> g(0.0, 0.5);
    const double h = 1e-6;
    for (int point = 0; point < 5; ++point) {
        Eigen::VectorXd x_row(3);
        for (int j = 0; j < 3; ++j) x_row[j] = g(rng);
        const double y = static_cast<double>(point);  // includes a zero count
        const MlpGradients grad = mlp_backprop(net, x_row, y);
        for (size_t l = 0; l < net.w.size(); ++l)
            for (int r = 0; r < net.w[l].rows(); ++r)
                for (int c = 0; c < net.w[l].cols(); ++c) {
                    const double keep = net.w[l](r, c);
                    net.w[l](r, c) = keep + h;
                    const double up = mlp_loss(net, x_row, y);
                    net.w[l](r, c) = keep - h;
                    const double down = mlp_loss(net, x_row, y);
                    net.w[l](r, c) = keep;
                    const double fd = (up - down) / (2.0 * h);
                    const double an = grad.dw[l](r, c);
                    REQUIRE_NEAR(fd, an, 1e-4 * std::max(1.0, std::abs(an)));
                }
    }
}

static void zero_output_weights_predict_the_bias() {
    MlpOptions options;
    options.hidden = {16};
    MlpFit net = init_mlp(5, options, 31);
    net.w.back().setZero();
    net.b.back()[0] = 3.7;
    Rng rng = make_rng(229);
    Eigen::MatrixXd probe = random_matrix(50, 5, rng);
    Eigen::VectorXd pred = net.predict(probe);
    REQUIRE((pred.array() - 3.7).abs().maxCoeff() == 0.0);
}

static void training_is_deterministic_in_the_seed() {
    Rng rng = make_rng(233);
    Eigen::MatrixXd x = random_matrix(120, 4, rng);
    Eigen::VectorXd y = x.col(0).array().sin() + x.col(2).array();
    MlpOptions options;
    options.hidden = {12};
    options.epochs = 5;
    MlpFit a = fit_mlp(x, y, options, 41);
    MlpFit b = fit_mlp(x, y, options, 41);
    Eigen::MatrixXd probe = random_matrix(60, 4, rng);
    REQUIRE((a.predict(probe) - b.predict(probe)).cwiseAbs().maxCoeff() == 0.0);
    MlpFit c = fit_mlp(x, y, options, 42);
    REQUIRE((a.predict(probe) - c.predict(probe)).cwiseAbs().maxCoeff() > 0.0);
}

static void network_learns_a_nonlinear_signal() {
    Rng rng = make_rng(239);
    const int n = 600;
    Eigen::MatrixXd x = random_matrix(n, 2, rng);
    Eigen::VectorXd y = x.col(0).array().square() + 0.5 * x.col(1).array();
    Standardizer std_x;
    std_x.fit(x);
    Eigen::MatrixXd xs = std_x.apply(x);

    MlpOptions options;
    options.hidden = {32};
    options.epochs = 60;
    MlpFit net = fit_mlp(xs, y, options, 51);
    const double fitted_mse = (net.predict(xs) - y).squaredNorm() / n;
    const double baseline = (y.array() - y.mean()).square().sum() / n;
    REQUIRE_MSG(fitted_mse < 0.3 * baseline, fitted_mse << " vs variance " << baseline);
}

static void non_finite_loss_aborts() {
    Eigen::MatrixXd x(10, 2);
    x.setRandom();
    x(4, 1) = std::numeric_limits<double>::infinity();
    Eigen::VectorXd y(10);
    y.setRandom();
    MlpOptions options;
    options.hidden = {4};
    options.epochs = 2;
    REQUIRE_THROWS(fit_mlp(x, y, options, 1), NumericalError);
}

static void standardizer_statistics_and_passthrough() {
    Rng rng = make_rng(241);
    Eigen::MatrixXd x = random_matrix(150, 3, rng);
    x.col(1).array() = 4.2;  // constant column
    x.col(0).array() = x.col(0).array() * 10.0 + 5.0;
    Standardizer s;
    s.fit(x);
    Eigen::MatrixXd z = s.apply(x);
    for (int j : {0, 2}) {
        REQUIRE_NEAR(z.col(j).mean(), 0.0, 1e-10);
        REQUIRE_NEAR(z.col(j).squaredNorm() / 150.0, 1.0, 1e-10);
    }
    REQUIRE(z.col(1).cwiseAbs().maxCoeff() < 1e-12);  // centred, unit scale fallback
    REQUIRE_NEAR(s.sd[1], 1.0, 0.0);

    // new data is scored with the frozen statistics, not its own
    Eigen::MatrixXd fresh = random_matrix(20, 3, rng);
    Eigen::MatrixXd zf = s.apply(fresh);
    for (int i = 0; i < 20; ++i)
        REQUIRE_NEAR(zf(i, 0), (fresh(i, 0) - s.mean[0]) / s.sd[0], 1e-12);
    REQUIRE_THROWS(s.apply(Eigen::MatrixXd::Zero(5, 2)), ValidationError);
}

static void option_validation() {
    Eigen::MatrixXd x(5, 2);
    x.setRandom();
    Eigen::VectorXd y(5);
    y.setRandom();
    MlpOptions options;
    options.hidden = {0};
    REQUIRE_THROWS(fit_mlp(x, y, options, 1), ValidationError);
    options = MlpOptions{};
    options.epochs = 0;
    REQUIRE_THROWS(fit_mlp(x, y, options, 1), ValidationError);
    options = MlpOptions{};
    options.decay = 1.5;
    REQUIRE_THROWS(fit_mlp(x, y, options, 1), ValidationError);
    options = MlpOptions{};
    options.loss = MlpLoss::PoissonDeviance;
    Eigen::VectorXd negative(5);
    negative << 1, 2, -1, 0, 3;
    REQUIRE_THROWS(fit_mlp(x, negative, options, 1), ValidationError);
    REQUIRE_THROWS(init_mlp(0, MlpOptions{}, 1), ValidationError);
}

int main() {
    RUN(linear_network_recovers_least_squares);
    RUN(backprop_matches_finite_differences);
    RUN(deviance_gradient_matches_finite_differences);
    RUN(zero_output_weights_predict_the_bias);
    RUN(training_is_deterministic_in_the_seed);
    RUN(network_learns_a_nonlinear_signal);
    RUN(non_finite_loss_aborts);
    RUN(standardizer_statistics_and_passthrough);
    RUN(option_validation);
    return 0;
}
