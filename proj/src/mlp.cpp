#include "crimecast/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "crimecast/errors.hpp"
#include "crimecast/rng.hpp"

namespace crimecast {

namespace {
constexpr double kEtaCap = 30.0;  // exp argument guard for the deviance loss
}

void MlpOptions::validate() const {
    for (int width : hidden)
        if (width < 1) throw ValidationError("hidden layer widths must be at least 1");
    if (epochs < 1) throw ValidationError("epochs must be at least 1");
    if (!(decay > 0.0 && decay <= 1.0)) throw ValidationError("decay must lie in (0, 1]");
    if (!(epsilon > 0.0)) throw ValidationError("epsilon must be positive");
}

MlpFit init_mlp(int n_inputs, const MlpOptions& options, std::uint64_t seed) {
    options.validate();
    if (n_inputs < 1) throw ValidationError("network needs at least one input");
    MlpFit net;
    net.loss = options.loss;
    net.layer_sizes.push_back(n_inputs);
    for (int width : options.hidden) net.layer_sizes.push_back(width);
    net.layer_sizes.push_back(1);

    Rng rng = make_rng(seed, 0x1217ULL);
    std::normal_distribution<double> g(0.0, 1.0);
    for (size_t l = 1; l < net.layer_sizes.size(); ++l) {
        const int fan_in = net.layer_sizes[l - 1];
        const int fan_out = net.layer_sizes[l];
        const double scale = std::sqrt(2.0 / fan_in);
        Eigen::MatrixXd w(fan_out, fan_in);
        for (int i = 0; i < fan_out; ++i)
            for (int j = 0; j < fan_in; ++j) w(i, j) = scale * g(rng);
        net.w.push_back(std::move(w));
        net.b.push_back(Eigen::VectorXd::Zero(fan_out));
    }
    return net;
}

namespace {

// activations per layer; pre-activations are not stored because ReLU's
// derivative is recoverable from the activation (a > 0)
std::vector<Eigen::VectorXd> forward(const MlpFit& net, const Eigen::VectorXd& x_row) {
    std::vector<Eigen::VectorXd> a;
    a.reserve(net.w.size() + 1);
    a.push_back(x_row);
    for (size_t l = 0; l < net.w.size(); ++l) {
        Eigen::VectorXd z = net.w[l] * a.back() + net.b[l];
        if (l + 1 < net.w.size()) z = z.cwiseMax(0.0);
        a.push_back(std::move(z));
    }
    return a;
}

double deviance_term(double y, double mu) {
    double d = mu - y;
    if (y > 0.0) d += y * std::log(y / mu);
    return 2.0 * d;
}

}  // namespace

double MlpFit::predict_row(const Eigen::VectorXd& x_row) const {
    if (x_row.size() != layer_sizes.front())
        throw ValidationError("input width does not match the network");
    Eigen::VectorXd a = x_row;
    for (size_t l = 0; l < w.size(); ++l) {
        a = w[l] * a + b[l];
        if (l + 1 < w.size()) a = a.cwiseMax(0.0);
    }
    if (loss == MlpLoss::PoissonDeviance) return std::exp(std::min(a[0], kEtaCap));
    return a[0];
}

Eigen::VectorXd MlpFit::predict(const Eigen::MatrixXd& x) const {
    Eigen::VectorXd out(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) out[i] = predict_row(x.row(i).transpose());
    return out;
}

double mlp_loss(const MlpFit& net, const Eigen::VectorXd& x_row, double y) {
    const double p = net.predict_row(x_row);
    if (net.loss == MlpLoss::PoissonDeviance) return deviance_term(y, p);
    const double diff = p - y;
    return 0.5 * diff * diff;
}

MlpGradients mlp_backprop(const MlpFit& net, const Eigen::VectorXd& x_row, double y) {
    const std::vector<Eigen::VectorXd> a = forward(net, x_row);
    const size_t layers = net.w.size();
    MlpGradients grad;
    grad.dw.resize(layers);
    grad.db.resize(layers);

    const double eta = a.back()[0];
    double dloss;  // derivative with respect to the linear output
    if (net.loss == MlpLoss::PoissonDeviance) {
        const double mu = std::exp(std::min(eta, kEtaCap));
        grad.loss = deviance_term(y, mu);
        dloss = 2.0 * (mu - y);
    } else {
        const double diff = eta - y;
        grad.loss = 0.5 * diff * diff;
        dloss = diff;
    }

    Eigen::VectorXd delta = Eigen::VectorXd::Constant(1, dloss);
    for (size_t l = layers; l-- > 0;) {
        grad.dw[l] = delta * a[l].transpose();
        grad.db[l] = delta;
        if (l > 0) {
            delta = net.w[l].transpose() * delta;
            // ReLU gate: units that were clamped to zero pass no gradient
            delta = (a[l].array() > 0.0).select(delta, 0.0);
        }
    }
    return grad;
}

MlpFit fit_mlp(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
               const MlpOptions& options, std::uint64_t seed) {
    options.validate();
    if (x.rows() == 0) throw ValidationError("cannot train a network on empty data");
    if (x.rows() != y.size()) throw ValidationError("network data rows and responses differ");
    if (options.loss == MlpLoss::PoissonDeviance && y.minCoeff() < 0.0)
        throw ValidationError("deviance loss needs non-negative responses");
    const int n = static_cast<int>(x.rows());

    MlpFit net = init_mlp(static_cast<int>(x.cols()), options, seed);
    const size_t layers = net.w.size();

    // ADADELTA state: running squared gradients and squared steps per parameter
    std::vector<Eigen::ArrayXXd> gw(layers), sw(layers), gb(layers), sb(layers);
    for (size_t l = 0; l < layers; ++l) {
        gw[l] = Eigen::ArrayXXd::Zero(net.w[l].rows(), net.w[l].cols());
        sw[l] = gw[l];
        gb[l] = Eigen::ArrayXXd::Zero(net.b[l].size(), 1);
        sb[l] = gb[l];
    }
    const double rho = options.decay, eps = options.epsilon;
    auto adadelta = [rho, eps](Eigen::ArrayXXd& g2, Eigen::ArrayXXd& s2,
                               const Eigen::ArrayXXd& g) {
        g2 = rho * g2 + (1.0 - rho) * g.square();
        Eigen::ArrayXXd step = -((s2 + eps).sqrt() / (g2 + eps).sqrt()) * g;
        s2 = rho * s2 + (1.0 - rho) * step.square();
        return step;
    };

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    for (int epoch = 0; epoch < options.epochs; ++epoch) {
        Rng rng = make_rng(seed, static_cast<std::uint64_t>(epoch) + 1);
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        for (int i : order) {
            const MlpGradients grad = mlp_backprop(net, x.row(i).transpose(), y[i]);
            epoch_loss += grad.loss;
            for (size_t l = 0; l < layers; ++l) {
                net.w[l].array() += adadelta(gw[l], sw[l], grad.dw[l].array());
                net.b[l].array() += adadelta(gb[l], sb[l], grad.db[l].array()).col(0);
            }
        }
        if (!std::isfinite(epoch_loss))
            throw NumericalError("network training diverged (non-finite loss)");
        net.epochs_run = epoch + 1;
    }
    return net;
}

void Standardizer::fit(const Eigen::MatrixXd& x) {
    if (x.rows() == 0) throw ValidationError("cannot standardise empty data");
    mean = x.colwise().mean();
    sd.resize(x.cols());
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        if (x.col(j).maxCoeff() == x.col(j).minCoeff()) {
            // exactly constant: centre on the constant itself, pass through
            mean[j] = x(0, j);
            sd[j] = 1.0;
            continue;
        }
        const double var =
            (x.col(j).array() - mean[j]).square().sum() / static_cast<double>(x.rows());
        sd[j] = var > 0.0 ? std::sqrt(var) : 1.0;
    }
}

Eigen::MatrixXd Standardizer::apply(const Eigen::MatrixXd& x) const {
    if (x.cols() != mean.size()) throw ValidationError("column count changed since fit");
    return (x.rowwise() - mean.transpose()).array().rowwise() /
           sd.transpose().array();
}

}  // namespace crimecast
