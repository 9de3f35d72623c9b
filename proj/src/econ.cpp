#include "crimecast/econ.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "crimecast/errors.hpp"

namespace crimecast {

namespace {

constexpr double kBracketShrink = 1e-6;   // pulled in from each spectral bound
constexpr double kBoundaryWarn = 1e-6;    // proximity that flags a boundary solution
constexpr double kScalarTol = 1e-8;       // Brent tolerance for rho/delta

void check_counts(const Eigen::VectorXd& y) {
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        if (!(y[i] >= 0.0) || std::floor(y[i]) != y[i])
            throw ValidationError("count responses must be non-negative integers (row " +
                                  std::to_string(i) + " is " + std::to_string(y[i]) + ")");
    }
}

void check_shapes(const DesignMatrix& x, const Eigen::VectorXd& y) {
    if (x.x.rows() != y.size())
        throw ValidationError("design matrix rows and response length differ");
    if (x.x.rows() == 0) throw ValidationError("empty design matrix");
    if (!x.x.allFinite() || !y.allFinite())
        throw ValidationError("non-finite values in design or response");
    if (static_cast<int>(x.column_names.size()) != x.cols())
        throw ValidationError("design matrix column names out of sync");
}

// Full-rank check that names the dependent columns when it fails.
Eigen::ColPivHouseholderQR<Eigen::MatrixXd> rank_checked_qr(const DesignMatrix& x) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x.x);
    const int k = x.cols();
    if (x.x.rows() <= k)
        throw ValidationError("need more observations than columns (" +
                              std::to_string(x.x.rows()) + " rows, " + std::to_string(k) +
                              " columns)");
    if (qr.rank() < k) {
        const auto& perm = qr.colsPermutation().indices();
        std::ostringstream msg;
        msg << "design matrix is rank deficient; collinear column(s):";
        for (int j = qr.rank(); j < k; ++j) msg << " " << x.column_names[perm[j]];
        throw ValidationError(msg.str());
    }
    return qr;
}

double gaussian_loglik(int nt, double sigma2) {
    // exact MVN log-density at the ML plug-in, where the quadratic term is NT/2
    return -0.5 * nt * (std::log(2.0 * M_PI * sigma2) + 1.0);
}

Eigen::VectorXd per_unit_time_average(const Eigen::VectorXd& v, int n, int t) {
    Eigen::VectorXd avg = Eigen::VectorXd::Zero(n);
    for (int b = 0; b < t; ++b) avg += v.segment(static_cast<Eigen::Index>(b) * n, n);
    return avg / static_cast<double>(t);
}

struct ScalarFitInterval {
    double lo, hi;  // Brent bracket, strictly inside the spectral bounds
    SpectralBounds bounds;
};

ScalarFitInterval fit_interval(const SpatialWeights& w) {
    SpectralBounds b = spectral_bounds(w);
    ScalarFitInterval iv{b.lower + kBracketShrink, b.upper - kBracketShrink, b};
    if (!(iv.lo < iv.hi))
        throw NumericalError("spectral bounds too tight for scalar optimization");
    return iv;
}

void warn_if_boundary(double value, const ScalarFitInterval& iv, ModelFit& fit) {
    if (value - iv.lo <= kBoundaryWarn || iv.hi - value <= kBoundaryWarn)
        fit.warnings.push_back("boundary solution");
}

}  // namespace

const char* to_string(ModelKind k) {
    switch (k) {
        case ModelKind::LR: return "lr";
        case ModelKind::SAR: return "sar";
        case ModelKind::CAR: return "car";
        case ModelKind::GLM: return "glm";
        case ModelKind::GLMM: return "glmm";
    }
    return "?";
}

ModelKind model_kind_from_string(const std::string& s) {
    if (s == "lr") return ModelKind::LR;
    if (s == "sar") return ModelKind::SAR;
    if (s == "car") return ModelKind::CAR;
    if (s == "glm") return ModelKind::GLM;
    if (s == "glmm") return ModelKind::GLMM;
    throw ValidationError("unknown model kind '" + s + "' (lr|sar|car|glm|glmm)");
}

bool is_count_model(ModelKind k) { return k == ModelKind::GLM || k == ModelKind::GLMM; }

int panel_weeks(const DesignMatrix& d, int n_units) {
    const auto rows = static_cast<int>(d.rows.size());
    if (rows != d.x.rows()) throw ValidationError("design matrix row index out of sync");
    if (n_units <= 0 || rows % n_units != 0)
        throw ValidationError("design matrix rows do not form complete unit blocks");
    const int t = rows / n_units;
    int prev_week = -1;
    for (int b = 0; b < t; ++b) {
        const int week = d.rows[static_cast<size_t>(b) * n_units].second;
        if (week <= prev_week)
            throw ValidationError("design matrix weeks must be strictly increasing");
        prev_week = week;
        for (int i = 0; i < n_units; ++i) {
            const auto& r = d.rows[static_cast<size_t>(b) * n_units + i];
            if (r.first != i || r.second != week)
                throw ValidationError("design matrix rows must be week-major with every "
                                      "unit present in ascending order");
        }
    }
    return t;
}

Eigen::VectorXd apply_spatial_lag(const SpatialWeights& w, const Eigen::VectorXd& v) {
    const int n = w.size();
    if (v.size() % n != 0)
        throw ValidationError("stacked vector length is not a multiple of the unit count");
    const int t = static_cast<int>(v.size()) / n;
    Eigen::VectorXd out = Eigen::VectorXd::Zero(v.size());
    for (int b = 0; b < t; ++b) {
        const Eigen::Index base = static_cast<Eigen::Index>(b) * n;
        for (int i = 0; i < n; ++i) {
            double acc = 0.0;
            for (int j : w.neighbours(i)) acc += v[base + j];
            out[base + i] = acc;
        }
    }
    return out;
}

double two_sided_p(double estimate, double std_error) {
    if (!(std_error > 0.0)) return std::numeric_limits<double>::quiet_NaN();
    const double z = std::abs(estimate / std_error);
    return std::erfc(z / std::sqrt(2.0));
}

double brent_minimize(const std::function<double(double)>& f, double a, double b,
                      double tol, int max_iterations) {
    // classic Brent: golden-section with parabolic acceleration
    const double golden = 0.3819660112501051;
    const double zeps = 1e-12;
    double x = a + golden * (b - a), w = x, v = x;
    double fx = f(x), fw = fx, fv = fx;
    double d = 0.0, e = 0.0;
    for (int iter = 0; iter < max_iterations; ++iter) {
        const double xm = 0.5 * (a + b);
        const double tol1 = tol * std::abs(x) + zeps;
        const double tol2 = 2.0 * tol1;
        if (std::abs(x - xm) <= tol2 - 0.5 * (b - a)) return x;
        bool use_golden = true;
        if (std::abs(e) > tol1) {
            const double r = (x - w) * (fx - fv);
            double q = (x - v) * (fx - fw);
            double p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if (q > 0.0) p = -p;
            q = std::abs(q);
            const double e_prev = e;
            e = d;
            if (std::abs(p) < std::abs(0.5 * q * e_prev) && p > q * (a - x) &&
                p < q * (b - x)) {
                d = p / q;
                const double u = x + d;
                if (u - a < tol2 || b - u < tol2) d = std::copysign(tol1, xm - x);
                use_golden = false;
            }
        }
        if (use_golden) {
            e = (x >= xm) ? a - x : b - x;
            d = golden * e;
        }
        const double u = (std::abs(d) >= tol1) ? x + d : x + std::copysign(tol1, d);
        const double fu = f(u);
        if (fu <= fx) {
            if (u >= x) a = x; else b = x;
            v = w; fv = fw;
            w = x; fw = fx;
            x = u; fx = fu;
        } else {
            if (u < x) a = u; else b = u;
            if (fu <= fw || w == x) {
                v = w; fv = fw;
                w = u; fw = fu;
            } else if (fu <= fv || v == x || v == w) {
                v = u; fv = fu;
            }
        }
    }
    return x;
}

ModelFit fit_lr(const DesignMatrix& x, const Eigen::VectorXd& y) {
    check_shapes(x, y);
    auto qr = rank_checked_qr(x);
    const int nt = static_cast<int>(y.size());
    const int k = x.cols();

    ModelFit fit;
    fit.kind = ModelKind::LR;
    fit.beta = qr.solve(y);
    fit.beta_names = x.column_names;
    fit.n_obs = nt;

    const Eigen::VectorXd resid = y - x.x * fit.beta;
    fit.sigma2 = resid.squaredNorm() / nt;
    fit.loglik = gaussian_loglik(nt, fit.sigma2);

    const Eigen::MatrixXd xtx_inv =
        (x.x.transpose() * x.x).ldlt().solve(Eigen::MatrixXd::Identity(k, k));
    fit.std_errors = (fit.sigma2 * xtx_inv.diagonal()).cwiseMax(0.0).cwiseSqrt();
    return fit;
}

SarConcentratedState sar_concentrate(const DesignMatrix& x, const Eigen::VectorXd& y,
                                     const SpatialWeights& w) {
    check_shapes(x, y);
    const int n = w.size();
    SarConcentratedState st;
    st.n_units = n;
    st.n_weeks = panel_weeks(x, n);
    auto qr = rank_checked_qr(x);
    const Eigen::VectorXd wy = apply_spatial_lag(w, y);
    // one shared OLS projector for both residual vectors
    st.e0 = y - x.x * qr.solve(y);
    st.eL = wy - x.x * qr.solve(wy);
    return st;
}

double sar_concentrated_nll(const SarConcentratedState& state, const Eigen::VectorXd& omega,
                            double rho) {
    const int n = state.n_units, t = state.n_weeks;
    const double nt = static_cast<double>(n) * t;
    double logdet = 0.0;
    for (Eigen::Index k = 0; k < omega.size(); ++k) {
        const double term = 1.0 - rho * omega[k];
        if (!(term > 0.0)) return std::numeric_limits<double>::infinity();
        logdet += std::log(term);
    }
    const double rss = (state.e0 - rho * state.eL).squaredNorm();
    return -t * logdet + 0.5 * nt * std::log(2.0 * M_PI * rss / nt) + 0.5 * nt;
}

ModelFit fit_sar(const DesignMatrix& x, const Eigen::VectorXd& y, const SpatialWeights& w) {
    if (w.edge_count() == 0)
        throw ValidationError("spatial-lag fitting needs at least one edge");
    SarConcentratedState st = sar_concentrate(x, y, w);
    const Eigen::VectorXd omega = adjacency_eigenvalues(w);
    const ScalarFitInterval iv = fit_interval(w);

    const auto objective = [&](double rho) { return sar_concentrated_nll(st, omega, rho); };
    const double rho_hat = brent_minimize(objective, iv.lo, iv.hi, kScalarTol);

    ModelFit fit;
    fit.kind = ModelKind::SAR;
    fit.rho = rho_hat;
    fit.n_units = w.size();
    fit.n_obs = static_cast<int>(y.size());
    warn_if_boundary(rho_hat, iv, fit);

    const Eigen::VectorXd wy = apply_spatial_lag(w, y);
    const Eigen::VectorXd y_star = y - rho_hat * wy;
    auto qr = rank_checked_qr(x);
    fit.beta = qr.solve(y_star);
    fit.beta_names = x.column_names;

    const Eigen::VectorXd resid = y_star - x.x * fit.beta;  // equals e0 - rho*eL
    const double nt = static_cast<double>(y.size());
    fit.sigma2 = resid.squaredNorm() / nt;
    fit.loglik = -sar_concentrated_nll(st, omega, rho_hat);
    fit.residual_state = per_unit_time_average(resid, st.n_units, st.n_weeks);

    const int k = x.cols();
    const Eigen::MatrixXd xtx_inv =
        (x.x.transpose() * x.x).ldlt().solve(Eigen::MatrixXd::Identity(k, k));
    fit.std_errors = (fit.sigma2 * xtx_inv.diagonal()).cwiseMax(0.0).cwiseSqrt();
    return fit;
}

namespace {

struct CarProfile {
    Eigen::VectorXd beta;
    double sigma2;
    double nll;
};

CarProfile car_profile_at(const DesignMatrix& x, const Eigen::VectorXd& y,
                          const SpatialWeights& w, const Eigen::VectorXd& omega,
                          double delta, int n, int t) {
    const double nt = static_cast<double>(y.size());
    const int k = x.cols();
    // B = I_T (x) (I_N - delta*W) applied through the sparse lag
    const Eigen::MatrixXd wx_cols = [&] {
        Eigen::MatrixXd m(x.x.rows(), k);
        for (int j = 0; j < k; ++j) m.col(j) = apply_spatial_lag(w, x.x.col(j));
        return m;
    }();
    const Eigen::MatrixXd xbx =
        x.x.transpose() * x.x - delta * (x.x.transpose() * wx_cols);
    const Eigen::VectorXd xby =
        x.x.transpose() * y - delta * (x.x.transpose() * apply_spatial_lag(w, y));
    Eigen::LDLT<Eigen::MatrixXd> ldlt(xbx);
    if (ldlt.info() != Eigen::Success)
        throw NumericalError("weighted normal equations not solvable");
    CarProfile p;
    p.beta = ldlt.solve(xby);
    const Eigen::VectorXd eps = y - x.x * p.beta;
    const double ebe = eps.squaredNorm() - delta * eps.dot(apply_spatial_lag(w, eps));
    p.sigma2 = ebe / nt;
    double logdet = 0.0;
    for (Eigen::Index i = 0; i < omega.size(); ++i) {
        const double term = 1.0 - delta * omega[i];
        if (!(term > 0.0)) {
            p.nll = std::numeric_limits<double>::infinity();
            return p;
        }
        logdet += std::log(term);
    }
    p.nll = -0.5 * t * logdet + 0.5 * nt * std::log(2.0 * M_PI * p.sigma2) + 0.5 * nt;
    (void)n;
    return p;
}

}  // namespace

double car_profile_nll(const DesignMatrix& x, const Eigen::VectorXd& y,
                       const SpatialWeights& w, const Eigen::VectorXd& omega, double delta) {
    check_shapes(x, y);
    const int n = w.size();
    const int t = panel_weeks(x, n);
    return car_profile_at(x, y, w, omega, delta, n, t).nll;
}

ModelFit fit_car(const DesignMatrix& x, const Eigen::VectorXd& y, const SpatialWeights& w) {
    if (w.edge_count() == 0)
        throw ValidationError("error-dependence fitting needs at least one edge");
    check_shapes(x, y);
    rank_checked_qr(x);
    const int n = w.size();
    const int t = panel_weeks(x, n);
    const Eigen::VectorXd omega = adjacency_eigenvalues(w);
    const ScalarFitInterval iv = fit_interval(w);

    const auto objective = [&](double delta) {
        return car_profile_at(x, y, w, omega, delta, n, t).nll;
    };
    const double delta_hat = brent_minimize(objective, iv.lo, iv.hi, kScalarTol);

    CarProfile prof = car_profile_at(x, y, w, omega, delta_hat, n, t);
    ModelFit fit;
    fit.kind = ModelKind::CAR;
    fit.delta = delta_hat;
    fit.beta = prof.beta;
    fit.beta_names = x.column_names;
    fit.sigma2 = prof.sigma2;
    fit.loglik = -prof.nll;
    fit.n_units = n;
    fit.n_obs = static_cast<int>(y.size());
    warn_if_boundary(delta_hat, iv, fit);

    const Eigen::VectorXd eps = y - x.x * prof.beta;
    fit.residual_state = per_unit_time_average(eps, n, t);

    const int k = x.cols();
    Eigen::MatrixXd wx(x.x.rows(), k);
    for (int j = 0; j < k; ++j) wx.col(j) = apply_spatial_lag(w, x.x.col(j));
    const Eigen::MatrixXd xbx =
        x.x.transpose() * x.x - delta_hat * (x.x.transpose() * wx);
    const Eigen::MatrixXd xbx_inv = xbx.ldlt().solve(Eigen::MatrixXd::Identity(k, k));
    fit.std_errors = (fit.sigma2 * xbx_inv.diagonal()).cwiseMax(0.0).cwiseSqrt();
    return fit;
}

namespace {

double poisson_loglik(const Eigen::VectorXd& y, const Eigen::VectorXd& eta) {
    double ll = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i)
        ll += y[i] * eta[i] - std::exp(eta[i]) - std::lgamma(y[i] + 1.0);
    return ll;
}

double poisson_deviance(const Eigen::VectorXd& y, const Eigen::VectorXd& mu) {
    double dev = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        const double term = y[i] > 0.0 ? y[i] * std::log(y[i] / mu[i]) : 0.0;
        dev += 2.0 * (term - (y[i] - mu[i]));
    }
    return dev;
}

constexpr double kEtaOverflow = 300.0;  // exp() past this is fatal divergence

}  // namespace

ModelFit fit_glm(const DesignMatrix& x, const Eigen::VectorXd& y) {
    check_shapes(x, y);
    check_counts(y);
    rank_checked_qr(x);
    const int k = x.cols();
    const int nt = static_cast<int>(y.size());

    Eigen::VectorXd mu = y.array() + 0.1;
    Eigen::VectorXd eta = mu.array().log();
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(k);
    Eigen::MatrixXd xtwx(k, k);
    bool converged = false;
    for (int iter = 0; iter < 100; ++iter) {
        const Eigen::VectorXd z = eta.array() + (y - mu).array() / mu.array();
        const Eigen::MatrixXd xw = x.x.array().colwise() * mu.array();
        xtwx = xw.transpose() * x.x;
        Eigen::LDLT<Eigen::MatrixXd> ldlt(xtwx);
        if (ldlt.info() != Eigen::Success)
            throw NumericalError("weighted normal equations singular during scoring");
        const Eigen::VectorXd beta_new = ldlt.solve(xw.transpose() * z);
        if (!beta_new.allFinite())
            throw NumericalError("Poisson scoring diverged (non-finite coefficients)");
        const double step = (beta_new - beta).cwiseAbs().maxCoeff();
        beta = beta_new;
        eta = x.x * beta;
        if (eta.maxCoeff() > kEtaOverflow)
            throw NumericalError("Poisson scoring diverged (mean overflow)");
        mu = eta.array().exp();
        if (step < 1e-8) {
            converged = true;
            break;
        }
    }
    if (!converged)
        throw NumericalError(
            "Poisson scoring failed to converge in 100 iterations (possible separation "
            "or all-zero response)");

    ModelFit fit;
    fit.kind = ModelKind::GLM;
    fit.beta = beta;
    fit.beta_names = x.column_names;
    fit.loglik = poisson_loglik(y, eta);
    fit.deviance = poisson_deviance(y, mu);
    fit.n_obs = nt;
    const Eigen::MatrixXd info_inv = xtwx.ldlt().solve(Eigen::MatrixXd::Identity(k, k));
    fit.std_errors = info_inv.diagonal().cwiseMax(0.0).cwiseSqrt();
    return fit;
}

ModelFit fit_glmm(const DesignMatrix& x, const Eigen::VectorXd& y, const SpatialWeights& w,
                  const GlmmOptions& options) {
    check_shapes(x, y);
    check_counts(y);
    rank_checked_qr(x);
    if (w.edge_count() == 0)
        throw ValidationError("random-intercept smoothing needs at least one edge");
    const int n = w.size();
    const int t = panel_weeks(x, n);
    const int k = x.cols();
    const int nt = n * t;

    const PrecisionStructure q = build_precision(w);
    const std::vector<std::vector<int>> components = w.connected_components();
    const int c = static_cast<int>(components.size());
    const int q_rank = n - c;
    if (q_rank <= 0) throw ValidationError("random-effect precision has rank zero");
    const int dim = k + n + c;

    double sigma2 = options.fixed_sigma2.value_or(options.initial_sigma2);
    if (!(sigma2 > 0.0)) throw ValidationError("random-effect variance must be positive");

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(k);
    Eigen::VectorXd eta_re = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd mu = y.array() + 0.1;
    Eigen::VectorXd lin = mu.array().log();

    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(dim, dim);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(dim);
    // constraint rows: random intercepts sum to zero within each component
    for (int ci = 0; ci < c; ++ci)
        for (int j : components[ci]) {
            kkt(k + n + ci, k + j) = 1.0;
            kkt(k + j, k + n + ci) = 1.0;
        }

    Eigen::PartialPivLU<Eigen::MatrixXd> lu;
    bool outer_converged = false;
    for (int outer = 0; outer < options.max_outer_iterations; ++outer) {
        const Eigen::VectorXd beta_prev = beta;
        const Eigen::VectorXd eta_prev = eta_re;
        const double sigma2_prev = sigma2;

        // (a) penalized scoring for (beta, eta) at the current variance
        for (int inner = 0; inner < 50; ++inner) {
            const Eigen::VectorXd z = lin.array() + (y - mu).array() / mu.array();
            const Eigen::MatrixXd xw = x.x.array().colwise() * mu.array();
            kkt.topLeftCorner(k, k) = xw.transpose() * x.x;
            Eigen::MatrixXd xwz = Eigen::MatrixXd::Zero(k, n);   // X^T W Z
            Eigen::VectorXd dw = Eigen::VectorXd::Zero(n);       // Z^T W Z diagonal
            Eigen::VectorXd zwz = Eigen::VectorXd::Zero(n);      // Z^T W z
            for (int b = 0; b < t; ++b)
                for (int j = 0; j < n; ++j) {
                    const Eigen::Index r = static_cast<Eigen::Index>(b) * n + j;
                    xwz.col(j) += mu[r] * x.x.row(r).transpose();
                    dw[j] += mu[r];
                    zwz[j] += mu[r] * z[r];
                }
            kkt.block(0, k, k, n) = xwz;
            kkt.block(k, 0, n, k) = xwz.transpose();
            Eigen::MatrixXd eta_block = Eigen::MatrixXd::Zero(n, n);
            for (int j = 0; j < n; ++j) {
                eta_block(j, j) = dw[j];
                for (const auto& [col, val] : q.rows[j]) eta_block(j, col) += val / sigma2;
            }
            kkt.block(k, k, n, n) = eta_block;
            rhs.head(k) = xw.transpose() * z;
            rhs.segment(k, n) = zwz;

            lu.compute(kkt);
            const Eigen::VectorXd sol = lu.solve(rhs);
            if (!sol.allFinite())
                throw NumericalError("random-intercept scoring diverged");
            const double step = (sol.head(k) - beta).cwiseAbs().maxCoeff() +
                                (sol.segment(k, n) - eta_re).cwiseAbs().maxCoeff();
            beta = sol.head(k);
            eta_re = sol.segment(k, n);
            lin = x.x * beta;
            for (int b = 0; b < t; ++b)
                lin.segment(static_cast<Eigen::Index>(b) * n, n) += eta_re;
            if (lin.maxCoeff() > kEtaOverflow)
                throw NumericalError("random-intercept scoring diverged (mean overflow)");
            mu = lin.array().exp();
            if (step < 1e-8) break;
        }

        // (b) restricted-likelihood variance update from the working model
        if (!options.fixed_sigma2) {
            Eigen::MatrixXd eta_cols = Eigen::MatrixXd::Zero(dim, n);
            for (int j = 0; j < n; ++j) eta_cols(k + j, j) = 1.0;
            const Eigen::MatrixXd cov_eta_full = lu.solve(eta_cols);
            double trace_q_cov = 0.0;
            for (int j = 0; j < n; ++j)
                for (const auto& [col, val] : q.rows[j])
                    trace_q_cov += val * cov_eta_full(k + col, j);
            double quad = 0.0;
            for (int j = 0; j < n; ++j)
                for (const auto& [col, val] : q.rows[j]) quad += eta_re[j] * val * eta_re[col];
            sigma2 = std::max((quad + trace_q_cov) / q_rank, 1e-12);
        }

        const double denom =
            1.0 + std::max({beta.cwiseAbs().maxCoeff(), eta_re.cwiseAbs().maxCoeff(),
                            std::abs(sigma2)});
        const double change =
            std::max({(beta - beta_prev).cwiseAbs().maxCoeff(),
                      (eta_re - eta_prev).cwiseAbs().maxCoeff(), std::abs(sigma2 - sigma2_prev)});
        if (change / denom < 1e-6) {
            outer_converged = true;
            break;
        }
    }

    ModelFit fit;
    fit.kind = ModelKind::GLMM;
    fit.beta = beta;
    fit.beta_names = x.column_names;
    fit.eta = eta_re;
    fit.sigma2 = sigma2;
    fit.n_units = n;
    fit.n_obs = nt;
    fit.converged = outer_converged;
    if (!outer_converged) fit.warnings.push_back("not converged");

    double quad = 0.0;
    for (int j = 0; j < n; ++j)
        for (const auto& [col, val] : q.rows[j]) quad += eta_re[j] * val * eta_re[col];
    fit.loglik = poisson_loglik(y, lin) - 0.5 * quad / sigma2;
    fit.deviance = poisson_deviance(y, mu);

    const Eigen::MatrixXd kkt_inv = lu.solve(Eigen::MatrixXd::Identity(dim, dim));
    fit.std_errors = kkt_inv.topLeftCorner(k, k).diagonal().cwiseMax(0.0).cwiseSqrt();
    return fit;
}

ModelFit fit_model(ModelKind kind, const DesignMatrix& x, const Eigen::VectorXd& y,
                   const SpatialWeights& w) {
    switch (kind) {
        case ModelKind::LR: return fit_lr(x, y);
        case ModelKind::SAR: return fit_sar(x, y, w);
        case ModelKind::CAR: return fit_car(x, y, w);
        case ModelKind::GLM: return fit_glm(x, y);
        case ModelKind::GLMM: return fit_glmm(x, y, w);
    }
    throw ValidationError("unknown model kind");
}

Forecast predict_one_step(const ModelFit& fit, const DesignMatrix& x_next,
                          const SpatialWeights& w) {
    if (x_next.cols() != fit.beta.size())
        throw ValidationError("forecast design has " + std::to_string(x_next.cols()) +
                              " columns but the fit has " + std::to_string(fit.beta.size()) +
                              " coefficients");
    if (!fit.beta_names.empty() && x_next.column_names != fit.beta_names)
        throw ValidationError("forecast design columns do not match the fitted columns");
    const int n = static_cast<int>(x_next.x.rows());
    const Eigen::VectorXd xb = x_next.x * fit.beta;

    Forecast f;
    switch (fit.kind) {
        case ModelKind::LR:
            f.raw = xb;
            break;
        case ModelKind::SAR: {
            if (fit.residual_state.size() != n || w.size() != n || !std::isfinite(fit.rho))
                throw ValidationError("spatial-lag forecast needs matching residual state "
                                      "and weights");
            // (I - rho W)^-1 (X beta + eps_bar), solved rather than inverted
            Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n) - fit.rho * w.dense();
            f.raw = Eigen::PartialPivLU<Eigen::MatrixXd>(a).solve(
                (xb + fit.residual_state).eval());
            break;
        }
        case ModelKind::CAR: {
            if (fit.residual_state.size() != n || w.size() != n || !std::isfinite(fit.delta))
                throw ValidationError("error-dependence forecast needs matching residual "
                                      "state and weights");
            f.raw = xb + fit.delta * apply_spatial_lag(w, fit.residual_state);
            break;
        }
        case ModelKind::GLM:
            f.raw = xb.array().exp();
            break;
        case ModelKind::GLMM: {
            if (fit.eta.size() != n)
                throw ValidationError("random-intercept forecast needs one intercept per "
                                      "unit");
            f.raw = (xb + fit.eta).array().exp();
            break;
        }
    }
    f.values = f.raw.cwiseMax(0.0);
    return f;
}

}  // namespace crimecast
