#include "crimecast/synthetic.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "crimecast/csv.hpp"
#include "crimecast/errors.hpp"
#include "crimecast/rng.hpp"

namespace crimecast {

const char* to_string(SyntheticKind k) {
    switch (k) {
        case SyntheticKind::SarGaussian: return "sar_gaussian";
        case SyntheticKind::CarGaussian: return "car_gaussian";
        case SyntheticKind::PoissonGlmm: return "poisson_glmm";
    }
    throw ValidationError("unknown synthetic kind");
}

SyntheticKind synthetic_kind_from_string(const std::string& s) {
    if (s == "sar_gaussian") return SyntheticKind::SarGaussian;
    if (s == "car_gaussian") return SyntheticKind::CarGaussian;
    if (s == "poisson_glmm") return SyntheticKind::PoissonGlmm;
    throw ValidationError("unknown synthetic kind \"" + s + "\"");
}

int design_width(const Setting& setting) {
    int k = 1 + kCensusCount;
    if (setting.include_twitter) k += 1;
    if (setting.include_poi) k += kPoiCount;
    if (setting.include_taxi) k += 1;
    return k;
}

void SyntheticSpec::validate() const {
    if (g < 2) throw ValidationError("lattice side g must be >= 2");
    if (n_weeks < 2) throw ValidationError("n_weeks must be >= 2");
    const int k = design_width(Setting::by_id(setting_id));
    if (beta.size() != k)
        throw ValidationError("beta has " + std::to_string(beta.size()) +
                              " coefficients, setting " + std::to_string(setting_id) +
                              " needs " + std::to_string(k));
    if (!(sigma > 0.0)) throw ValidationError("sigma must be positive");
    if (sigma_eta < 0.0) throw ValidationError("sigma_eta must be non-negative");
    if (!(kappa > 0.0)) throw ValidationError("kappa must be positive");
    if (trips_scale < 0.0) throw ValidationError("trips_scale must be non-negative");
}

namespace {

std::string cell_id(int index) {
    std::string digits = std::to_string(index + 1);
    return "cell_" + std::string(4 - std::min<std::size_t>(4, digits.size()), '0') + digits;
}

ArealPartition lattice_partition(int g) {
    std::vector<std::string> units;
    std::vector<std::vector<Ring>> polygons;
    for (int r = 0; r < g; ++r)
        for (int c = 0; c < g; ++c) {
            units.push_back(cell_id(r * g + c));
            const double x0 = c, y0 = r;
            polygons.push_back({Ring{{x0, y0}, {x0 + 1.0, y0}, {x0 + 1.0, y0 + 1.0},
                                     {x0, y0 + 1.0}}});
        }
    return ArealPartition(std::move(units), std::move(polygons));
}

SpatialWeights lattice_weights(int g) {
    std::vector<std::pair<int, int>> edges;
    for (int r = 0; r < g; ++r)
        for (int c = 0; c < g; ++c) {
            if (c + 1 < g) edges.emplace_back(r * g + c, r * g + c + 1);
            if (r + 1 < g) edges.emplace_back(r * g + c, (r + 1) * g + c);
        }
    return build_weights_from_indices(g * g, edges);
}

// N(0, sigma_eta^2 Q^+): spectral sample over the positive eigenvalues, which
// keeps each connected component summing to zero
Eigen::VectorXd sample_intrinsic(const SpatialWeights& w, double sigma_eta, Rng& rng) {
    const Eigen::MatrixXd q = build_precision(w).dense();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(q);
    const Eigen::VectorXd& values = eig.eigenvalues();
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::VectorXd eta = Eigen::VectorXd::Zero(w.size());
    const double tol = 1e-9 * values.cwiseAbs().maxCoeff();
    for (int k = 0; k < values.size(); ++k)
        if (values(k) > tol)
            eta += eig.eigenvectors().col(k) * (sigma_eta / std::sqrt(values(k)) * normal(rng));
    return eta;
}

}  // namespace

SyntheticResult simulate(const SyntheticSpec& spec) {
    spec.validate();
    const int n = spec.g * spec.g;
    const int t_weeks = spec.n_weeks;
    const Setting setting = Setting::by_id(spec.setting_id);

    SyntheticResult out{PanelData{}, lattice_weights(spec.g), lattice_partition(spec.g),
                        Eigen::MatrixXd::Zero(n, t_weeks), Eigen::VectorXd()};

    const SpectralBounds bounds = spectral_bounds(out.w);
    if (spec.kind == SyntheticKind::SarGaussian && !bounds.contains(spec.rho))
        throw ValidationError("rho " + std::to_string(spec.rho) +
                              " outside the lattice spectral bounds (" +
                              std::to_string(bounds.lower) + ", " +
                              std::to_string(bounds.upper) + ")");
    if (spec.kind == SyntheticKind::CarGaussian && !bounds.contains(spec.delta))
        throw ValidationError("delta " + std::to_string(spec.delta) +
                              " outside the lattice spectral bounds (" +
                              std::to_string(bounds.lower) + ", " +
                              std::to_string(bounds.upper) + ")");

    PanelData& panel = out.panel;
    panel.n_units = n;
    panel.n_weeks = t_weeks;
    panel.unit_ids = out.partition.units();

    // static covariates
    Rng census_rng = make_rng(spec.seed, 1);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    panel.census.resize(n, kCensusCount);
    for (int i = 0; i < n; ++i) {
        panel.census(i, 0) = 800.0 + 2400.0 * unit(census_rng);  // population
        panel.census(i, 1) = 25.0 + 20.0 * unit(census_rng);     // median_age
        for (int j = 2; j < kCensusCount; ++j) panel.census(i, j) = unit(census_rng);
    }

    Rng poi_rng = make_rng(spec.seed, 2);
    std::poisson_distribution<int> poi_count(2.0);
    panel.poi.setZero(n, kPoiCount);
    for (int i = 0; i < n; ++i) {
        if (unit(poi_rng) < 0.35) continue;  // empty cells keep share columns off the intercept
        for (int j = 0; j < kPoiCount; ++j) panel.poi(i, j) = poi_count(poi_rng);
    }

    Rng tweet_rng = make_rng(spec.seed, 3);
    std::poisson_distribution<int> tweet_count(8.0);
    panel.tweets_all.resize(n, t_weeks);
    panel.tweets_night.resize(n, t_weeks);
    for (int i = 0; i < n; ++i)
        for (int t = 0; t < t_weeks; ++t) {
            const int all = tweet_count(tweet_rng);
            panel.tweets_all(i, t) = all;
            panel.tweets_night(i, t) =
                std::binomial_distribution<int>(all, 0.35)(tweet_rng);
        }

    // gravity flows: mean trips proportional to pop_i * pop_j * exp(-d_ij / kappa),
    // scaled so the strongest pair averages trips_scale; Poisson noise per week
    Rng flow_rng = make_rng(spec.seed, 4);
    Eigen::MatrixXd kernel(n, n);
    double kernel_max = 0.0;
    for (int i = 0; i < n; ++i) {
        const double xi = i % spec.g + 0.5, yi = i / spec.g + 0.5;
        for (int j = 0; j < n; ++j) {
            if (i == j) {
                kernel(i, j) = 0.0;
                continue;
            }
            const double xj = j % spec.g + 0.5, yj = j / spec.g + 0.5;
            const double d = std::hypot(xi - xj, yi - yj);
            kernel(i, j) = panel.census(i, 0) * panel.census(j, 0) * std::exp(-d / spec.kappa);
            kernel_max = std::max(kernel_max, kernel(i, j));
        }
    }
    for (int t = 1; t <= t_weeks; ++t) {
        FlowMatrix flows;
        flows.week = t;
        flows.n = n;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                if (i == j) continue;
                const double mean = spec.trips_scale * kernel(i, j) / kernel_max;
                const int trips = std::poisson_distribution<int>(mean)(flow_rng);
                if (trips > 0) flows.entries.emplace_back(i, j, static_cast<double>(trips));
            }
        panel.flows.push_back(std::move(flows));
    }

    if (spec.kind == SyntheticKind::PoissonGlmm) {
        Rng eta_rng = make_rng(spec.seed, 5);
        out.eta = sample_intrinsic(out.w, spec.sigma_eta, eta_rng);
    }

    // response, sequentially: the design for week t comes from generated
    // week t-1 data, so lagged features carry real signal
    Rng response_rng = make_rng(spec.seed, 6);
    std::normal_distribution<double> noise(0.0, spec.sigma);
    panel.crime_property.setZero(n, t_weeks);
    panel.crime_violent.setZero(n, t_weeks);

    Eigen::PartialPivLU<Eigen::MatrixXd> sar_lu;
    Eigen::LLT<Eigen::MatrixXd> car_chol;
    if (spec.kind == SyntheticKind::SarGaussian)
        sar_lu.compute(Eigen::MatrixXd::Identity(n, n) - spec.rho * out.w.dense());
    if (spec.kind == SyntheticKind::CarGaussian) {
        car_chol.compute(Eigen::MatrixXd::Identity(n, n) - spec.delta * out.w.dense());
        if (car_chol.info() != Eigen::Success)
            throw NumericalError("lattice covariance factorization failed");
    }

    for (int t = 1; t <= t_weeks; ++t) {
        Eigen::VectorXd y(n);
        if (t == 1) {
            // no lagged covariates exist yet: intercept-only mean through the
            // same error process, so the first week is already spatially shaped
            switch (spec.kind) {
                case SyntheticKind::SarGaussian: {
                    Eigen::VectorXd z = Eigen::VectorXd::Constant(n, spec.beta(0));
                    for (int i = 0; i < n; ++i) z(i) += noise(response_rng);
                    y = sar_lu.solve(z);
                    break;
                }
                case SyntheticKind::CarGaussian: {
                    Eigen::VectorXd z(n);
                    for (int i = 0; i < n; ++i) z(i) = noise(response_rng);
                    y = Eigen::VectorXd::Constant(n, spec.beta(0)) +
                        car_chol.matrixU().solve(z);
                    break;
                }
                case SyntheticKind::PoissonGlmm: {
                    for (int i = 0; i < n; ++i) {
                        const double mean = std::exp(spec.beta(0) + out.eta(i));
                        y(i) = std::poisson_distribution<long>(mean)(response_rng);
                    }
                    break;
                }
            }
        } else {
            const Eigen::MatrixXd x =
                design_for_week(panel, CrimeType::Property, setting, spec.modes, t).x;
            const Eigen::VectorXd mean = x * spec.beta;
            switch (spec.kind) {
                case SyntheticKind::SarGaussian: {
                    Eigen::VectorXd z = mean;
                    for (int i = 0; i < n; ++i) z(i) += noise(response_rng);
                    y = sar_lu.solve(z);
                    break;
                }
                case SyntheticKind::CarGaussian: {
                    Eigen::VectorXd z(n);
                    for (int i = 0; i < n; ++i) z(i) = noise(response_rng);
                    // u = sigma-scaled solve of L^T u = z has covariance (I - delta W)^{-1}
                    y = mean + car_chol.matrixU().solve(z);
                    break;
                }
                case SyntheticKind::PoissonGlmm: {
                    for (int i = 0; i < n; ++i) {
                        const double lambda = std::exp(mean(i) + out.eta(i));
                        y(i) = std::poisson_distribution<long>(lambda)(response_rng);
                    }
                    break;
                }
            }
        }
        out.raw.col(t - 1) = y;
        panel.crime_property.col(t - 1) = y.cwiseMax(0.0).array().round();
    }

    // independent background series for the second crime type
    std::poisson_distribution<int> background(2.0);
    for (int i = 0; i < n; ++i)
        for (int t = 0; t < t_weeks; ++t) panel.crime_violent(i, t) = background(response_rng);

    panel.validate();
    return out;
}

namespace {

std::string join_path(const std::string& dir, const char* name) {
    return (std::filesystem::path(dir) / name).string();
}

void write_files(const SyntheticSpec& spec, const SyntheticResult& result,
                 const std::string& dir) {
    std::filesystem::create_directories(dir);
    const PanelData& panel = result.panel;
    const int n = panel.n_units;

    {
        std::vector<std::string> header{"unit_id"};
        for (const char* name : kCensusNames) header.emplace_back(name);
        CsvWriter census(join_path(dir, "census.csv"), header);
        for (int i = 0; i < n; ++i) {
            std::vector<std::string> row{panel.unit_ids[static_cast<std::size_t>(i)]};
            for (int j = 0; j < kCensusCount; ++j) row.push_back(format_double(panel.census(i, j)));
            census.row(row);
        }
    }
    {
        CsvWriter crime(join_path(dir, "crime.csv"), {"unit_id", "week", "property", "violent"});
        for (int t = 1; t <= panel.n_weeks; ++t)
            for (int i = 0; i < n; ++i)
                crime.row({panel.unit_ids[static_cast<std::size_t>(i)], format_int(t),
                           format_int(static_cast<std::int64_t>(panel.crime_property(i, t - 1))),
                           format_int(static_cast<std::int64_t>(panel.crime_violent(i, t - 1)))});
    }
    {
        CsvWriter tweets(join_path(dir, "tweets.csv"),
                         {"unit_id", "week", "tweets_all", "tweets_night"});
        for (int t = 1; t <= panel.n_weeks; ++t)
            for (int i = 0; i < n; ++i)
                tweets.row({panel.unit_ids[static_cast<std::size_t>(i)], format_int(t),
                            format_int(static_cast<std::int64_t>(panel.tweets_all(i, t - 1))),
                            format_int(static_cast<std::int64_t>(panel.tweets_night(i, t - 1)))});
    }
    {
        CsvWriter poi(join_path(dir, "poi.csv"), {"unit_id", "category", "count"});
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < kPoiCount; ++j)
                poi.row({panel.unit_ids[static_cast<std::size_t>(i)],
                         kPoiCategories[static_cast<std::size_t>(j)],
                         format_int(static_cast<std::int64_t>(panel.poi(i, j)))});
    }
    {
        CsvWriter flows(join_path(dir, "flows.csv"), {"week", "origin", "dest", "trips"});
        for (const FlowMatrix& f : panel.flows)
            for (const auto& [origin, dest, trips] : f.entries)
                flows.row({format_int(f.week), panel.unit_ids[static_cast<std::size_t>(origin)],
                           panel.unit_ids[static_cast<std::size_t>(dest)],
                           format_int(static_cast<std::int64_t>(trips))});
    }
    {
        CsvWriter edges(join_path(dir, "edges.csv"), {"src", "dst"});
        for (const auto& [i, j] : result.w.edges())
            edges.row({panel.unit_ids[static_cast<std::size_t>(i)],
                       panel.unit_ids[static_cast<std::size_t>(j)]});
    }
    {
        CsvWriter polygons(join_path(dir, "polygons.csv"),
                           {"unit_id", "ring_index", "vertex_index", "x", "y"});
        for (int i = 0; i < n; ++i) {
            const std::vector<Ring>& rings = result.partition.rings(i);
            for (std::size_t r = 0; r < rings.size(); ++r)
                for (std::size_t v = 0; v < rings[r].size(); ++v)
                    polygons.row({panel.unit_ids[static_cast<std::size_t>(i)],
                                  format_int(static_cast<std::int64_t>(r)),
                                  format_int(static_cast<std::int64_t>(v)),
                                  format_double(rings[r][v].x), format_double(rings[r][v].y)});
        }
    }
    {
        CsvWriter raw(join_path(dir, "response_raw.csv"), {"unit_id", "week", "value"});
        for (int t = 1; t <= panel.n_weeks; ++t)
            for (int i = 0; i < n; ++i)
                raw.row({panel.unit_ids[static_cast<std::size_t>(i)], format_int(t),
                         format_double(result.raw(i, t - 1))});
    }
    {
        std::ofstream truth(join_path(dir, "truth.txt"));
        if (!truth) throw ValidationError(join_path(dir, "truth.txt") + ": cannot open for writing");
        truth << "kind = " << to_string(spec.kind) << "\n";
        truth << "g = " << spec.g << "\n";
        truth << "n_weeks = " << spec.n_weeks << "\n";
        truth << "setting = " << spec.setting_id << "\n";
        truth << "twitter_mode = " << to_string(spec.modes.twitter) << "\n";
        truth << "taxi_mode = " << to_string(spec.modes.taxi) << "\n";
        truth << "poi_mode = " << to_string(spec.modes.poi) << "\n";
        if (spec.kind == SyntheticKind::SarGaussian)
            truth << "rho = " << format_double(spec.rho) << "\n";
        if (spec.kind == SyntheticKind::CarGaussian)
            truth << "delta = " << format_double(spec.delta) << "\n";
        truth << "sigma = " << format_double(spec.sigma) << "\n";
        if (spec.kind == SyntheticKind::PoissonGlmm)
            truth << "sigma_eta = " << format_double(spec.sigma_eta) << "\n";
        truth << "kappa = " << format_double(spec.kappa) << "\n";
        truth << "trips_scale = " << format_double(spec.trips_scale) << "\n";
        truth << "seed = " << spec.seed << "\n";
        const DesignMatrix d =
            design_for_week(panel, CrimeType::Property, Setting::by_id(spec.setting_id),
                            spec.modes, 2);
        for (int k = 0; k < spec.beta.size(); ++k)
            truth << "beta_" << d.column_names[static_cast<std::size_t>(k)] << " = "
                  << format_double(spec.beta(k)) << "\n";
        for (int i = 0; i < result.eta.size(); ++i)
            truth << "eta_" << panel.unit_ids[static_cast<std::size_t>(i)] << " = "
                  << format_double(result.eta(i)) << "\n";
    }
}

}  // namespace

SyntheticResult generate_synthetic(const SyntheticSpec& spec, const std::string& out_dir) {
    SyntheticResult result = simulate(spec);
    write_files(spec, result, out_dir);
    return result;
}

}  // namespace crimecast
