#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>

#include "crimecast/features.hpp"
#include "crimecast/ingest.hpp"
#include "crimecast/spatial.hpp"

namespace crimecast {

// Generative processes for desk-scale experiments on a g x g rook lattice.
enum class SyntheticKind { SarGaussian, CarGaussian, PoissonGlmm };

const char* to_string(SyntheticKind k);
SyntheticKind synthetic_kind_from_string(const std::string& s);

// Ground truth for one synthetic study area. The property-crime series is the
// generated process; violent crime is independent background noise. beta must
// match the design width of (setting_id, modes): covariates for week t are
// built from generated week t-1 data, so a nonzero taxi coefficient plants a
// genuine flow-borne signal.
struct SyntheticSpec {
    int g = 4;        // lattice side, N = g^2
    int n_weeks = 8;  // T
    SyntheticKind kind = SyntheticKind::SarGaussian;
    int setting_id = 1;
    FeatureModes modes;
    Eigen::VectorXd beta;
    double rho = 0.0;        // spatial-lag coefficient (SAR kind)
    double delta = 0.0;      // error-dependence coefficient (CAR kind)
    double sigma = 1.0;      // Gaussian noise standard deviation
    double sigma_eta = 0.5;  // random-intercept standard deviation (GLMM kind)
    double kappa = 3.0;      // gravity decay range, in cell widths
    double trips_scale = 40.0;  // mean weekly trips on the strongest pair
    std::uint64_t seed = 1;

    void validate() const;  // shape checks; spectral bounds are checked at generation
};

struct SyntheticResult {
    PanelData panel;        // counts: round(max(0, y)) for Gaussian kinds
    SpatialWeights w;
    ArealPartition partition;  // unit-square cells with polygon rings
    Eigen::MatrixXd raw;    // N x T continuous response before count conversion
    Eigen::VectorXd eta;    // GLMM random intercepts (empty otherwise)
};

// Simulates the panel in memory; spatial parameter must lie strictly inside
// the lattice spectral bounds.
SyntheticResult simulate(const SyntheticSpec& spec);

// simulate() plus the full CSV input set, a continuous-response file, and a
// ground-truth parameter file, all under out_dir.
SyntheticResult generate_synthetic(const SyntheticSpec& spec, const std::string& out_dir);

// Number of design columns for a setting/mode combination (intercept included).
int design_width(const Setting& setting);

}  // namespace crimecast
