#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace crimecast {

struct Point {
    double x = 0.0;
    double y = 0.0;
};

using Ring = std::vector<Point>;

// Ordered areal units, optionally with planar polygon rings for point
// assignment. Unit order fixes every index used downstream.
class ArealPartition {
public:
    ArealPartition(std::vector<std::string> units,
                   std::vector<std::vector<Ring>> polygons = {});

    int size() const { return static_cast<int>(units_.size()); }
    const std::vector<std::string>& units() const { return units_; }
    const std::string& unit(int i) const { return units_[static_cast<std::size_t>(i)]; }
    // -1 when the id is unknown.
    int index_of(const std::string& id) const;

    bool has_polygons() const { return !polygons_.empty(); }
    const std::vector<Ring>& rings(int i) const { return polygons_[static_cast<std::size_t>(i)]; }

private:
    std::vector<std::string> units_;
    std::vector<std::vector<Ring>> polygons_;  // empty, or one entry per unit
};

// Symmetric binary adjacency with zero diagonal, stored as sorted neighbour
// lists. Immutable after construction.
class SpatialWeights {
public:
    SpatialWeights(int n, std::vector<std::vector<int>> neighbours);

    int size() const { return n_; }
    const std::vector<int>& neighbours(int i) const {
        return neighbours_[static_cast<std::size_t>(i)];
    }
    int degree(int i) const { return static_cast<int>(neighbours(i).size()); }
    // Each undirected edge counted once.
    long edge_count() const { return edges_; }

    Eigen::MatrixXd dense() const;
    // Sorted list of (i, j) with i < j.
    std::vector<std::pair<int, int>> edges() const;
    std::vector<std::vector<int>> connected_components() const;

private:
    int n_;
    long edges_;
    std::vector<std::vector<int>> neighbours_;
};

// Graph-Laplacian precision: diagonal = neighbour-set size, -1 on edges.
struct PrecisionStructure {
    int n = 0;
    std::vector<std::vector<std::pair<int, int>>> rows;  // per row: (col, value)
    Eigen::MatrixXd dense() const;
};

struct SpectralBounds {
    double lower = 0.0;    // 1 / omega_min
    double upper = 0.0;    // 1 / omega_max
    double omega_min = 0.0;
    double omega_max = 0.0;
    bool contains(double rho) const { return rho > lower && rho < upper; }
};

struct MoranResult {
    double i_stat = 0.0;
    double expected = 0.0;
    double variance = 0.0;
    double z = 0.0;
    double p = 1.0;
};

SpatialWeights build_weights(const ArealPartition& partition,
                             const std::vector<std::pair<std::string, std::string>>& edges);
SpatialWeights build_weights_from_indices(int n, const std::vector<std::pair<int, int>>& edges);

PrecisionStructure build_precision(const SpatialWeights& w);

// (1/omega_min, 1/omega_max) from the extreme eigenvalues of W; I - rho*W is
// positive definite strictly inside. Dense solver up to dense_limit units,
// power iteration on the extremes beyond that.
SpectralBounds spectral_bounds(const SpatialWeights& w, int dense_limit = 2000);

// All eigenvalues of W, ascending. Dense solver only; callers needing just the
// extremes at scale should go through spectral_bounds.
Eigen::VectorXd adjacency_eigenvalues(const SpatialWeights& w);

// Cross-sectional Moran's I with moments under the normality assumption and a
// two-sided normal p-value.
MoranResult morans_i(const Eigen::VectorXd& y, const SpatialWeights& w);

// Index of the containing unit per point, or nullopt when outside every
// polygon. Boundary points resolve to the lowest-indexed containing unit.
std::vector<std::optional<int>> assign_points(const ArealPartition& partition,
                                              const std::vector<Point>& points);

// Units sharing a polygon boundary segment become neighbours.
SpatialWeights rook_contiguity(const ArealPartition& partition);

// Boundary-inclusive point-in-polygon test over a unit's rings.
bool point_in_unit(const ArealPartition& partition, int unit, const Point& p);

}  // namespace crimecast
