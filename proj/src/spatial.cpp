#include "crimecast/spatial.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <unordered_map>

#include "crimecast/errors.hpp"

namespace crimecast {

namespace {

bool segments_intersect_interior(const Point& a, const Point& b, const Point& c, const Point& d) {
    auto cross = [](const Point& o, const Point& p, const Point& q) {
        return (p.x - o.x) * (q.y - o.y) - (p.y - o.y) * (q.x - o.x);
    };
    double d1 = cross(c, d, a);
    double d2 = cross(c, d, b);
    double d3 = cross(a, b, c);
    double d4 = cross(a, b, d);
    return ((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) &&
           ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0));
}

void check_ring(const Ring& ring, const std::string& unit) {
    if (ring.size() < 3) {
        throw ValidationError("polygon ring of unit " + unit + " has fewer than 3 vertices");
    }
    std::size_t m = ring.size();
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = i + 1; j < m; ++j) {
            // skip edges sharing an endpoint (adjacent in the cycle)
            if (j == i || j == (i + 1) % m || (j + 1) % m == i) continue;
            const Point& a = ring[i];
            const Point& b = ring[(i + 1) % m];
            const Point& c = ring[j];
            const Point& d = ring[(j + 1) % m];
            if (segments_intersect_interior(a, b, c, d)) {
                throw ValidationError("polygon ring of unit " + unit + " self-intersects");
            }
        }
    }
}

bool on_segment(const Point& p, const Point& a, const Point& b) {
    double cross = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
    if (std::abs(cross) > 1e-12 * (std::abs(b.x - a.x) + std::abs(b.y - a.y) + 1.0)) return false;
    double dot = (p.x - a.x) * (b.x - a.x) + (p.y - a.y) * (b.y - a.y);
    double len2 = (b.x - a.x) * (b.x - a.x) + (b.y - a.y) * (b.y - a.y);
    return dot >= -1e-12 && dot <= len2 + 1e-12;
}

// Crossing-number test; boundary counts as inside.
bool point_in_ring(const Point& p, const Ring& ring) {
    std::size_t m = ring.size();
    for (std::size_t i = 0; i < m; ++i) {
        if (on_segment(p, ring[i], ring[(i + 1) % m])) return true;
    }
    bool inside = false;
    for (std::size_t i = 0, j = m - 1; i < m; j = i++) {
        const Point& a = ring[i];
        const Point& b = ring[j];
        if ((a.y > p.y) != (b.y > p.y)) {
            double x_cross = (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x;
            if (p.x < x_cross) inside = !inside;
        }
    }
    return inside;
}

double normal_sf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

}  // namespace

ArealPartition::ArealPartition(std::vector<std::string> units,
                               std::vector<std::vector<Ring>> polygons)
    : units_(std::move(units)), polygons_(std::move(polygons)) {
    if (units_.size() < 2) throw ValidationError("partition needs at least 2 units");
    std::set<std::string> seen;
    for (const auto& u : units_) {
        if (!seen.insert(u).second) throw ValidationError("duplicate unit id: " + u);
    }
    if (!polygons_.empty()) {
        if (polygons_.size() != units_.size()) {
            throw ValidationError("polygon list length does not match unit count");
        }
        for (std::size_t i = 0; i < polygons_.size(); ++i) {
            for (auto& ring : polygons_[i]) {
                // accept explicitly closed rings; store them open
                if (ring.size() >= 2 && ring.front().x == ring.back().x &&
                    ring.front().y == ring.back().y) {
                    ring.pop_back();
                }
                check_ring(ring, units_[i]);
            }
        }
    }
}

int ArealPartition::index_of(const std::string& id) const {
    for (std::size_t i = 0; i < units_.size(); ++i) {
        if (units_[i] == id) return static_cast<int>(i);
    }
    return -1;
}

SpatialWeights::SpatialWeights(int n, std::vector<std::vector<int>> neighbours)
    : n_(n), edges_(0), neighbours_(std::move(neighbours)) {
    if (n_ < 1 || neighbours_.size() != static_cast<std::size_t>(n_)) {
        throw ValidationError("adjacency size mismatch");
    }
    for (int i = 0; i < n_; ++i) {
        auto& row = neighbours_[static_cast<std::size_t>(i)];
        std::sort(row.begin(), row.end());
        row.erase(std::unique(row.begin(), row.end()), row.end());
        for (int j : row) {
            if (j < 0 || j >= n_) throw ValidationError("neighbour index out of range");
            if (j == i) throw ValidationError("self-edge at unit index " + std::to_string(i));
            edges_ += (j > i);
        }
    }
    for (int i = 0; i < n_; ++i) {
        for (int j : neighbours_[static_cast<std::size_t>(i)]) {
            const auto& back = neighbours_[static_cast<std::size_t>(j)];
            if (!std::binary_search(back.begin(), back.end(), i)) {
                throw ValidationError("adjacency not symmetric at (" + std::to_string(i) + "," +
                                      std::to_string(j) + ")");
            }
        }
    }
}

Eigen::MatrixXd SpatialWeights::dense() const {
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n_, n_);
    for (int i = 0; i < n_; ++i) {
        for (int j : neighbours(i)) w(i, j) = 1.0;
    }
    return w;
}

std::vector<std::pair<int, int>> SpatialWeights::edges() const {
    std::vector<std::pair<int, int>> out;
    out.reserve(static_cast<std::size_t>(edges_));
    for (int i = 0; i < n_; ++i) {
        for (int j : neighbours(i)) {
            if (j > i) out.emplace_back(i, j);
        }
    }
    return out;
}

std::vector<std::vector<int>> SpatialWeights::connected_components() const {
    std::vector<int> label(static_cast<std::size_t>(n_), -1);
    std::vector<std::vector<int>> comps;
    for (int start = 0; start < n_; ++start) {
        if (label[static_cast<std::size_t>(start)] != -1) continue;
        int id = static_cast<int>(comps.size());
        comps.emplace_back();
        std::vector<int> stack{start};
        label[static_cast<std::size_t>(start)] = id;
        while (!stack.empty()) {
            int u = stack.back();
            stack.pop_back();
            comps[static_cast<std::size_t>(id)].push_back(u);
            for (int v : neighbours(u)) {
                if (label[static_cast<std::size_t>(v)] == -1) {
                    label[static_cast<std::size_t>(v)] = id;
                    stack.push_back(v);
                }
            }
        }
    }
    for (auto& c : comps) std::sort(c.begin(), c.end());
    return comps;
}

SpatialWeights build_weights(const ArealPartition& partition,
                             const std::vector<std::pair<std::string, std::string>>& edges) {
    int n = partition.size();
    std::unordered_map<std::string, int> index;
    for (int i = 0; i < n; ++i) index.emplace(partition.unit(i), i);
    std::vector<std::pair<int, int>> idx_edges;
    idx_edges.reserve(edges.size());
    for (const auto& [a, b] : edges) {
        auto ia = index.find(a);
        auto ib = index.find(b);
        if (ia == index.end()) throw ValidationError("unknown unit id in edge list: " + a);
        if (ib == index.end()) throw ValidationError("unknown unit id in edge list: " + b);
        idx_edges.emplace_back(ia->second, ib->second);
    }
    return build_weights_from_indices(n, idx_edges);
}

SpatialWeights build_weights_from_indices(int n, const std::vector<std::pair<int, int>>& edges) {
    std::vector<std::vector<int>> nb(static_cast<std::size_t>(n));
    for (const auto& [i, j] : edges) {
        if (i < 0 || i >= n || j < 0 || j >= n) {
            throw ValidationError("edge index out of range");
        }
        if (i == j) throw ValidationError("self-edge at unit index " + std::to_string(i));
        nb[static_cast<std::size_t>(i)].push_back(j);
        nb[static_cast<std::size_t>(j)].push_back(i);
    }
    return SpatialWeights(n, std::move(nb));
}

PrecisionStructure build_precision(const SpatialWeights& w) {
    PrecisionStructure q;
    q.n = w.size();
    q.rows.resize(static_cast<std::size_t>(q.n));
    for (int i = 0; i < q.n; ++i) {
        auto& row = q.rows[static_cast<std::size_t>(i)];
        row.emplace_back(i, w.degree(i));
        for (int j : w.neighbours(i)) row.emplace_back(j, -1);
        std::sort(row.begin(), row.end());
    }
    return q;
}

Eigen::MatrixXd PrecisionStructure::dense() const {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        for (const auto& [j, v] : rows[static_cast<std::size_t>(i)]) m(i, j) = v;
    }
    return m;
}

Eigen::VectorXd adjacency_eigenvalues(const SpatialWeights& w) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(w.dense(), Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) throw NumericalError("eigendecomposition of W failed");
    return solver.eigenvalues();
}

namespace {

// Extreme eigenvalue of W via power iteration on W (largest |omega|), then on
// the shifted matrix to separate the other end of the spectrum.
std::pair<double, double> extreme_eigenvalues_power(const SpatialWeights& w) {
    int n = w.size();
    auto apply = [&](const Eigen::VectorXd& v) {
        Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
        for (int i = 0; i < n; ++i) {
            double s = 0.0;
            for (int j : w.neighbours(i)) s += v(j);
            out(i) = s;
        }
        return out;
    };
    auto dominant = [&](double shift) {
        Eigen::VectorXd v = Eigen::VectorXd::Ones(n);
        for (int i = 0; i < n; ++i) v(i) += 1e-3 * std::sin(1.0 + i);
        v.normalize();
        double lambda = 0.0;
        for (int it = 0; it < 5000; ++it) {
            Eigen::VectorXd next = apply(v) + shift * v;
            double norm = next.norm();
            if (norm == 0.0) return shift;
            next /= norm;
            double est = next.dot(apply(next)) + shift;
            if (it > 50 && std::abs(est - lambda) < 1e-12 * std::max(1.0, std::abs(est))) {
                return est;
            }
            lambda = est;
            v = next;
        }
        return lambda;
    };
    // max degree bounds the spectral radius
    double max_deg = 0;
    for (int i = 0; i < n; ++i) max_deg = std::max(max_deg, static_cast<double>(w.degree(i)));
    double hi = dominant(max_deg + 1.0) - (max_deg + 1.0);   // largest eigenvalue
    double lo = dominant(-(max_deg + 1.0)) + (max_deg + 1.0);  // smallest eigenvalue
    return {lo, hi};
}

}  // namespace

SpectralBounds spectral_bounds(const SpatialWeights& w, int dense_limit) {
    if (w.edge_count() == 0) {
        throw ValidationError("spectral bounds undefined for an edgeless adjacency");
    }
    SpectralBounds b;
    if (w.size() <= dense_limit) {
        Eigen::VectorXd ev = adjacency_eigenvalues(w);
        b.omega_min = ev(0);
        b.omega_max = ev(ev.size() - 1);
    } else {
        auto [lo, hi] = extreme_eigenvalues_power(w);
        b.omega_min = lo;
        b.omega_max = hi;
    }
    // any graph with an edge has omega_max > 0 > omega_min (trace is zero)
    if (!(b.omega_min < 0.0 && b.omega_max > 0.0)) {
        throw NumericalError("unexpected adjacency spectrum");
    }
    b.lower = 1.0 / b.omega_min;
    b.upper = 1.0 / b.omega_max;
    return b;
}

MoranResult morans_i(const Eigen::VectorXd& y, const SpatialWeights& w) {
    int n = w.size();
    if (y.size() != n) throw ValidationError("Moran's I: vector length does not match W");
    if (w.edge_count() == 0) throw ValidationError("Moran's I undefined for an edgeless W");
    Eigen::VectorXd z = y.array() - y.mean();
    double denom = z.squaredNorm();
    if (denom <= 0.0) throw ValidationError("Moran's I: zero variance");

    double s0 = 2.0 * static_cast<double>(w.edge_count());
    double cross = 0.0;
    double s2 = 0.0;
    for (int i = 0; i < n; ++i) {
        double row = 0.0;
        for (int j : w.neighbours(i)) row += z(j);
        cross += z(i) * row;
        double deg = static_cast<double>(w.degree(i));
        s2 += (2.0 * deg) * (2.0 * deg);
    }
    double s1 = 2.0 * s0;  // binary symmetric W: (w_ij + w_ji)^2 = 4 w_ij

    MoranResult r;
    double nn = static_cast<double>(n);
    r.i_stat = (nn / s0) * cross / denom;
    r.expected = -1.0 / (nn - 1.0);
    double var = (nn * nn * s1 - nn * s2 + 3.0 * s0 * s0) / ((nn * nn - 1.0) * s0 * s0) -
                 r.expected * r.expected;
    if (var <= 0.0) throw NumericalError("Moran's I: non-positive variance");
    r.variance = var;
    r.z = (r.i_stat - r.expected) / std::sqrt(var);
    r.p = 2.0 * normal_sf(std::abs(r.z));
    if (r.p > 1.0) r.p = 1.0;
    return r;
}

bool point_in_unit(const ArealPartition& partition, int unit, const Point& p) {
    for (const Ring& ring : partition.rings(unit)) {
        if (point_in_ring(p, ring)) return true;
    }
    return false;
}

std::vector<std::optional<int>> assign_points(const ArealPartition& partition,
                                              const std::vector<Point>& points) {
    if (!partition.has_polygons()) {
        throw ValidationError("assign_points requires polygons in the partition");
    }
    std::vector<std::optional<int>> out(points.size());
    for (std::size_t k = 0; k < points.size(); ++k) {
        for (int i = 0; i < partition.size(); ++i) {
            if (point_in_unit(partition, i, points[k])) {
                out[k] = i;  // lowest index wins on shared boundaries
                break;
            }
        }
    }
    return out;
}

SpatialWeights rook_contiguity(const ArealPartition& partition) {
    if (!partition.has_polygons()) {
        throw ValidationError("rook contiguity requires polygons in the partition");
    }
    auto key_of = [](const Point& a, const Point& b) {
        auto quant = [](double v) { return std::llround(v * 1e9); };
        auto pa = std::make_pair(quant(a.x), quant(a.y));
        auto pb = std::make_pair(quant(b.x), quant(b.y));
        return pa < pb ? std::make_pair(pa, pb) : std::make_pair(pb, pa);
    };
    std::map<std::pair<std::pair<long long, long long>, std::pair<long long, long long>>,
             std::vector<int>> edge_owner;
    for (int i = 0; i < partition.size(); ++i) {
        for (const Ring& ring : partition.rings(i)) {
            std::size_t m = ring.size();
            for (std::size_t k = 0; k < m; ++k) {
                edge_owner[key_of(ring[k], ring[(k + 1) % m])].push_back(i);
            }
        }
    }
    std::vector<std::pair<int, int>> edges;
    for (const auto& [key, owners] : edge_owner) {
        for (std::size_t a = 0; a < owners.size(); ++a) {
            for (std::size_t b = a + 1; b < owners.size(); ++b) {
                if (owners[a] != owners[b]) edges.emplace_back(owners[a], owners[b]);
            }
        }
    }
    return build_weights_from_indices(partition.size(), edges);
}

}  // namespace crimecast
