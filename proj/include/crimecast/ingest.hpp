#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "crimecast/features.hpp"
#include "crimecast/spatial.hpp"

namespace crimecast {

// The fixed-header CSV inputs of one study area. Census row order defines the
// unit order used everywhere downstream. polygons is optional (empty = none);
// without it point assignment and rook contiguity from geometry are
// unavailable, adjacency comes from the edge list alone.
struct IngestPaths {
    std::string census;
    std::string crime;
    std::string tweets;
    std::string poi;
    std::string flows;
    std::string edges;
    std::string polygons;
};

struct IngestResult {
    PanelData panel;
    SpatialWeights w;
    ArealPartition partition;
};

// Reads and cross-validates the full input set. Referential integrity (every
// unit id resolves against the census unit list), completeness (every
// (unit, week) cell present exactly once), and contiguous weeks 1..T are all
// enforced with file/line/column diagnostics.
IngestResult ingest(const IngestPaths& paths);

// One point event to be binned into the (unit, week) panel.
struct CrimeEvent {
    Point location;
    int week = 0;  // 1-based
    CrimeType type = CrimeType::Property;
};

struct EventPanel {
    Eigen::MatrixXd property;  // N x T tallies
    Eigen::MatrixXd violent;
    long unassigned = 0;  // events outside every polygon, counted not dropped
};

// Bins events into per-(unit, week) counts via polygon containment.
// Requires polygons; events outside 1..n_weeks are rejected.
EventPanel aggregate_events(const std::vector<CrimeEvent>& events,
                            const ArealPartition& partition, int n_weeks);

}  // namespace crimecast
