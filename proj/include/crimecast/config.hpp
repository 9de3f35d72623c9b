#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "crimecast/evaluation.hpp"
#include "crimecast/features.hpp"
#include "crimecast/grid.hpp"
#include "crimecast/ingest.hpp"
#include "crimecast/synthetic.hpp"

namespace crimecast {

// One run of the pipeline, parsed from a key = value text file (one pair per
// line, '#' comments). Unknown keys are rejected; every key is listed in
// docs/config.md.
struct RunConfig {
    CrimeType crime_type = CrimeType::Property;
    std::vector<int> setting_ids{1};
    std::vector<ForecasterKind> models{ForecasterKind::LR};
    FeatureModes modes;
    int h = 0;  // 0 = floor(T/2)
    std::uint64_t seed = 2024;
    IngestPaths inputs;
    std::string grid_file;   // optional tuning-lattice override
    std::string output_dir = ".";

    EvaluationPlan plan_for(ForecasterKind kind) const;
    void validate() const;  // referenced input paths must exist
};

RunConfig parse_run_config(const std::string& path);

// Synthetic-study description in the same key = value format.
SyntheticSpec parse_synthetic_spec(const std::string& path);

// Tuning lattices per model kind from a sectioned key/value file:
//   [rf]
//   max_depth = 7,13
//   ...
// Values on one line become one grid axis.
std::map<MlKind, GridSpec> parse_grid_file(const std::string& path);

}  // namespace crimecast
