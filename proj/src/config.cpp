#include "crimecast/config.hpp"

#include <algorithm>
#include <cerrno>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "crimecast/errors.hpp"

namespace crimecast {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

struct Entry {
    std::string section;  // empty outside any [section]
    std::string key;
    std::string value;
    int line = 0;
};

// key = value lines with '#' comments and optional [section] headers
std::vector<Entry> read_key_values(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError(path + ": cannot open file");
    std::vector<Entry> entries;
    std::string line, section;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const std::string text = trim(line);
        if (text.empty()) continue;
        if (text.front() == '[') {
            if (text.back() != ']')
                throw ValidationError(path + ":" + std::to_string(line_no) +
                                      ": malformed section header");
            section = trim(text.substr(1, text.size() - 2));
            continue;
        }
        const std::size_t eq = text.find('=');
        if (eq == std::string::npos)
            throw ValidationError(path + ":" + std::to_string(line_no) +
                                  ": expected key = value");
        Entry e{section, trim(text.substr(0, eq)), trim(text.substr(eq + 1)), line_no};
        if (e.key.empty())
            throw ValidationError(path + ":" + std::to_string(line_no) + ": empty key");
        entries.push_back(std::move(e));
    }
    return entries;
}

[[noreturn]] void fail(const std::string& path, const Entry& e, const std::string& msg) {
    throw ValidationError(path + ":" + std::to_string(e.line) + ": key \"" + e.key + "\": " +
                          msg);
}

double parse_double(const std::string& path, const Entry& e, const std::string& text) {
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(text.c_str(), &end);
    if (end == text.c_str() || *end != '\0' || errno == ERANGE)
        fail(path, e, "not a number: \"" + text + "\"");
    return v;
}

long long parse_int(const std::string& path, const Entry& e, const std::string& text) {
    errno = 0;
    char* end = nullptr;
    const long long v = std::strtoll(text.c_str(), &end, 10);
    if (end == text.c_str() || *end != '\0' || errno == ERANGE)
        fail(path, e, "not an integer: \"" + text + "\"");
    return v;
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : text) {
        if (c == ',') {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(trim(cur));
    return out;
}

// config paths resolve against the config file's directory
std::string resolve_path(const std::string& config_path, const std::string& value) {
    std::filesystem::path p(value);
    if (p.is_absolute()) return p.string();
    return (std::filesystem::path(config_path).parent_path() / p).string();
}

}  // namespace

RunConfig parse_run_config(const std::string& path) {
    RunConfig config;
    std::set<std::string> seen;
    for (const Entry& e : read_key_values(path)) {
        if (!e.section.empty()) fail(path, e, "run configs have no sections");
        if (!seen.insert(e.key).second) fail(path, e, "duplicate key");
        try {
            if (e.key == "crime_type") {
                config.crime_type = crime_type_from_string(e.value);
            } else if (e.key == "settings") {
                config.setting_ids.clear();
                for (const std::string& item : split_list(e.value))
                    config.setting_ids.push_back(static_cast<int>(parse_int(path, e, item)));
            } else if (e.key == "models") {
                config.models.clear();
                for (const std::string& item : split_list(e.value))
                    config.models.push_back(forecaster_from_string(item));
            } else if (e.key == "twitter_mode") {
                config.modes.twitter = twitter_mode_from_string(e.value);
            } else if (e.key == "taxi_mode") {
                config.modes.taxi = taxi_mode_from_string(e.value);
            } else if (e.key == "poi_mode") {
                config.modes.poi = poi_mode_from_string(e.value);
            } else if (e.key == "h") {
                config.h = static_cast<int>(parse_int(path, e, e.value));
            } else if (e.key == "seed") {
                const long long v = parse_int(path, e, e.value);
                if (v < 0) fail(path, e, "seed must be non-negative");
                config.seed = static_cast<std::uint64_t>(v);
            } else if (e.key == "census") {
                config.inputs.census = resolve_path(path, e.value);
            } else if (e.key == "crime") {
                config.inputs.crime = resolve_path(path, e.value);
            } else if (e.key == "tweets") {
                config.inputs.tweets = resolve_path(path, e.value);
            } else if (e.key == "poi") {
                config.inputs.poi = resolve_path(path, e.value);
            } else if (e.key == "flows") {
                config.inputs.flows = resolve_path(path, e.value);
            } else if (e.key == "edges") {
                config.inputs.edges = resolve_path(path, e.value);
            } else if (e.key == "polygons") {
                config.inputs.polygons = resolve_path(path, e.value);
            } else if (e.key == "grid_file") {
                config.grid_file = resolve_path(path, e.value);
            } else if (e.key == "output_dir") {
                config.output_dir = resolve_path(path, e.value);
            } else {
                fail(path, e, "unrecognised key");
            }
        } catch (const ValidationError& err) {
            // re-anchor mode/kind parse errors to the config line
            const std::string what = err.what();
            if (what.find(path + ":") == 0) throw;
            fail(path, e, what);
        }
    }
    return config;
}

void RunConfig::validate() const {
    // content checks first; only a self-consistent config earns filesystem probes
    if (setting_ids.empty()) throw ValidationError("no settings requested");
    std::set<int> unique_settings(setting_ids.begin(), setting_ids.end());
    if (unique_settings.size() != setting_ids.size())
        throw ValidationError("duplicate setting ids");
    for (int id : setting_ids) Setting::by_id(id);  // throws on bad ids
    if (models.empty()) throw ValidationError("no models requested");
    std::set<ForecasterKind> unique_models(models.begin(), models.end());
    if (unique_models.size() != models.size()) throw ValidationError("duplicate model kinds");
    if (h < 0) throw ValidationError("h must be non-negative");

    auto require_file = [](const std::string& p, const char* what) {
        if (p.empty()) throw ValidationError(std::string(what) + " path not set");
        if (!std::filesystem::exists(p))
            throw ValidationError(std::string(what) + " path does not exist: " + p);
    };
    require_file(inputs.census, "census");
    require_file(inputs.crime, "crime");
    require_file(inputs.tweets, "tweets");
    require_file(inputs.poi, "poi");
    require_file(inputs.flows, "flows");
    require_file(inputs.edges, "edges");
    if (!inputs.polygons.empty()) require_file(inputs.polygons, "polygons");
    if (!grid_file.empty()) require_file(grid_file, "grid_file");
}

EvaluationPlan RunConfig::plan_for(ForecasterKind kind) const {
    EvaluationPlan plan;
    plan.h = h;
    plan.seed = seed;
    if (is_ml_kind(kind) && !grid_file.empty()) {
        const auto grids = parse_grid_file(grid_file);
        const auto it = grids.find(ml_kind_of(kind));
        if (it != grids.end()) plan.grid = it->second;
    }
    return plan;
}

SyntheticSpec parse_synthetic_spec(const std::string& path) {
    SyntheticSpec spec;
    std::set<std::string> seen;
    bool saw_beta = false;
    for (const Entry& e : read_key_values(path)) {
        if (!e.section.empty()) fail(path, e, "synthetic specs have no sections");
        if (!seen.insert(e.key).second) fail(path, e, "duplicate key");
        try {
            if (e.key == "kind") {
                spec.kind = synthetic_kind_from_string(e.value);
            } else if (e.key == "g") {
                spec.g = static_cast<int>(parse_int(path, e, e.value));
            } else if (e.key == "n_weeks") {
                spec.n_weeks = static_cast<int>(parse_int(path, e, e.value));
            } else if (e.key == "setting") {
                spec.setting_id = static_cast<int>(parse_int(path, e, e.value));
            } else if (e.key == "twitter_mode") {
                spec.modes.twitter = twitter_mode_from_string(e.value);
            } else if (e.key == "taxi_mode") {
                spec.modes.taxi = taxi_mode_from_string(e.value);
            } else if (e.key == "poi_mode") {
                spec.modes.poi = poi_mode_from_string(e.value);
            } else if (e.key == "beta") {
                const std::vector<std::string> items = split_list(e.value);
                spec.beta.resize(static_cast<Eigen::Index>(items.size()));
                for (std::size_t k = 0; k < items.size(); ++k)
                    spec.beta(static_cast<Eigen::Index>(k)) = parse_double(path, e, items[k]);
                saw_beta = true;
            } else if (e.key == "rho") {
                spec.rho = parse_double(path, e, e.value);
            } else if (e.key == "delta") {
                spec.delta = parse_double(path, e, e.value);
            } else if (e.key == "sigma") {
                spec.sigma = parse_double(path, e, e.value);
            } else if (e.key == "sigma_eta") {
                spec.sigma_eta = parse_double(path, e, e.value);
            } else if (e.key == "kappa") {
                spec.kappa = parse_double(path, e, e.value);
            } else if (e.key == "trips_scale") {
                spec.trips_scale = parse_double(path, e, e.value);
            } else if (e.key == "seed") {
                const long long v = parse_int(path, e, e.value);
                if (v < 0) fail(path, e, "seed must be non-negative");
                spec.seed = static_cast<std::uint64_t>(v);
            } else {
                fail(path, e, "unrecognised key");
            }
        } catch (const ValidationError& err) {
            const std::string what = err.what();
            if (what.find(path + ":") == 0) throw;
            fail(path, e, what);
        }
    }
    if (!saw_beta) throw ValidationError(path + ": beta is required");
    spec.validate();
    return spec;
}

std::map<MlKind, GridSpec> parse_grid_file(const std::string& path) {
    std::map<MlKind, GridSpec> grids;
    for (const Entry& e : read_key_values(path)) {
        if (e.section.empty()) fail(path, e, "grid axes must sit under a [model] section");
        MlKind kind;
        try {
            kind = ml_kind_from_string(e.section);
        } catch (const ValidationError&) {
            throw ValidationError(path + ":" + std::to_string(e.line) + ": unknown section [" +
                                  e.section + "]");
        }
        GridAxis axis;
        axis.name = e.key;
        for (const std::string& item : split_list(e.value))
            axis.values.push_back(parse_double(path, e, item));
        for (const GridAxis& existing : grids[kind].axes)
            if (existing.name == axis.name)
                fail(path, e, "duplicate axis for [" + e.section + "]");
        grids[kind].axes.push_back(std::move(axis));
    }
    for (auto& [kind, grid] : grids) grid.validate();
    return grids;
}

}  // namespace crimecast
