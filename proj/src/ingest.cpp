#include "crimecast/ingest.hpp"

#include <array>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "crimecast/csv.hpp"
#include "crimecast/errors.hpp"

namespace crimecast {

namespace {

// census row order defines the unit indexing used everywhere else
struct UnitIndex {
    std::vector<std::string> ids;
    std::map<std::string, int> index;

    int require(const CsvReader& reader, std::size_t col) const {
        const std::string& id = reader.field(col);
        auto it = index.find(id);
        if (it == index.end()) reader.fail(col, "unknown unit id \"" + id + "\"");
        return it->second;
    }
};

double non_negative_count(const CsvReader& reader, std::size_t col) {
    const std::int64_t v = reader.integer(col);
    if (v < 0) reader.fail(col, "negative count");
    return static_cast<double>(v);
}

int read_week(const CsvReader& reader, std::size_t col, int n_weeks) {
    const std::int64_t week = reader.integer(col);
    if (week < 1 || week > n_weeks)
        reader.fail(col, "week " + std::to_string(week) + " outside 1.." +
                             std::to_string(n_weeks));
    return static_cast<int>(week);
}

UnitIndex read_census(const std::string& path, Eigen::MatrixXd& census) {
    std::vector<std::string> header{"unit_id"};
    for (const char* name : kCensusNames) header.emplace_back(name);
    CsvReader reader(path, header);

    UnitIndex units;
    std::vector<std::array<double, kCensusCount>> rows;
    while (reader.next()) {
        const std::string& id = reader.field(0);
        if (id.empty()) reader.fail(0, "empty unit id");
        if (!units.index.emplace(id, static_cast<int>(units.ids.size())).second)
            reader.fail(0, "duplicate unit id \"" + id + "\"");
        units.ids.push_back(id);
        std::array<double, kCensusCount> row{};
        for (int j = 0; j < kCensusCount; ++j) {
            row[static_cast<std::size_t>(j)] = reader.number(static_cast<std::size_t>(j) + 1);
            if (row[static_cast<std::size_t>(j)] < 0.0)
                reader.fail(static_cast<std::size_t>(j) + 1, "negative value");
        }
        rows.push_back(row);
    }
    if (units.ids.empty()) throw ValidationError(path + ": no units");

    census.resize(static_cast<Eigen::Index>(rows.size()), kCensusCount);
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (int j = 0; j < kCensusCount; ++j)
            census(static_cast<Eigen::Index>(i), j) = rows[i][static_cast<std::size_t>(j)];
    return units;
}

// Two count columns keyed by (unit, week); used for both crime and tweets.
// Every cell must appear exactly once and the weeks must tile 1..T.
void read_panel_counts(const std::string& path, const std::vector<std::string>& header,
                       const UnitIndex& units, int n_weeks, Eigen::MatrixXd& a,
                       Eigen::MatrixXd& b, bool b_within_a) {
    CsvReader reader(path, header);
    const int n = static_cast<int>(units.ids.size());
    a.setConstant(n, n_weeks, -1.0);  // sentinel marks missing cells
    b.setConstant(n, n_weeks, -1.0);
    while (reader.next()) {
        const int unit = units.require(reader, 0);
        const int week = read_week(reader, 1, n_weeks);
        if (a(unit, week - 1) >= 0.0)
            reader.fail_row("duplicate cell: unit \"" + units.ids[static_cast<std::size_t>(
                                unit)] + "\", week " + std::to_string(week));
        a(unit, week - 1) = non_negative_count(reader, 2);
        b(unit, week - 1) = non_negative_count(reader, 3);
        if (b_within_a && b(unit, week - 1) > a(unit, week - 1))
            reader.fail(3, header[3] + " exceeds " + header[2]);
    }
    for (int week = 1; week <= n_weeks; ++week)
        for (int unit = 0; unit < n; ++unit)
            if (a(unit, week - 1) < 0.0)
                throw ValidationError(path + ": missing cell: unit \"" +
                                      units.ids[static_cast<std::size_t>(unit)] + "\", week " +
                                      std::to_string(week));
}

// T comes from the crime file: the distinct weeks must be exactly 1..T.
int scan_weeks(const std::string& path, const std::vector<std::string>& header) {
    CsvReader reader(path, header);
    std::map<std::int64_t, int> first_line;  // week -> first line it appears on
    while (reader.next()) {
        const std::int64_t week = reader.integer(1);
        if (week < 1) reader.fail(1, "week must be >= 1");
        first_line.emplace(week, reader.line());
    }
    if (first_line.empty()) throw ValidationError(path + ": no data rows");
    const std::int64_t t = first_line.rbegin()->first;
    std::int64_t expected = 1;
    for (const auto& [week, line] : first_line) {
        if (week != expected)
            throw ValidationError(path + ":" + std::to_string(line) + ": week " +
                                  std::to_string(week) + " follows week " +
                                  std::to_string(expected - 1) +
                                  "; weeks must be contiguous 1.." + std::to_string(t));
        ++expected;
    }
    return static_cast<int>(t);
}

void read_poi(const std::string& path, const UnitIndex& units, Eigen::MatrixXd& poi) {
    CsvReader reader(path, {"unit_id", "category", "count"});
    std::map<std::string, int> category_index;
    for (int j = 0; j < kPoiCount; ++j)
        category_index.emplace(kPoiCategories[static_cast<std::size_t>(j)], j);

    const int n = static_cast<int>(units.ids.size());
    poi.setZero(n, kPoiCount);
    Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> seen(n, kPoiCount);
    seen.setConstant(false);
    while (reader.next()) {
        const int unit = units.require(reader, 0);
        auto it = category_index.find(reader.field(1));
        if (it == category_index.end())
            reader.fail(1, "unknown category \"" + reader.field(1) + "\"");
        if (seen(unit, it->second))
            reader.fail_row("duplicate cell: unit \"" +
                            units.ids[static_cast<std::size_t>(unit)] + "\", category \"" +
                            reader.field(1) + "\"");
        seen(unit, it->second) = true;
        poi(unit, it->second) = non_negative_count(reader, 2);
    }
}

std::vector<FlowMatrix> read_flows(const std::string& path, const UnitIndex& units,
                                   int n_weeks) {
    CsvReader reader(path, {"week", "origin", "dest", "trips"});
    const int n = static_cast<int>(units.ids.size());
    std::vector<FlowMatrix> flows(static_cast<std::size_t>(n_weeks));
    for (int week = 1; week <= n_weeks; ++week) {
        flows[static_cast<std::size_t>(week - 1)].week = week;
        flows[static_cast<std::size_t>(week - 1)].n = n;
    }
    while (reader.next()) {
        const int week = read_week(reader, 0, n_weeks);
        const int origin = units.require(reader, 1);
        const int dest = units.require(reader, 2);
        if (origin == dest) reader.fail(2, "self-flow: origin equals dest");
        const double trips = reader.number(3);
        if (!(trips > 0.0)) reader.fail(3, "trips must be positive");
        flows[static_cast<std::size_t>(week - 1)].entries.emplace_back(origin, dest, trips);
    }
    return flows;
}

std::vector<std::pair<std::string, std::string>> read_edges(const std::string& path,
                                                            const UnitIndex& units) {
    CsvReader reader(path, {"src", "dst"});
    std::vector<std::pair<std::string, std::string>> edges;
    while (reader.next()) {
        units.require(reader, 0);
        units.require(reader, 1);
        if (reader.field(0) == reader.field(1)) reader.fail(1, "self-edge");
        edges.emplace_back(reader.field(0), reader.field(1));
    }
    return edges;
}

std::vector<std::vector<Ring>> read_polygons(const std::string& path, const UnitIndex& units) {
    CsvReader reader(path, {"unit_id", "ring_index", "vertex_index", "x", "y"});
    const std::size_t n = units.ids.size();
    std::vector<std::vector<Ring>> polygons(n);
    // indices must arrive contiguous from 0 per unit/ring so the file order is
    // the ring order
    while (reader.next()) {
        const int unit = units.require(reader, 0);
        const std::int64_t ring = reader.integer(1);
        const std::int64_t vertex = reader.integer(2);
        auto& rings = polygons[static_cast<std::size_t>(unit)];
        if (ring < 0 || ring > static_cast<std::int64_t>(rings.size()))
            reader.fail(1, "ring_index out of sequence");
        if (ring == static_cast<std::int64_t>(rings.size())) {
            if (vertex != 0) reader.fail(2, "new ring must start at vertex_index 0");
            rings.emplace_back();
        }
        Ring& r = rings[static_cast<std::size_t>(ring)];
        if (vertex != static_cast<std::int64_t>(r.size()))
            reader.fail(2, "vertex_index out of sequence");
        r.push_back(Point{reader.number(3), reader.number(4)});
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (polygons[i].empty())
            throw ValidationError(path + ": unit \"" + units.ids[i] + "\" has no polygon");
        for (const Ring& r : polygons[i])
            if (r.size() < 3)
                throw ValidationError(path + ": unit \"" + units.ids[i] +
                                      "\" has a ring with fewer than 3 vertices");
    }
    return polygons;
}

}  // namespace

IngestResult ingest(const IngestPaths& paths) {
    PanelData panel;
    const UnitIndex units = read_census(paths.census, panel.census);
    panel.unit_ids = units.ids;
    panel.n_units = static_cast<int>(units.ids.size());

    const std::vector<std::string> crime_header{"unit_id", "week", "property", "violent"};
    panel.n_weeks = scan_weeks(paths.crime, crime_header);
    read_panel_counts(paths.crime, crime_header, units, panel.n_weeks, panel.crime_property,
                      panel.crime_violent, false);
    read_panel_counts(paths.tweets, {"unit_id", "week", "tweets_all", "tweets_night"}, units,
                      panel.n_weeks, panel.tweets_all, panel.tweets_night, true);
    read_poi(paths.poi, units, panel.poi);
    panel.flows = read_flows(paths.flows, units, panel.n_weeks);

    std::vector<std::vector<Ring>> polygons;
    if (!paths.polygons.empty()) polygons = read_polygons(paths.polygons, units);
    ArealPartition partition(units.ids, std::move(polygons));
    SpatialWeights w = build_weights(partition, read_edges(paths.edges, units));

    panel.validate();
    return IngestResult{std::move(panel), std::move(w), std::move(partition)};
}

EventPanel aggregate_events(const std::vector<CrimeEvent>& events,
                            const ArealPartition& partition, int n_weeks) {
    if (!partition.has_polygons())
        throw ValidationError("event aggregation needs a partition with polygons");
    if (n_weeks < 1) throw ValidationError("n_weeks must be >= 1");
    for (std::size_t k = 0; k < events.size(); ++k)
        if (events[k].week < 1 || events[k].week > n_weeks)
            throw ValidationError("event " + std::to_string(k) + ": week " +
                                  std::to_string(events[k].week) + " outside 1.." +
                                  std::to_string(n_weeks));

    std::vector<Point> points;
    points.reserve(events.size());
    for (const CrimeEvent& e : events) points.push_back(e.location);
    const std::vector<std::optional<int>> assigned = assign_points(partition, points);

    EventPanel out;
    out.property.setZero(partition.size(), n_weeks);
    out.violent.setZero(partition.size(), n_weeks);
    for (std::size_t k = 0; k < events.size(); ++k) {
        if (!assigned[k]) {
            ++out.unassigned;
            continue;
        }
        Eigen::MatrixXd& target =
            events[k].type == CrimeType::Property ? out.property : out.violent;
        target(*assigned[k], events[k].week - 1) += 1.0;
    }
    return out;
}

}  // namespace crimecast
