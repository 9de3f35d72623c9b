#include "crimecast/features.hpp"

#include <cmath>
#include <set>

#include "crimecast/errors.hpp"

namespace crimecast {

const std::array<const char*, kCensusCount> kCensusNames = {
    "population", "median_age", "male", "black", "asian", "hispanic", "vacancy", "female_hh"};

const std::array<const char*, kPoiCount> kPoiCategories = {
    "nightlife", "food",     "arts_entertainment",  "residence",
    "shops",     "travel",   "outdoors_recreation", "college_education",
    "professional"};

Eigen::MatrixXd FlowMatrix::dense() const {
    Eigen::MatrixXd f = Eigen::MatrixXd::Zero(n, n);
    for (const auto& [o, d, t] : entries) f(o, d) += t;
    return f;
}

FlowMatrix FlowMatrix::from_dense(int week, const Eigen::MatrixXd& f) {
    if (f.rows() != f.cols()) throw ValidationError("flow matrix must be square");
    FlowMatrix out;
    out.week = week;
    out.n = static_cast<int>(f.rows());
    for (int i = 0; i < out.n; ++i) {
        for (int j = 0; j < out.n; ++j) {
            const double t = f(i, j);
            if (t < 0.0) throw ValidationError("negative trip count in flow matrix");
            if (i == j) {
                if (t != 0.0) throw ValidationError("flow matrix diagonal must be zero");
                continue;
            }
            if (t > 0.0) out.entries.emplace_back(i, j, t);
        }
    }
    return out;
}

const char* to_string(TaxiFeatureMode m) {
    switch (m) {
        case TaxiFeatureMode::Raw: return "raw";
        case TaxiFeatureMode::SourceNormalised: return "source";
        case TaxiFeatureMode::DestinationNormalised: return "destination";
    }
    return "?";
}

const char* to_string(TwitterFeatureMode m) {
    switch (m) {
        case TwitterFeatureMode::All: return "all";
        case TwitterFeatureMode::Night: return "night";
        case TwitterFeatureMode::LogAll: return "log_all";
        case TwitterFeatureMode::LogNight: return "log_night";
    }
    return "?";
}

const char* to_string(PoiFeatureMode m) {
    return m == PoiFeatureMode::Counts ? "counts" : "shares";
}

TaxiFeatureMode taxi_mode_from_string(const std::string& s) {
    if (s == "raw") return TaxiFeatureMode::Raw;
    if (s == "source") return TaxiFeatureMode::SourceNormalised;
    if (s == "destination") return TaxiFeatureMode::DestinationNormalised;
    throw ValidationError("unknown taxi feature mode '" + s + "' (raw|source|destination)");
}

TwitterFeatureMode twitter_mode_from_string(const std::string& s) {
    if (s == "all") return TwitterFeatureMode::All;
    if (s == "night") return TwitterFeatureMode::Night;
    if (s == "log_all") return TwitterFeatureMode::LogAll;
    if (s == "log_night") return TwitterFeatureMode::LogNight;
    throw ValidationError("unknown twitter feature mode '" + s +
                          "' (all|night|log_all|log_night)");
}

PoiFeatureMode poi_mode_from_string(const std::string& s) {
    if (s == "counts") return PoiFeatureMode::Counts;
    if (s == "shares") return PoiFeatureMode::Shares;
    throw ValidationError("unknown poi feature mode '" + s + "' (counts|shares)");
}

const char* to_string(CrimeType t) {
    return t == CrimeType::Property ? "property" : "violent";
}

CrimeType crime_type_from_string(const std::string& s) {
    if (s == "property") return CrimeType::Property;
    if (s == "violent") return CrimeType::Violent;
    throw ValidationError("unknown crime type '" + s + "' (property|violent)");
}

Setting Setting::by_id(int id) {
    if (id < 1 || id > 8) throw ValidationError("setting id must be 1..8");
    return all()[id - 1];
}

const std::array<Setting, 8>& Setting::all() {
    static const std::array<Setting, 8> table = {{
        {1, false, false, false},
        {2, true, false, false},
        {3, true, true, false},
        {4, true, false, true},
        {5, false, true, true},
        {6, false, true, false},
        {7, false, false, true},
        {8, true, true, true},
    }};
    return table;
}

void PanelData::validate() const {
    if (n_units < 2) throw ValidationError("panel needs at least 2 units");
    if (n_weeks < 2) throw ValidationError("panel needs at least 2 weeks");
    if (static_cast<int>(unit_ids.size()) != n_units)
        throw ValidationError("unit id count does not match n_units");
    std::set<std::string> seen(unit_ids.begin(), unit_ids.end());
    if (static_cast<int>(seen.size()) != n_units)
        throw ValidationError("duplicate unit ids in panel");
    auto check_nt = [&](const Eigen::MatrixXd& m, const char* what) {
        if (m.rows() != n_units || m.cols() != n_weeks)
            throw ValidationError(std::string(what) + " matrix must be N x T");
        if ((m.array() < 0.0).any())
            throw ValidationError(std::string(what) + " contains negative values");
    };
    check_nt(crime_property, "property crime");
    check_nt(crime_violent, "violent crime");
    check_nt(tweets_all, "tweets_all");
    check_nt(tweets_night, "tweets_night");
    if ((tweets_night.array() > tweets_all.array()).any())
        throw ValidationError("night tweet counts exceed total tweet counts");
    if (census.rows() != n_units || census.cols() != kCensusCount)
        throw ValidationError("census matrix must be N x 8");
    if (poi.rows() != n_units || poi.cols() != kPoiCount)
        throw ValidationError("poi matrix must be N x 9");
    if ((poi.array() < 0.0).any()) throw ValidationError("negative poi counts");
    if (static_cast<int>(flows.size()) != n_weeks)
        throw ValidationError("panel needs one flow matrix per week");
    for (int t = 0; t < n_weeks; ++t) {
        if (flows[t].week != t + 1)
            throw ValidationError("flow matrices must cover weeks 1..T in order");
        if (flows[t].n != n_units)
            throw ValidationError("flow matrix size does not match unit count");
    }
}

Eigen::VectorXd taxi_feature(const FlowMatrix& f, const Eigen::VectorXd& y_prev,
                             TaxiFeatureMode mode) {
    const int n = f.n;
    if (y_prev.size() != n)
        throw ValidationError("crime vector length does not match flow matrix size");
    for (const auto& [o, d, t] : f.entries) {
        if (o < 0 || o >= n || d < 0 || d >= n)
            throw ValidationError("flow entry references unit out of range");
        if (o == d) throw ValidationError("flow matrix diagonal must be zero");
        if (t < 0.0) throw ValidationError("negative trip count in flow matrix");
    }
    Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
    switch (mode) {
        case TaxiFeatureMode::Raw:
            // c_i = sum_j f_ij y_j: outgoing trips weighted by destination crime.
            for (const auto& [o, d, t] : f.entries) out[o] += t * y_prev[d];
            break;
        case TaxiFeatureMode::SourceNormalised: {
            // c_i = sum_j (f_ji / outflow_j) y_j; origins without outflow drop out.
            Eigen::VectorXd outflow = Eigen::VectorXd::Zero(n);
            for (const auto& [o, d, t] : f.entries) outflow[o] += t;
            for (const auto& [o, d, t] : f.entries)
                if (outflow[o] > 0.0) out[d] += t / outflow[o] * y_prev[o];
            break;
        }
        case TaxiFeatureMode::DestinationNormalised: {
            // c_i = sum_j (f_ji / inflow_i) y_j: a convex combination of origin
            // crime whenever inflow_i > 0, so min(y) <= c_i <= max(y).
            Eigen::VectorXd inflow = Eigen::VectorXd::Zero(n);
            for (const auto& [o, d, t] : f.entries) inflow[d] += t;
            for (const auto& [o, d, t] : f.entries)
                if (inflow[d] > 0.0) out[d] += t / inflow[d] * y_prev[o];
            break;
        }
    }
    return out;
}

Eigen::VectorXd twitter_feature(const Eigen::VectorXd& all_counts,
                                const Eigen::VectorXd& night_counts, TwitterFeatureMode mode) {
    if (all_counts.size() != night_counts.size())
        throw ValidationError("tweet count vectors differ in length");
    if ((all_counts.array() < 0.0).any() || (night_counts.array() < 0.0).any())
        throw ValidationError("negative tweet counts");
    if ((night_counts.array() > all_counts.array()).any())
        throw ValidationError("night tweet counts exceed total tweet counts");
    switch (mode) {
        case TwitterFeatureMode::All: return all_counts;
        case TwitterFeatureMode::Night: return night_counts;
        case TwitterFeatureMode::LogAll: return all_counts.array().log1p();
        case TwitterFeatureMode::LogNight: return night_counts.array().log1p();
    }
    throw ValidationError("unknown twitter feature mode");
}

Eigen::MatrixXd poi_feature(const Eigen::MatrixXd& poi_counts, PoiFeatureMode mode) {
    if ((poi_counts.array() < 0.0).any()) throw ValidationError("negative poi counts");
    if (mode == PoiFeatureMode::Counts) return poi_counts;
    Eigen::MatrixXd shares = poi_counts;
    for (int i = 0; i < shares.rows(); ++i) {
        const double total = shares.row(i).sum();
        if (total > 0.0) shares.row(i) /= total;
        // all-zero rows stay all-zero
    }
    return shares;
}

namespace {

std::string twitter_column_name(TwitterFeatureMode mode) {
    return std::string("tweets_") + to_string(mode);
}

}  // namespace

DesignMatrix design_for_week(const PanelData& panel, CrimeType crime_type,
                             const Setting& setting, const FeatureModes& modes,
                             int target_week) {
    panel.validate();
    if (target_week < 2)
        throw ValidationError("target week " + std::to_string(target_week) +
                              ": lag unavailable (features come from the preceding week)");
    if (target_week > panel.n_weeks)
        throw ValidationError("target week " + std::to_string(target_week) +
                              " exceeds panel length " + std::to_string(panel.n_weeks));
    const int n = panel.n_units;
    const int lag = target_week - 1;  // features come from the preceding week

    int k = 1 + kCensusCount;
    if (setting.include_twitter) k += 1;
    if (setting.include_poi) k += kPoiCount;
    if (setting.include_taxi) k += 1;

    DesignMatrix d;
    d.x.resize(n, k);
    d.rows.reserve(n);
    for (int i = 0; i < n; ++i) d.rows.emplace_back(i, target_week);

    d.column_names.push_back("intercept");
    d.x.col(0).setOnes();
    int c = 1;
    for (int j = 0; j < kCensusCount; ++j) {
        d.column_names.emplace_back(kCensusNames[j]);
        d.x.col(c++) = panel.census.col(j);
    }
    if (setting.include_twitter) {
        d.column_names.push_back(twitter_column_name(modes.twitter));
        d.x.col(c++) = twitter_feature(panel.tweets_all.col(lag - 1),
                                       panel.tweets_night.col(lag - 1), modes.twitter);
    }
    if (setting.include_poi) {
        const Eigen::MatrixXd p = poi_feature(panel.poi, modes.poi);
        for (int j = 0; j < kPoiCount; ++j) {
            d.column_names.emplace_back(kPoiCategories[j]);
            d.x.col(c++) = p.col(j);
        }
    }
    if (setting.include_taxi) {
        d.column_names.push_back(std::string("taxi_") + to_string(modes.taxi));
        d.x.col(c++) = taxi_feature(panel.flows[lag - 1],
                                    panel.crime(crime_type).col(lag - 1), modes.taxi);
    }
    return d;
}

std::pair<DesignMatrix, Eigen::VectorXd> assemble_design(const PanelData& panel,
                                                         CrimeType crime_type,
                                                         const Setting& setting,
                                                         const FeatureModes& modes,
                                                         int first_target_week,
                                                         int last_target_week) {
    if (first_target_week > last_target_week)
        throw ValidationError("empty target week range");
    const int n = panel.n_units;
    const int n_weeks_used = last_target_week - first_target_week + 1;

    DesignMatrix d;
    Eigen::VectorXd y(n * n_weeks_used);
    int row = 0;
    for (int w = first_target_week; w <= last_target_week; ++w) {
        DesignMatrix dw = design_for_week(panel, crime_type, setting, modes, w);
        if (row == 0) {
            d.column_names = dw.column_names;
            d.x.resize(n * n_weeks_used, dw.cols());
        }
        d.x.middleRows(row, n) = dw.x;
        for (const auto& r : dw.rows) d.rows.push_back(r);
        y.segment(row, n) = panel.crime(crime_type).col(w - 1);
        row += n;
    }
    return {std::move(d), std::move(y)};
}

}  // namespace crimecast
