#pragma once

#include <Eigen/Dense>
#include <array>
#include <string>
#include <utility>
#include <vector>

namespace crimecast {

// Weekly origin x destination trip counts, zero diagonal.
struct FlowMatrix {
    int week = 0;  // 1-based week index
    int n = 0;
    // (origin, dest, trips), trips > 0, origin != dest
    std::vector<std::tuple<int, int, double>> entries;

    Eigen::MatrixXd dense() const;
    static FlowMatrix from_dense(int week, const Eigen::MatrixXd& f);
};

enum class TaxiFeatureMode { Raw, SourceNormalised, DestinationNormalised };
enum class TwitterFeatureMode { All, Night, LogAll, LogNight };
enum class PoiFeatureMode { Counts, Shares };

struct FeatureModes {
    TwitterFeatureMode twitter = TwitterFeatureMode::All;
    TaxiFeatureMode taxi = TaxiFeatureMode::Raw;
    PoiFeatureMode poi = PoiFeatureMode::Counts;
};

const char* to_string(TaxiFeatureMode m);
const char* to_string(TwitterFeatureMode m);
const char* to_string(PoiFeatureMode m);
TaxiFeatureMode taxi_mode_from_string(const std::string& s);
TwitterFeatureMode twitter_mode_from_string(const std::string& s);
PoiFeatureMode poi_mode_from_string(const std::string& s);

// Covariate-group combination; census is always included.
struct Setting {
    int id = 1;
    bool include_poi = false;
    bool include_taxi = false;
    bool include_twitter = false;

    static Setting by_id(int id);
    static const std::array<Setting, 8>& all();
};

enum class CrimeType { Property, Violent };
const char* to_string(CrimeType t);
CrimeType crime_type_from_string(const std::string& s);

inline constexpr int kCensusCount = 8;
inline constexpr int kPoiCount = 9;
extern const std::array<const char*, kCensusCount> kCensusNames;
extern const std::array<const char*, kPoiCount> kPoiCategories;

// N units x T weeks of crime counts plus static and weekly covariates.
struct PanelData {
    int n_units = 0;
    int n_weeks = 0;
    std::vector<std::string> unit_ids;
    Eigen::MatrixXd crime_property;   // N x T, integer-valued counts
    Eigen::MatrixXd crime_violent;    // N x T
    Eigen::MatrixXd census;           // N x 8
    Eigen::MatrixXd tweets_all;       // N x T
    Eigen::MatrixXd tweets_night;     // N x T
    Eigen::MatrixXd poi;              // N x 9
    std::vector<FlowMatrix> flows;    // one per week, weeks 1..T

    const Eigen::MatrixXd& crime(CrimeType t) const {
        return t == CrimeType::Property ? crime_property : crime_violent;
    }
    Eigen::MatrixXd& crime(CrimeType t) {
        return t == CrimeType::Property ? crime_property : crime_violent;
    }
    void validate() const;
};

// Rows keyed by (unit, week), week-major with units ascending inside a week.
struct DesignMatrix {
    std::vector<std::pair<int, int>> rows;  // (unit index, response week)
    Eigen::MatrixXd x;
    std::vector<std::string> column_names;

    int cols() const { return static_cast<int>(x.cols()); }
};

// One weekly taxi feature vector. y_prev must already be the lagged crime
// vector: flows of week t weight crime of week t-? one week before the
// response they feed.
Eigen::VectorXd taxi_feature(const FlowMatrix& f, const Eigen::VectorXd& y_prev,
                             TaxiFeatureMode mode);

Eigen::VectorXd twitter_feature(const Eigen::VectorXd& all_counts,
                                const Eigen::VectorXd& night_counts, TwitterFeatureMode mode);

Eigen::MatrixXd poi_feature(const Eigen::MatrixXd& poi_counts, PoiFeatureMode mode);

// Design rows for the given response weeks (each needs week-1 features, so
// every target week must be >= 2). Column order: intercept, census, twitter,
// POI, taxi. Response is crime at the target week.
std::pair<DesignMatrix, Eigen::VectorXd> assemble_design(const PanelData& panel,
                                                         CrimeType crime_type,
                                                         const Setting& setting,
                                                         const FeatureModes& modes,
                                                         int first_target_week,
                                                         int last_target_week);

// The covariate rows a week-(t+1) forecast needs, built from week-t data only.
DesignMatrix design_for_week(const PanelData& panel, CrimeType crime_type,
                             const Setting& setting, const FeatureModes& modes,
                             int target_week);

}  // namespace crimecast
