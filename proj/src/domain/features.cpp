#include <algorithm>
#include <cmath>

#include "simgat/domain.hpp"

namespace simgat {

namespace {

const std::array<const char*, 8> kLandUse = {"lu_commercial",    "lu_mixed",         "lu_office",
                                             "lu_parking",       "lu_recreation",    "lu_single_family",
                                             "lu_multi_family",  "lu_vacant"};
const std::array<const char*, 3> kFlood = {"flood_x", "flood_a", "flood_v"};

bool finite_all(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

const char* morphology_name(Morphology m) {
    switch (m) {
        case Morphology::Plaza: return "plaza";
        case Morphology::Street: return "street";
        case Morphology::Downtown: return "downtown";
        case Morphology::Mall: return "mall";
    }
    return "?";
}

Morphology parse_morphology(std::string_view name) {
    for (auto m : {Morphology::Plaza, Morphology::Street, Morphology::Downtown, Morphology::Mall}) {
        if (name == morphology_name(m)) return m;
    }
    throw ValidationError("unknown morphology '" + std::string(name) + "' (plaza|street|downtown|mall)");
}

std::vector<std::string> cluster_feature_columns(std::size_t n_components) {
    std::vector<std::string> cols = {"morph_plaza", "morph_street", "morph_downtown", "morph_mall"};
    for (std::size_t i = 0; i < n_components; ++i) cols.push_back("poi_pc" + std::to_string(i + 1));
    cols.insert(cols.end(), {"poi_diversity", "chain_ratio"});
    cols.insert(cols.end(), kLandUse.begin(), kLandUse.end());
    cols.push_back("bus_stop_count");
    cols.insert(cols.end(), kFlood.begin(), kFlood.end());
    cols.insert(cols.end(), {"business_count", "total_area"});
    return cols;
}

const std::vector<std::string>& neighborhood_feature_columns() {
    static const std::vector<std::string> cols = [] {
        std::vector<std::string> c = {"age",        "auto_ownership", "below_poverty_ratio", "education",
                                      "employment", "population",     "race_white_share"};
        c.insert(c.end(), kLandUse.begin(), kLandUse.end());
        c.insert(c.end(), {"intersection_density", "roadway_density", "walkability"});
        c.insert(c.end(), kFlood.begin(), kFlood.end());
        return c;
    }();
    return cols;
}

const std::vector<std::string>& env_columns() {
    static const std::vector<std::string> cols = {
        "temp_avg",      "wind_avg",       "wind_fastest_2min", "precip_multiday_days", "precip_intensity",
        "hazard_coastal_flood", "hazard_flood", "hazard_others", "hazard_storm",        "stay_at_home",
        "holiday",       "total_visits_prev"};
    return cols;
}

std::vector<std::string> default_long_tail_cluster_columns() {
    return {"bus_stop_count", "business_count", "total_area"};
}
std::vector<std::string> default_long_tail_neighborhood_columns() { return {"population"}; }
std::vector<std::string> default_long_tail_env_columns() { return {"total_visits_prev"}; }

std::vector<double> to_row(const ClusterFeatures& f) {
    std::vector<double> row(4, 0.0);
    row[static_cast<std::size_t>(f.morphology)] = 1.0;
    row.insert(row.end(), f.poi_counts_reduced.begin(), f.poi_counts_reduced.end());
    row.push_back(f.poi_diversity);
    row.push_back(f.chain_ratio);
    row.insert(row.end(), f.land_use.begin(), f.land_use.end());
    row.push_back(f.bus_stop_count);
    row.insert(row.end(), f.flood_zone.begin(), f.flood_zone.end());
    row.push_back(f.business_count);
    row.push_back(f.total_area);
    return row;
}

std::vector<double> to_row(const NeighborhoodFeatures& f) {
    std::vector<double> row(f.census.begin(), f.census.end());
    row.insert(row.end(), f.land_use.begin(), f.land_use.end());
    row.insert(row.end(), f.accessibility.begin(), f.accessibility.end());
    row.insert(row.end(), f.flood_zone.begin(), f.flood_zone.end());
    return row;
}

std::vector<double> to_row(const EnvRecord& r) {
    std::vector<double> row(r.weather.begin(), r.weather.end());
    for (bool h : r.hazard) row.push_back(h ? 1.0 : 0.0);
    row.push_back(r.stay_at_home ? 1.0 : 0.0);
    row.push_back(r.holiday ? 1.0 : 0.0);
    row.push_back(r.total_visits_prev);
    return row;
}

void validate(const Poi& poi, const std::string& where, IssueList& issues) {
    if (poi.id.empty()) issues.add(where + ": empty id");
    if (poi.naics.size() != 6 || !std::all_of(poi.naics.begin(), poi.naics.end(), [](char c) {
            return c >= '0' && c <= '9';
        })) {
        issues.add(where + ": naics '" + poi.naics + "' is not a 6-digit code");
    }
    if (!std::isfinite(poi.x) || !std::isfinite(poi.y)) issues.add(where + ": non-finite coordinates");
}

void validate(const ClusterFeatures& f, const std::string& where, IssueList& issues) {
    const auto row = to_row(f);
    if (!finite_all(row)) issues.add(where + ": non-finite feature value");
    if (!std::all_of(f.land_use.begin(), f.land_use.end(), [](double v) { return v >= 0.0; }))
        issues.add(where + ": negative land-use proportion");
    if (!std::all_of(f.flood_zone.begin(), f.flood_zone.end(), [](double v) { return v >= 0.0 && v <= 1.0; }))
        issues.add(where + ": flood-zone proportion outside [0,1]");
    if (!(f.chain_ratio >= 0.0 && f.chain_ratio <= 1.0)) issues.add(where + ": chain_ratio outside [0,1]");
    if (!(f.poi_diversity >= 0.0)) issues.add(where + ": negative poi_diversity");
    if (!(f.bus_stop_count >= 0.0)) issues.add(where + ": negative bus_stop_count");
    if (!(f.business_count >= 0.0)) issues.add(where + ": negative business_count");
    if (!(f.total_area >= 0.0)) issues.add(where + ": negative total_area");
}

void validate(const NeighborhoodFeatures& f, const std::string& where, IssueList& issues) {
    const auto row = to_row(f);
    if (!finite_all(row)) issues.add(where + ": non-finite feature value");
    // Everything except age (0) and population (5) is a proportion or a
    // density; the proportions are bounded.
    for (std::size_t i : {1u, 2u, 3u, 4u, 6u}) {
        if (!(f.census[i] >= 0.0 && f.census[i] <= 1.0))
            issues.add(where + ": census proportion '" + neighborhood_feature_columns()[i] + "' outside [0,1]");
    }
    if (!(f.census[5] >= 0.0)) issues.add(where + ": negative population");
    for (double v : f.land_use)
        if (!(v >= 0.0 && v <= 1.0)) issues.add(where + ": land-use proportion outside [0,1]");
    for (double v : f.flood_zone)
        if (!(v >= 0.0 && v <= 1.0)) issues.add(where + ": flood-zone proportion outside [0,1]");
}

}  // namespace simgat
