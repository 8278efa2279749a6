#pragma once

// Synthetic cities with visits drawn from a known gravity-times-environment
// law, used as ground truth for every learning and attribution test.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "simgat/classic.hpp"
#include "simgat/domain.hpp"
#include "simgat/transport.hpp"

namespace simgat {

/// Sets a boolean env column (hazard_*, stay_at_home, holiday) on one day,
/// counted from the first generated day.
struct CalendarEvent {
    std::size_t day = 0;
    std::string column;
    bool operator==(const CalendarEvent&) const = default;
};

/// Adds coefficient * z(cluster_column) to every log-rate, z being the
/// column z-score across clusters.
struct PlantedEffect {
    std::string cluster_column;
    double coefficient = 0.0;
    bool operator==(const PlantedEffect&) const = default;
};

/// Adds coefficient * z(cluster_column)_i * max(0, -z(neighborhood_column)_j):
/// the cluster feature matters only where the neighborhood attribute is low.
struct PlantedInteraction {
    std::string cluster_column;
    std::string neighborhood_column;
    double coefficient = 0.0;
    bool operator==(const PlantedInteraction&) const = default;
};

struct ScenarioSpec {
    std::uint64_t seed = 7;
    std::size_t n_clusters = 10;
    std::size_t n_neighborhoods = 15;
    std::size_t days = 60;
    Date start = Date::from_ymd(2019, 8, 1);
    std::size_t min_days = 9;  // window + 2

    /// Origin mass = population, destination mass = business_count, cost =
    /// mode_mix-weighted travel minutes.
    GravityParams gravity{0.02, 0.8, 1.0, 1.5};
    /// Log-rate coefficient per env column. Boolean columns enter as 0/1,
    /// weather columns as deviations from their scenario mean.
    std::map<std::string, double> env_effects;
    std::vector<CalendarEvent> calendar;
    /// Share of each cost layer ("drive", "walk_transit") in the generator's cost.
    std::map<std::string, double> mode_mix;
    std::vector<PlantedEffect> cluster_effects;
    std::vector<PlantedInteraction> interactions;

    std::size_t poi_components = 2;
    double city_size_m = 8000.0;
    std::size_t grid_side = 12;

    /// Default storm, lockdown and holiday calendar with strong env effects.
    static ScenarioSpec defaults();
    /// 4 clusters x 6 neighborhoods x 14 days with a storm and a short
    /// lockdown; small enough for finite-difference checks.
    static ScenarioSpec desk(std::uint64_t seed);
    void validate() const;
    bool operator==(const ScenarioSpec&) const = default;
};

struct SyntheticCity {
    CityInputs inputs;  // raw features, costs, env
    CityGraph graph;
    FlowTable flows;
    /// Generating rates per day, clusters x neighborhoods (same layout as
    /// FlowTable::dense and model predictions).
    std::vector<Matrix> truth;
    RoadNetwork network;
};

SyntheticCity generate(const ScenarioSpec& spec);

}  // namespace simgat
