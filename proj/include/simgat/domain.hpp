#pragma once

// Domain records for clusters, neighborhoods, environment and flows, plus
// feature standardization, PCA and CityGraph assembly.

#include <array>
#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "simgat/common.hpp"
#include "simgat/date.hpp"

namespace simgat {

struct Point {
    double x = 0.0;
    double y = 0.0;
    bool operator==(const Point&) const = default;
};

struct Poi {
    std::string id;
    double x = 0.0;
    double y = 0.0;
    std::string naics;  // six digits
    bool is_chain = false;
};

enum class Morphology { Plaza = 0, Street = 1, Downtown = 2, Mall = 3 };

const char* morphology_name(Morphology m);
Morphology parse_morphology(std::string_view name);

struct ClusterFeatures {
    Morphology morphology = Morphology::Plaza;
    std::vector<double> poi_counts_reduced;
    double poi_diversity = 0.0;  // nats
    double chain_ratio = 0.0;
    std::array<double, 8> land_use{};
    double bus_stop_count = 0.0;
    std::array<double, 3> flood_zone{};  // X, A, V
    double business_count = 0.0;
    double total_area = 0.0;  // m^2
};

struct NeighborhoodFeatures {
    // age, auto ownership, below-poverty ratio, education, employment,
    // population, race share
    std::array<double, 7> census{};
    std::array<double, 8> land_use{};
    // intersection density, roadway density, walkability
    std::array<double, 3> accessibility{};
    std::array<double, 3> flood_zone{};
};

struct EnvRecord {
    Date date;
    // avg temp, avg wind, fastest 2-min wind, multiday-precip days, precip intensity
    std::array<double, 5> weather{};
    // coastal flood, flood, others, storm
    std::array<bool, 4> hazard{};
    bool stay_at_home = false;
    bool holiday = false;
    double total_visits_prev = 0.0;
};

// Column layouts used for the feature matrices. The cluster layout depends on
// the number of retained principal components.
std::vector<std::string> cluster_feature_columns(std::size_t n_components);
const std::vector<std::string>& neighborhood_feature_columns();
const std::vector<std::string>& env_columns();
std::vector<std::string> default_long_tail_cluster_columns();
std::vector<std::string> default_long_tail_neighborhood_columns();
std::vector<std::string> default_long_tail_env_columns();

std::vector<double> to_row(const ClusterFeatures& f);
std::vector<double> to_row(const NeighborhoodFeatures& f);
std::vector<double> to_row(const EnvRecord& r);

/// Invariant checks; problems are appended to `issues` prefixed by `where`.
void validate(const Poi& poi, const std::string& where, IssueList& issues);
void validate(const ClusterFeatures& f, const std::string& where, IssueList& issues);
void validate(const NeighborhoodFeatures& f, const std::string& where, IssueList& issues);

// ---------------------------------------------------------------------------
// Standardization

struct ColumnStat {
    std::string name;
    bool is_log = false;
    double mean = 0.0;
    double sd = 1.0;
    bool operator==(const ColumnStat&) const = default;
};

/// Per-column transform: optional ln(1+x) followed by z-scoring.
struct ColumnStats {
    std::vector<ColumnStat> columns;

    /// Applies the stored transform to new rows of the same layout.
    Matrix apply(const Matrix& raw) const;
    /// Maps standardized values back to the raw scale.
    Matrix invert(const Matrix& standardized) const;
    double invert_value(std::size_t column, double standardized) const;
    std::optional<std::size_t> index_of(std::string_view name) const;
    bool operator==(const ColumnStats&) const = default;
};

struct Standardized {
    Matrix values;
    ColumnStats stats;
};

/// ln(1+x) on the long-tail columns, then per-column centering and scaling
/// to unit (population) variance. Constant columns keep sd = 1.
Standardized standardize_features(const Matrix& raw, std::span<const std::size_t> long_tail_columns,
                                  const std::vector<std::string>& names = {});

// ---------------------------------------------------------------------------
// PCA

struct PcaBasis {
    std::vector<double> mean;           // d
    std::vector<double> eigenvalues;    // d, non-increasing
    Matrix components;                  // d x p, orthonormal columns
    std::vector<double> explained_ratio;  // d

    Matrix project(const Matrix& counts) const;
};

struct PcaResult {
    Matrix reduced;  // n x p
    PcaBasis basis;
};

/// Projects onto the fewest leading components whose cumulative explained
/// variance reaches `target_variance`.
PcaResult pca_reduce(const Matrix& counts, double target_variance);

// ---------------------------------------------------------------------------
// CityGraph

struct FeatureTable {
    std::vector<std::string> ids;
    std::vector<std::string> columns;
    std::vector<Point> xy;
    Matrix values;  // standardized, rows = ids
    ColumnStats stats;
};

struct CostLayer {
    std::string mode;
    Matrix minutes;  // neighborhoods x clusters
};

struct EnvTable {
    std::vector<Date> dates;
    std::vector<std::string> columns;
    Matrix values;  // standardized, rows = dates
    ColumnStats stats;

    /// Row index of `date`, if present.
    std::optional<std::size_t> index_of(Date date) const;
};

struct CityGraph {
    FeatureTable clusters;
    FeatureTable neighborhoods;
    std::vector<CostLayer> costs;
    EnvTable env;
    double cost_floor = kCostFloor;

    std::size_t n_clusters() const { return clusters.values.rows; }
    std::size_t n_neighborhoods() const { return neighborhoods.values.rows; }
    std::size_t n_env_features() const { return env.values.cols; }

    /// Raw (unstandardized) value of a named feature for every row.
    std::vector<double> raw_cluster_column(std::string_view name) const;
    std::vector<double> raw_neighborhood_column(std::string_view name) const;
};

struct ValidationOptions {
    /// Also require column-standardized feature matrices (off when the
    /// graph was built with statistics from another dataset).
    bool check_standardization = true;
};

/// Every invariant of a CityGraph, itemized.
std::vector<std::string> validate(const CityGraph& graph, ValidationOptions options = {});

struct CityStats {
    ColumnStats clusters;
    ColumnStats neighborhoods;
    ColumnStats env;
};

struct CityInputs {
    std::vector<std::string> cluster_ids;
    std::vector<Point> cluster_xy;
    std::vector<ClusterFeatures> clusters;
    std::vector<std::string> neighborhood_ids;
    std::vector<Point> neighborhood_xy;
    std::vector<NeighborhoodFeatures> neighborhoods;
    std::vector<CostLayer> costs;
    std::vector<EnvRecord> env;
};

/// Standardizes features (or reapplies `stats`) and validates the result.
/// Throws ValidationError listing every problem found.
CityGraph assemble_city_graph(const CityInputs& inputs, const std::optional<CityStats>& stats = std::nullopt);

// ---------------------------------------------------------------------------
// Flows

struct FlowEntry {
    Date date;
    std::size_t neighborhood = 0;
    std::size_t cluster = 0;
    std::uint64_t count = 0;
    bool operator==(const FlowEntry&) const = default;
};

/// Observed daily visits per (date, neighborhood, cluster); absent keys are 0.
class FlowTable {
public:
    FlowTable() = default;
    FlowTable(std::size_t n_neighborhoods, std::size_t n_clusters)
        : n_neighborhoods_(n_neighborhoods), n_clusters_(n_clusters) {}

    /// Throws on out-of-range indices or a repeated key.
    void add(Date date, std::size_t neighborhood, std::size_t cluster, std::uint64_t count);

    const std::vector<FlowEntry>& entries() const noexcept { return entries_; }
    std::size_t n_neighborhoods() const noexcept { return n_neighborhoods_; }
    std::size_t n_clusters() const noexcept { return n_clusters_; }

    /// Counts for one date as a clusters x neighborhoods matrix.
    Matrix dense(Date date) const;
    /// Mean daily count per pair over `dates`, neighborhoods x clusters.
    Matrix mean_over(std::span<const Date> dates) const;

    bool operator==(const FlowTable&) const = default;

private:
    std::size_t n_neighborhoods_ = 0;
    std::size_t n_clusters_ = 0;
    std::vector<FlowEntry> entries_;
    std::set<std::tuple<std::int64_t, std::size_t, std::size_t>> keys_;
};

}  // namespace simgat
