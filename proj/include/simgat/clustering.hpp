#pragma once

// Business-cluster detection from POIs.

#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "simgat/domain.hpp"

namespace simgat {

struct DbscanParams {
    double eps = 200.0;       // meters
    std::size_t min_pts = 5;  // the point itself counts
};

inline constexpr int kNoise = -1;

struct ClusterAssignment {
    std::vector<int> labels;                        // per point, kNoise or cluster id
    std::vector<std::vector<std::size_t>> members;  // cluster id -> point indices

    std::size_t n_clusters() const noexcept { return members.size(); }
    std::vector<std::size_t> noise() const;
};

/// Density-based clustering with Euclidean eps-neighborhoods (inclusive).
///
/// Core points are those with at least min_pts points (themselves included)
/// within eps. Cores are linked into clusters in ascending index order; a
/// border point joins the cluster of its lowest-index core neighbor. The
/// result is therefore independent of traversal details.
ClusterAssignment dbscan(std::span<const Point> points, const DbscanParams& params);

/// Unions the given cluster pairs and renumbers clusters densely, ordered by
/// their smallest original id. Throws ValidationError on unknown ids.
ClusterAssignment merge_clusters(const ClusterAssignment& assignment,
                                 std::span<const std::pair<std::size_t, std::size_t>> merge_pairs);

/// Overlay data measured around a cluster (200 m buffer in the source study).
struct ClusterContext {
    Morphology morphology = Morphology::Plaza;
    std::array<double, 8> land_use{};
    double bus_stop_count = 0.0;
    std::array<double, 3> flood_zone{};
    /// Footprint in m^2; the members' convex-hull area when absent.
    std::optional<double> total_area;
};

struct ClusterProfile {
    ClusterFeatures features;  // poi_counts_reduced filled by featurize_clusters
    std::map<std::string, double> naics_counts;
    Point centroid;
};

/// Shannon entropy (nats) of a histogram.
double shannon_diversity(const std::map<std::string, double>& counts);

/// Area of the convex hull of the points (0 for fewer than three).
double convex_hull_area(std::span<const Point> points);

ClusterProfile featurize_cluster(std::span<const Poi> members, const ClusterContext& context);

struct ClusterCatalog {
    ClusterAssignment assignment;
    std::vector<ClusterProfile> profiles;
    std::vector<std::string> naics_codes;  // PCA input column order
    std::optional<PcaBasis> pca;
};

/// Featurizes every cluster and reduces the per-code POI counts with PCA
/// (skipped when there are fewer than two clusters). `contexts` may be
/// empty, meaning default overlays for all clusters.
ClusterCatalog featurize_clusters(std::span<const Poi> pois, const ClusterAssignment& assignment,
                                  std::span<const ClusterContext> contexts, double target_variance);

}  // namespace simgat
