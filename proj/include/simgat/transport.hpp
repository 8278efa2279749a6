#pragma once

// Multi-modal road networks and travel-time cost matrices.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "simgat/common.hpp"
#include "simgat/domain.hpp"

namespace simgat {

enum class Mode : std::uint8_t { Drive = 1, Walk = 2, Transit = 4 };

/// Bit set of Mode values.
using ModeSet = std::uint8_t;

inline constexpr ModeSet mode_bit(Mode m) { return static_cast<ModeSet>(m); }
inline constexpr bool has_mode(ModeSet set, Mode m) { return (set & mode_bit(m)) != 0; }

const char* mode_name(Mode m);
Mode parse_mode(std::string_view name);
/// "drive|walk" style, in Drive, Walk, Transit order.
std::string format_modes(ModeSet set);
ModeSet parse_modes(std::string_view pipe_separated);

inline constexpr double kWalkSpeedKmh = 5.0;
inline constexpr double kDefaultRoadSpeedKmh = 50.0;

struct Edge {
    std::int64_t from = 0;
    std::int64_t to = 0;
    double length_m = 0.0;
    std::optional<double> speed_kmh;  // applies to drive and transit
    ModeSet modes = 0;
    bool directed = false;

    bool operator==(const Edge&) const = default;
};

class RoadNetwork {
public:
    /// Adds or overwrites a node.
    void add_node(std::int64_t id, Point xy) { nodes_[id] = xy; }
    void add_edge(Edge e) { edges_.push_back(e); }

    const std::map<std::int64_t, Point>& nodes() const noexcept { return nodes_; }
    const std::vector<Edge>& edges() const noexcept { return edges_; }
    bool has_node(std::int64_t id) const { return nodes_.count(id) != 0; }

    /// Endpoint existence, positive finite lengths and speeds, nonempty modes.
    std::vector<std::string> issues() const;
    void validate() const;

    bool operator==(const RoadNetwork&) const = default;

private:
    std::map<std::int64_t, Point> nodes_;
    std::vector<Edge> edges_;
};

/// Union of the layers. Shared node ids must agree within 1 m. Where several
/// edges connect the same endpoints with the same mode and directedness, only
/// the fastest keeps that mode; edges left without modes are dropped. Edge
/// order and orientation follow first appearance.
RoadNetwork compose_networks(std::span<const RoadNetwork> layers);

/// Traversal time in minutes. Walking is fixed at 5 km/h; drive and transit
/// use the edge speed or 50 km/h. Throws when `mode` is not on the edge.
double edge_time(const Edge& edge, Mode mode);

enum class ModePolicy { DriveOnly, WalkTransit };

const char* policy_name(ModePolicy p);
ModePolicy parse_policy(std::string_view name);

struct RoutingOptions {
    /// Minutes added each time a traveler steps onto a transit edge from foot.
    double boarding_penalty = 0.0;
};

/// Exact shortest travel time between two nodes. Throws ValidationError when
/// a node is missing or no admissible path exists.
double shortest_time(const RoadNetwork& network, std::int64_t source, std::int64_t target, ModePolicy policy,
                     const RoutingOptions& options = {});

/// Nearest node with at least one edge usable under `policy`; ties go to the
/// lowest id.
std::int64_t snap_to_node(const RoadNetwork& network, Point p, ModePolicy policy);

struct CostOptions {
    std::vector<ModePolicy> policies{ModePolicy::DriveOnly, ModePolicy::WalkTransit};
    RoutingOptions routing;
    double cost_floor = kCostFloor;
    std::size_t threads = 0;  // 0: default_threads()
};

struct CostMatrixSet {
    std::vector<CostLayer> layers;  // one per policy, neighborhoods x clusters
    double cost_floor = kCostFloor;
    std::vector<std::int64_t> neighborhood_nodes;  // snapped, first policy
    std::vector<std::int64_t> cluster_nodes;

    std::vector<std::string> modes() const;
};

/// Travel time from each neighborhood to each cluster under every policy,
/// floored at cost_floor. Runs Dijkstra from whichever side is smaller.
/// Throws ValidationError listing every unreachable pair.
CostMatrixSet build_cost_matrices(const RoadNetwork& network, std::span<const Point> neighborhood_centroids,
                                  std::span<const Point> cluster_centroids, const CostOptions& options = {});

}  // namespace simgat
