#include <cmath>
#include <tuple>

#include "simgat/transport.hpp"

namespace simgat {

namespace {

constexpr Mode kModes[] = {Mode::Drive, Mode::Walk, Mode::Transit};

}  // namespace

const char* mode_name(Mode m) {
    switch (m) {
        case Mode::Drive: return "drive";
        case Mode::Walk: return "walk";
        case Mode::Transit: return "transit";
    }
    return "?";
}

Mode parse_mode(std::string_view name) {
    for (Mode m : kModes)
        if (name == mode_name(m)) return m;
    throw ValidationError("unknown mode '" + std::string(name) + "'");
}

std::string format_modes(ModeSet set) {
    std::string out;
    for (Mode m : kModes) {
        if (!has_mode(set, m)) continue;
        if (!out.empty()) out += '|';
        out += mode_name(m);
    }
    return out;
}

ModeSet parse_modes(std::string_view text) {
    ModeSet set = 0;
    while (!text.empty()) {
        const auto bar = text.find('|');
        set |= mode_bit(parse_mode(text.substr(0, bar)));
        if (bar == std::string_view::npos) break;
        text.remove_prefix(bar + 1);
    }
    if (set == 0) throw ValidationError("empty mode list");
    return set;
}

std::vector<std::string> RoadNetwork::issues() const {
    std::vector<std::string> out;
    for (const auto& [id, p] : nodes_)
        if (!std::isfinite(p.x) || !std::isfinite(p.y))
            out.push_back("node " + std::to_string(id) + ": non-finite coordinates");
    for (std::size_t i = 0; i < edges_.size(); ++i) {
        const Edge& e = edges_[i];
        const std::string where = "edge " + std::to_string(i) + " (" + std::to_string(e.from) + "->" +
                                  std::to_string(e.to) + ")";
        if (!has_node(e.from)) out.push_back(where + ": unknown node " + std::to_string(e.from));
        if (!has_node(e.to)) out.push_back(where + ": unknown node " + std::to_string(e.to));
        if (!(e.length_m > 0.0) || !std::isfinite(e.length_m))
            out.push_back(where + ": length must be positive, got " + format_double(e.length_m));
        if (e.speed_kmh && (!(*e.speed_kmh > 0.0) || !std::isfinite(*e.speed_kmh)))
            out.push_back(where + ": speed must be positive, got " + format_double(*e.speed_kmh));
        if (e.modes == 0 || (e.modes & ~ModeSet{7}) != 0) out.push_back(where + ": invalid mode set");
    }
    return out;
}

void RoadNetwork::validate() const {
    auto found = issues();
    if (!found.empty()) throw ValidationError(std::move(found));
}

double edge_time(const Edge& edge, Mode mode) {
    if (!has_mode(edge.modes, mode))
        throw ValidationError(std::string("mode ") + mode_name(mode) + " not allowed on edge " +
                              std::to_string(edge.from) + "->" + std::to_string(edge.to));
    const double kmh = mode == Mode::Walk ? kWalkSpeedKmh : edge.speed_kmh.value_or(kDefaultRoadSpeedKmh);
    return edge.length_m / (kmh * 1000.0 / 60.0);
}

RoadNetwork compose_networks(std::span<const RoadNetwork> layers) {
    RoadNetwork out;
    IssueList issues;
    for (const auto& layer : layers) {
        for (const auto& [id, p] : layer.nodes()) {
            auto it = out.nodes().find(id);
            if (it == out.nodes().end()) {
                out.add_node(id, p);
            } else if (std::hypot(it->second.x - p.x, it->second.y - p.y) > 1.0) {
                issues.add("node " + std::to_string(id) + ": conflicting coordinates across layers");
            }
        }
    }
    issues.throw_if_any();

    std::vector<Edge> all;
    for (const auto& layer : layers) all.insert(all.end(), layer.edges().begin(), layer.edges().end());

    // Winner per (endpoints, directedness, mode); strict comparison keeps the
    // earliest edge on ties.
    using Key = std::tuple<std::int64_t, std::int64_t, bool, ModeSet>;
    std::map<Key, std::pair<std::size_t, double>> best;
    for (std::size_t i = 0; i < all.size(); ++i) {
        const Edge& e = all[i];
        const auto a = e.directed ? e.from : std::min(e.from, e.to);
        const auto b = e.directed ? e.to : std::max(e.from, e.to);
        for (Mode m : kModes) {
            if (!has_mode(e.modes, m)) continue;
            const double t = edge_time(e, m);
            auto [it, inserted] = best.try_emplace(Key{a, b, e.directed, mode_bit(m)}, i, t);
            if (!inserted && t < it->second.second) it->second = {i, t};
        }
    }
    std::vector<ModeSet> kept(all.size(), 0);
    for (const auto& [key, winner] : best) kept[winner.first] |= std::get<3>(key);
    for (std::size_t i = 0; i < all.size(); ++i) {
        if (kept[i] == 0) continue;
        Edge e = all[i];
        e.modes = kept[i];
        out.add_edge(e);
    }
    return out;
}

const char* policy_name(ModePolicy p) {
    return p == ModePolicy::DriveOnly ? "drive" : "walk_transit";
}

ModePolicy parse_policy(std::string_view name) {
    if (name == "drive") return ModePolicy::DriveOnly;
    if (name == "walk_transit") return ModePolicy::WalkTransit;
    throw ValidationError("unknown mode policy '" + std::string(name) + "'");
}

std::vector<std::string> CostMatrixSet::modes() const {
    std::vector<std::string> out;
    for (const auto& l : layers) out.push_back(l.mode);
    return out;
}

}  // namespace simgat
