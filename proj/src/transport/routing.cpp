#include <cmath>
#include <limits>
#include <queue>
#include <unordered_map>

#include "simgat/parallel.hpp"
#include "simgat/transport.hpp"

namespace simgat {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Drive-only routing has one state per node. Walk+transit has two: on foot
// (0) and aboard (1), so a boarding penalty can be charged on 0 -> 1.
class StateGraph {
public:
    StateGraph(const RoadNetwork& net, ModePolicy policy, const RoutingOptions& opt)
        : states_(policy == ModePolicy::DriveOnly ? 1 : 2) {
        ids_.reserve(net.nodes().size());
        for (const auto& [id, p] : net.nodes()) {
            index_.emplace(id, ids_.size());
            ids_.push_back(id);
        }
        fwd_.resize(ids_.size() * states_);
        rev_.resize(ids_.size() * states_);
        usable_.assign(ids_.size(), false);
        for (const Edge& e : net.edges()) {
            const std::size_t u = index_.at(e.from), v = index_.at(e.to);
            auto link = [&](std::size_t a, std::size_t b) {
                if (policy == ModePolicy::DriveOnly) {
                    if (has_mode(e.modes, Mode::Drive)) arc(a, b, edge_time(e, Mode::Drive));
                    return;
                }
                if (has_mode(e.modes, Mode::Walk)) {
                    const double t = edge_time(e, Mode::Walk);
                    arc(state(a, 0), state(b, 0), t, false);
                    arc(state(a, 1), state(b, 0), t, false);
                    usable_[a] = usable_[b] = true;
                }
                if (has_mode(e.modes, Mode::Transit)) {
                    const double t = edge_time(e, Mode::Transit);
                    arc(state(a, 0), state(b, 1), t + opt.boarding_penalty, false);
                    arc(state(a, 1), state(b, 1), t, false);
                    usable_[a] = usable_[b] = true;
                }
            };
            link(u, v);
            if (!e.directed) link(v, u);
        }
    }

    std::size_t node_count() const { return ids_.size(); }
    std::int64_t id(std::size_t i) const { return ids_[i]; }
    bool usable(std::size_t i) const { return usable_[i]; }

    std::size_t index(std::int64_t id) const {
        auto it = index_.find(id);
        if (it == index_.end()) throw ValidationError("unknown node " + std::to_string(id));
        return it->second;
    }

    /// Time from `source` (on foot) to every node, arriving in any state.
    std::vector<double> from(std::size_t source) const {
        auto d = dijkstra(fwd_, {state(source, 0)});
        return collapse(d, [&](std::size_t n) {
            double best = kInf;
            for (std::size_t s = 0; s < states_; ++s) best = std::min(best, d[state(n, s)]);
            return best;
        });
    }

    /// Time from every node (starting on foot) to `target`.
    std::vector<double> to(std::size_t target) const {
        std::vector<std::size_t> seeds;
        for (std::size_t s = 0; s < states_; ++s) seeds.push_back(state(target, s));
        auto d = dijkstra(rev_, seeds);
        return collapse(d, [&](std::size_t n) { return d[state(n, 0)]; });
    }

private:
    using Adjacency = std::vector<std::vector<std::pair<std::size_t, double>>>;

    std::size_t state(std::size_t node, std::size_t s) const { return node * states_ + s; }

    void arc(std::size_t a, std::size_t b, double t, bool mark = true) {
        fwd_[a].emplace_back(b, t);
        rev_[b].emplace_back(a, t);
        if (mark) usable_[a / states_] = usable_[b / states_] = true;
    }

    template <class F>
    std::vector<double> collapse(const std::vector<double>&, F per_node) const {
        std::vector<double> out(ids_.size());
        for (std::size_t n = 0; n < ids_.size(); ++n) out[n] = per_node(n);
        return out;
    }

    static std::vector<double> dijkstra(const Adjacency& adj, const std::vector<std::size_t>& seeds) {
        std::vector<double> dist(adj.size(), kInf);
        using Item = std::pair<double, std::size_t>;
        std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
        for (auto s : seeds) {
            dist[s] = 0.0;
            heap.emplace(0.0, s);
        }
        while (!heap.empty()) {
            auto [d, u] = heap.top();
            heap.pop();
            if (d > dist[u]) continue;
            for (auto [v, w] : adj[u]) {
                if (d + w < dist[v]) {
                    dist[v] = d + w;
                    heap.emplace(dist[v], v);
                }
            }
        }
        return dist;
    }

    std::size_t states_;
    std::vector<std::int64_t> ids_;
    std::unordered_map<std::int64_t, std::size_t> index_;
    Adjacency fwd_, rev_;
    std::vector<bool> usable_;
};

std::size_t snap(const StateGraph& g, const RoadNetwork& net, Point p, ModePolicy policy) {
    // Nodes are in ascending id order, so strict < keeps the lowest id on ties.
    std::size_t best = g.node_count();
    double best_d = kInf;
    std::size_t i = 0;
    for (const auto& [id, q] : net.nodes()) {
        if (g.usable(i)) {
            const double d = (q.x - p.x) * (q.x - p.x) + (q.y - p.y) * (q.y - p.y);
            if (d < best_d) {
                best_d = d;
                best = i;
            }
        }
        ++i;
    }
    if (best == g.node_count())
        throw ValidationError(std::string("no node usable under policy ") + policy_name(policy));
    return best;
}

}  // namespace

double shortest_time(const RoadNetwork& network, std::int64_t source, std::int64_t target, ModePolicy policy,
                     const RoutingOptions& options) {
    network.validate();
    StateGraph g(network, policy, options);
    const auto s = g.index(source), t = g.index(target);
    const double d = g.from(s)[t];
    if (!std::isfinite(d))
        throw ValidationError("no path from node " + std::to_string(source) + " to node " + std::to_string(target) +
                              " under policy " + policy_name(policy));
    return d;
}

std::int64_t snap_to_node(const RoadNetwork& network, Point p, ModePolicy policy) {
    network.validate();
    StateGraph g(network, policy, {});
    return g.id(snap(g, network, p, policy));
}

CostMatrixSet build_cost_matrices(const RoadNetwork& network, std::span<const Point> neighborhoods,
                                  std::span<const Point> clusters, const CostOptions& options) {
    network.validate();
    if (neighborhoods.empty() || clusters.empty()) throw ValidationError("cost matrices need m >= 1 and n >= 1");
    if (options.policies.empty()) throw ValidationError("no mode policy requested");
    if (!(options.routing.boarding_penalty >= 0.0)) throw ValidationError("boarding penalty must be >= 0");

    const std::size_t m = neighborhoods.size(), n = clusters.size();
    const std::size_t threads = options.threads == 0 ? default_threads() : options.threads;
    CostMatrixSet out;
    out.cost_floor = options.cost_floor;
    IssueList issues;

    for (std::size_t p = 0; p < options.policies.size(); ++p) {
        const ModePolicy policy = options.policies[p];
        StateGraph g(network, policy, options.routing);
        std::vector<std::size_t> src(m), dst(n);
        for (std::size_t i = 0; i < m; ++i) src[i] = snap(g, network, neighborhoods[i], policy);
        for (std::size_t j = 0; j < n; ++j) dst[j] = snap(g, network, clusters[j], policy);
        if (p == 0) {
            for (auto i : src) out.neighborhood_nodes.push_back(g.id(i));
            for (auto j : dst) out.cluster_nodes.push_back(g.id(j));
        }

        Matrix minutes(m, n);
        if (m <= n) {
            parallel_for(m, [&](std::size_t i) {
                const auto d = g.from(src[i]);
                for (std::size_t j = 0; j < n; ++j) minutes(i, j) = d[dst[j]];
            }, threads);
        } else {
            parallel_for(n, [&](std::size_t j) {
                const auto d = g.to(dst[j]);
                for (std::size_t i = 0; i < m; ++i) minutes(i, j) = d[src[i]];
            }, threads);
        }
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                double& c = minutes(i, j);
                if (!std::isfinite(c)) {
                    issues.add(std::string("no path under ") + policy_name(policy) + " from neighborhood " +
                               std::to_string(i) + " (node " + std::to_string(g.id(src[i])) + ") to cluster " +
                               std::to_string(j) + " (node " + std::to_string(g.id(dst[j])) + ")");
                    continue;
                }
                c = std::max(c, options.cost_floor);
            }
        out.layers.push_back({policy_name(policy), std::move(minutes)});
    }
    issues.throw_if_any();
    return out;
}

}  // namespace simgat
