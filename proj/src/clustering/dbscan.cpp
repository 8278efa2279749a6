#include <cmath>
#include <cstdint>
#include <deque>
#include <numeric>
#include <unordered_map>

#include "simgat/clustering.hpp"

namespace simgat {

namespace {

/// Uniform grid with cell size eps; a query scans the 3x3 block around a point.
class GridIndex {
public:
    GridIndex(std::span<const Point> points, double eps) : points_(points), eps_(eps), eps2_(eps * eps) {
        for (std::size_t i = 0; i < points.size(); ++i) cells_[key(cell(points[i].x), cell(points[i].y))].push_back(i);
    }

    /// Indices within eps of point i (including i), ascending.
    std::vector<std::size_t> neighbors(std::size_t i) const {
        std::vector<std::size_t> out;
        const Point& p = points_[i];
        const std::int64_t cx = cell(p.x), cy = cell(p.y);
        for (std::int64_t dx = -1; dx <= 1; ++dx) {
            for (std::int64_t dy = -1; dy <= 1; ++dy) {
                auto it = cells_.find(key(cx + dx, cy + dy));
                if (it == cells_.end()) continue;
                for (std::size_t j : it->second) {
                    const double ddx = points_[j].x - p.x, ddy = points_[j].y - p.y;
                    if (ddx * ddx + ddy * ddy <= eps2_) out.push_back(j);
                }
            }
        }
        std::sort(out.begin(), out.end());
        return out;
    }

private:
    std::int64_t cell(double v) const { return static_cast<std::int64_t>(std::floor(v / eps_)); }
    static std::uint64_t key(std::int64_t cx, std::int64_t cy) {
        return (static_cast<std::uint64_t>(cx) << 32) ^ (static_cast<std::uint64_t>(cy) & 0xffffffffULL);
    }

    std::span<const Point> points_;
    double eps_;
    double eps2_;
    std::unordered_map<std::uint64_t, std::vector<std::size_t>> cells_;
};

}  // namespace

std::vector<std::size_t> ClusterAssignment::noise() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] == kNoise) out.push_back(i);
    return out;
}

ClusterAssignment dbscan(std::span<const Point> points, const DbscanParams& params) {
    if (!(params.eps > 0.0)) throw ValidationError("dbscan: eps must be positive");
    if (params.min_pts < 1) throw ValidationError("dbscan: min_pts must be at least 1");
    for (const Point& p : points)
        if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw ValidationError("dbscan: non-finite coordinate");

    ClusterAssignment out;
    const std::size_t n = points.size();
    out.labels.assign(n, kNoise);
    if (n == 0) return out;

    const GridIndex grid(points, params.eps);
    std::vector<std::vector<std::size_t>> nbrs(n);
    std::vector<bool> core(n);
    for (std::size_t i = 0; i < n; ++i) {
        nbrs[i] = grid.neighbors(i);
        core[i] = nbrs[i].size() >= params.min_pts;
    }

    int next = 0;
    for (std::size_t seed = 0; seed < n; ++seed) {
        if (!core[seed] || out.labels[seed] != kNoise) continue;
        const int id = next++;
        out.labels[seed] = id;
        std::deque<std::size_t> frontier{seed};
        while (!frontier.empty()) {
            const std::size_t p = frontier.front();
            frontier.pop_front();
            for (std::size_t q : nbrs[p]) {
                if (core[q] && out.labels[q] == kNoise) {
                    out.labels[q] = id;
                    frontier.push_back(q);
                }
            }
        }
    }
    // Border points: neighbor lists are ascending, so the first core found is
    // the lowest-index one.
    for (std::size_t i = 0; i < n; ++i) {
        if (core[i]) continue;
        for (std::size_t q : nbrs[i]) {
            if (core[q]) {
                out.labels[i] = out.labels[q];
                break;
            }
        }
    }
    out.members.resize(static_cast<std::size_t>(next));
    for (std::size_t i = 0; i < n; ++i)
        if (out.labels[i] != kNoise) out.members[static_cast<std::size_t>(out.labels[i])].push_back(i);
    return out;
}

ClusterAssignment merge_clusters(const ClusterAssignment& assignment,
                                 std::span<const std::pair<std::size_t, std::size_t>> merge_pairs) {
    const std::size_t k = assignment.n_clusters();
    IssueList issues;
    for (const auto& [a, b] : merge_pairs) {
        if (a >= k || b >= k)
            issues.add("merge (" + std::to_string(a) + "," + std::to_string(b) + ") names an unknown cluster id");
    }
    issues.throw_if_any();

    std::vector<std::size_t> parent(k);
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    auto find = [&](std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (const auto& [a, b] : merge_pairs) {
        const std::size_t ra = find(a), rb = find(b);
        // Keep the smaller id as root so roots are group minima.
        if (ra < rb) parent[rb] = ra;
        else if (rb < ra) parent[ra] = rb;
    }

    std::vector<int> renumber(k, -1);
    ClusterAssignment out;
    for (std::size_t c = 0; c < k; ++c) {
        const std::size_t root = find(c);
        if (renumber[root] < 0) {
            renumber[root] = static_cast<int>(out.members.size());
            out.members.emplace_back();
        }
        auto& dst = out.members[static_cast<std::size_t>(renumber[root])];
        dst.insert(dst.end(), assignment.members[c].begin(), assignment.members[c].end());
    }
    out.labels = assignment.labels;
    for (int& l : out.labels)
        if (l != kNoise) l = renumber[find(static_cast<std::size_t>(l))];
    return out;
}

}  // namespace simgat
