#include <algorithm>
#include <cmath>

#include "simgat/clustering.hpp"

namespace simgat {

double shannon_diversity(const std::map<std::string, double>& counts) {
    double total = 0.0;
    for (const auto& [code, c] : counts) total += c;
    if (total <= 0.0) return 0.0;
    double h = 0.0;
    for (const auto& [code, c] : counts) {
        if (c <= 0.0) continue;
        const double p = c / total;
        h -= p * std::log(p);
    }
    return std::max(h, 0.0);
}

double convex_hull_area(std::span<const Point> points) {
    if (points.size() < 3) return 0.0;
    std::vector<Point> pts(points.begin(), points.end());
    std::sort(pts.begin(), pts.end(), [](const Point& a, const Point& b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
    auto cross = [](const Point& o, const Point& a, const Point& b) {
        return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
    };
    // Andrew's monotone chain.
    std::vector<Point> hull(2 * pts.size());
    std::size_t k = 0;
    for (const Point& p : pts) {
        while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
        hull[k++] = p;
    }
    for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
        while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
        hull[k++] = pts[i];
    }
    hull.resize(k > 0 ? k - 1 : 0);
    double area = 0.0;
    for (std::size_t i = 0; i < hull.size(); ++i) {
        const Point& a = hull[i];
        const Point& b = hull[(i + 1) % hull.size()];
        area += a.x * b.y - b.x * a.y;
    }
    return std::fabs(area) / 2.0;
}

ClusterProfile featurize_cluster(std::span<const Poi> members, const ClusterContext& context) {
    if (members.empty()) throw ValidationError("featurize_cluster: cluster has no members");
    ClusterProfile out;
    std::size_t chains = 0;
    std::vector<Point> pts;
    pts.reserve(members.size());
    for (const Poi& p : members) {
        out.naics_counts[p.naics] += 1.0;
        chains += p.is_chain ? 1 : 0;
        pts.push_back({p.x, p.y});
        out.centroid.x += p.x;
        out.centroid.y += p.y;
    }
    const double count = static_cast<double>(members.size());
    out.centroid.x /= count;
    out.centroid.y /= count;

    ClusterFeatures& f = out.features;
    f.morphology = context.morphology;
    f.poi_diversity = shannon_diversity(out.naics_counts);
    f.chain_ratio = static_cast<double>(chains) / count;
    f.land_use = context.land_use;
    f.bus_stop_count = context.bus_stop_count;
    f.flood_zone = context.flood_zone;
    f.business_count = count;
    f.total_area = context.total_area ? *context.total_area : convex_hull_area(pts);
    return out;
}

ClusterCatalog featurize_clusters(std::span<const Poi> pois, const ClusterAssignment& assignment,
                                  std::span<const ClusterContext> contexts, double target_variance) {
    if (assignment.labels.size() != pois.size())
        throw ValidationError("featurize_clusters: assignment covers " + std::to_string(assignment.labels.size()) +
                              " points, got " + std::to_string(pois.size()) + " POIs");
    if (!contexts.empty() && contexts.size() != assignment.n_clusters())
        throw ValidationError("featurize_clusters: " + std::to_string(contexts.size()) + " contexts for " +
                              std::to_string(assignment.n_clusters()) + " clusters");

    ClusterCatalog cat;
    cat.assignment = assignment;
    const ClusterContext fallback;
    std::map<std::string, std::size_t> code_index;
    for (std::size_t c = 0; c < assignment.n_clusters(); ++c) {
        std::vector<Poi> members;
        for (std::size_t i : assignment.members[c]) members.push_back(pois[i]);
        cat.profiles.push_back(featurize_cluster(members, contexts.empty() ? fallback : contexts[c]));
        for (const auto& [code, n] : cat.profiles.back().naics_counts) code_index.emplace(code, 0);
    }
    for (auto& [code, idx] : code_index) {
        idx = cat.naics_codes.size();
        cat.naics_codes.push_back(code);
    }
    if (assignment.n_clusters() < 2 || cat.naics_codes.empty()) return cat;

    Matrix counts(assignment.n_clusters(), cat.naics_codes.size());
    for (std::size_t c = 0; c < assignment.n_clusters(); ++c)
        for (const auto& [code, n] : cat.profiles[c].naics_counts) counts(c, code_index.at(code)) = n;
    auto pca = pca_reduce(counts, target_variance);
    for (std::size_t c = 0; c < assignment.n_clusters(); ++c) cat.profiles[c].features.poi_counts_reduced = pca.reduced.row(c);
    cat.pca = std::move(pca.basis);
    return cat;
}

}  // namespace simgat
