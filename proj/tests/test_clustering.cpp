#include <doctest.h>

#include <cmath>
#include <numeric>

#include "dbscan_oracle.hpp"
#include "simgat/clustering.hpp"
#include "simgat/rng.hpp"

using namespace simgat;

namespace {

std::vector<Point> uniform_points(Rng& rng, std::size_t n, double side) {
    std::vector<Point> pts(n);
    for (auto& p : pts) p = {rng.uniform(0, side), rng.uniform(0, side)};
    return pts;
}

}  // namespace

TEST_CASE("dbscan on empty input") {
    auto a = dbscan({}, {200.0, 5});
    CHECK(a.n_clusters() == 0);
    CHECK(a.labels.empty());
}

TEST_CASE("five points within 200 m form one cluster at eps=200, minPts=5") {
    const std::vector<Point> pts = {{0, 0}, {50, 20}, {-40, 60}, {30, -70}, {80, 80}};
    auto a = dbscan(pts, {200.0, 5});
    CHECK(a.n_clusters() == 1);
    CHECK(a.noise().empty());
}

TEST_CASE("dbscan rejects invalid params") {
    const std::vector<Point> pts = {{0, 0}};
    CHECK_THROWS_AS(dbscan(pts, {0.0, 5}), ValidationError);
    CHECK_THROWS_AS(dbscan(pts, {10.0, 0}), ValidationError);
}

TEST_CASE("dbscan equals brute force on 100 uniform points in 5 km^2") {
    Rng rng(2024);
    auto pts = uniform_points(rng, 100, std::sqrt(5e6));
    auto a = dbscan(pts, {200.0, 5});
    CHECK(testing::same_partition(a.labels, testing::brute_force_dbscan(pts, 200.0, 5)));
}

TEST_CASE("dbscan equals brute force on 100 random instances") {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        Rng rng(seed);
        const std::size_t n = 20 + rng.below(281);
        // Mixture of blobs and background so clusters, borders and noise all occur.
        std::vector<Point> pts;
        const std::size_t blobs = 1 + rng.below(6);
        std::vector<Point> centers = uniform_points(rng, blobs, 3000.0);
        for (std::size_t i = 0; i < n; ++i) {
            if (rng.uniform() < 0.3) {
                pts.push_back({rng.uniform(0, 3000), rng.uniform(0, 3000)});
            } else {
                const Point& c = centers[rng.below(blobs)];
                pts.push_back({c.x + rng.normal(0, 150), c.y + rng.normal(0, 150)});
            }
        }
        const double eps = rng.uniform(50, 300);
        const std::size_t min_pts = 1 + rng.below(8);
        auto a = dbscan(pts, {eps, min_pts});
        CHECK_MESSAGE(testing::same_partition(a.labels, testing::brute_force_dbscan(pts, eps, min_pts)),
                      "seed " << seed);
        for (std::size_t c = 0; c < a.n_clusters(); ++c) CHECK(a.members[c].size() >= std::min<std::size_t>(min_pts, 1));
    }
}

TEST_CASE("shrinking eps never joins core points that were apart") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(seed + 500);
        auto pts = uniform_points(rng, 250, 2500.0);
        auto wide = dbscan(pts, {220.0, 4});
        auto narrow = dbscan(pts, {150.0, 4});
        // Every narrow cluster's cores sit inside a single wide cluster.
        for (const auto& members : narrow.members) {
            int wide_label = kNoise;
            for (std::size_t i : members) {
                std::size_t count = 0;
                for (const auto& q : pts) count += std::hypot(q.x - pts[i].x, q.y - pts[i].y) <= 150.0;
                if (count < 4) continue;
                if (wide_label == kNoise) wide_label = wide.labels[i];
                CHECK(wide.labels[i] == wide_label);
            }
        }
    }
}

TEST_CASE("merge concatenates member lists") {
    ClusterAssignment a;
    a.labels = {0, 1, 2, 0, kNoise};
    a.members = {{0, 3}, {1}, {2}};
    const std::pair<std::size_t, std::size_t> pairs[] = {{0, 1}};
    auto m = merge_clusters(a, pairs);
    CHECK(m.n_clusters() == 2);
    CHECK(m.members[0] == std::vector<std::size_t>{0, 3, 1});
    CHECK(m.members[1] == std::vector<std::size_t>{2});
    CHECK(m.labels == std::vector<int>{0, 0, 1, 0, kNoise});
}

TEST_CASE("empty merge list is the identity") {
    ClusterAssignment a;
    a.labels = {1, 0, kNoise};
    a.members = {{1}, {0}};
    auto m = merge_clusters(a, {});
    CHECK(m.labels == a.labels);
    CHECK(m.members == a.members);
}

TEST_CASE("chained merges agree with a union-find oracle") {
    ClusterAssignment a;
    a.members = {{0}, {1}, {2}, {3}, {4}};
    a.labels = {0, 1, 2, 3, 4};
    const std::pair<std::size_t, std::size_t> chain[] = {{0, 1}, {1, 2}};
    auto m = merge_clusters(a, chain);
    CHECK(m.n_clusters() == 3);
    CHECK(m.members[0] == std::vector<std::size_t>{0, 1, 2});

    Rng rng(8);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t k = 12;
        ClusterAssignment b;
        for (std::size_t c = 0; c < k; ++c) {
            b.members.push_back({c});
            b.labels.push_back(static_cast<int>(c));
        }
        std::vector<std::pair<std::size_t, std::size_t>> pairs;
        for (int e = 0; e < 6; ++e) pairs.emplace_back(rng.below(k), rng.below(k));
        // Oracle: naive label propagation to the group minimum.
        std::vector<std::size_t> group(k);
        std::iota(group.begin(), group.end(), std::size_t{0});
        for (bool changed = true; changed;) {
            changed = false;
            for (auto [x, y] : pairs) {
                const auto lo = std::min(group[x], group[y]);
                if (group[x] != lo || group[y] != lo) {
                    for (auto& g : group)
                        if (g == group[x] || g == group[y]) g = lo;
                    changed = true;
                }
            }
        }
        auto merged = merge_clusters(b, pairs);
        std::vector<int> expected(k);
        for (std::size_t c = 0; c < k; ++c) expected[c] = static_cast<int>(group[c]);
        CHECK(testing::same_partition(merged.labels, expected));
    }
}

TEST_CASE("merge rejects unknown ids") {
    ClusterAssignment a;
    a.members = {{0}};
    a.labels = {0};
    const std::pair<std::size_t, std::size_t> bad[] = {{0, 3}};
    CHECK_THROWS_AS(merge_clusters(a, bad), ValidationError);
}

namespace {

Poi poi(std::string naics, bool chain = false, double x = 0, double y = 0) {
    static int next = 0;
    return {"p" + std::to_string(next++), x, y, std::move(naics), chain};
}

}  // namespace

TEST_CASE("single NAICS code has zero diversity") {
    std::vector<Poi> m = {poi("722511"), poi("722511"), poi("722511")};
    auto p = featurize_cluster(m, {});
    CHECK(p.features.poi_diversity == 0.0);
    CHECK(p.features.business_count == 3.0);
}

TEST_CASE("four codes evenly split give ln 4") {
    std::vector<Poi> m = {poi("441110", true), poi("452210"), poi("713940"), poi("722511", true)};
    auto p = featurize_cluster(m, {});
    CHECK(p.features.poi_diversity == doctest::Approx(std::log(4.0)).epsilon(1e-14));
    CHECK(p.features.chain_ratio == 0.5);
}

TEST_CASE("diversity of random clusters matches a histogram oracle") {
    Rng rng(30);
    const std::vector<std::string> codes = {"441110", "445110", "452210", "711110", "713940", "721110", "722511"};
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<Poi> m;
        std::vector<double> hist(codes.size(), 0.0);
        for (int i = 0; i < 30; ++i) {
            const auto c = rng.below(codes.size());
            hist[c] += 1.0;
            m.push_back(poi(codes[c], rng.uniform() < 0.3, rng.uniform(0, 100), rng.uniform(0, 100)));
        }
        double h = 0.0;
        for (double c : hist)
            if (c > 0) h -= (c / 30.0) * std::log(c / 30.0);
        auto p = featurize_cluster(m, {});
        CHECK(std::fabs(p.features.poi_diversity - h) < 1e-12);
        CHECK(p.features.poi_diversity <= std::log(static_cast<double>(codes.size())) + 1e-12);
        CHECK(p.features.chain_ratio >= 0.0);
        CHECK(p.features.chain_ratio <= 1.0);
    }
}

TEST_CASE("featurize rejects an empty cluster") {
    CHECK_THROWS_AS(featurize_cluster({}, {}), ValidationError);
}

TEST_CASE("convex hull area of a square") {
    const std::vector<Point> sq = {{0, 0}, {10, 0}, {10, 10}, {0, 10}, {5, 5}};
    CHECK(convex_hull_area(sq) == doctest::Approx(100.0));
}

TEST_CASE("featurize_clusters fills PCA components for every cluster") {
    Rng rng(12);
    std::vector<Poi> pois;
    const std::vector<std::string> codes = {"441110", "445110", "452210", "713940", "722511"};
    for (int blob = 0; blob < 4; ++blob)
        for (int i = 0; i < 12; ++i)
            pois.push_back(poi(codes[rng.below(codes.size())], false, blob * 2000 + rng.normal(0, 40),
                               rng.normal(0, 40)));
    std::vector<Point> pts;
    for (const auto& p : pois) pts.push_back({p.x, p.y});
    auto a = dbscan(pts, {200.0, 5});
    REQUIRE(a.n_clusters() == 4);
    auto cat = featurize_clusters(pois, a, {}, 0.95);
    REQUIRE(cat.pca);
    for (const auto& prof : cat.profiles) {
        CHECK(prof.features.poi_counts_reduced.size() == cat.pca->components.cols);
        CHECK(prof.features.total_area > 0.0);
    }
}
