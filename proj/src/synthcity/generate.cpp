#include <algorithm>
#include <cmath>

#include "simgat/rng.hpp"
#include "simgat/synthcity.hpp"

namespace simgat {

namespace {

std::optional<std::size_t> find_column(const std::vector<std::string>& cols, const std::string& name) {
    auto it = std::find(cols.begin(), cols.end(), name);
    if (it == cols.end()) return std::nullopt;
    return static_cast<std::size_t>(it - cols.begin());
}

bool is_flag_column(const std::string& c) {
    return c.rfind("hazard_", 0) == 0 || c == "stay_at_home" || c == "holiday";
}

std::vector<double> zscores(const std::vector<double>& v) {
    const double n = static_cast<double>(v.size());
    double mean = 0.0, var = 0.0;
    for (double x : v) mean += x / n;
    for (double x : v) var += (x - mean) * (x - mean) / n;
    const double sd = var > 0.0 ? std::sqrt(var) : 1.0;
    std::vector<double> z(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) z[i] = (v[i] - mean) / sd;
    return z;
}

template <std::size_t N>
std::array<double, N> shares(Rng& rng) {
    std::array<double, N> out{};
    double total = 0.0;
    for (double& v : out) total += v = rng.uniform(0.05, 1.0);
    for (double& v : out) v /= total;
    return out;
}

std::array<double, 3> flood_shares(Rng& rng) {
    const double x = rng.uniform(0.6, 1.0);
    const double a = (1.0 - x) * rng.uniform();
    return {x, a, 1.0 - x - a};
}

Point random_point(Rng& rng, double size) { return {rng.uniform(0.05, 0.95) * size, rng.uniform(0.05, 0.95) * size}; }

RoadNetwork make_network(Rng& rng, const ScenarioSpec& spec) {
    const std::size_t side = spec.grid_side;
    const double spacing = spec.city_size_m / static_cast<double>(side - 1);
    RoadNetwork road, transit;
    auto id = [&](std::size_t r, std::size_t c) { return static_cast<std::int64_t>(r * side + c); };
    for (std::size_t r = 0; r < side; ++r)
        for (std::size_t c = 0; c < side; ++c) {
            const Point p{static_cast<double>(c) * spacing + rng.uniform(-0.2, 0.2) * spacing,
                          static_cast<double>(r) * spacing + rng.uniform(-0.2, 0.2) * spacing};
            road.add_node(id(r, c), p);
            transit.add_node(id(r, c), p);
        }
    const double speeds[] = {30.0, 40.0, 55.0};
    auto link = [&](std::int64_t a, std::int64_t b, bool corridor) {
        const Point pa = road.nodes().at(a), pb = road.nodes().at(b);
        const double straight = std::hypot(pa.x - pb.x, pa.y - pb.y);
        Edge e{a, b, straight * rng.uniform(1.0, 1.2), std::nullopt, mode_bit(Mode::Drive) | mode_bit(Mode::Walk), false};
        if (rng.uniform() < 0.3) e.speed_kmh = speeds[rng.below(3)];
        road.add_edge(e);
        if (corridor) transit.add_edge({a, b, straight, 25.0, mode_bit(Mode::Transit), false});
    };
    for (std::size_t r = 0; r < side; ++r)
        for (std::size_t c = 0; c < side; ++c) {
            if (c + 1 < side) link(id(r, c), id(r, c + 1), r % 3 == 1);
            if (r + 1 < side) link(id(r, c), id(r + 1, c), c % 3 == 1);
        }
    const RoadNetwork layers[] = {road, transit};
    return compose_networks(layers);
}

}  // namespace

ScenarioSpec ScenarioSpec::defaults() {
    ScenarioSpec s;
    s.env_effects = {{"hazard_storm", -1.0}, {"hazard_coastal_flood", -0.4}, {"stay_at_home", -0.8},
                     {"holiday", 0.3},       {"precip_intensity", -0.5},     {"temp_avg", -0.03}};
    for (std::size_t d : {18u, 19u, 20u}) s.calendar.push_back({d, "hazard_storm"});
    s.calendar.push_back({19, "hazard_coastal_flood"});
    s.calendar.push_back({30, "holiday"});
    for (std::size_t d = 38; d <= 52; ++d) s.calendar.push_back({d, "stay_at_home"});
    s.mode_mix = {{"drive", 0.7}, {"walk_transit", 0.3}};
    return s;
}

ScenarioSpec ScenarioSpec::desk(std::uint64_t seed) {
    auto s = defaults();
    s.seed = seed;
    s.n_clusters = 4;
    s.n_neighborhoods = 6;
    s.days = 14;
    s.grid_side = 6;
    s.calendar = {{5, "hazard_storm"}, {9, "stay_at_home"}, {10, "stay_at_home"}};
    return s;
}

void ScenarioSpec::validate() const {
    IssueList issues;
    if (n_clusters < 1) issues.add("n_clusters must be >= 1");
    if (n_neighborhoods < 1) issues.add("n_neighborhoods must be >= 1");
    if (days < min_days) issues.add("days must be >= " + std::to_string(min_days));
    if (!(gravity.k > 0.0) || !std::isfinite(gravity.k) || !std::isfinite(gravity.alpha) ||
        !std::isfinite(gravity.beta) || !std::isfinite(gravity.gamma))
        issues.add("gravity parameters must be finite with k > 0");
    if (grid_side < 2) issues.add("grid_side must be >= 2");
    if (!(city_size_m > 0.0)) issues.add("city_size_m must be > 0");
    const auto& env = env_columns();
    for (const auto& [col, coef] : env_effects) {
        if (!find_column(env, col) || col == "total_visits_prev")
            issues.add("env effect on unknown or unsupported column '" + col + "'");
        if (!std::isfinite(coef)) issues.add("env effect '" + col + "' is not finite");
    }
    for (const auto& ev : calendar) {
        if (!is_flag_column(ev.column)) issues.add("calendar column '" + ev.column + "' is not a flag");
        if (ev.day >= days) issues.add("calendar day " + std::to_string(ev.day) + " beyond scenario");
    }
    double mix = 0.0;
    for (const auto& [mode, share] : mode_mix) {
        if (mode != "drive" && mode != "walk_transit") issues.add("unknown mode '" + mode + "' in mode_mix");
        if (!(share >= 0.0)) issues.add("mode share for '" + mode + "' must be >= 0");
        mix += share;
    }
    if (!(mix > 0.0)) issues.add("mode_mix must have a positive share");
    const auto ccols = cluster_feature_columns(poi_components);
    for (const auto& e : cluster_effects)
        if (!find_column(ccols, e.cluster_column)) issues.add("unknown cluster column '" + e.cluster_column + "'");
    for (const auto& e : interactions) {
        if (!find_column(ccols, e.cluster_column)) issues.add("unknown cluster column '" + e.cluster_column + "'");
        if (!find_column(neighborhood_feature_columns(), e.neighborhood_column))
            issues.add("unknown neighborhood column '" + e.neighborhood_column + "'");
    }
    issues.throw_if_any();
}

SyntheticCity generate(const ScenarioSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    const std::size_t n = spec.n_clusters, m = spec.n_neighborhoods;
    SyntheticCity out;
    CityInputs& in = out.inputs;

    for (std::size_t i = 0; i < n; ++i) {
        in.cluster_ids.push_back("c" + std::to_string(i));
        in.cluster_xy.push_back(random_point(rng, spec.city_size_m));
        ClusterFeatures f;
        f.morphology = static_cast<Morphology>(rng.below(4));
        for (std::size_t p = 0; p < spec.poi_components; ++p) f.poi_counts_reduced.push_back(rng.normal());
        f.poi_diversity = rng.uniform(0.5, 2.5);
        f.chain_ratio = rng.uniform(0.0, 0.6);
        f.land_use = shares<8>(rng);
        f.bus_stop_count = static_cast<double>(rng.poisson(3.0));
        f.flood_zone = flood_shares(rng);
        f.business_count = std::max(3.0, std::round(rng.lognormal(std::log(25.0), 0.6)));
        f.total_area = rng.lognormal(std::log(20000.0), 0.5);
        in.clusters.push_back(f);
    }
    for (std::size_t j = 0; j < m; ++j) {
        in.neighborhood_ids.push_back("n" + std::to_string(j));
        in.neighborhood_xy.push_back(random_point(rng, spec.city_size_m));
        NeighborhoodFeatures f;
        f.census = {rng.normal(40.0, 6.0),      rng.uniform(0.5, 0.98), rng.uniform(0.05, 0.4),
                    rng.uniform(0.1, 0.6),      rng.uniform(0.45, 0.7), std::round(rng.lognormal(std::log(3000.0), 0.5)),
                    rng.uniform(0.1, 0.9)};
        f.land_use = shares<8>(rng);
        f.accessibility = {rng.uniform(20.0, 150.0), rng.uniform(5.0, 25.0), rng.uniform(1.0, 20.0)};
        f.flood_zone = flood_shares(rng);
        in.neighborhoods.push_back(f);
    }

    out.network = make_network(rng, spec);
    const CostMatrixSet costs = build_cost_matrices(out.network, in.neighborhood_xy, in.cluster_xy);
    in.costs = costs.layers;

    // Static log-rate per (cluster, neighborhood).
    Matrix base(n, m);
    {
        std::vector<Matrix> mixed;
        Matrix cost(m, n);
        for (const auto& layer : in.costs) {
            const auto it = spec.mode_mix.find(layer.mode);
            const double share = it == spec.mode_mix.end() ? 0.0 : it->second;
            for (std::size_t k = 0; k < cost.data.size(); ++k) cost.data[k] += share * layer.minutes.data[k];
        }
        double total_share = 0.0;
        for (const auto& [mode, share] : spec.mode_mix) total_share += share;
        const auto ccols = cluster_feature_columns(spec.poi_components);
        const auto& ncols = neighborhood_feature_columns();
        auto cluster_z = [&](const std::string& name) {
            const auto c = *find_column(ccols, name);
            std::vector<double> v;
            for (const auto& f : in.clusters) v.push_back(to_row(f)[c]);
            return zscores(v);
        };
        auto neighborhood_z = [&](const std::string& name) {
            const auto c = *find_column(ncols, name);
            std::vector<double> v;
            for (const auto& f : in.neighborhoods) v.push_back(to_row(f)[c]);
            return zscores(v);
        };
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < m; ++j) {
                const double c = std::max(cost(j, i) / total_share, kCostFloor);
                base(i, j) = std::log(gravity_flow(spec.gravity, in.neighborhoods[j].census[5],
                                                   in.clusters[i].business_count, c));
            }
        for (const auto& e : spec.cluster_effects) {
            const auto z = cluster_z(e.cluster_column);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < m; ++j) base(i, j) += e.coefficient * z[i];
        }
        for (const auto& e : spec.interactions) {
            const auto zu = cluster_z(e.cluster_column);
            const auto zv = neighborhood_z(e.neighborhood_column);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < m; ++j) base(i, j) += e.coefficient * zu[i] * std::max(0.0, -zv[j]);
        }
    }

    // Environment: day 0 is a burn-in day that only seeds the visit lag.
    const std::size_t total_days = spec.days + 1;
    std::vector<EnvRecord> env(total_days);
    std::vector<bool> rainy(total_days);
    for (std::size_t d = 0; d < total_days; ++d) {
        EnvRecord& r = env[d];
        r.date = spec.start + (static_cast<int>(d) - 1);
        rainy[d] = rng.uniform() < 0.3;
        const double t = static_cast<double>(d);
        r.weather[0] = 82.0 + 4.0 * std::sin(2.0 * 3.141592653589793 * t / 30.0) + rng.normal(0.0, 1.5);
        r.weather[1] = std::fabs(rng.normal(8.0, 2.5));
        r.weather[2] = r.weather[1] * 1.6 + std::fabs(rng.normal(0.0, 2.0));
        r.weather[4] = rainy[d] ? rng.lognormal(std::log(0.4), 0.6) : 0.0;
    }
    for (const auto& ev : spec.calendar) {
        EnvRecord& r = env[ev.day + 1];
        const auto& cols = env_columns();
        const auto c = *find_column(cols, ev.column);
        if (c >= 5 && c < 9) r.hazard[c - 5] = true;
        if (ev.column == "stay_at_home") r.stay_at_home = true;
        if (ev.column == "holiday") r.holiday = true;
        if (ev.column == "hazard_storm") {
            r.weather[1] += 25.0;
            r.weather[2] += 40.0;
            rainy[ev.day + 1] = true;
            r.weather[4] = std::max(r.weather[4], 2.0);
        }
    }
    for (std::size_t d = 0; d < total_days; ++d) {
        int recent = 0;
        for (std::size_t b = 0; b < 3 && b <= d; ++b) recent += rainy[d - b];
        env[d].weather[3] = recent;
    }

    // Per-day env log-effect.
    const auto& ecols = env_columns();
    std::vector<double> effect(total_days, 0.0);
    for (const auto& [col, coef] : spec.env_effects) {
        const auto c = *find_column(ecols, col);
        std::vector<double> v(total_days);
        for (std::size_t d = 0; d < total_days; ++d) v[d] = to_row(env[d])[c];
        double center = 0.0;
        if (!is_flag_column(col)) {
            for (double x : v) center += x / static_cast<double>(total_days);
        }
        for (std::size_t d = 0; d < total_days; ++d) effect[d] += coef * (v[d] - center);
    }

    out.flows = FlowTable(m, n);
    double previous_total = 0.0;
    for (std::size_t d = 0; d < total_days; ++d) {
        Matrix rate(n, m);
        double day_total = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < m; ++j) {
                rate(i, j) = std::exp(base(i, j) + effect[d]);
                const auto y = rng.poisson(rate(i, j));
                day_total += static_cast<double>(y);
                if (d > 0 && y > 0) out.flows.add(env[d].date, j, i, y);
            }
        env[d].total_visits_prev = previous_total;
        previous_total = day_total;
        if (d > 0) out.truth.push_back(std::move(rate));
    }
    in.env.assign(env.begin() + 1, env.end());

    out.graph = assemble_city_graph(in);
    return out;
}

}  // namespace simgat
