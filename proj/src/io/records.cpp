#include <algorithm>
#include <map>

#include "simgat/io.hpp"

namespace simgat::io {

namespace {

// Runs `fn` per row, collecting every row's error instead of stopping at the first.
template <class Fn>
void each_row(const CsvTable& t, Fn fn) {
    IssueList issues;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        try {
            fn(r);
        } catch (const ValidationError& e) {
            for (const auto& s : e.issues()) issues.add(s);
        }
    }
    issues.throw_if_any();
}

std::vector<std::size_t> columns(const CsvTable& t, const std::vector<std::string>& names) {
    std::vector<std::size_t> out;
    IssueList issues;
    for (const auto& n : names) {
        try {
            out.push_back(t.column(n));
        } catch (const ValidationError& e) {
            issues.add(e.what());
        }
    }
    issues.throw_if_any();
    return out;
}

std::string num(double v) { return format_double(v); }

std::map<std::string, std::size_t> index(const std::vector<std::string>& ids) {
    std::map<std::string, std::size_t> out;
    for (std::size_t i = 0; i < ids.size(); ++i) out.emplace(ids[i], i);
    return out;
}

}  // namespace

std::vector<Poi> read_pois(const fs::path& path) {
    const auto t = read_csv(path);
    const auto c = columns(t, {"id", "x", "y", "naics", "is_chain"});
    std::vector<Poi> out(t.rows.size());
    each_row(t, [&](std::size_t r) {
        const auto& f = t.rows[r];
        const auto w = t.where(r);
        Poi p{f[c[0]], parse_double(f[c[1]], w), parse_double(f[c[2]], w), f[c[3]], parse_bool(f[c[4]], w)};
        IssueList issues;
        validate(p, w, issues);
        issues.throw_if_any();
        out[r] = std::move(p);
    });
    return out;
}

void write_pois(const fs::path& path, const std::vector<Poi>& pois) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& p : pois) rows.push_back({p.id, num(p.x), num(p.y), p.naics, p.is_chain ? "1" : "0"});
    write_csv(path, {"id", "x", "y", "naics", "is_chain"}, rows);
}

std::vector<std::pair<std::size_t, std::size_t>> read_merges(const fs::path& path) {
    const auto t = read_csv(path);
    const auto c = columns(t, {"id_a", "id_b"});
    std::vector<std::pair<std::size_t, std::size_t>> out(t.rows.size());
    each_row(t, [&](std::size_t r) {
        const auto a = parse_int(t.rows[r][c[0]], t.where(r));
        const auto b = parse_int(t.rows[r][c[1]], t.where(r));
        if (a < 0 || b < 0) throw ValidationError(t.where(r) + ": negative cluster id");
        out[r] = {static_cast<std::size_t>(a), static_cast<std::size_t>(b)};
    });
    return out;
}

NeighborhoodFeatures neighborhood_from_row(std::span<const double> row) {
    if (row.size() != neighborhood_feature_columns().size())
        throw ValidationError("neighborhood row has " + std::to_string(row.size()) + " values");
    NeighborhoodFeatures f;
    std::copy_n(row.begin(), 7, f.census.begin());
    std::copy_n(row.begin() + 7, 8, f.land_use.begin());
    std::copy_n(row.begin() + 15, 3, f.accessibility.begin());
    std::copy_n(row.begin() + 18, 3, f.flood_zone.begin());
    return f;
}

NeighborhoodRows read_neighborhoods(const fs::path& path) {
    const auto t = read_csv(path);
    const auto& names = neighborhood_feature_columns();
    const auto base = columns(t, {"id", "x", "y"});
    const auto feat = columns(t, names);
    NeighborhoodRows out;
    out.ids.resize(t.rows.size());
    out.xy.resize(t.rows.size());
    out.features.resize(t.rows.size());
    each_row(t, [&](std::size_t r) {
        const auto& f = t.rows[r];
        const auto w = t.where(r);
        std::vector<double> row;
        for (auto c : feat) row.push_back(parse_double(f[c], w));
        out.ids[r] = f[base[0]];
        out.xy[r] = {parse_double(f[base[1]], w), parse_double(f[base[2]], w)};
        out.features[r] = neighborhood_from_row(row);
        IssueList issues;
        validate(out.features[r], w, issues);
        issues.throw_if_any();
    });
    return out;
}

void write_neighborhoods(const fs::path& path, const NeighborhoodRows& rows) {
    std::vector<std::string> header = {"id", "x", "y"};
    for (const auto& n : neighborhood_feature_columns()) header.push_back(n);
    std::vector<std::vector<std::string>> out;
    for (std::size_t i = 0; i < rows.ids.size(); ++i) {
        std::vector<std::string> r = {rows.ids[i], num(rows.xy[i].x), num(rows.xy[i].y)};
        for (double v : to_row(rows.features[i])) r.push_back(num(v));
        out.push_back(std::move(r));
    }
    write_csv(path, header, out);
}

std::vector<EnvRecord> read_env(const fs::path& path) {
    const auto t = read_csv(path);
    const auto& names = env_columns();
    const auto date_col = t.column("date");
    const auto c = columns(t, names);
    std::vector<EnvRecord> out(t.rows.size());
    each_row(t, [&](std::size_t r) {
        const auto& f = t.rows[r];
        const auto w = t.where(r);
        EnvRecord e;
        e.date = Date::parse(f[date_col]);
        for (std::size_t k = 0; k < 5; ++k) e.weather[k] = parse_double(f[c[k]], w);
        for (std::size_t k = 0; k < 4; ++k) e.hazard[k] = parse_bool(f[c[5 + k]], w);
        e.stay_at_home = parse_bool(f[c[9]], w);
        e.holiday = parse_bool(f[c[10]], w);
        e.total_visits_prev = parse_double(f[c[11]], w);
        out[r] = e;
    });
    return out;
}

void write_env(const fs::path& path, const std::vector<EnvRecord>& records) {
    std::vector<std::string> header = {"date"};
    for (const auto& n : env_columns()) header.push_back(n);
    std::vector<std::vector<std::string>> rows;
    for (const auto& e : records) {
        std::vector<std::string> r = {e.date.iso()};
        for (double v : e.weather) r.push_back(num(v));
        for (bool h : e.hazard) r.push_back(h ? "1" : "0");
        r.push_back(e.stay_at_home ? "1" : "0");
        r.push_back(e.holiday ? "1" : "0");
        r.push_back(num(e.total_visits_prev));
        rows.push_back(std::move(r));
    }
    write_csv(path, header, rows);
}

RoadNetwork read_network(const fs::path& nodes, const fs::path& edges) {
    RoadNetwork net;
    const auto tn = read_csv(nodes);
    const auto cn = columns(tn, {"id", "x", "y"});
    each_row(tn, [&](std::size_t r) {
        const auto& f = tn.rows[r];
        const auto w = tn.where(r);
        const auto id = parse_int(f[cn[0]], w);
        if (net.has_node(id)) throw ValidationError(w + ": duplicate node id " + std::to_string(id));
        net.add_node(id, {parse_double(f[cn[1]], w), parse_double(f[cn[2]], w)});
    });
    const auto te = read_csv(edges);
    const auto ce = columns(te, {"from", "to", "length_m", "speed_kmh", "modes"});
    const auto dcol = std::find(te.header.begin(), te.header.end(), "directed");
    each_row(te, [&](std::size_t r) {
        const auto& f = te.rows[r];
        const auto w = te.where(r);
        Edge e;
        e.from = parse_int(f[ce[0]], w);
        e.to = parse_int(f[ce[1]], w);
        e.length_m = parse_double(f[ce[2]], w);
        if (!f[ce[3]].empty()) e.speed_kmh = parse_double(f[ce[3]], w);
        try {
            e.modes = parse_modes(f[ce[4]]);
        } catch (const ValidationError& err) {
            throw ValidationError(w + ": " + err.what());
        }
        if (dcol != te.header.end()) e.directed = parse_bool(f[static_cast<std::size_t>(dcol - te.header.begin())], w);
        net.add_edge(e);
    });
    auto problems = net.issues();
    for (auto& p : problems) p = edges.string() + ": " + p;
    if (!problems.empty()) throw ValidationError(problems);
    return net;
}

void write_network(const fs::path& nodes, const fs::path& edges, const RoadNetwork& network) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& [id, p] : network.nodes()) rows.push_back({std::to_string(id), num(p.x), num(p.y)});
    write_csv(nodes, {"id", "x", "y"}, rows);
    rows.clear();
    for (const auto& e : network.edges())
        rows.push_back({std::to_string(e.from), std::to_string(e.to), num(e.length_m),
                        e.speed_kmh ? num(*e.speed_kmh) : "", format_modes(e.modes), e.directed ? "1" : "0"});
    write_csv(edges, {"from", "to", "length_m", "speed_kmh", "modes", "directed"}, rows);
}

FlowTable read_flows(const fs::path& path, const CityGraph& graph) {
    const auto t = read_csv(path);
    const auto c = columns(t, {"date", "neighborhood_id", "cluster_id", "count"});
    const auto nb = index(graph.neighborhoods.ids);
    const auto cl = index(graph.clusters.ids);
    FlowTable flows(graph.n_neighborhoods(), graph.n_clusters());
    each_row(t, [&](std::size_t r) {
        const auto& f = t.rows[r];
        const auto w = t.where(r);
        const Date d = Date::parse(f[c[0]]);
        auto j = nb.find(f[c[1]]);
        auto i = cl.find(f[c[2]]);
        if (j == nb.end()) throw ValidationError(w + ": unknown neighborhood '" + f[c[1]] + "'");
        if (i == cl.end()) throw ValidationError(w + ": unknown cluster '" + f[c[2]] + "'");
        const auto count = parse_int(f[c[3]], w);
        if (count < 0) throw ValidationError(w + ": negative count");
        try {
            flows.add(d, j->second, i->second, static_cast<std::uint64_t>(count));
        } catch (const ValidationError& e) {
            throw ValidationError(w + ": " + e.what());
        }
    });
    return flows;
}

void write_flows(const fs::path& path, const FlowTable& flows, const CityGraph& graph) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& e : flows.entries())
        rows.push_back({e.date.iso(), graph.neighborhoods.ids.at(e.neighborhood), graph.clusters.ids.at(e.cluster),
                        std::to_string(e.count)});
    write_csv(path, {"date", "neighborhood_id", "cluster_id", "count"}, rows);
}

void write_attributions(const fs::path& path, const CityGraph& graph, const std::vector<Attribution>& attributions) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& a : attributions)
        for (std::size_t f = 0; f < a.contributions.size(); ++f)
            rows.push_back({graph.env.dates.at(a.env_row).iso(), graph.clusters.ids.at(a.cluster),
                            graph.neighborhoods.ids.at(a.neighborhood), graph.clusters.columns.at(f),
                            num(a.contributions[f]), num(a.residual)});
    write_csv(path, {"date", "cluster_id", "neighborhood_id", "feature", "contribution", "residual"}, rows);
}

}  // namespace simgat::io
