#include <algorithm>
#include <cmath>
#include <set>

#include "simgat/domain.hpp"

namespace simgat {

namespace {

std::vector<std::size_t> indices_of(const std::vector<std::string>& columns, const std::vector<std::string>& wanted) {
    std::vector<std::size_t> out;
    for (const auto& w : wanted) {
        auto it = std::find(columns.begin(), columns.end(), w);
        if (it != columns.end()) out.push_back(static_cast<std::size_t>(it - columns.begin()));
    }
    return out;
}

void check_table(const FeatureTable& t, const std::string& what, bool standardized, std::vector<std::string>& out) {
    if (t.values.rows == 0) out.push_back(what + ": no rows");
    if (t.ids.size() != t.values.rows)
        out.push_back(what + ": " + std::to_string(t.ids.size()) + " ids for " + std::to_string(t.values.rows) + " rows");
    if (!t.xy.empty() && t.xy.size() != t.values.rows)
        out.push_back(what + ": " + std::to_string(t.xy.size()) + " coordinates for " + std::to_string(t.values.rows) +
                      " rows");
    if (t.columns.size() != t.values.cols)
        out.push_back(what + ": " + std::to_string(t.columns.size()) + " column names for " +
                      std::to_string(t.values.cols) + " columns");
    if (t.stats.columns.size() != t.values.cols)
        out.push_back(what + ": column stats cover " + std::to_string(t.stats.columns.size()) + " of " +
                      std::to_string(t.values.cols) + " columns");
    if (t.values.data.size() != t.values.rows * t.values.cols) {
        out.push_back(what + ": matrix storage does not match its shape");
        return;
    }
    std::set<std::string> seen;
    for (const auto& id : t.ids)
        if (!seen.insert(id).second) out.push_back(what + ": duplicate id '" + id + "'");
    for (const auto& p : t.xy)
        if (!std::isfinite(p.x) || !std::isfinite(p.y)) out.push_back(what + ": non-finite coordinate");
    for (std::size_t c = 0; c < t.values.cols; ++c) {
        bool finite = true;
        double mean = 0.0;
        for (std::size_t r = 0; r < t.values.rows; ++r) {
            finite = finite && std::isfinite(t.values(r, c));
            mean += t.values(r, c);
        }
        const std::string name = c < t.columns.size() ? t.columns[c] : std::to_string(c);
        if (!finite) {
            out.push_back(what + ": NaN or infinity in column '" + name + "'");
            continue;
        }
        if (!standardized || t.values.rows == 0) continue;
        mean /= static_cast<double>(t.values.rows);
        double var = 0.0;
        for (std::size_t r = 0; r < t.values.rows; ++r) var += (t.values(r, c) - mean) * (t.values(r, c) - mean);
        const double sd = std::sqrt(var / static_cast<double>(t.values.rows));
        if (std::fabs(mean) >= 1e-9) out.push_back(what + ": column '" + name + "' is not centered");
        if (sd > 1e-9 && (sd < 0.99 || sd > 1.01)) out.push_back(what + ": column '" + name + "' is not unit variance");
    }
}

}  // namespace

std::optional<std::size_t> EnvTable::index_of(Date date) const {
    auto it = std::lower_bound(dates.begin(), dates.end(), date);
    if (it == dates.end() || *it != date) return std::nullopt;
    return static_cast<std::size_t>(it - dates.begin());
}

std::vector<double> CityGraph::raw_cluster_column(std::string_view name) const {
    auto idx = clusters.stats.index_of(name);
    if (!idx) throw ValidationError("no cluster feature named '" + std::string(name) + "'");
    std::vector<double> out(n_clusters());
    for (std::size_t r = 0; r < out.size(); ++r) out[r] = clusters.stats.invert_value(*idx, clusters.values(r, *idx));
    return out;
}

std::vector<double> CityGraph::raw_neighborhood_column(std::string_view name) const {
    auto idx = neighborhoods.stats.index_of(name);
    if (!idx) throw ValidationError("no neighborhood feature named '" + std::string(name) + "'");
    std::vector<double> out(n_neighborhoods());
    for (std::size_t r = 0; r < out.size(); ++r)
        out[r] = neighborhoods.stats.invert_value(*idx, neighborhoods.values(r, *idx));
    return out;
}

std::vector<std::string> validate(const CityGraph& g, ValidationOptions options) {
    std::vector<std::string> out;
    check_table(g.clusters, "clusters", options.check_standardization, out);
    check_table(g.neighborhoods, "neighborhoods", options.check_standardization, out);

    const std::size_t n = g.n_clusters(), m = g.n_neighborhoods();
    if (g.costs.empty()) out.push_back("costs: no travel-cost matrices");
    for (const auto& layer : g.costs) {
        const std::string what = "costs[" + layer.mode + "]";
        if (layer.minutes.rows != m || layer.minutes.cols != n) {
            out.push_back(what + ": shape " + std::to_string(layer.minutes.rows) + "x" +
                          std::to_string(layer.minutes.cols) + ", expected " + std::to_string(m) + "x" +
                          std::to_string(n));
            continue;
        }
        std::size_t below = 0, nonfinite = 0;
        for (double v : layer.minutes.data) {
            if (!std::isfinite(v)) ++nonfinite;
            else if (v < g.cost_floor) ++below;
        }
        if (nonfinite) out.push_back(what + ": " + std::to_string(nonfinite) + " non-finite entries");
        if (below) out.push_back(what + ": " + std::to_string(below) + " entries below cost floor");
    }

    const EnvTable& env = g.env;
    if (env.values.rows == 0) out.push_back("env: no dates");
    if (env.dates.size() != env.values.rows)
        out.push_back("env: " + std::to_string(env.dates.size()) + " dates for " + std::to_string(env.values.rows) +
                      " rows");
    if (env.columns.size() != env.values.cols)
        out.push_back("env: " + std::to_string(env.columns.size()) + " column names for " +
                      std::to_string(env.values.cols) + " columns");
    if (env.stats.columns.size() != env.values.cols) out.push_back("env: column stats do not cover every column");
    for (std::size_t i = 1; i < env.dates.size(); ++i) {
        if (env.dates[i] - env.dates[i - 1] != 1) {
            out.push_back("env: dates not contiguous at " + env.dates[i].iso());
            break;
        }
    }
    if (env.values.data.size() == env.values.rows * env.values.cols) {
        for (double v : env.values.data) {
            if (!std::isfinite(v)) {
                out.push_back("env: NaN or infinity in values");
                break;
            }
        }
    } else {
        out.push_back("env: matrix storage does not match its shape");
    }
    return out;
}

CityGraph assemble_city_graph(const CityInputs& in, const std::optional<CityStats>& stats) {
    IssueList issues;
    const std::size_t n = in.clusters.size(), m = in.neighborhoods.size();
    if (n == 0) issues.add("clusters: at least one cluster is required");
    if (m == 0) issues.add("neighborhoods: at least one neighborhood is required");
    if (in.cluster_ids.size() != n) issues.add("clusters: id count does not match feature count");
    if (in.neighborhood_ids.size() != m) issues.add("neighborhoods: id count does not match feature count");
    if (!in.cluster_xy.empty() && in.cluster_xy.size() != n) issues.add("clusters: coordinate count mismatch");
    if (!in.neighborhood_xy.empty() && in.neighborhood_xy.size() != m)
        issues.add("neighborhoods: coordinate count mismatch");
    if (in.env.empty()) issues.add("env: no records");

    const std::size_t p = n ? in.clusters.front().poi_counts_reduced.size() : 0;
    for (std::size_t i = 0; i < n; ++i) {
        const std::string where = "cluster " + (i < in.cluster_ids.size() ? in.cluster_ids[i] : std::to_string(i));
        validate(in.clusters[i], where, issues);
        if (in.clusters[i].poi_counts_reduced.size() != p) issues.add(where + ": POI component count differs");
    }
    for (std::size_t j = 0; j < m; ++j) {
        validate(in.neighborhoods[j],
                 "neighborhood " + (j < in.neighborhood_ids.size() ? in.neighborhood_ids[j] : std::to_string(j)),
                 issues);
    }
    for (std::size_t t = 0; t < in.env.size(); ++t) {
        const auto row = to_row(in.env[t]);
        if (!std::all_of(row.begin(), row.end(), [](double v) { return std::isfinite(v); }))
            issues.add("env " + in.env[t].date.iso() + ": non-finite value");
        if (in.env[t].total_visits_prev < 0.0) issues.add("env " + in.env[t].date.iso() + ": negative total_visits_prev");
    }
    issues.throw_if_any();

    CityGraph g;
    auto fill = [](const auto& rows_src, std::size_t cols) {
        Matrix mtx(rows_src.size(), cols);
        for (std::size_t r = 0; r < rows_src.size(); ++r) {
            const auto row = to_row(rows_src[r]);
            std::copy(row.begin(), row.end(), mtx.data.begin() + static_cast<std::ptrdiff_t>(r * cols));
        }
        return mtx;
    };

    const auto ccols = cluster_feature_columns(p);
    const auto& ncols = neighborhood_feature_columns();
    const auto& ecols = env_columns();
    const Matrix craw = fill(in.clusters, ccols.size());
    const Matrix nraw = fill(in.neighborhoods, ncols.size());
    std::vector<EnvRecord> env_sorted = in.env;
    std::sort(env_sorted.begin(), env_sorted.end(), [](const auto& a, const auto& b) { return a.date < b.date; });
    const Matrix eraw = fill(env_sorted, ecols.size());

    auto build = [&](FeatureTable& t, const Matrix& raw, const std::vector<std::string>& cols,
                     const std::vector<std::string>& long_tail, const ColumnStats* given) {
        t.columns = cols;
        if (given) {
            t.stats = *given;
            t.values = given->apply(raw);
        } else {
            const auto idx = indices_of(cols, long_tail);
            auto s = standardize_features(raw, idx, cols);
            t.values = std::move(s.values);
            t.stats = std::move(s.stats);
        }
    };
    build(g.clusters, craw, ccols, default_long_tail_cluster_columns(), stats ? &stats->clusters : nullptr);
    g.clusters.ids = in.cluster_ids;
    g.clusters.xy = in.cluster_xy;
    build(g.neighborhoods, nraw, ncols, default_long_tail_neighborhood_columns(),
          stats ? &stats->neighborhoods : nullptr);
    g.neighborhoods.ids = in.neighborhood_ids;
    g.neighborhoods.xy = in.neighborhood_xy;

    g.env.columns = ecols;
    for (const auto& r : env_sorted) g.env.dates.push_back(r.date);
    if (stats) {
        g.env.stats = stats->env;
        g.env.values = stats->env.apply(eraw);
    } else {
        auto s = standardize_features(eraw, indices_of(ecols, default_long_tail_env_columns()), ecols);
        g.env.values = std::move(s.values);
        g.env.stats = std::move(s.stats);
    }
    g.costs = in.costs;

    auto problems = validate(g, {.check_standardization = !stats.has_value()});
    if (!problems.empty()) throw ValidationError(std::move(problems));
    return g;
}

}  // namespace simgat
