#include <algorithm>
#include <set>

#include "simgat/io.hpp"

namespace simgat::io {

namespace {

// Typed field access that reports the JSON path on failure.
template <class T>
T get(const Json& j, const std::string& key, const std::string& where) {
    if (!j.is_object() || !j.contains(key)) throw ValidationError(where + ": missing '" + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const Json::exception&) {
        throw ValidationError(where + ": '" + key + "' has the wrong type");
    }
}

template <class T>
void get_opt(const Json& j, const std::string& key, T& out, const std::string& where) {
    if (j.contains(key)) out = get<T>(j, key, where);
}

// Unknown keys, plus any missing required keys, reported together.
void reject_unknown(const Json& j, const std::set<std::string>& known, const std::string& where,
                    std::initializer_list<const char*> required = {}) {
    if (!j.is_object()) throw ValidationError(where + ": expected an object");
    IssueList issues;
    for (const char* r : required)
        if (!j.contains(r)) issues.add(where + ": missing '" + r + "'");
    for (const auto& [k, _] : j.items())
        if (!known.count(k)) issues.add(where + ": unknown key '" + k + "'");
    issues.throw_if_any();
}

template <std::size_t N>
std::array<double, N> fixed(const Json& j, const std::string& key, const std::string& where) {
    const auto v = get<std::vector<double>>(j, key, where);
    if (v.size() != N) throw ValidationError(where + ": '" + key + "' needs " + std::to_string(N) + " values");
    std::array<double, N> out{};
    std::copy(v.begin(), v.end(), out.begin());
    return out;
}

Json matrix_to_json(const Matrix& m) { return m.data; }

Matrix matrix_from_json(const Json& j, std::size_t rows, std::size_t cols, const std::string& where) {
    Matrix m(rows, cols);
    std::vector<double> v;
    try {
        v = j.get<std::vector<double>>();
    } catch (const Json::exception&) {
        throw ValidationError(where + ": expected an array of numbers");
    }
    if (v.size() != rows * cols)
        throw ValidationError(where + ": expected " + std::to_string(rows * cols) + " values, found " +
                              std::to_string(v.size()));
    m.data = std::move(v);
    return m;
}

Json cluster_features_to_json(const ClusterFeatures& f) {
    return Json{{"morphology", morphology_name(f.morphology)},
                {"poi_pc", f.poi_counts_reduced},
                {"poi_diversity", f.poi_diversity},
                {"chain_ratio", f.chain_ratio},
                {"land_use", f.land_use},
                {"bus_stop_count", f.bus_stop_count},
                {"flood_zone", f.flood_zone},
                {"business_count", f.business_count},
                {"total_area", f.total_area}};
}

ClusterFeatures cluster_features_from_json(const Json& j, const std::string& where) {
    ClusterFeatures f;
    try {
        f.morphology = parse_morphology(get<std::string>(j, "morphology", where));
    } catch (const ValidationError& e) {
        throw ValidationError(where + ": " + e.what());
    }
    f.poi_counts_reduced = get<std::vector<double>>(j, "poi_pc", where);
    f.poi_diversity = get<double>(j, "poi_diversity", where);
    f.chain_ratio = get<double>(j, "chain_ratio", where);
    f.land_use = fixed<8>(j, "land_use", where);
    f.bus_stop_count = get<double>(j, "bus_stop_count", where);
    f.flood_zone = fixed<3>(j, "flood_zone", where);
    f.business_count = get<double>(j, "business_count", where);
    f.total_area = get<double>(j, "total_area", where);
    return f;
}

Json named_row(const std::vector<std::string>& names, const std::vector<double>& row) {
    Json j = Json::object();
    for (std::size_t c = 0; c < names.size(); ++c) j[names[c]] = row[c];
    return j;
}

std::vector<double> named_values(const Json& j, const std::vector<std::string>& names, const std::string& where) {
    reject_unknown(j, std::set<std::string>(names.begin(), names.end()), where);
    std::vector<double> out;
    for (const auto& n : names) out.push_back(get<double>(j, n, where));
    return out;
}

Json env_to_json(const EnvRecord& e) {
    Json j = {{"date", e.date.iso()}};
    const auto row = to_row(e);
    const auto& names = env_columns();
    for (std::size_t c = 0; c < names.size(); ++c) {
        if (c >= 5 && c <= 10)
            j[names[c]] = row[c] != 0.0;
        else
            j[names[c]] = row[c];
    }
    return j;
}

EnvRecord env_from_json(const Json& j, const std::string& where) {
    const auto& names = env_columns();
    std::set<std::string> known(names.begin(), names.end());
    known.insert("date");
    reject_unknown(j, known, where);
    EnvRecord e;
    e.date = Date::parse(get<std::string>(j, "date", where));
    for (std::size_t k = 0; k < 5; ++k) e.weather[k] = get<double>(j, names[k], where);
    for (std::size_t k = 0; k < 4; ++k) e.hazard[k] = get<bool>(j, names[5 + k], where);
    e.stay_at_home = get<bool>(j, names[9], where);
    e.holiday = get<bool>(j, names[10], where);
    e.total_visits_prev = get<double>(j, names[11], where);
    return e;
}

Json xy(Point p) { return Json::array({p.x, p.y}); }

Point xy_from(const Json& j, const std::string& key, const std::string& where) {
    const auto v = fixed<2>(j, key, where);
    return {v[0], v[1]};
}

}  // namespace

Json costs_to_json(const CostMatrixSet& costs) {
    Json j;
    j["modes"] = costs.modes();
    j["m"] = costs.layers.empty() ? 0 : costs.layers[0].minutes.rows;
    j["n"] = costs.layers.empty() ? 0 : costs.layers[0].minutes.cols;
    j["cost_floor"] = costs.cost_floor;
    j["matrices"] = Json::array();
    for (const auto& l : costs.layers) j["matrices"].push_back(matrix_to_json(l.minutes));
    j["neighborhood_nodes"] = costs.neighborhood_nodes;
    j["cluster_nodes"] = costs.cluster_nodes;
    return j;
}

std::vector<CostLayer> cost_layers_from_json(const Json& j, std::size_t m, std::size_t n, double* cost_floor) {
    const std::string where = "costs";
    const auto modes = get<std::vector<std::string>>(j, "modes", where);
    const auto jm = get<std::size_t>(j, "m", where);
    const auto jn = get<std::size_t>(j, "n", where);
    if (jm != m || jn != n)
        throw ValidationError("costs: matrices are " + std::to_string(jm) + "x" + std::to_string(jn) + ", city has " +
                              std::to_string(m) + " neighborhoods and " + std::to_string(n) + " clusters");
    if (!j.contains("matrices") || !j["matrices"].is_array() || j["matrices"].size() != modes.size())
        throw ValidationError("costs: one matrix per mode is required");
    if (cost_floor) *cost_floor = get<double>(j, "cost_floor", where);
    std::vector<CostLayer> out;
    for (std::size_t k = 0; k < modes.size(); ++k)
        out.push_back({modes[k], matrix_from_json(j["matrices"][k], m, n, "costs.matrices[" + std::to_string(k) + "]")});
    return out;
}

Json clusters_to_json(const DbscanParams& params, const std::vector<Poi>& pois, const ClusterCatalog& catalog) {
    Json j;
    j["params"] = {{"eps", params.eps}, {"min_pts", params.min_pts}};
    j["clusters"] = Json::array();
    for (std::size_t c = 0; c < catalog.assignment.members.size(); ++c) {
        std::vector<std::string> ids;
        for (auto i : catalog.assignment.members[c]) ids.push_back(pois[i].id);
        const auto& prof = catalog.profiles[c];
        j["clusters"].push_back({{"id", "c" + std::to_string(c)},
                                 {"member_poi_ids", ids},
                                 {"centroid_xy", xy(prof.centroid)},
                                 {"features", cluster_features_to_json(prof.features)}});
    }
    std::vector<std::string> noise;
    for (auto i : catalog.assignment.noise()) noise.push_back(pois[i].id);
    j["noise_poi_ids"] = noise;
    j["naics_codes"] = catalog.naics_codes;
    if (catalog.pca) {
        Json comps = Json::array();
        for (std::size_t r = 0; r < catalog.pca->components.rows; ++r) comps.push_back(catalog.pca->components.row(r));
        j["pca_basis"] = {{"mean", catalog.pca->mean},
                          {"eigenvalues", catalog.pca->eigenvalues},
                          {"explained_ratio", catalog.pca->explained_ratio},
                          {"components", comps}};
    }
    return j;
}

ClusterRows clusters_from_json(const Json& j) {
    if (!j.contains("clusters") || !j["clusters"].is_array()) throw ValidationError("clusters: missing 'clusters' array");
    ClusterRows out;
    IssueList issues;
    for (std::size_t c = 0; c < j["clusters"].size(); ++c) {
        const std::string where = "clusters[" + std::to_string(c) + "]";
        try {
            const auto& e = j["clusters"][c];
            out.ids.push_back(get<std::string>(e, "id", where));
            out.xy.push_back(xy_from(e, "centroid_xy", where));
            out.features.push_back(cluster_features_from_json(e.at("features"), where + ".features"));
        } catch (const ValidationError& err) {
            issues.add(err.what());
        }
    }
    issues.throw_if_any();
    return out;
}

Json city_to_json(const CityInputs& in, double cost_floor) {
    Json j;
    j["clusters"] = Json::array();
    for (std::size_t i = 0; i < in.clusters.size(); ++i)
        j["clusters"].push_back({{"id", in.cluster_ids[i]},
                                 {"xy", xy(in.cluster_xy[i])},
                                 {"features", cluster_features_to_json(in.clusters[i])}});
    j["neighborhoods"] = Json::array();
    for (std::size_t i = 0; i < in.neighborhoods.size(); ++i)
        j["neighborhoods"].push_back({{"id", in.neighborhood_ids[i]},
                                      {"xy", xy(in.neighborhood_xy[i])},
                                      {"features", named_row(neighborhood_feature_columns(), to_row(in.neighborhoods[i]))}});
    CostMatrixSet costs;
    costs.layers = in.costs;
    costs.cost_floor = cost_floor;
    j["costs"] = costs_to_json(costs);
    j["costs"].erase("neighborhood_nodes");
    j["costs"].erase("cluster_nodes");
    j["env"] = Json::array();
    for (const auto& e : in.env) j["env"].push_back(env_to_json(e));
    return j;
}

CityInputs city_from_json(const Json& j, double* cost_floor) {
    reject_unknown(j, {"clusters", "neighborhoods", "costs", "env"}, "city");
    CityInputs in;
    IssueList issues;
    auto each = [&](const char* key, auto fn) {
        if (!j.contains(key) || !j[key].is_array()) {
            issues.add(std::string("city: missing '") + key + "' array");
            return;
        }
        for (std::size_t i = 0; i < j[key].size(); ++i) {
            try {
                fn(j[key][i], std::string(key) + "[" + std::to_string(i) + "]");
            } catch (const ValidationError& e) {
                for (const auto& s : e.issues()) issues.add(s);
            }
        }
    };
    each("clusters", [&](const Json& e, const std::string& w) {
        in.cluster_ids.push_back(get<std::string>(e, "id", w));
        in.cluster_xy.push_back(xy_from(e, "xy", w));
        in.clusters.push_back(cluster_features_from_json(e.at("features"), w + ".features"));
    });
    each("neighborhoods", [&](const Json& e, const std::string& w) {
        in.neighborhood_ids.push_back(get<std::string>(e, "id", w));
        in.neighborhood_xy.push_back(xy_from(e, "xy", w));
        if (!e.contains("features")) throw ValidationError(w + ": missing 'features'");
        in.neighborhoods.push_back(
            neighborhood_from_row(named_values(e["features"], neighborhood_feature_columns(), w + ".features")));
    });
    each("env", [&](const Json& e, const std::string& w) { in.env.push_back(env_from_json(e, w)); });
    issues.throw_if_any();
    if (!j.contains("costs")) throw ValidationError("city: missing 'costs'");
    in.costs = cost_layers_from_json(j["costs"], in.neighborhoods.size(), in.clusters.size(), cost_floor);
    return in;
}

CityGraph load_city(const fs::path& path) {
    double floor = kCostFloor;
    const CityInputs in = city_from_json(read_json(path), &floor);
    CityGraph g = assemble_city_graph(in);
    g.cost_floor = floor;
    return g;
}

Json column_stats_to_json(const ColumnStats& stats) {
    Json j = Json::array();
    for (const auto& c : stats.columns) j.push_back({{"name", c.name}, {"is_log", c.is_log}, {"mean", c.mean}, {"sd", c.sd}});
    return j;
}

ColumnStats column_stats_from_json(const Json& j) {
    ColumnStats s;
    for (const auto& c : j)
        s.columns.push_back({get<std::string>(c, "name", "column_stats"), get<bool>(c, "is_log", "column_stats"),
                             get<double>(c, "mean", "column_stats"), get<double>(c, "sd", "column_stats")});
    return s;
}

Json config_to_json(const SimGatConfig& c) {
    return Json{{"hidden_dim", c.hidden_dim},       {"lstm_window", c.lstm_window},
                {"learning_rate", c.learning_rate}, {"batch_size", c.batch_size},
                {"epochs", c.epochs},               {"leaky_slope", c.leaky_slope},
                {"seed", c.seed},                   {"include_visit_lag", c.include_visit_lag},
                {"cost_combiner", combiner_name(c.cost_combiner)}, {"val_fraction", c.val_fraction}};
}

SimGatConfig config_from_json(const Json& j) {
    const std::string w = "config";
    reject_unknown(j, {"hidden_dim", "lstm_window", "learning_rate", "batch_size", "epochs", "leaky_slope", "seed",
                       "include_visit_lag", "cost_combiner", "val_fraction"},
                   w, {"seed"});
    SimGatConfig c;
    c.seed = get<std::uint64_t>(j, "seed", w);
    get_opt(j, "hidden_dim", c.hidden_dim, w);
    get_opt(j, "lstm_window", c.lstm_window, w);
    get_opt(j, "learning_rate", c.learning_rate, w);
    get_opt(j, "batch_size", c.batch_size, w);
    get_opt(j, "epochs", c.epochs, w);
    get_opt(j, "leaky_slope", c.leaky_slope, w);
    get_opt(j, "include_visit_lag", c.include_visit_lag, w);
    get_opt(j, "val_fraction", c.val_fraction, w);
    if (j.contains("cost_combiner")) c.cost_combiner = parse_combiner(get<std::string>(j, "cost_combiner", w));
    c.validate();
    return c;
}

Json report_to_json(const TrainReport& r) {
    return Json{{"train_loss", r.train_loss},
                {"val_loss", r.val_loss},
                {"best_epoch", r.best_epoch},
                {"best_val_loss", r.best_val_loss},
                {"seed", r.seed}};
}

Json model_to_json(const SimGatModel& model, const CityGraph& graph, const TrainReport* report, const DaySplit* split) {
    Json j;
    j["config"] = config_to_json(model.config);
    j["dims"] = {{"cluster_features", model.dims.cluster_features},
                 {"neighborhood_features", model.dims.neighborhood_features},
                 {"env_features", model.dims.env_features},
                 {"hidden", model.dims.hidden},
                 {"modes", model.dims.modes}};
    j["column_stats"] = {{"clusters", column_stats_to_json(graph.clusters.stats)},
                         {"neighborhoods", column_stats_to_json(graph.neighborhoods.stats)},
                         {"env", column_stats_to_json(graph.env.stats)}};
    j["parameters"] = Json::array();
    for (const auto& p : model.params)
        j["parameters"].push_back({{"name", p.name}, {"shape", p.value.shape()}, {"data", p.value.data()}});
    if (report) j["train_report"] = report_to_json(*report);
    if (split) j["split"] = {{"train", split->train}, {"val", split->val}};
    return j;
}

SimGatModel model_from_json(const Json& j) {
    const std::string w = "model";
    if (!j.contains("config") || !j.contains("dims") || !j.contains("parameters"))
        throw ValidationError("model: 'config', 'dims' and 'parameters' are required");
    const SimGatConfig config = config_from_json(j["config"]);
    const auto& d = j["dims"];
    ModelDims dims{get<std::size_t>(d, "cluster_features", w), get<std::size_t>(d, "neighborhood_features", w),
                   get<std::size_t>(d, "env_features", w), get<std::size_t>(d, "hidden", w),
                   get<std::size_t>(d, "modes", w)};
    SimGatModel model = SimGatModel::init(dims, config);
    const auto& ps = j["parameters"];
    if (!ps.is_array() || ps.size() != model.params.size())
        throw ValidationError("model: expected " + std::to_string(model.params.size()) + " parameter tensors");
    IssueList issues;
    for (std::size_t k = 0; k < ps.size(); ++k) {
        auto& p = model.params[k];
        const std::string where = "model.parameters[" + std::to_string(k) + "]";
        const auto name = get<std::string>(ps[k], "name", where);
        const auto shape = get<ad::Shape>(ps[k], "shape", where);
        if (name != p.name || shape != p.value.shape()) {
            issues.add(where + ": expected " + p.name + " " + ad::shape_str(p.value.shape()) + ", found " + name + " " +
                       ad::shape_str(shape));
            continue;
        }
        auto data = get<std::vector<double>>(ps[k], "data", where);
        if (data.size() != p.value.size()) {
            issues.add(where + ": wrong number of values");
            continue;
        }
        p.value = ad::Tensor(shape, std::move(data));
    }
    issues.throw_if_any();
    return model;
}

Json spec_to_json(const ScenarioSpec& s) {
    Json j;
    j["seed"] = s.seed;
    j["n_clusters"] = s.n_clusters;
    j["n_neighborhoods"] = s.n_neighborhoods;
    j["days"] = s.days;
    j["start"] = s.start.iso();
    j["min_days"] = s.min_days;
    j["gravity"] = {{"k", s.gravity.k}, {"alpha", s.gravity.alpha}, {"beta", s.gravity.beta}, {"gamma", s.gravity.gamma}};
    j["env_effects"] = s.env_effects;
    j["calendar"] = Json::array();
    for (const auto& e : s.calendar) j["calendar"].push_back({{"day", e.day}, {"column", e.column}});
    j["mode_mix"] = s.mode_mix;
    j["cluster_effects"] = Json::array();
    for (const auto& e : s.cluster_effects)
        j["cluster_effects"].push_back({{"cluster_column", e.cluster_column}, {"coefficient", e.coefficient}});
    j["interactions"] = Json::array();
    for (const auto& e : s.interactions)
        j["interactions"].push_back({{"cluster_column", e.cluster_column},
                                     {"neighborhood_column", e.neighborhood_column},
                                     {"coefficient", e.coefficient}});
    j["poi_components"] = s.poi_components;
    j["city_size_m"] = s.city_size_m;
    j["grid_side"] = s.grid_side;
    return j;
}

ScenarioSpec spec_from_json(const Json& j) {
    const std::string w = "scenario";
    reject_unknown(j, {"seed", "n_clusters", "n_neighborhoods", "days", "start", "min_days", "gravity", "env_effects",
                       "calendar", "mode_mix", "cluster_effects", "interactions", "poi_components", "city_size_m",
                       "grid_side"},
                   w, {"seed"});
    ScenarioSpec s = ScenarioSpec::defaults();
    s.seed = get<std::uint64_t>(j, "seed", w);
    get_opt(j, "n_clusters", s.n_clusters, w);
    get_opt(j, "n_neighborhoods", s.n_neighborhoods, w);
    get_opt(j, "days", s.days, w);
    if (j.contains("start")) s.start = Date::parse(get<std::string>(j, "start", w));
    get_opt(j, "min_days", s.min_days, w);
    if (j.contains("gravity")) {
        const auto& g = j["gravity"];
        reject_unknown(g, {"k", "alpha", "beta", "gamma"}, w + ".gravity");
        get_opt(g, "k", s.gravity.k, w + ".gravity");
        get_opt(g, "alpha", s.gravity.alpha, w + ".gravity");
        get_opt(g, "beta", s.gravity.beta, w + ".gravity");
        get_opt(g, "gamma", s.gravity.gamma, w + ".gravity");
    }
    get_opt(j, "env_effects", s.env_effects, w);
    get_opt(j, "mode_mix", s.mode_mix, w);
    if (j.contains("calendar")) {
        s.calendar.clear();
        for (const auto& e : j["calendar"])
            s.calendar.push_back({get<std::size_t>(e, "day", w + ".calendar"), get<std::string>(e, "column", w + ".calendar")});
    }
    if (j.contains("cluster_effects")) {
        s.cluster_effects.clear();
        for (const auto& e : j["cluster_effects"])
            s.cluster_effects.push_back({get<std::string>(e, "cluster_column", w + ".cluster_effects"),
                                         get<double>(e, "coefficient", w + ".cluster_effects")});
    }
    if (j.contains("interactions")) {
        s.interactions.clear();
        for (const auto& e : j["interactions"])
            s.interactions.push_back({get<std::string>(e, "cluster_column", w + ".interactions"),
                                      get<std::string>(e, "neighborhood_column", w + ".interactions"),
                                      get<double>(e, "coefficient", w + ".interactions")});
    }
    get_opt(j, "poi_components", s.poi_components, w);
    get_opt(j, "city_size_m", s.city_size_m, w);
    get_opt(j, "grid_side", s.grid_side, w);
    s.validate();
    return s;
}

Json truth_to_json(const ScenarioSpec& spec, const SyntheticCity& city) {
    Json j;
    j["spec"] = spec_to_json(spec);
    j["layout"] = "rates are clusters x neighborhoods, row-major";
    j["cluster_ids"] = city.graph.clusters.ids;
    j["neighborhood_ids"] = city.graph.neighborhoods.ids;
    j["rates"] = Json::array();
    for (std::size_t d = 0; d < city.truth.size(); ++d)
        j["rates"].push_back({{"date", city.graph.env.dates.at(d).iso()}, {"values", matrix_to_json(city.truth[d])}});
    return j;
}

Json gravity_fit_to_json(const GravityFit& f, GravityMethod method) {
    return Json{{"model", "gravity"},
                {"method", method_name(method)},
                {"params", {{"k", f.params.k}, {"alpha", f.params.alpha}, {"beta", f.params.beta}, {"gamma", f.params.gamma}}},
                {"diagnostics",
                 {{"deviance", f.deviance},
                  {"pseudo_r2", f.pseudo_r2},
                  {"log_likelihood", f.log_likelihood},
                  {"n_obs", f.n_obs},
                  {"n_dropped_zeros", f.n_dropped_zeros},
                  {"iterations", f.iterations},
                  {"converged", f.converged}}}};
}

Json huff_fit_to_json(const HuffFit& f) {
    return Json{{"model", "huff"},
                {"params", {{"alpha", f.params.alpha}, {"beta", f.params.beta}}},
                {"diagnostics",
                 {{"log_likelihood", f.log_likelihood},
                  {"pseudo_r2", f.pseudo_r2},
                  {"n_obs", f.n_obs},
                  {"iterations", f.iterations},
                  {"converged", f.converged},
                  {"beta_at_bound", f.beta_at_bound}}}};
}

Json summary_to_json(const Summary& s) {
    return Json{{"min", s.min}, {"q1", s.q1}, {"median", s.median}, {"q3", s.q3},
                {"max", s.max}, {"mean", s.mean}, {"count", s.count}};
}

Json feature_summaries_to_json(const std::vector<FeatureSummary>& summaries) {
    Json j = Json::object();
    for (const auto& f : summaries) j[f.feature] = summary_to_json(f.summary);
    return j;
}

GridSpec grid_from_json(const Json& j) {
    const std::string w = "grid";
    reject_unknown(j, {"base", "learning_rates", "batch_sizes", "hidden_dims"}, w);
    if (!j.contains("base")) throw ValidationError("grid: missing 'base' config");
    GridSpec g;
    g.base = config_from_json(j["base"]);
    g.learning_rates = get<std::vector<double>>(j, "learning_rates", w);
    g.batch_sizes = get<std::vector<std::size_t>>(j, "batch_sizes", w);
    g.hidden_dims = get<std::vector<std::size_t>>(j, "hidden_dims", w);
    if (g.learning_rates.empty() || g.batch_sizes.empty() || g.hidden_dims.empty())
        throw ValidationError("grid: every axis needs at least one value");
    return g;
}

}  // namespace simgat::io
