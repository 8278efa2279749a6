// simgat: batch command-line driver.
//
// Exit status: 0 success, 1 validation or computation error (itemized on
// stderr), 2 usage error.

#include <CLI11.hpp>

#include <cmath>
#include <functional>
#include <iostream>
#include <optional>

#include "manifest.hpp"
#include "simgat/parallel.hpp"

namespace fs = std::filesystem;
using namespace simgat;
using io::Json;

namespace {

/// Computation failure that is not an input problem (e.g. a failed check).
class Failure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

const CostLayer& cost_layer(const CityGraph& g, const std::string& mode) {
    if (mode.empty()) return g.costs.at(0);
    for (const auto& l : g.costs)
        if (l.mode == mode) return l;
    throw ValidationError("city has no cost layer '" + mode + "'");
}

Matrix mean_flows(const CityGraph& g, const FlowTable& flows) {
    return flows.mean_over(g.env.dates);  // neighborhoods x clusters
}

std::vector<std::pair<std::string, Date>> parse_scenarios(const std::vector<std::string>& args) {
    std::vector<std::pair<std::string, Date>> out;
    for (const auto& a : args) {
        const auto eq = a.find('=');
        if (eq == std::string::npos)
            out.emplace_back(a, Date::parse(a));
        else
            out.emplace_back(a.substr(0, eq), Date::parse(a.substr(eq + 1)));
    }
    return out;
}

std::size_t tensor_count(const std::vector<ad::NamedTensor>& params) {
    std::size_t n = 0;
    for (const auto& p : params) n += p.value.size();
    return n;
}

Json inventory_json(const ParamInventory& inv) {
    Json groups = Json::array();
    for (const auto& g : inv.groups) groups.push_back({{"component", g.component}, {"parameters", g.names}, {"count", g.count}});
    return Json{{"groups", groups}, {"total", inv.total}, {"analytic_total", inv.analytic_total}};
}

struct Command {
    CLI::App* app = nullptr;
    std::function<void(cli::Manifest&)> run;
    std::function<fs::path()> manifest_path;
};

fs::path beside(const fs::path& out) {
    if (out.empty()) return "manifest.json";
    return out.parent_path() / (out.stem().string() + ".manifest.json");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Spatial interaction modeling with cost-modified graph attention"};
    app.require_subcommand(1);
    app.set_version_flag("--version", SIMGAT_VERSION);
    std::vector<Command> commands;
    auto add = [&](const char* name, const char* help) -> Command& {
        commands.push_back({app.add_subcommand(name, help), {}, {}});
        return commands.back();
    };

    // synth ------------------------------------------------------------------
    struct {
        fs::path spec, out;
        std::optional<std::uint64_t> seed;
    } synth;
    {
        auto& c = add("synth", "Generate a synthetic city and visit history");
        c.app->add_option("--spec", synth.spec, "Scenario JSON (seed required)")->check(CLI::ExistingFile);
        c.app->add_option("--seed", synth.seed, "Seed; with no --spec, runs the default scenario");
        c.app->add_option("--out", synth.out, "Output directory")->required();
        c.manifest_path = [&] { return synth.out / "manifest.json"; };
        c.run = [&](cli::Manifest& m) {
            ScenarioSpec spec;
            if (!synth.spec.empty()) {
                m.input(synth.spec);
                spec = io::spec_from_json(io::read_json(synth.spec));
                if (synth.seed) spec.seed = *synth.seed;
            } else {
                if (!synth.seed) throw ValidationError("synth needs --spec or --seed");
                spec = ScenarioSpec::defaults();
                spec.seed = *synth.seed;
            }
            m.seed(spec.seed);
            m.config() = io::spec_to_json(spec);
            const auto city = generate(spec);
            const auto& o = synth.out;
            io::write_json(o / "scenario.json", io::spec_to_json(spec));
            io::write_json(o / "city.json", io::city_to_json(city.inputs, city.graph.cost_floor));
            io::write_flows(o / "flows.csv", city.flows, city.graph);
            io::write_env(o / "env.csv", city.inputs.env);
            io::write_neighborhoods(o / "neighborhoods.csv",
                                    {city.inputs.neighborhood_ids, city.inputs.neighborhood_xy, city.inputs.neighborhoods});
            io::write_network(o / "nodes.csv", o / "edges.csv", city.network);
            io::write_json(o / "truth.json", io::truth_to_json(spec, city));
            for (const char* f : {"scenario.json", "city.json", "flows.csv", "env.csv", "neighborhoods.csv", "nodes.csv",
                                  "edges.csv", "truth.json"})
                m.output(o / f);
        };
    }

    // cluster ----------------------------------------------------------------
    struct {
        fs::path pois, merges, out;
        DbscanParams params;
        double variance = 0.95;
    } cl;
    {
        auto& c = add("cluster", "Detect business clusters from POIs");
        c.app->add_option("--pois", cl.pois, "POI CSV: id,x,y,naics,is_chain")->required()->check(CLI::ExistingFile);
        c.app->add_option("--eps", cl.params.eps, "Neighborhood radius in meters")->capture_default_str();
        c.app->add_option("--min-pts", cl.params.min_pts, "Core threshold, point included")->capture_default_str();
        c.app->add_option("--merges", cl.merges, "CSV of cluster pairs to merge: id_a,id_b")->check(CLI::ExistingFile);
        c.app->add_option("--variance", cl.variance, "PCA cumulative variance target")->capture_default_str();
        c.app->add_option("--out", cl.out, "clusters.json")->required();
        c.manifest_path = [&] { return beside(cl.out); };
        c.run = [&](cli::Manifest& m) {
            m.input(cl.pois);
            m.config() = {{"eps", cl.params.eps}, {"min_pts", cl.params.min_pts}, {"variance", cl.variance}};
            if (!(cl.params.eps > 0.0) || cl.params.min_pts < 1) throw ValidationError("eps must be > 0 and min-pts >= 1");
            const auto pois = io::read_pois(cl.pois);
            std::vector<Point> xy;
            for (const auto& p : pois) xy.push_back({p.x, p.y});
            auto assignment = dbscan(xy, cl.params);
            if (!cl.merges.empty()) {
                m.input(cl.merges);
                assignment = merge_clusters(assignment, io::read_merges(cl.merges));
            }
            const auto catalog = featurize_clusters(pois, assignment, {}, cl.variance);
            io::write_json(cl.out, io::clusters_to_json(cl.params, pois, catalog));
            m.output(cl.out);
        };
    }

    // network ----------------------------------------------------------------
    struct {
        fs::path nodes, edges, neighborhoods, clusters, out;
        double boarding = 0.0, floor = kCostFloor;
    } nw;
    {
        auto& c = add("network", "Travel-time cost matrices from a multimodal road network");
        c.app->add_option("--nodes", nw.nodes, "nodes.csv: id,x,y")->required()->check(CLI::ExistingFile);
        c.app->add_option("--edges", nw.edges, "edges.csv: from,to,length_m,speed_kmh,modes[,directed]")
            ->required()
            ->check(CLI::ExistingFile);
        c.app->add_option("--neighborhoods", nw.neighborhoods, "neighborhoods.csv")->required()->check(CLI::ExistingFile);
        c.app->add_option("--clusters", nw.clusters, "clusters.json")->required()->check(CLI::ExistingFile);
        c.app->add_option("--boarding-penalty", nw.boarding, "Minutes per transit boarding")->capture_default_str();
        c.app->add_option("--cost-floor", nw.floor, "Minimum cost in minutes")->capture_default_str();
        c.app->add_option("--out", nw.out, "costs.json")->required();
        c.manifest_path = [&] { return beside(nw.out); };
        c.run = [&](cli::Manifest& m) {
            for (const auto& p : {nw.nodes, nw.edges, nw.neighborhoods, nw.clusters}) m.input(p);
            m.config() = {{"boarding_penalty", nw.boarding}, {"cost_floor", nw.floor}};
            const auto net = io::read_network(nw.nodes, nw.edges);
            const auto nb = io::read_neighborhoods(nw.neighborhoods);
            const auto clusters = io::clusters_from_json(io::read_json(nw.clusters));
            CostOptions opt;
            opt.routing.boarding_penalty = nw.boarding;
            opt.cost_floor = nw.floor;
            io::write_json(nw.out, io::costs_to_json(build_cost_matrices(net, nb.xy, clusters.xy, opt)));
            m.output(nw.out);
        };
    }

    // assemble ---------------------------------------------------------------
    struct {
        fs::path clusters, neighborhoods, env, costs, out;
    } as;
    {
        auto& c = add("assemble", "Combine clusters, neighborhoods, environment and costs into city.json");
        c.app->add_option("--clusters", as.clusters, "clusters.json")->required()->check(CLI::ExistingFile);
        c.app->add_option("--neighborhoods", as.neighborhoods, "neighborhoods.csv")->required()->check(CLI::ExistingFile);
        c.app->add_option("--env", as.env, "env.csv")->required()->check(CLI::ExistingFile);
        c.app->add_option("--costs", as.costs, "costs.json")->required()->check(CLI::ExistingFile);
        c.app->add_option("--out", as.out, "city.json")->required();
        c.manifest_path = [&] { return beside(as.out); };
        c.run = [&](cli::Manifest& m) {
            for (const auto& p : {as.clusters, as.neighborhoods, as.env, as.costs}) m.input(p);
            const auto clusters = io::clusters_from_json(io::read_json(as.clusters));
            const auto nb = io::read_neighborhoods(as.neighborhoods);
            CityInputs in;
            in.cluster_ids = clusters.ids;
            in.cluster_xy = clusters.xy;
            in.clusters = clusters.features;
            in.neighborhood_ids = nb.ids;
            in.neighborhood_xy = nb.xy;
            in.neighborhoods = nb.features;
            in.env = io::read_env(as.env);
            double floor = kCostFloor;
            in.costs = io::cost_layers_from_json(io::read_json(as.costs), nb.ids.size(), clusters.ids.size(), &floor);
            (void)assemble_city_graph(in);  // validation only
            io::write_json(as.out, io::city_to_json(in, floor));
            m.output(as.out);
        };
    }

    // fit-gravity / fit-huff -------------------------------------------------
    struct {
        fs::path city, flows, out;
        std::string method = "poisson", mode;
    } fg;
    {
        auto& c = add("fit-gravity", "Calibrate the gravity model on mean daily flows");
        c.app->add_option("--city", fg.city, "city.json")->required()->check(CLI::ExistingFile);
        c.app->add_option("--flows", fg.flows, "flows.csv")->required()->check(CLI::ExistingFile);
        c.app->add_option("--method", fg.method, "poisson | log-ols")->capture_default_str()->check(
            CLI::IsMember({"poisson", "log-ols"}));
        c.app->add_option("--mode", fg.mode, "Cost layer (default: first)");
        c.app->add_option("--out", fg.out, "params.json")->required();
        c.manifest_path = [&] { return beside(fg.out); };
        c.run = [&](cli::Manifest& m) {
            m.input(fg.city);
            m.input(fg.flows);
            m.config() = {{"method", fg.method}, {"mode", fg.mode}};
            const auto g = io::load_city(fg.city);
            const auto flows = io::read_flows(fg.flows, g);
            GravityFitOptions opt;
            opt.method = parse_method(fg.method);
            const auto fit = fit_gravity(mean_flows(g, flows), g.raw_neighborhood_column("population"),
                                         g.raw_cluster_column("business_count"), cost_layer(g, fg.mode).minutes, opt);
            io::write_json(fg.out, io::gravity_fit_to_json(fit, opt.method));
            m.output(fg.out);
        };
    }
    struct {
        fs::path city, flows, out;
        std::string mode;
    } fh;
    {
        auto& c = add("fit-huff", "Calibrate the Huff model on mean daily flows");
        c.app->add_option("--city", fh.city, "city.json")->required()->check(CLI::ExistingFile);
        c.app->add_option("--flows", fh.flows, "flows.csv")->required()->check(CLI::ExistingFile);
        c.app->add_option("--mode", fh.mode, "Cost layer (default: first)");
        c.app->add_option("--out", fh.out, "params.json")->required();
        c.manifest_path = [&] { return beside(fh.out); };
        c.run = [&](cli::Manifest& m) {
            m.input(fh.city);
            m.input(fh.flows);
            m.config() = {{"mode", fh.mode}};
            const auto g = io::load_city(fh.city);
            const auto flows = io::read_flows(fh.flows, g);
            const auto fit =
                fit_huff(mean_flows(g, flows), g.raw_cluster_column("business_count"), cost_layer(g, fh.mode).minutes);
            io::write_json(fh.out, io::huff_fit_to_json(fit));
            m.output(fh.out);
        };
    }

    // train ------------------------------------------------------------------
    struct {
        fs::path city, flows, config, out;
    } tr;
    {
        auto& c = add("train", "Train SIM-GAT");
        c.app->add_option("--city", tr.city, "city.json")->required()->check(CLI::ExistingFile);
        c.app->add_option("--flows", tr.flows, "flows.csv")->required()->check(CLI::ExistingFile);
        c.app->add_option("--config", tr.config, "config.json (seed required)")->required()->check(CLI::ExistingFile);
        c.app->add_option("--out", tr.out, "model.json")->required();
        c.manifest_path = [&] { return beside(tr.out); };
        c.run = [&](cli::Manifest& m) {
            for (const auto& p : {tr.city, tr.flows, tr.config}) m.input(p);
            const auto config = io::config_from_json(io::read_json(tr.config));
            m.seed(config.seed);
            m.config() = io::config_to_json(config);
            const auto g = io::load_city(tr.city);
            const auto flows = io::read_flows(tr.flows, g);
            const auto r = train(g, flows, config);
            io::write_json(tr.out, io::model_to_json(r.model, g, &r.report, &r.split));
            m.output(tr.out);
        };
    }

    // grid -------------------------------------------------------------------
    struct {
        fs::path grid, city, flows, out;
    } gr;
    {
        auto& c = add("grid", "Grid search over learning rate, batch size and hidden width");
        c.app->add_option("--grid", gr.grid, "grid.json")->required()->check(CLI::ExistingFile);
        c.app->add_option("--city", gr.city, "city.json")->required()->check(CLI::ExistingFile);
        c.app->add_option("--flows", gr.flows, "flows.csv")->required()->check(CLI::ExistingFile);
        c.app->add_option("--out", gr.out, "grid results JSON")->required();
        c.manifest_path = [&] { return beside(gr.out); };
        c.run = [&](cli::Manifest& m) {
            for (const auto& p : {gr.grid, gr.city, gr.flows}) m.input(p);
            const auto spec = io::grid_from_json(io::read_json(gr.grid));
            m.seed(spec.base.seed);
            m.config() = io::read_json(gr.grid);
            const auto g = io::load_city(gr.city);
            const auto flows = io::read_flows(gr.flows, g);
            const auto trials = grid_search(g, flows, spec);
            Json out = {{"trials", Json::array()}};
            std::size_t best = 0;
            for (std::size_t t = 0; t < trials.size(); ++t) {
                out["trials"].push_back({{"config", io::config_to_json(trials[t].config)},
                                         {"best_val_loss", trials[t].report.best_val_loss},
                                         {"best_epoch", trials[t].report.best_epoch},
                                         {"report", io::report_to_json(trials[t].report)}});
                if (trials[t].report.best_val_loss < trials[best].report.best_val_loss) best = t;
            }
            out["best"] = {{"index", best}, {"config", io::config_to_json(trials.at(best).config)}};
            io::write_json(gr.out, out);
            m.output(gr.out);
        };
    }

    // eval -------------------------------------------------------------------
    struct {
        fs::path model, city, flows, out;
        bool baselines = true;
    } ev;
    {
        auto& c = add("eval", "Validation metrics against intercept, GCN and GraphSAGE baselines");
        c.app->add_option("--model", ev.model, "model.json")->required()->check(CLI::ExistingFile);
        c.app->add_option("--city", ev.city, "city.json")->required()->check(CLI::ExistingFile);
        c.app->add_option("--flows", ev.flows, "flows.csv")->required()->check(CLI::ExistingFile);
        c.app->add_flag("--baselines,!--no-baselines", ev.baselines, "Train GCN and GraphSAGE for comparison")
            ->capture_default_str();
        c.app->add_option("--out", ev.out, "metrics.json")->required();
        c.manifest_path = [&] { return beside(ev.out); };
        c.run = [&](cli::Manifest& m) {
            for (const auto& p : {ev.model, ev.city, ev.flows}) m.input(p);
            const auto mj = io::read_json(ev.model);
            const auto model = io::model_from_json(mj);
            m.seed(model.config.seed);
            m.config() = {{"baselines", ev.baselines}, {"model_config", io::config_to_json(model.config)}};
            const auto g = io::load_city(ev.city);
            const auto flows = io::read_flows(ev.flows, g);
            if (dims_for(g, model.config) != model.dims) throw ValidationError("model dimensions do not match the city");
            const auto split = split_days(g, model.config.lstm_window, model.config.val_fraction, model.config.seed);
            Json out;
            out["n_params"] = model.param_count();
            out["train_loss"] = evaluate_loss(model, g, flows, split.train);
            out["val_loss"] = evaluate_loss(model, g, flows, split.val);
            out["best_epoch"] = mj.contains("train_report") ? mj["train_report"].value("best_epoch", 0) : 0;
            out["n_train_days"] = split.train.size();
            out["n_val_days"] = split.val.size();
            const double intercept = intercept_baseline_loss(g, flows, split);
            out["baselines"] = {{"intercept", {{"val_loss", intercept}, {"n_params", 1}}}};
            bool beats_all = out["val_loss"].get<double>() < intercept;
            if (ev.baselines) {
                for (auto kind : {BaselineKind::Gcn, BaselineKind::GraphSage}) {
                    const auto b = train_baseline(kind, g, flows, model.config);
                    out["baselines"][baseline_name(kind)] = {{"val_loss", b.report.best_val_loss},
                                                             {"best_epoch", b.report.best_epoch},
                                                             {"n_params", tensor_count(b.model.params)}};
                    beats_all = beats_all && out["val_loss"].get<double>() < b.report.best_val_loss;
                }
            }
            out["beats_all_baselines"] = beats_all;
            io::write_json(ev.out, out);
            m.output(ev.out);
        };
    }

    // attribute --------------------------------------------------------------
    struct {
        fs::path model, city, out;
        std::vector<std::string> dates;
        std::string group_by, softmax = "full";
        std::size_t k = 10;
    } at;
    {
        auto& c = add("attribute", "DeepLIFT contributions of cluster features to predicted visits");
        c.app->add_option("--model", at.model, "model.json")->required()->check(CLI::ExistingFile);
        c.app->add_option("--city", at.city, "city.json")->required()->check(CLI::ExistingFile);
        c.app->add_option("--dates", at.dates, "Dates as YYYY-MM-DD or name=YYYY-MM-DD")->required();
        c.app->add_option("--group-by", at.group_by, "Neighborhood attribute for a top/bottom-k contrast");
        c.app->add_option("--k", at.k, "Group size for --group-by")->capture_default_str();
        c.app->add_option("--softmax", at.softmax, "full | frozen")->capture_default_str()->check(
            CLI::IsMember({"full", "frozen"}));
        c.app->add_option("--out", at.out, "Output directory")->required();
        c.manifest_path = [&] { return at.out / "manifest.json"; };
        c.run = [&](cli::Manifest& m) {
            m.input(at.model);
            m.input(at.city);
            m.config() = {{"dates", at.dates}, {"group_by", at.group_by}, {"k", at.k}, {"softmax", at.softmax}};
            const auto model = io::model_from_json(io::read_json(at.model));
            m.seed(model.config.seed);
            const auto g = io::load_city(at.city);
            if (dims_for(g, model.config) != model.dims) throw ValidationError("model dimensions do not match the city");
            AttributionOptions opt;
            opt.mode = at.softmax == "frozen" ? SoftmaxMode::Frozen : SoftmaxMode::Full;
            opt.threads = 0;
            const auto scenarios = scenario_contrast(model, g, parse_scenarios(at.dates), opt);
            std::vector<Attribution> all;
            Json summaries = {{"reference", "zeros in standardized space (average cluster, neighborhood, environment)"},
                              {"target", "predicted visits lambda[cluster][neighborhood]"},
                              {"softmax", at.softmax},
                              {"scenarios", Json::array()}};
            double worst = 0.0;
            for (const auto& s : scenarios) {
                all.insert(all.end(), s.attributions.begin(), s.attributions.end());
                for (const auto& a : s.attributions) worst = std::max(worst, a.residual);
                summaries["scenarios"].push_back(
                    {{"name", s.name}, {"date", s.date.iso()}, {"features", io::feature_summaries_to_json(s.summaries)}});
            }
            summaries["max_residual"] = worst;
            if (!at.group_by.empty()) {
                summaries["groups"] = Json::array();
                std::vector<std::vector<std::string>> rows;
                for (const auto& s : scenarios) {
                    const auto gc = group_contrast(model, g, s.date, at.group_by, at.k, opt);
                    std::vector<std::string> top, bottom;
                    for (auto j : gc.top) top.push_back(g.neighborhoods.ids[j]);
                    for (auto j : gc.bottom) bottom.push_back(g.neighborhoods.ids[j]);
                    summaries["groups"].push_back({{"name", s.name},
                                                   {"date", s.date.iso()},
                                                   {"attribute", at.group_by},
                                                   {"k", at.k},
                                                   {"top_ids", top},
                                                   {"bottom_ids", bottom},
                                                   {"top", io::feature_summaries_to_json(gc.top_summaries)},
                                                   {"bottom", io::feature_summaries_to_json(gc.bottom_summaries)}});
                    for (const auto& p : gc.scatter)
                        rows.push_back({s.name, s.date.iso(), g.neighborhoods.ids[p.neighborhood], p.feature,
                                        format_double(p.attribute_value), format_double(p.contribution)});
                }
                io::write_csv(at.out / "scatter.csv",
                              {"scenario", "date", "neighborhood_id", "feature", "attribute_value", "contribution"}, rows);
                m.output(at.out / "scatter.csv");
            }
            io::write_attributions(at.out / "attributions.csv", g, all);
            io::write_json(at.out / "summaries.json", summaries);
            m.output(at.out / "attributions.csv");
            m.output(at.out / "summaries.json");
        };
    }

    // gradcheck --------------------------------------------------------------
    struct {
        std::uint64_t seed = 0;
        double step = 1e-5, tolerance = 1e-4;
        fs::path out;
    } gc;
    {
        auto& c = add("gradcheck", "Finite-difference check of SIM-GAT gradients on a desk-scale synthetic city");
        c.app->add_option("--seed", gc.seed, "Seed for the city and the initial weights")->required();
        c.app->add_option("--step", gc.step, "Central-difference step")->capture_default_str();
        c.app->add_option("--tolerance", gc.tolerance, "Relative error bound")->capture_default_str();
        c.app->add_option("--out", gc.out, "Also write the report here");
        c.manifest_path = [&] { return beside(gc.out); };
        c.run = [&](cli::Manifest& m) {
            m.seed(gc.seed);
            SimGatConfig config;
            config.hidden_dim = 3;
            config.lstm_window = 4;
            config.seed = gc.seed;
            m.config() = {{"step", gc.step}, {"tolerance", gc.tolerance}, {"model_config", io::config_to_json(config)},
                          {"scenario", io::spec_to_json(ScenarioSpec::desk(gc.seed))}};
            const auto city = generate(ScenarioSpec::desk(gc.seed));
            auto model = SimGatModel::init(dims_for(city.graph, config), config);
            const auto split = split_days(city.graph, config.lstm_window, config.val_fraction, config.seed);
            std::vector<std::size_t> rows = split.train;
            rows.insert(rows.end(), split.val.begin(), split.val.end());
            std::sort(rows.begin(), rows.end());
            const auto r = check_gradients(model, city.graph, city.flows, rows, gc.step, gc.tolerance);
            Json out = {{"step", r.step}, {"tolerance", r.tolerance}, {"max_rel_error", r.max_rel_error},
                        {"pass", r.pass},  {"days", rows.size()},      {"parameters", Json::array()}};
            for (const auto& e : r.entries)
                out["parameters"].push_back({{"name", e.name},
                                             {"count", e.count},
                                             {"max_rel_error", e.max_rel_error},
                                             {"max_abs_grad", e.max_abs_grad},
                                             {"pass", e.pass}});
            std::cout << out.dump(2) << '\n';
            if (!gc.out.empty()) {
                io::write_json(gc.out, out);
                m.output(gc.out);
            }
            if (!r.pass) throw Failure("gradient check failed: max relative error " + format_double(r.max_rel_error));
        };
    }

    // describe ---------------------------------------------------------------
    struct {
        fs::path model, city, config, out;
        std::vector<std::size_t> dims;
    } ds;
    {
        auto& c = add("describe", "Parameter inventory by component");
        c.app->add_option("--model", ds.model, "model.json")->check(CLI::ExistingFile);
        c.app->add_option("--city", ds.city, "city.json (with --config)")->check(CLI::ExistingFile);
        c.app->add_option("--config", ds.config, "config.json (with --city)")->check(CLI::ExistingFile);
        c.app->add_option("--dims", ds.dims, "l k s h modes")->expected(5)->delimiter(',');
        c.app->add_option("--out", ds.out, "Also write the inventory here");
        c.manifest_path = [&] { return beside(ds.out); };
        c.run = [&](cli::Manifest& m) {
            SimGatModel model;
            if (!ds.model.empty()) {
                m.input(ds.model);
                model = io::model_from_json(io::read_json(ds.model));
            } else if (!ds.city.empty() && !ds.config.empty()) {
                m.input(ds.city);
                m.input(ds.config);
                const auto config = io::config_from_json(io::read_json(ds.config));
                model = SimGatModel::init(dims_for(io::load_city(ds.city), config), config);
            } else if (ds.dims.size() == 5) {
                SimGatConfig config;
                config.hidden_dim = ds.dims[3];
                model = SimGatModel::init({ds.dims[0], ds.dims[1], ds.dims[2], ds.dims[3], ds.dims[4]}, config);
            } else {
                throw CLI::ValidationError("describe", "give --model, --city with --config, or --dims l,k,s,h,modes");
            }
            m.config() = {{"dims",
                           {model.dims.cluster_features, model.dims.neighborhood_features, model.dims.env_features,
                            model.dims.hidden, model.dims.modes}}};
            const Json out = inventory_json(describe(model));
            std::cout << out.dump(2) << '\n';
            if (!ds.out.empty()) {
                io::write_json(ds.out, out);
                m.output(ds.out);
            }
        };
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        const auto subs = app.get_subcommands();
        std::cerr << '\n' << (subs.empty() ? app.help() : subs.front()->help());
        return 2;
    }

    for (auto& c : commands) {
        if (!c.app->parsed()) continue;
        cli::Manifest manifest(c.app->get_name(), std::vector<std::string>(argv + 1, argv + argc));
        int status = 0;
        try {
            c.run(manifest);
        } catch (const CLI::ValidationError& e) {
            std::cerr << "usage error: " << e.what() << '\n' << c.app->help();
            return 2;
        } catch (const ValidationError& e) {
            std::cerr << "error: " << e.issues().size() << " problem(s)\n";
            for (const auto& s : e.issues()) std::cerr << "  - " << s << '\n';
            status = 1;
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << '\n';
            status = 1;
        }
        try {
            manifest.write(c.manifest_path());
        } catch (const std::exception& e) {
            std::cerr << "error: cannot write manifest: " << e.what() << '\n';
            status = 1;
        }
        return status;
    }
    return 2;
}
