// Acceptance suite: one PASS/FAIL line per criterion. Tolerances are fixed
// here; values that are recorded but not asserted are printed alongside.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include "dbscan_oracle.hpp"
#include "simgat/io.hpp"
#include "simgat/rng.hpp"
#include "transport_oracle.hpp"
#include "zones_fixture.hpp"

using namespace simgat;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(double v, int digits = 6) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

SimGatConfig desk_config(std::uint64_t seed) {
    SimGatConfig c;
    c.hidden_dim = 3;
    c.lstm_window = 4;
    c.batch_size = 4;
    c.seed = seed;
    return c;
}

// 1 -------------------------------------------------------------------------
Outcome gradient_correctness() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto city = generate(ScenarioSpec::desk(3));
    const auto config = desk_config(3);
    const auto model = SimGatModel::init(dims_for(city.graph, config), config);
    std::vector<std::size_t> rows;
    for (std::size_t r = config.lstm_window - 1; r < city.graph.env.dates.size(); ++r) rows.push_back(r);
    const auto report = check_gradients(model, city.graph, city.flows, rows, 1e-5, 1e-4);
    const double secs = seconds_since(t0);
    std::string worst;
    double worst_err = 0.0;
    for (const auto& e : report.entries)
        if (e.max_rel_error >= worst_err) worst_err = e.max_rel_error, worst = e.name;
    return {report.pass && secs < 60.0,
            std::to_string(report.entries.size()) + " tensors, " + std::to_string(model.param_count()) +
                " scalars, max rel err " + fmt(report.max_rel_error) + " (" + worst + ") < 1e-4, " + fmt(secs, 3) +
                " s < 60 s"};
}

// 2 -------------------------------------------------------------------------
double worst_column_error(const SimGatModel& model, const CityGraph& g) {
    double worst = 0.0;
    for (std::size_t r = model.config.lstm_window - 1; r < g.env.dates.size(); ++r) {
        const auto alpha = attention_weights(model, g, r);
        for (std::size_t j = 0; j < alpha.dim(1); ++j) {
            double s = 0.0;
            for (std::size_t i = 0; i < alpha.dim(0); ++i) s += alpha.at(i, j);
            worst = std::max(worst, std::fabs(s - 1.0));
        }
    }
    return worst;
}

Outcome attention_normalization() {
    const auto city = generate(ScenarioSpec::desk(3));
    auto config = desk_config(3);
    config.epochs = 20;
    double worst = worst_column_error(SimGatModel::init(dims_for(city.graph, config), config), city.graph);
    std::size_t checks = 1;
    train(city.graph, city.flows, config, [&](const EpochInfo& info) {
        worst = std::max(worst, worst_column_error(*info.model, city.graph));
        ++checks;
    });
    return {worst <= 1e-9 && checks == 21,
            "max |sum_i alpha_ij - 1| = " + fmt(worst) + " <= 1e-9 over init + " + std::to_string(checks - 1) +
                " epochs, all days"};
}

// 3 -------------------------------------------------------------------------
Outcome dbscan_equivalence() {
    std::size_t matched = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        Rng rng(seed);
        const std::size_t n = 20 + rng.below(281);
        std::vector<Point> pts;
        const std::size_t blobs = 1 + rng.below(6);
        std::vector<Point> centers;
        for (std::size_t b = 0; b < blobs; ++b) centers.push_back({rng.uniform(0, 3000), rng.uniform(0, 3000)});
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
        matched += testing::same_partition(dbscan(pts, {eps, min_pts}).labels,
                                           testing::brute_force_dbscan(pts, eps, min_pts));
    }
    const std::vector<Point> blob = {{0, 0}, {50, 20}, {-40, 60}, {30, -70}, {80, 80}};
    const auto a = dbscan(blob, {200.0, 5});
    const bool one = a.n_clusters() == 1 && a.noise().empty();
    return {matched == 100 && one, std::to_string(matched) + "/100 instances match brute force; blob case gives " +
                                       std::to_string(a.n_clusters()) + " cluster(s)"};
}

// 4 -------------------------------------------------------------------------
Outcome shortest_paths() {
    double worst = 0.0;
    std::size_t mismatched = 0, pairs = 0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        Rng rng(seed);
        const std::size_t n = 2 + rng.below(49);
        const auto net = testing::random_network(rng, n, n * 3);
        for (ModePolicy policy : {ModePolicy::DriveOnly, ModePolicy::WalkTransit}) {
            const auto fw = testing::floyd_warshall(net, policy);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j) {
                    ++pairs;
                    const auto s = static_cast<std::int64_t>(i), t = static_cast<std::int64_t>(j);
                    if (std::isinf(fw[i][j])) {
                        try {
                            shortest_time(net, s, t, policy);
                            ++mismatched;
                        } catch (const ValidationError&) {
                        }
                    } else {
                        const double d = std::fabs(shortest_time(net, s, t, policy) - fw[i][j]);
                        worst = std::max(worst, d);
                        mismatched += d >= 1e-9;
                    }
                }
        }
    }
    const double walk = edge_time({0, 1, 1000.0, std::nullopt, mode_bit(Mode::Walk), false}, Mode::Walk);
    return {mismatched == 0 && walk == 12.0, "50 graphs, " + std::to_string(pairs) + " pairs, max |diff| " +
                                                 fmt(worst) + " < 1e-9; 1000 m walk = " + fmt(walk, 17) + " min"};
}

// 5 -------------------------------------------------------------------------
Outcome gravity_recovery() {
    Rng rng(4);
    const auto z = testing::random_zones(rng, 30, 20);
    const GravityParams truth{1, 1, 1, 2};
    const auto ols = fit_gravity(testing::expected_flows(truth, z), z.origin, z.dest, z.costs, {GravityMethod::LogOls});
    const double ols_err = std::max({std::fabs(ols.params.alpha - truth.alpha), std::fabs(ols.params.beta - truth.beta),
                                     std::fabs(ols.params.gamma - truth.gamma)});

    // 50 x 40 zones, seed 2025. Tolerance 0.1 set from the pilot run
    // (gamma 1.489) before this check was committed.
    Rng prng(2025);
    auto pz = testing::random_zones(prng, 50, 40);
    for (auto& v : pz.origin) v /= 1000.0;
    for (auto& v : pz.dest) v /= 20.0;
    const auto mean = testing::expected_flows({1, 0.8, 1.2, 1.5}, pz);
    Matrix flows(50, 40);
    for (std::size_t r = 0; r < flows.data.size(); ++r) flows.data[r] = static_cast<double>(prng.poisson(mean.data[r]));
    const auto pois = fit_gravity(flows, pz.origin, pz.dest, pz.costs);
    const double gamma_err = std::fabs(pois.params.gamma - 1.5);
    return {ols_err < 1e-8 && gamma_err <= 0.1 && pois.converged,
            "log-OLS max exponent err " + fmt(ols_err) + " < 1e-8; Poisson gamma " + fmt(pois.params.gamma) +
                " (|err| " + fmt(gamma_err) + " <= 0.1)"};
}

// 6 -------------------------------------------------------------------------
Outcome huff_properties() {
    Rng rng(6);
    double worst_sum = 0.0, worst_scaled = 0.0;
    std::size_t inexact = 0;
    for (int t = 0; t < 1000; ++t) {
        const std::size_t n = 1 + rng.below(30);
        const HuffParams h{rng.uniform(-2, 3), rng.uniform(0, 3)};
        std::vector<double> a(n), c(n);
        for (auto& v : a) v = rng.uniform(0.1, 500);
        for (auto& v : c) v = rng.uniform(1, 90);
        const auto p = huff_probability(h, a, c);
        double s = 0.0;
        for (double v : p) s += v;
        worst_sum = std::max(worst_sum, std::fabs(s - 1.0));
        auto pow2 = a, any = a;
        const double k = std::ldexp(1.0, static_cast<int>(rng.below(41)) - 20);
        const double f = rng.uniform(0.01, 100);
        for (auto& v : pow2) v *= k;
        for (auto& v : any) v *= f;
        inexact += huff_probability(h, pow2, c) != p;
        const auto q = huff_probability(h, any, c);
        for (std::size_t j = 0; j < n; ++j) worst_scaled = std::max(worst_scaled, std::fabs(q[j] - p[j]));
    }
    return {worst_sum <= 1e-12 && inexact == 0 && worst_scaled < 1e-13,
            "max |sum p - 1| " + fmt(worst_sum) + " <= 1e-12 on 1000 instances; power-of-two scaling bit-identical in " +
                std::to_string(1000 - inexact) + "/1000; arbitrary scaling max diff " + fmt(worst_scaled)};
}

// 7 -------------------------------------------------------------------------
Outcome learning_happens() {
    const auto spec = ScenarioSpec::defaults();
    const auto city = generate(spec);
    SimGatConfig config;
    config.seed = spec.seed;
    const auto r = train(city.graph, city.flows, config);
    const double sim = evaluate_loss(r.model, city.graph, city.flows, r.split.val);
    const double intercept = intercept_baseline_loss(city.graph, city.flows, r.split);
    const auto gcn = train_baseline(BaselineKind::Gcn, city.graph, city.flows, config);
    const auto sage = train_baseline(BaselineKind::GraphSage, city.graph, city.flows, config);
    return {sim < intercept && sim < gcn.report.best_val_loss && sim < sage.report.best_val_loss,
            "val loss SIM-GAT " + fmt(sim, 8) + ", intercept " + fmt(intercept, 8) + ", GCN " +
                fmt(gcn.report.best_val_loss, 8) + ", GraphSAGE " + fmt(sage.report.best_val_loss, 8)};
}

// 8 -------------------------------------------------------------------------
Outcome deeplift_checks() {
    // Affine network: contributions equal w_i (x_i - ref_i).
    Rng rng(8);
    double affine_err = 0.0, affine_res = 0.0;
    for (int t = 0; t < 50; ++t) {
        const std::size_t d = 1 + rng.below(12);
        ad::Tape tape;
        ad::Tensor x({1, d}), w({d, 1}), ref({1, d});
        for (std::size_t i = 0; i < d; ++i) x[i] = rng.normal(0, 2), w[i] = rng.normal(0, 2), ref[i] = rng.normal(0, 1);
        auto xv = tape.leaf(x);
        auto y = ad::matmul(xv, tape.constant(w)) + tape.constant(ad::Tensor::scalar(rng.normal(0, 1)));
        const std::vector<ad::Var> in{xv};
        const std::vector<ad::Tensor> refs{ref};
        const auto r = simgat::deeplift(tape, y, 0, in, refs);
        for (std::size_t i = 0; i < d; ++i)
            affine_err = std::max(affine_err, std::fabs(r.contributions[0][i] - w[i] * (x[i] - ref[i])));
        affine_res = std::max(affine_res, r.residual);
    }

    // Frozen-softmax completeness on the desk graph.
    const auto desk = generate(ScenarioSpec::desk(3));
    const auto dcfg = desk_config(3);
    const auto dmodel = SimGatModel::init(dims_for(desk.graph, dcfg), dcfg);
    double frozen = 0.0, full = 0.0;
    for (std::size_t row = dcfg.lstm_window - 1; row < desk.graph.env.dates.size(); ++row) {
        for (const auto& a : attribute_day(dmodel, desk.graph, row, {SoftmaxMode::Frozen, 0}))
            frozen = std::max(frozen, a.residual);
        for (const auto& a : attribute_day(dmodel, desk.graph, row, {SoftmaxMode::Full, 0}))
            full = std::max(full, a.residual);
    }

    // Planted positive effect on chain_ratio. Contributions are relative to
    // the average cluster, so the sign is read where the feature is above it.
    auto spec = ScenarioSpec::defaults();
    spec.cluster_effects = {{"chain_ratio", 0.8}};
    const auto city = generate(spec);
    SimGatConfig config;
    config.seed = spec.seed;
    const auto trained = train(city.graph, city.flows, config);
    const auto& cols = city.graph.clusters.columns;
    const auto col = static_cast<std::size_t>(std::find(cols.begin(), cols.end(), "chain_ratio") - cols.begin());
    std::vector<double> above;
    for (auto row : trained.split.val)
        for (const auto& a : attribute_day(trained.model, city.graph, row, {SoftmaxMode::Full, 0}))
            if (city.graph.clusters.values(a.cluster, col) > 0.0) above.push_back(a.contributions[col]);
    const double median = summarize(above).median;

    return {affine_err < 1e-12 && affine_res < 1e-12 && frozen < 1e-9 && median > 0.0,
            "affine max err " + fmt(affine_err) + ", residual " + fmt(affine_res) + " < 1e-12; frozen residual " +
                fmt(frozen) + " < 1e-9 (full-model residual " + fmt(full) + ", finite); planted median " + fmt(median) +
                " > 0"};
}

// 9 -------------------------------------------------------------------------
std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

bool run_pipeline(const fs::path& dir) {
    fs::remove_all(dir);
    fs::create_directories(dir);
    std::ofstream(dir / "config.json") << R"({"seed": 7, "epochs": 40})" << '\n';
    const std::vector<std::string> steps = {
        "synth --seed 7 --out city",
        "train --city city/city.json --flows city/flows.csv --config config.json --out model.json",
        "eval --model model.json --city city/city.json --flows city/flows.csv --out metrics.json",
        "attribute --model model.json --city city/city.json --dates normal=2019-08-12 storm=2019-08-20 "
        "lockdown=2019-09-12 --group-by auto_ownership --k 3 --out attr"};
    for (const auto& s : steps) {
        const std::string cmd = "cd '" + dir.string() + "' && '" SIMGAT_CLI "' " + s + " >/dev/null 2>&1";
        const int raw = std::system(cmd.c_str());
        if (!WIFEXITED(raw) || WEXITSTATUS(raw) != 0) return false;
    }
    return true;
}

Outcome determinism() {
    const auto base = fs::temp_directory_path() / "simgat_acceptance";
    const fs::path a = base / "run_a", b = base / "run_b";
    if (!run_pipeline(a) || !run_pipeline(b)) return {false, "pipeline step failed"};
    std::size_t compared = 0;
    std::vector<std::string> differing;
    for (const auto& entry : fs::recursive_directory_iterator(a)) {
        if (!entry.is_regular_file()) continue;
        const auto rel = fs::relative(entry.path(), a);
        const bool manifest = rel.filename().string().ends_with("manifest.json");
        if (manifest) {
            // Wall time differs by design; inputs, hashes and config must not.
            auto ja = io::read_json(entry.path()), jb = io::read_json(b / rel);
            ja.erase("wall_seconds");
            jb.erase("wall_seconds");
            if (ja != jb) differing.push_back(rel.string());
        } else if (slurp(entry.path()) != slurp(b / rel)) {
            differing.push_back(rel.string());
        }
        ++compared;
    }
    std::string detail = std::to_string(compared) + " files compared (manifests without wall time)";
    for (const auto& d : differing) detail += "; differs: " + d;
    return {differing.empty() && compared >= 12, detail};
}

// 10 ------------------------------------------------------------------------
Outcome parameter_inventory() {
    std::size_t combos = 0, bad = 0;
    for (std::size_t h : {1, 2, 3, 8, 16, 32})
        for (std::size_t l : {1, 10, 13})
            for (std::size_t k : {1, 21})
                for (std::size_t s : {1, 11, 12})
                    for (std::size_t modes : {1, 2, 3}) {
                        SimGatConfig c;
                        c.hidden_dim = h;
                        const ModelDims d{l, k, s, h, modes};
                        const auto model = SimGatModel::init(d, c);
                        const auto inv = describe(model);
                        std::size_t tensors = 0;
                        for (const auto& p : model.params) tensors += p.value.size();
                        bad += inv.total != analytic_param_count(d) || tensors != inv.total ||
                               inv.analytic_total != inv.total;
                        ++combos;
                    }
    return {bad == 0, std::to_string(combos - bad) + "/" + std::to_string(combos) +
                          " (h, l, k, s, modes) combinations match the analytic formula; "
                          "the published total is documented, not asserted"};
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
        {"gradient correctness", gradient_correctness},
        {"attention normalization", attention_normalization},
        {"DBSCAN oracle equivalence", dbscan_equivalence},
        {"shortest-path oracle", shortest_paths},
        {"gravity recovery", gravity_recovery},
        {"Huff properties", huff_properties},
        {"learning happens", learning_happens},
        {"DeepLIFT", deeplift_checks},
        {"determinism", determinism},
        {"parameter inventory", parameter_inventory},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += !o.pass;
        std::cout << (o.pass ? "PASS" : "FAIL") << "  " << (i + 1) << ". " << criteria[i].first << ": " << o.detail
                  << std::endl;
    }
    std::cout << (criteria.size() - static_cast<std::size_t>(failed)) << "/" << criteria.size() << " criteria passed"
              << std::endl;
    return failed == 0 ? 0 : 1;
}
