#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "desk_city.hpp"
#include "simgat/simgat.hpp"
#include "test_support.hpp"

using namespace simgat;
using ad::Tape;
using ad::Tensor;
using ad::Var;

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
double leaky(double x, double s) { return x > 0 ? x : s * x; }

LstmVars lstm_leaves(Tape& tape, Rng& rng, std::size_t s, std::size_t h, double scale = 0.5) {
    LstmVars l;
    for (int g = 0; g < 4; ++g) {
        l.W[g] = tape.leaf(testing::random_tensor(rng, {s + h, h}, -scale, scale));
        l.b[g] = tape.leaf(testing::random_tensor(rng, {1, h}, -scale, scale));
    }
    return l;
}

}  // namespace

TEST_CASE("zero LSTM weights give a zero state") {
    Tape tape;
    Rng rng(1);
    LstmVars l;
    for (int g = 0; g < 4; ++g) {
        l.W[g] = tape.leaf(Tensor({5, 3}));
        l.b[g] = tape.leaf(Tensor({1, 3}));
    }
    Var w = encode_environment(tape.constant(testing::random_tensor(rng, {4, 2})), l, 4);
    for (double v : w.value().data()) CHECK(v == 0.0);
}

TEST_CASE("single-step LSTM matches the closed form") {
    Tape tape;
    Rng rng(2);
    const std::size_t s = 3, h = 2;
    LstmVars l = lstm_leaves(tape, rng, s, h);
    const Tensor x = testing::random_tensor(rng, {1, s});
    Var w = encode_environment(tape.constant(x), l, 1);
    for (std::size_t k = 0; k < h; ++k) {
        // Zero initial state: only the first s rows of each W act.
        double pre[4];
        for (int g = 0; g < 4; ++g) {
            pre[g] = l.b[g].value()[k];
            for (std::size_t r = 0; r < s; ++r) pre[g] += x[r] * l.W[g].value().at(r, k);
        }
        const double c = sigmoid(pre[0]) * std::tanh(pre[2]);
        CHECK(std::fabs(w.value()[k] - sigmoid(pre[3]) * std::tanh(c)) < 1e-15);
    }
}

TEST_CASE("LSTM rejects a short window") {
    Tape tape;
    Rng rng(3);
    LstmVars l = lstm_leaves(tape, rng, 2, 2);
    CHECK_THROWS_AS(encode_environment(tape.constant(Tensor({3, 2})), l, 4), ValidationError);
}

TEST_CASE("LSTM gradient passes a finite-difference check") {
    Rng rng(4);
    const std::size_t s = 3, h = 4, T = 5;
    const Tensor window = testing::random_tensor(rng, {T, s});
    const Tensor head = testing::random_tensor(rng, {h, 1});
    std::vector<ad::NamedTensor> params;
    for (const char* g : kLstmGates) {
        params.push_back({std::string("W_") + g, testing::random_tensor(rng, {s + h, h}, -0.6, 0.6)});
        params.push_back({std::string("b_") + g, testing::random_tensor(rng, {1, h}, -0.6, 0.6)});
    }
    auto closure = [&](Tape& tape, std::span<const Var> p) {
        LstmVars l;
        for (int g = 0; g < 4; ++g) {
            l.W[g] = p[2 * static_cast<std::size_t>(g)];
            l.b[g] = p[2 * static_cast<std::size_t>(g) + 1];
        }
        Var w = encode_environment(tape.constant(window), l, T);
        return ad::sum(ad::matmul(w, tape.constant(head)));
    };
    auto report = ad::grad_check(closure, params, 1e-5, 1e-5);
    CHECK(report.pass);
    CHECK(report.max_rel_error < 1e-5);
}

TEST_CASE("attention scores") {
    Rng rng(5);
    const std::size_t n = 4, m = 3, h = 2;
    Tape tape;
    Var u = tape.leaf(testing::random_tensor(rng, {n, h}));
    Var v = tape.leaf(testing::random_tensor(rng, {m, h}));
    Var w = tape.leaf(testing::random_tensor(rng, {1, h}));

    SUBCASE("zero vector gives zero scores") {
        Var e = attention_scores(u, v, w, tape.leaf(Tensor({3 * h, 1})), 0.2);
        for (double x : e.value().data()) CHECK(x == 0.0);
    }
    SUBCASE("weight only on the env block is pair independent") {
        Tensor a({3 * h, 1});
        a[2 * h] = 0.7;
        a[2 * h + 1] = -1.3;
        Var e = attention_scores(u, v, w, tape.leaf(a), 0.2);
        for (double x : e.value().data()) CHECK(x == e.value()[0]);
    }
    SUBCASE("matches a per-pair dot product") {
        const Tensor a = testing::random_tensor(rng, {3 * h, 1});
        Var e = attention_scores(u, v, w, tape.leaf(a), 0.2);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < m; ++j) {
                double dot = 0.0;
                for (std::size_t k = 0; k < h; ++k)
                    dot += a[k] * u.value().at(i, k) + a[h + k] * v.value().at(j, k) + a[2 * h + k] * w.value()[k];
                CHECK(std::fabs(e.value().at(i, j) - leaky(dot, 0.2)) < 1e-15);
            }
    }
    SUBCASE("dimension mismatch is rejected") {
        CHECK_THROWS_AS(attention_scores(u, v, w, tape.leaf(Tensor({3 * h + 1, 1})), 0.2), ValidationError);
    }
}

TEST_CASE("cost modification") {
    Rng rng(6);
    Tape tape;
    const std::size_t n = 3, m = 4;
    Var e = tape.leaf(testing::random_tensor(rng, {n, m}));
    const Tensor same = cost_modify(e, tape.constant(Tensor({m, n}, 1.0))).value();
    for (std::size_t k = 0; k < same.size(); ++k) CHECK(same[k] == e.value()[k]);

    const Tensor c = testing::random_tensor(rng, {m, n}, 1.0, 30.0);
    Tensor c2 = c;
    for (double& x : c2.data()) x *= 2.0;
    Var a = cost_modify(e, tape.constant(c));
    Var b = cost_modify(e, tape.constant(c2));
    for (std::size_t k = 0; k < a.value().size(); ++k) CHECK(b.value()[k] == doctest::Approx(a.value()[k] / 2.0));

    Tape sweep;
    Var pos = sweep.constant(Tensor({1, 1}, 0.8));
    double prev = std::numeric_limits<double>::infinity();
    for (double cost = 1.0; cost <= 100.0; cost += 1.0) {
        const double now = cost_modify(pos, sweep.constant(Tensor({1, 1}, cost))).value()[0];
        CHECK(now < prev);
        prev = now;
    }
    CHECK_THROWS_AS(cost_modify(e, tape.constant(Tensor({n, m}, 1.0))), ValidationError);
}

TEST_CASE("cost combiner") {
    Rng rng(7);
    Tape tape;
    const Tensor c = testing::random_tensor(rng, {4, 3}, 1.0, 40.0);
    // softplus(ln(e - 1)) = 1
    Var one = tape.leaf(Tensor({1}, std::log(std::expm1(1.0))));
    const Var single[] = {tape.constant(c)};
    Var combined = combine_costs(single, one);
    for (std::size_t k = 0; k < c.size(); ++k) CHECK(std::fabs(combined.value()[k] - (c[k] + 1e-3)) < 1e-13);

    const Var twin[] = {tape.constant(c), tape.constant(c)};
    Var w2 = tape.leaf(Tensor::vector({0.3, -1.2}));
    Var both = combine_costs(twin, w2);
    const double ratio = (both.value()[0] - 1e-3) / c[0];
    for (std::size_t k = 0; k < c.size(); ++k) CHECK((both.value()[k] - 1e-3) / c[k] == doctest::Approx(ratio));

    const Tensor d = testing::random_tensor(rng, {4, 3}, 1.0, 40.0);
    const Tensor w = testing::random_tensor(rng, {2}, -2.0, 2.0);
    const Var pair[] = {tape.constant(c), tape.constant(d)};
    Var mixed = combine_costs(pair, tape.leaf(w));
    auto sp = [](double x) { return std::log1p(std::exp(x)); };
    for (std::size_t k = 0; k < c.size(); ++k)
        CHECK(std::fabs(mixed.value()[k] - (sp(w[0]) * c[k] + sp(w[1]) * d[k] + 1e-3)) < 1e-14 * mixed.value()[k] + 1e-14);

    CHECK_THROWS_AS(combine_costs({}, w2), ValidationError);
    CHECK_THROWS_AS(combine_costs(single, w2), ValidationError);
}

TEST_CASE("attention normalization") {
    Rng rng(8);
    Tape tape;
    Var flat = normalize_attention(tape.constant(Tensor({5, 2}, 0.37)), 0.2);
    for (double x : flat.value().data()) CHECK(x == doctest::Approx(0.2).epsilon(1e-15));

    Var single = normalize_attention(tape.constant(testing::random_tensor(rng, {1, 6})), 0.2);
    for (double x : single.value().data()) CHECK(x == 1.0);

    const Tensor s = testing::random_tensor(rng, {7, 4}, -3, 3);
    Var alpha = normalize_attention(tape.constant(s), 0.2);
    for (std::size_t j = 0; j < 4; ++j) {
        double z = 0.0, col = 0.0;
        for (std::size_t i = 0; i < 7; ++i) z += std::exp(leaky(s.at(i, j), 0.2));
        for (std::size_t i = 0; i < 7; ++i) {
            CHECK(std::fabs(alpha.value().at(i, j) - std::exp(leaky(s.at(i, j), 0.2)) / z) < 1e-14);
            col += alpha.value().at(i, j);
        }
        CHECK(std::fabs(col - 1.0) < 1e-12);
    }
}

TEST_CASE("cluster state aggregation") {
    Rng rng(9);
    Tape tape;
    const std::size_t n = 3, m = 5, h = 2;
    const Tensor v = testing::random_tensor(rng, {m, h});
    const Tensor wv = testing::random_tensor(rng, {h, h});

    Var uniform = aggregate_cluster_state(tape.constant(Tensor({n, m}, 1.0 / m)), tape.constant(v), tape.constant(wv));
    for (std::size_t k = 0; k < h; ++k) {
        double mean = 0.0;
        for (std::size_t j = 0; j < m; ++j)
            for (std::size_t r = 0; r < h; ++r) mean += v.at(j, r) * wv.at(r, k) / m;
        for (std::size_t i = 0; i < n; ++i) CHECK(uniform.value().at(i, k) == doctest::Approx(mean).epsilon(1e-14));
    }

    const Tensor alpha = testing::random_tensor(rng, {n, m}, 0, 1);
    Var hstate = aggregate_cluster_state(tape.constant(alpha), tape.constant(v), tape.constant(wv));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < h; ++k) {
            double acc = 0.0;
            for (std::size_t j = 0; j < m; ++j) {
                double proj = 0.0;
                for (std::size_t r = 0; r < h; ++r) proj += v.at(j, r) * wv.at(r, k);
                acc += alpha.at(i, j) * proj;
            }
            CHECK(std::fabs(hstate.value().at(i, k) - acc) < 1e-14);
        }

    // One neighborhood: alpha comes from the softmax over clusters, not 1.
    const Tensor scores = testing::random_tensor(rng, {n, 1});
    Var a1 = normalize_attention(tape.constant(scores), 0.2);
    const Tensor v1 = testing::random_tensor(rng, {1, h});
    Var h1 = aggregate_cluster_state(a1, tape.constant(v1), tape.constant(wv));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < h; ++k) {
            double proj = 0.0;
            for (std::size_t r = 0; r < h; ++r) proj += v1[r] * wv.at(r, k);
            CHECK(std::fabs(h1.value().at(i, k) - a1.value()[i] * proj) < 1e-15);
        }
}

TEST_CASE("poisson loss") {
    const std::vector<double> ones(6, 1.0), zeros(6, 0.0);
    CHECK(poisson_loss(ones, ones) == 1.0);
    CHECK(poisson_loss(ones, zeros) == 1.0);
    const std::vector<double> neg = {1.0, -1.0};
    CHECK_THROWS_AS(poisson_loss(std::vector<double>{1.0, 1.0}, neg), ValidationError);
    for (double y : {0.5, 3.0, 12.0}) {
        double best = std::numeric_limits<double>::infinity(), argmin = 0.0;
        for (double lam = 0.01; lam < 30.0; lam += 0.01) {
            const double l = poisson_loss(std::vector<double>{lam}, std::vector<double>{y});
            if (l < best) {
                best = l;
                argmin = lam;
            }
        }
        CHECK(std::fabs(argmin - y) < 0.011);
    }
    Tape tape;
    Var lam = tape.leaf(Tensor({2, 2}, 1.0));
    CHECK(poisson_loss(lam, tape.constant(Tensor({2, 2}, 1.0))).value().item() == 1.0);
}

TEST_CASE("parameter inventory equals the analytic formula") {
    SimGatConfig c;
    c.hidden_dim = 1;
    auto unit = SimGatModel::init({1, 1, 1, 1, 1}, c);
    CHECK(analytic_param_count({1, 1, 1, 1, 1}) == 27);
    CHECK(describe(unit).total == 27);
    CHECK(unit.param_count() == 27);

    // h = 8 versus h = 16 at l = 10, k = 21, s = 12, two modes.
    auto count = [](std::size_t h) { return analytic_param_count({10, 21, 12, h, 2}); };
    CHECK(count(8) == 10 * 8 + 8 + 21 * 8 + 8 + 4 * (20 * 8 + 8) + 24 + 64 + (3 * 64 + 8) + 9 + 2);
    CHECK(count(8) == 1235);
    CHECK(count(16) == 3491);

    Rng rng(10);
    for (int t = 0; t < 30; ++t) {
        const ModelDims d{1 + rng.below(12), 1 + rng.below(25), 1 + rng.below(14), 1 + rng.below(10), 1 + rng.below(3)};
        SimGatConfig cfg;
        cfg.hidden_dim = d.hidden;
        auto model = SimGatModel::init(d, cfg);
        auto inv = describe(model);
        CHECK(inv.total == analytic_param_count(d));
        CHECK(inv.analytic_total == inv.total);
        CHECK(model.param_count() == inv.total);
    }
}

TEST_CASE("predictions are positive, head-only when zeroed, and equivariant") {
    auto city = testing::desk_city();
    auto cfg = testing::desk_config();
    auto model = SimGatModel::init(dims_for(city.graph, cfg), cfg);
    const std::size_t row = 6;

    for (std::uint64_t s = 0; s < 5; ++s) {
        cfg.seed = s;
        auto draw = SimGatModel::init(dims_for(city.graph, cfg), cfg);
        for (double v : predict_flows(draw, city.graph, row).data()) CHECK(v > 0.0);
    }

    auto zeroed = model;
    for (double& v : zeroed.param("w_head").data()) v = 0.0;
    zeroed.param("b_head")[0] = 0.75;
    for (double v : predict_flows(zeroed, city.graph, row).data()) CHECK(v == std::exp(0.75));

    // Reverse neighborhood order (features and cost rows).
    CityGraph flipped = city.graph;
    const std::size_t m = flipped.n_neighborhoods();
    for (std::size_t j = 0; j < m; ++j) {
        for (std::size_t c = 0; c < flipped.neighborhoods.values.cols; ++c)
            flipped.neighborhoods.values(j, c) = city.graph.neighborhoods.values(m - 1 - j, c);
        for (std::size_t k = 0; k < flipped.costs.size(); ++k)
            for (std::size_t i = 0; i < flipped.n_clusters(); ++i)
                flipped.costs[k].minutes(j, i) = city.graph.costs[k].minutes(m - 1 - j, i);
    }
    const Tensor a = predict_flows(model, city.graph, row);
    const Tensor b = predict_flows(model, flipped, row);
    for (std::size_t i = 0; i < city.graph.n_clusters(); ++i)
        for (std::size_t j = 0; j < m; ++j) CHECK(std::fabs(a.at(i, j) - b.at(i, m - 1 - j)) < 1e-12 * a.at(i, j));
}

TEST_CASE("end-to-end gradient check on the desk graph") {
    auto city = testing::desk_city();
    auto cfg = testing::desk_config();
    auto model = SimGatModel::init(dims_for(city.graph, cfg), cfg);
    const std::vector<std::size_t> rows = {4, 8, 12};
    std::vector<DayTensors> days;
    std::vector<Tensor> counts;
    for (auto r : rows) {
        days.push_back(day_tensors(city.graph, cfg, r));
        counts.push_back(observed_counts(city.graph, city.flows, r));
    }
    model.param("b_head")[0] = 1.0;
    auto closure = [&](Tape& tape, std::span<const Var> leaves) {
        const ModelVars vars = bind_params(leaves);
        Var total;
        for (std::size_t d = 0; d < days.size(); ++d) {
            Var l = poisson_loss(forward(tape, vars, model, days[d]).lambda, tape.constant(counts[d]));
            total = d == 0 ? l : total + l;
        }
        return total;
    };
    auto report = ad::grad_check(closure, model.params, 1e-5, 1e-4);
    for (const auto& e : report.entries) CHECK_MESSAGE(e.pass, e.name << " rel err " << e.max_rel_error);
    CHECK(report.pass);
}

TEST_CASE("train: determinism, checkpointing and normalization") {
    auto city = testing::desk_city();
    auto cfg = testing::desk_config();
    std::vector<double> worst_col_error;
    auto a = train(city.graph, city.flows, cfg, [&](const EpochInfo& info) {
        double worst = 0.0;
        for (std::size_t r : {4u, 9u, 13u}) {
            const Tensor alpha = attention_weights(*info.model, city.graph, r);
            for (std::size_t j = 0; j < alpha.dim(1); ++j) {
                double col = 0.0;
                for (std::size_t i = 0; i < alpha.dim(0); ++i) col += alpha.at(i, j);
                worst = std::max(worst, std::fabs(col - 1.0));
            }
        }
        worst_col_error.push_back(worst);
    });
    auto b = train(city.graph, city.flows, cfg);
    CHECK(a.report == b.report);
    CHECK(a.model.params.size() == b.model.params.size());
    for (std::size_t k = 0; k < a.model.params.size(); ++k) CHECK(a.model.params[k].value == b.model.params[k].value);

    CHECK(worst_col_error.size() == cfg.epochs);
    for (double e : worst_col_error) CHECK(e < 1e-9);

    const auto& vl = a.report.val_loss;
    CHECK(a.report.best_val_loss == *std::min_element(vl.begin(), vl.end()));
    CHECK(vl[a.report.best_epoch - 1] == a.report.best_val_loss);
    CHECK(evaluate_loss(a.model, city.graph, city.flows, a.split.val) == doctest::Approx(a.report.best_val_loss));

    CHECK(a.split.train.size() + a.split.val.size() == 14 - cfg.lstm_window + 1);
    for (std::size_t r : a.split.val) CHECK(std::find(a.split.train.begin(), a.split.train.end(), r) == a.split.train.end());
}

TEST_CASE("train rejects too few days and bad configs") {
    auto city = testing::desk_city();
    auto cfg = testing::desk_config();
    cfg.lstm_window = 14;
    CHECK_THROWS_AS(train(city.graph, city.flows, cfg), ValidationError);
    cfg = testing::desk_config();
    cfg.learning_rate = 0.0;
    CHECK_THROWS_AS(train(city.graph, city.flows, cfg), ValidationError);
}

TEST_CASE("loss at initialization equals the analytic loss on self-generated counts") {
    auto city = testing::desk_city();
    auto cfg = testing::desk_config();
    auto model = SimGatModel::init(dims_for(city.graph, cfg), cfg);
    model.param("b_head")[0] = 1.5;
    Rng rng(11);
    FlowTable flows(city.graph.n_neighborhoods(), city.graph.n_clusters());
    std::vector<std::size_t> rows;
    double analytic = 0.0;
    for (std::size_t r = cfg.lstm_window - 1; r < city.graph.env.values.rows; ++r) {
        const Tensor lambda = predict_flows(model, city.graph, r);
        double day = 0.0;
        for (std::size_t i = 0; i < lambda.dim(0); ++i)
            for (std::size_t j = 0; j < lambda.dim(1); ++j) {
                const auto y = rng.poisson(lambda.at(i, j));
                if (y > 0) flows.add(city.graph.env.dates[r], j, i, y);
                day += lambda.at(i, j) - static_cast<double>(y) * std::log(lambda.at(i, j));
            }
        analytic += day / static_cast<double>(lambda.size());
        rows.push_back(r);
    }
    analytic /= static_cast<double>(rows.size());
    CHECK(evaluate_loss(model, city.graph, flows, rows) == doctest::Approx(analytic).epsilon(1e-12));
}

TEST_CASE("GraphSAGE isolated node depends only on its own features") {
    Rng rng(12);
    const std::size_t n = 4, l = 3;
    Matrix adj(n, n);
    adj(0, 1) = adj(1, 0) = adj(1, 2) = adj(2, 1) = 1.0;  // node 3 isolated
    auto model = init_baseline(BaselineKind::GraphSage, l, 5, 2, adj, 3);
    Tensor x = testing::random_tensor(rng, {n, l});
    const Tensor before = baseline_predict(model, x);
    for (std::size_t c = 0; c < l; ++c) x.at(0, c) += 1.0;
    const Tensor after = baseline_predict(model, x);
    CHECK(after.at(3, 0) == before.at(3, 0));
    CHECK(after.at(3, 1) == before.at(3, 1));
    CHECK(after.at(1, 0) != before.at(1, 0));
}

TEST_CASE("GCN with identity propagation is a per-cluster MLP") {
    Rng rng(13);
    const std::size_t n = 5, l = 3, h = 4, m = 2;
    auto model = init_baseline(BaselineKind::Gcn, l, h, m, Matrix(n, n), 4);
    const Tensor x = testing::random_tensor(rng, {n, l});
    const Tensor out = baseline_predict(model, x);
    auto get = [&](const char* name) -> const Tensor& {
        for (const auto& p : model.params)
            if (p.name == name) return p.value;
        throw std::runtime_error("missing");
    };
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> h1(h), h2(h);
        for (std::size_t k = 0; k < h; ++k) {
            double s = get("b1")[k];
            for (std::size_t c = 0; c < l; ++c) s += x.at(i, c) * get("W1").at(c, k);
            h1[k] = leaky(s, model.slope);
        }
        for (std::size_t k = 0; k < h; ++k) {
            double s = get("b2")[k];
            for (std::size_t c = 0; c < h; ++c) s += h1[c] * get("W2").at(c, k);
            h2[k] = leaky(s, model.slope);
        }
        for (std::size_t j = 0; j < m; ++j) {
            double s = get("b_head")[j];
            for (std::size_t c = 0; c < h; ++c) s += h2[c] * get("W_head").at(c, j);
            CHECK(std::fabs(out.at(i, j) - std::exp(s)) < 1e-13 * std::exp(s));
        }
    }
}

TEST_CASE("knn adjacency is symmetric with at least k neighbors") {
    Rng rng(14);
    std::vector<Point> pts(12);
    for (auto& p : pts) p = {rng.uniform(0, 1000), rng.uniform(0, 1000)};
    auto a = knn_adjacency(pts, 5);
    for (std::size_t i = 0; i < 12; ++i) {
        double deg = 0.0;
        CHECK(a(i, i) == 0.0);
        for (std::size_t j = 0; j < 12; ++j) {
            CHECK(a(i, j) == a(j, i));
            deg += a(i, j);
        }
        CHECK(deg >= 5.0);
    }
}

TEST_CASE("baselines train to finite losses") {
    auto city = testing::desk_city();
    auto cfg = testing::desk_config();
    for (auto kind : {BaselineKind::Gcn, BaselineKind::GraphSage}) {
        auto r = train_baseline(kind, city.graph, city.flows, cfg);
        for (double v : r.report.train_loss) CHECK(std::isfinite(v));
        for (double v : r.report.val_loss) CHECK(std::isfinite(v));
    }
}

TEST_CASE("grid search equals independent runs") {
    auto city = testing::desk_city();
    GridSpec spec;
    spec.base = testing::desk_config();
    spec.base.epochs = 3;
    spec.learning_rates = {0.01, 0.05};
    spec.hidden_dims = {2, 3};
    auto trials = grid_search(city.graph, city.flows, spec, 3);
    REQUIRE(trials.size() == 4);
    CHECK(trials[3].config.learning_rate == 0.05);
    CHECK(trials[3].config.hidden_dim == 3);
    for (const auto& t : trials) CHECK(t.report == train(city.graph, city.flows, t.config).report);
}
