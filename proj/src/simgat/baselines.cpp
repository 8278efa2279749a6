#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "simgat/simgat.hpp"

namespace simgat {

using ad::Tensor;
using ad::Var;

namespace {

constexpr std::uint64_t kShuffleStream = 0x9e3779b97f4a7c15ULL;

Tensor propagation_matrix(const BaselineModel& model) {
    const Matrix& a = model.adjacency;
    const std::size_t n = a.rows;
    Tensor p({n, n});
    if (model.kind == BaselineKind::Gcn) {
        // D^-1/2 (A + I) D^-1/2
        std::vector<double> deg(n, 1.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) deg[i] += a(i, j);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                p.at(i, j) = (a(i, j) + (i == j ? 1.0 : 0.0)) / std::sqrt(deg[i] * deg[j]);
    } else {
        // Mean over neighbors; isolated nodes aggregate to zero.
        for (std::size_t i = 0; i < n; ++i) {
            double deg = 0.0;
            for (std::size_t j = 0; j < n; ++j) deg += a(i, j);
            if (deg == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) p.at(i, j) = a(i, j) / deg;
        }
    }
    return p;
}

}  // namespace

const char* baseline_name(BaselineKind k) { return k == BaselineKind::Gcn ? "gcn" : "graphsage"; }

Matrix knn_adjacency(std::span<const Point> xy, std::size_t k) {
    const std::size_t n = xy.size();
    Matrix a(n, n);
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        auto dist = [&](std::size_t j) { return std::hypot(xy[j].x - xy[i].x, xy[j].y - xy[i].y); };
        std::stable_sort(idx.begin(), idx.end(), [&](std::size_t p, std::size_t q) { return dist(p) < dist(q); });
        std::size_t taken = 0;
        for (std::size_t j : idx) {
            if (taken == k) break;
            if (j == i) continue;
            a(i, j) = a(j, i) = 1.0;
            ++taken;
        }
    }
    return a;
}

BaselineModel init_baseline(BaselineKind kind, std::size_t in, std::size_t hidden, std::size_t outputs,
                            const Matrix& adjacency, std::uint64_t seed) {
    if (adjacency.rows != adjacency.cols) throw ValidationError("adjacency must be square");
    if (hidden < 1 || in < 1 || outputs < 1) throw ValidationError("baseline dimensions must be >= 1");
    BaselineModel model{kind, {}, adjacency};
    Rng rng(seed);
    auto weight = [&](std::string name, std::size_t rows, std::size_t cols) {
        const double r = std::sqrt(6.0 / static_cast<double>(rows + cols));
        Tensor t({rows, cols});
        for (double& v : t.data()) v = rng.uniform(-r, r);
        model.params.push_back({std::move(name), std::move(t)});
    };
    auto bias = [&](std::string name, std::size_t cols) { model.params.push_back({std::move(name), Tensor({1, cols})}); };
    const bool sage = kind == BaselineKind::GraphSage;
    weight("W1", in, hidden);
    if (sage) weight("Wn1", in, hidden);
    bias("b1", hidden);
    weight("W2", hidden, hidden);
    if (sage) weight("Wn2", hidden, hidden);
    bias("b2", hidden);
    weight("W_head", hidden, outputs);
    bias("b_head", outputs);
    return model;
}

Var baseline_forward(ad::Tape& tape, std::span<const Var> p, const BaselineModel& model, Var x) {
    const bool sage = model.kind == BaselineKind::GraphSage;
    if (p.size() != (sage ? 8u : 6u)) throw ValidationError("wrong number of baseline parameters");
    if (x.shape().at(0) != model.adjacency.rows) throw ValidationError("feature rows do not match adjacency");
    Var prop = tape.constant(propagation_matrix(model));
    const double slope = model.slope;
    Var h = x;
    std::size_t k = 0;
    for (int layer = 0; layer < 2; ++layer) {
        if (sage) {
            Var self = ad::matmul(h, p[k]);
            Var neigh = ad::matmul(ad::matmul(prop, h), p[k + 1]);
            h = ad::leaky_relu(self + neigh + p[k + 2], slope);
            k += 3;
        } else {
            h = ad::leaky_relu(ad::matmul(ad::matmul(prop, h), p[k]) + p[k + 1], slope);
            k += 2;
        }
    }
    return ad::exp(ad::matmul(h, p[k]) + p[k + 1]);
}

Tensor baseline_predict(const BaselineModel& model, const Tensor& x) {
    ad::Tape tape;
    std::vector<Var> leaves;
    for (const auto& q : model.params) leaves.push_back(tape.leaf(q.value, q.name));
    return baseline_forward(tape, leaves, model, tape.constant(x)).value();
}

BaselineResult train_baseline(BaselineKind kind, const CityGraph& graph, const FlowTable& flows,
                              const SimGatConfig& config, const std::optional<Matrix>& adjacency) {
    config.validate();
    const DaySplit split = split_days(graph, config.lstm_window, config.val_fraction, config.seed);
    const Matrix adj = adjacency ? *adjacency : knn_adjacency(graph.clusters.xy, 5);
    BaselineResult result{init_baseline(kind, graph.clusters.values.cols, config.hidden_dim, graph.n_neighborhoods(),
                                        adj, config.seed),
                          {}};
    BaselineModel& model = result.model;
    model.slope = config.leaky_slope;
    const Tensor x = Tensor::matrix(graph.clusters.values.rows, graph.clusters.values.cols, graph.clusters.values.data);

    std::vector<Tensor> train_y, val_y;
    for (std::size_t r : split.train) train_y.push_back(observed_counts(graph, flows, r));
    for (std::size_t r : split.val) val_y.push_back(observed_counts(graph, flows, r));
    double total = 0.0;
    std::size_t cells = 0;
    for (const auto& y : train_y) {
        for (double v : y.data()) total += v;
        cells += y.size();
    }
    if (total > 0.0) {
        const double log_rate = std::log(total / static_cast<double>(cells));
        for (double& b : model.params.back().value.data()) b = log_rate;
    }

    auto val_loss = [&] {
        const Tensor lambda = baseline_predict(model, x);
        double sum = 0.0;
        for (const auto& y : val_y) sum += poisson_loss(lambda.data(), y.data());
        return sum / static_cast<double>(val_y.size());
    };

    Adam adam(config.learning_rate);
    Rng order_rng(config.seed ^ kShuffleStream);
    std::vector<std::size_t> order(train_y.size());
    BaselineModel best = model;
    TrainReport& report = result.report;
    report.seed = config.seed;
    report.best_val_loss = std::numeric_limits<double>::infinity();

    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        order_rng.shuffle(order.begin(), order.end());
        double epoch_total = 0.0;
        for (std::size_t s = 0; s < order.size(); s += config.batch_size) {
            const std::size_t e = std::min(order.size(), s + config.batch_size);
            ad::Tape tape;
            std::vector<Var> leaves;
            for (const auto& q : model.params) leaves.push_back(tape.leaf(q.value, q.name));
            Var lambda = baseline_forward(tape, leaves, model, tape.constant(x));
            Var sum;
            for (std::size_t b = s; b < e; ++b) {
                Var l = poisson_loss(lambda, tape.constant(train_y[order[b]]));
                sum = b == s ? l : sum + l;
            }
            const double count = static_cast<double>(e - s);
            Var loss = ad::scale(sum, 1.0 / count);
            tape.backward(loss);
            epoch_total += loss.value().item() * count;
            std::vector<Tensor> grads;
            for (const Var& v : leaves) grads.push_back(tape.grad(v));
            adam.step(model.params, grads);
        }
        const double vl = val_loss();
        report.train_loss.push_back(epoch_total / static_cast<double>(train_y.size()));
        report.val_loss.push_back(vl);
        if (vl < report.best_val_loss) {
            report.best_val_loss = vl;
            report.best_epoch = epoch;
            best = model;
        }
    }
    model = std::move(best);
    return result;
}

}  // namespace simgat
