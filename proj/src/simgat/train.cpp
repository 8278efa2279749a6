#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

#include "simgat/simgat.hpp"

namespace simgat {

using ad::Tensor;
using ad::Var;

namespace {

// Stream offsets so weight init, the day split and batch order draw from
// independent generators under one user seed.
constexpr std::uint64_t kSplitStream = 0x5851f42d4c957f2dULL;
constexpr std::uint64_t kShuffleStream = 0x9e3779b97f4a7c15ULL;

struct Day {
    DayTensors inputs;
    Tensor counts;
};

double mean_count(const std::vector<const Tensor*>& counts) {
    double total = 0.0;
    std::size_t n = 0;
    for (const auto* c : counts) {
        for (double v : c->data()) total += v;
        n += c->size();
    }
    return n == 0 ? 0.0 : total / static_cast<double>(n);
}

}  // namespace

DaySplit split_days(const CityGraph& graph, std::size_t window, double val_fraction, std::uint64_t seed) {
    const std::size_t rows = graph.env.values.rows;
    if (window == 0 || rows < window + 1)
        throw ValidationError("need at least " + std::to_string(window + 1) + " days of data, got " +
                              std::to_string(rows));
    std::vector<std::size_t> usable;
    for (std::size_t r = window - 1; r < rows; ++r) usable.push_back(r);
    Rng rng(seed ^ kSplitStream);
    rng.shuffle(usable.begin(), usable.end());
    const auto d = static_cast<double>(usable.size());
    std::size_t n_val = static_cast<std::size_t>(std::llround(val_fraction * d));
    n_val = std::clamp<std::size_t>(n_val, 1, usable.size() - 1);
    DaySplit split;
    split.val.assign(usable.begin(), usable.begin() + static_cast<std::ptrdiff_t>(n_val));
    split.train.assign(usable.begin() + static_cast<std::ptrdiff_t>(n_val), usable.end());
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.val.begin(), split.val.end());
    return split;
}

Tensor observed_counts(const CityGraph& graph, const FlowTable& flows, std::size_t env_row) {
    if (flows.n_clusters() != graph.n_clusters() || flows.n_neighborhoods() != graph.n_neighborhoods())
        throw ValidationError("flow table dimensions do not match the city graph");
    const Matrix dense = flows.dense(graph.env.dates.at(env_row));
    return Tensor::matrix(dense.rows, dense.cols, dense.data);
}

double evaluate_loss(const SimGatModel& model, const CityGraph& graph, const FlowTable& flows,
                     std::span<const std::size_t> env_rows) {
    if (env_rows.empty()) throw ValidationError("no days to evaluate");
    double total = 0.0;
    for (std::size_t r : env_rows) {
        const Tensor lambda = predict_flows(model, graph, r);
        const Tensor y = observed_counts(graph, flows, r);
        total += poisson_loss(lambda.data(), y.data());
    }
    return total / static_cast<double>(env_rows.size());
}

ad::GradCheckReport check_gradients(const SimGatModel& model, const CityGraph& graph, const FlowTable& flows,
                                    std::span<const std::size_t> env_rows, double step, double tolerance) {
    if (env_rows.empty()) throw ValidationError("no days to check");
    std::vector<DayTensors> days;
    std::vector<Tensor> counts;
    for (std::size_t r : env_rows) {
        days.push_back(day_tensors(graph, model.config, r));
        counts.push_back(observed_counts(graph, flows, r));
    }
    auto closure = [&](ad::Tape& tape, std::span<const ad::Var> leaves) {
        const ModelVars vars = bind_params(leaves);
        ad::Var total;
        for (std::size_t d = 0; d < days.size(); ++d) {
            ad::Var l = poisson_loss(forward(tape, vars, model, days[d]).lambda, tape.constant(counts[d]));
            total = d == 0 ? l : total + l;
        }
        return total;
    };
    return ad::grad_check(closure, model.params, step, tolerance);
}

double intercept_baseline_loss(const CityGraph& graph, const FlowTable& flows, const DaySplit& split) {
    std::vector<Tensor> train_counts;
    for (std::size_t r : split.train) train_counts.push_back(observed_counts(graph, flows, r));
    std::vector<const Tensor*> ptrs;
    for (const auto& t : train_counts) ptrs.push_back(&t);
    const double rate = mean_count(ptrs);
    double total = 0.0;
    for (std::size_t r : split.val) {
        const Tensor y = observed_counts(graph, flows, r);
        const std::vector<double> lambda(y.size(), rate);
        total += poisson_loss(lambda, y.data());
    }
    return total / static_cast<double>(split.val.size());
}

void Adam::step(std::vector<ad::NamedTensor>& params, const std::vector<Tensor>& grads) {
    if (m.empty()) {
        for (const auto& p : params) {
            m.emplace_back(p.value.shape());
            v.emplace_back(p.value.shape());
        }
    }
    ++t;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    for (std::size_t k = 0; k < params.size(); ++k) {
        auto w = params[k].value.data();
        const auto g = grads[k].data();
        auto mk = m[k].data();
        auto vk = v[k].data();
        for (std::size_t i = 0; i < w.size(); ++i) {
            mk[i] = beta1 * mk[i] + (1.0 - beta1) * g[i];
            vk[i] = beta2 * vk[i] + (1.0 - beta2) * g[i] * g[i];
            w[i] -= lr * (mk[i] / c1) / (std::sqrt(vk[i] / c2) + eps);
        }
    }
}

TrainResult train(const CityGraph& graph, const FlowTable& flows, const SimGatConfig& config,
                  const EpochCallback& on_epoch) {
    const auto start = std::chrono::steady_clock::now();
    config.validate();
    TrainResult result{SimGatModel::init(dims_for(graph, config), config), {}, {}, 0.0};
    SimGatModel& model = result.model;
    result.split = split_days(graph, config.lstm_window, config.val_fraction, config.seed);
    const DaySplit& split = result.split;

    std::vector<Day> train_days, val_days;
    for (std::size_t r : split.train)
        train_days.push_back({day_tensors(graph, config, r), observed_counts(graph, flows, r)});
    for (std::size_t r : split.val) val_days.push_back({day_tensors(graph, config, r), observed_counts(graph, flows, r)});

    std::vector<const Tensor*> train_counts;
    for (const auto& d : train_days) train_counts.push_back(&d.counts);
    const double rate = mean_count(train_counts);
    if (rate > 0.0) model.param("b_head")[0] = std::log(rate);

    auto day_loss = [&](ad::Tape& tape, const ModelVars& vars, const Day& d) {
        const Forward f = forward(tape, vars, model, d.inputs);
        return poisson_loss(f.lambda, tape.constant(d.counts));
    };
    auto val_loss = [&] {
        double total = 0.0;
        for (const auto& d : val_days) {
            ad::Tape tape;
            total += day_loss(tape, bind_params(tape, model), d).value().item();
        }
        return total / static_cast<double>(val_days.size());
    };

    Adam adam(config.learning_rate);
    Rng order_rng(config.seed ^ kShuffleStream);
    std::vector<std::size_t> order(train_days.size());
    SimGatModel best = model;
    TrainReport& report = result.report;
    report.seed = config.seed;
    report.best_val_loss = std::numeric_limits<double>::infinity();

    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        order_rng.shuffle(order.begin(), order.end());
        double epoch_total = 0.0;
        for (std::size_t start_idx = 0; start_idx < order.size(); start_idx += config.batch_size) {
            const std::size_t end_idx = std::min(order.size(), start_idx + config.batch_size);
            ad::Tape tape;
            const ModelVars vars = bind_params(tape, model);
            Var total;
            for (std::size_t b = start_idx; b < end_idx; ++b) {
                Var l = day_loss(tape, vars, train_days[order[b]]);
                total = b == start_idx ? l : total + l;
            }
            const double count = static_cast<double>(end_idx - start_idx);
            Var loss = ad::scale(total, 1.0 / count);
            tape.backward(loss);
            epoch_total += loss.value().item() * count;
            std::vector<Tensor> grads;
            for (const Var& v : vars.all) grads.push_back(tape.grad(v));
            adam.step(model.params, grads);
        }
        const double train_loss = epoch_total / static_cast<double>(train_days.size());
        const double vl = val_loss();
        report.train_loss.push_back(train_loss);
        report.val_loss.push_back(vl);
        if (vl < report.best_val_loss) {
            report.best_val_loss = vl;
            report.best_epoch = epoch;
            best = model;
        }
        if (on_epoch) on_epoch({epoch, train_loss, vl, &model});
    }
    model = std::move(best);
    result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
}

}  // namespace simgat
