#include <algorithm>
#include <cmath>

#include "simgat/simgat.hpp"

namespace simgat {

using ad::Tensor;
using ad::Var;

const char* combiner_name(CostCombiner c) { return c == CostCombiner::Learned ? "learned" : "single"; }

CostCombiner parse_combiner(std::string_view name) {
    if (name == "learned") return CostCombiner::Learned;
    if (name == "single") return CostCombiner::Single;
    throw ValidationError("unknown cost combiner '" + std::string(name) + "'");
}

void SimGatConfig::validate() const {
    IssueList issues;
    if (hidden_dim < 1) issues.add("hidden_dim must be >= 1");
    if (lstm_window < 1) issues.add("lstm_window must be >= 1");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) issues.add("learning_rate must be > 0");
    if (batch_size < 1) issues.add("batch_size must be >= 1");
    if (epochs < 1) issues.add("epochs must be >= 1");
    if (!std::isfinite(leaky_slope) || leaky_slope < 0.0 || leaky_slope >= 1.0)
        issues.add("leaky_slope must be in [0, 1)");
    if (!(val_fraction > 0.0 && val_fraction < 1.0)) issues.add("val_fraction must be in (0, 1)");
    issues.throw_if_any();
}

std::size_t analytic_param_count(const ModelDims& d) {
    const std::size_t h = d.hidden, l = d.cluster_features, k = d.neighborhood_features, s = d.env_features;
    return l * h + h + k * h + h + 4 * ((s + h) * h + h) + 3 * h + h * h + (3 * h * h + h) + (h + 1) + d.modes;
}

std::vector<std::size_t> env_input_columns(const CityGraph& graph, bool include_visit_lag) {
    std::vector<std::size_t> cols;
    for (std::size_t c = 0; c < graph.env.columns.size(); ++c)
        if (include_visit_lag || graph.env.columns[c] != "total_visits_prev") cols.push_back(c);
    return cols;
}

ModelDims dims_for(const CityGraph& graph, const SimGatConfig& config) {
    if (graph.costs.empty()) throw ValidationError("city graph has no cost matrices");
    return {graph.clusters.values.cols, graph.neighborhoods.values.cols,
            env_input_columns(graph, config.include_visit_lag).size(), config.hidden_dim,
            config.cost_combiner == CostCombiner::Single ? 1 : graph.costs.size()};
}

SimGatModel SimGatModel::init(const ModelDims& d, const SimGatConfig& config) {
    config.validate();
    if (d.modes < 1) throw ValidationError("model needs at least one cost mode");
    if (d.hidden != config.hidden_dim) throw ValidationError("dims.hidden disagrees with config.hidden_dim");
    SimGatModel model{config, d, {}};
    Rng rng(config.seed);
    const std::size_t h = d.hidden;
    auto weight = [&](std::string name, std::size_t rows, std::size_t cols) {
        const double r = std::sqrt(6.0 / static_cast<double>(rows + cols));
        Tensor t({rows, cols});
        for (double& v : t.data()) v = rng.uniform(-r, r);
        model.params.push_back({std::move(name), std::move(t)});
    };
    auto bias = [&](std::string name, std::size_t cols, double fill = 0.0) {
        model.params.push_back({std::move(name), Tensor({1, cols}, fill)});
    };
    weight("W_u", d.cluster_features, h);
    bias("b_u", h);
    weight("W_v", d.neighborhood_features, h);
    bias("b_v", h);
    for (const char* gate : kLstmGates) {
        weight(std::string("W_") + gate, d.env_features + h, h);
        bias(std::string("b_") + gate, h, std::string(gate) == "f" ? 1.0 : 0.0);
    }
    weight("a_tilde", 3 * h, 1);
    weight("W_val", h, h);
    weight("W_out", 3 * h, h);
    bias("b_out", h);
    weight("w_head", h, 1);
    bias("b_head", 1);
    const double share = 1.0 / static_cast<double>(d.modes);
    model.params.push_back({"combiner", Tensor({d.modes}, std::log(std::expm1(share)))});
    return model;
}

const Tensor& SimGatModel::param(std::string_view name) const {
    for (const auto& p : params)
        if (p.name == name) return p.value;
    throw ValidationError("model has no parameter '" + std::string(name) + "'");
}

Tensor& SimGatModel::param(std::string_view name) {
    return const_cast<Tensor&>(std::as_const(*this).param(name));
}

std::size_t SimGatModel::param_count() const {
    std::size_t n = 0;
    for (const auto& p : params) n += p.value.size();
    return n;
}

ParamInventory describe(const SimGatModel& model) {
    const std::vector<std::pair<std::string, std::vector<std::string>>> layout = {
        {"cluster_embedding", {"W_u", "b_u"}},
        {"neighborhood_embedding", {"W_v", "b_v"}},
        {"lstm", {"W_i", "b_i", "W_f", "b_f", "W_g", "b_g", "W_o", "b_o"}},
        {"attention", {"a_tilde"}},
        {"value_projection", {"W_val"}},
        {"pair_projection", {"W_out", "b_out"}},
        {"output_head", {"w_head", "b_head"}},
        {"cost_combiner", {"combiner"}},
    };
    ParamInventory inv;
    for (const auto& [component, names] : layout) {
        ParamGroup g{component, names, 0};
        for (const auto& n : names) g.count += model.param(n).size();
        inv.total += g.count;
        inv.groups.push_back(std::move(g));
    }
    inv.analytic_total = analytic_param_count(model.dims);
    return inv;
}

// ---------------------------------------------------------------------------

Var encode_environment(Var window, const LstmVars& lstm, std::size_t steps) {
    if (window.shape().size() != 2 || window.shape()[0] < steps || steps == 0)
        throw ValidationError("environment window has " +
                              std::to_string(window.shape().empty() ? 0 : window.shape()[0]) + " rows, need " +
                              std::to_string(steps));
    ad::Tape& tape = *window.tape();
    const std::size_t rows = window.shape()[0];
    const std::size_t h = lstm.W[0].shape()[1];
    Var state = tape.constant(Tensor({1, h}));
    Var cell = tape.constant(Tensor({1, h}));
    for (std::size_t t = rows - steps; t < rows; ++t) {
        Var z = ad::concat({ad::slice(window, 0, t, t + 1), state}, 1);
        Var i = ad::sigmoid(ad::matmul(z, lstm.W[0]) + lstm.b[0]);
        Var f = ad::sigmoid(ad::matmul(z, lstm.W[1]) + lstm.b[1]);
        Var g = ad::tanh(ad::matmul(z, lstm.W[2]) + lstm.b[2]);
        Var o = ad::sigmoid(ad::matmul(z, lstm.W[3]) + lstm.b[3]);
        cell = f * cell + i * g;
        state = o * ad::tanh(cell);
    }
    return state;
}

Var attention_scores(Var u_emb, Var v_emb, Var w_emb, Var a_tilde, double slope) {
    const std::size_t h = u_emb.shape().at(1);
    if (v_emb.shape().at(1) != h || w_emb.shape() != ad::Shape{1, h} || a_tilde.shape() != ad::Shape{3 * h, 1})
        throw ValidationError("attention inputs disagree on hidden dimension " + std::to_string(h));
    Var su = ad::matmul(u_emb, ad::slice(a_tilde, 0, 0, h));
    Var sv = ad::matmul(v_emb, ad::slice(a_tilde, 0, h, 2 * h));
    Var sw = ad::matmul(w_emb, ad::slice(a_tilde, 0, 2 * h, 3 * h));
    return ad::leaky_relu(su + ad::transpose(sv) + sw, slope);
}

Var combine_costs(std::span<const Var> costs, Var weights) {
    if (costs.empty()) throw ValidationError("combine_costs needs at least one cost matrix");
    if (weights.shape() != ad::Shape{costs.size()})
        throw ValidationError("combiner has " + ad::shape_str(weights.shape()) + " weights for " +
                              std::to_string(costs.size()) + " modes");
    Var sp = ad::softplus(weights);
    Var total;
    for (std::size_t k = 0; k < costs.size(); ++k) {
        Var term = ad::slice(sp, 0, k, k + 1) * costs[k];
        total = k == 0 ? term : total + term;
    }
    ad::Tape& tape = *weights.tape();
    return total + tape.constant(Tensor::scalar(kCombinerEpsilon));
}

Var cost_modify(Var e, Var combined_cost) {
    if (combined_cost.shape().size() != 2 || e.shape() != ad::Shape{combined_cost.shape()[1], combined_cost.shape()[0]})
        throw ValidationError("cost matrix " + ad::shape_str(combined_cost.shape()) + " does not match scores " +
                              ad::shape_str(e.shape()));
    return e / ad::transpose(combined_cost);
}

Var normalize_attention(Var e_tilde, double slope) { return ad::softmax(ad::leaky_relu(e_tilde, slope), 0); }

Var aggregate_cluster_state(Var alpha, Var v_emb, Var w_val) { return ad::matmul(alpha, ad::matmul(v_emb, w_val)); }

Var poisson_loss(Var lambda, Var observed) {
    if (lambda.shape() != observed.shape())
        throw ValidationError("loss shapes differ: " + ad::shape_str(lambda.shape()) + " vs " +
                              ad::shape_str(observed.shape()));
    for (double y : observed.value().data())
        if (y < 0.0) throw ValidationError("negative count in loss target");
    return ad::mean(lambda - observed * ad::ln(lambda, 1e-12));
}

double poisson_loss(std::span<const double> lambda, std::span<const double> observed) {
    if (lambda.size() != observed.size() || lambda.empty()) throw ValidationError("loss inputs differ in size");
    double total = 0.0;
    for (std::size_t k = 0; k < lambda.size(); ++k) {
        if (observed[k] < 0.0) throw ValidationError("negative count in loss target");
        total += lambda[k] - observed[k] * std::log(std::max(lambda[k], 1e-12));
    }
    return total / static_cast<double>(lambda.size());
}

ModelVars bind_params(std::span<const Var> v) {
    if (v.size() != 19) throw ValidationError("expected 19 parameter leaves, got " + std::to_string(v.size()));
    ModelVars m;
    m.W_u = v[0];
    m.b_u = v[1];
    m.W_v = v[2];
    m.b_v = v[3];
    for (std::size_t g = 0; g < 4; ++g) {
        m.lstm.W[g] = v[4 + 2 * g];
        m.lstm.b[g] = v[5 + 2 * g];
    }
    m.a_tilde = v[12];
    m.W_val = v[13];
    m.W_out = v[14];
    m.b_out = v[15];
    m.w_head = v[16];
    m.b_head = v[17];
    m.combiner = v[18];
    m.all.assign(v.begin(), v.end());
    return m;
}

ModelVars bind_params(ad::Tape& tape, const SimGatModel& model) {
    std::vector<Var> leaves;
    for (const auto& p : model.params) leaves.push_back(tape.leaf(p.value, p.name));
    return bind_params(leaves);
}

Forward forward(ad::Tape& tape, const ModelVars& p, const SimGatModel& model, const DayTensors& day,
                bool inputs_as_leaves) {
    auto input = [&](const Tensor& t, const char* label) {
        if (!inputs_as_leaves) return tape.constant(t);
        return tape.leaf(t, label);
    };
    const double slope = model.config.leaky_slope;
    const std::size_t h = model.dims.hidden;
    Forward f;
    f.U = input(day.clusters, "input:clusters");
    f.V = input(day.neighborhoods, "input:neighborhoods");
    f.window = input(day.window, "input:env");
    for (const auto& c : day.costs) f.costs.push_back(tape.constant(c));

    f.u_emb = ad::matmul(f.U, p.W_u) + p.b_u;
    f.v_emb = ad::matmul(f.V, p.W_v) + p.b_v;
    f.w_emb = encode_environment(f.window, p.lstm, model.config.lstm_window);
    f.e = attention_scores(f.u_emb, f.v_emb, f.w_emb, p.a_tilde, slope);
    f.combined_cost = combine_costs(f.costs, p.combiner);
    f.e_tilde = cost_modify(f.e, f.combined_cost);
    f.alpha = normalize_attention(f.e_tilde, slope);

    // head . (W_out [u || v || w] + b_out), split by block so it broadcasts
    // over pairs without materializing n*m*3h inputs.
    Var qu = ad::matmul(f.u_emb, ad::matmul(ad::slice(p.W_out, 0, 0, h), p.w_head));
    Var qv = ad::matmul(f.v_emb, ad::matmul(ad::slice(p.W_out, 0, h, 2 * h), p.w_head));
    Var qw = ad::matmul(ad::matmul(f.w_emb, ad::slice(p.W_out, 0, 2 * h, 3 * h)) + p.b_out, p.w_head);
    f.pair_score = qu + ad::transpose(qv) + qw;
    f.lambda = ad::exp(f.alpha * f.pair_score + p.b_head);
    return f;
}

DayTensors day_tensors(const CityGraph& graph, const SimGatConfig& config, std::size_t env_row) {
    const std::size_t T = config.lstm_window;
    if (env_row >= graph.env.values.rows) throw ValidationError("env row " + std::to_string(env_row) + " out of range");
    if (env_row + 1 < T)
        throw ValidationError("day " + graph.env.dates[env_row].iso() + " has only " + std::to_string(env_row + 1) +
                              " days of history, window needs " + std::to_string(T));
    auto to_tensor = [](const Matrix& m) { return Tensor::matrix(m.rows, m.cols, m.data); };
    DayTensors d;
    d.clusters = to_tensor(graph.clusters.values);
    d.neighborhoods = to_tensor(graph.neighborhoods.values);
    const auto cols = env_input_columns(graph, config.include_visit_lag);
    d.window = Tensor({T, cols.size()});
    for (std::size_t t = 0; t < T; ++t)
        for (std::size_t c = 0; c < cols.size(); ++c) d.window.at(t, c) = graph.env.values(env_row + 1 - T + t, cols[c]);
    const std::size_t layers = config.cost_combiner == CostCombiner::Single ? 1 : graph.costs.size();
    for (std::size_t k = 0; k < layers; ++k) d.costs.push_back(to_tensor(graph.costs[k].minutes));
    return d;
}

Tensor predict_flows(const SimGatModel& model, const CityGraph& graph, std::size_t env_row) {
    ad::Tape tape;
    auto vars = bind_params(tape, model);
    return forward(tape, vars, model, day_tensors(graph, model.config, env_row)).lambda.value();
}

Tensor attention_weights(const SimGatModel& model, const CityGraph& graph, std::size_t env_row) {
    ad::Tape tape;
    auto vars = bind_params(tape, model);
    return forward(tape, vars, model, day_tensors(graph, model.config, env_row)).alpha.value();
}

}  // namespace simgat
