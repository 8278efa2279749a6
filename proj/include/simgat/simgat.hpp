#pragma once

// Cost-modified graph attention flow model, its training loop, and the GCN /
// GraphSAGE baselines.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "simgat/autodiff.hpp"
#include "simgat/domain.hpp"
#include "simgat/rng.hpp"

namespace simgat {

enum class CostCombiner { Learned, Single };

const char* combiner_name(CostCombiner c);
CostCombiner parse_combiner(std::string_view name);

struct SimGatConfig {
    std::size_t hidden_dim = 8;
    std::size_t lstm_window = 7;
    double learning_rate = 0.01;
    std::size_t batch_size = 8;
    std::size_t epochs = 100;
    double leaky_slope = 0.2;
    std::uint64_t seed = 7;
    bool include_visit_lag = true;
    CostCombiner cost_combiner = CostCombiner::Learned;
    double val_fraction = 0.2;

    /// Throws ValidationError listing every bad field.
    void validate() const;
    bool operator==(const SimGatConfig&) const = default;
};

/// Input widths seen by a model.
struct ModelDims {
    std::size_t cluster_features = 0;       // l
    std::size_t neighborhood_features = 0;  // k
    std::size_t env_features = 0;           // s
    std::size_t hidden = 0;                 // h
    std::size_t modes = 0;                  // learned combiner weights
    bool operator==(const ModelDims&) const = default;
};

/// l*h+h + k*h+h + 4((s+h)h+h) + 3h + h*h + (3h*h+h) + (h+1) + modes.
std::size_t analytic_param_count(const ModelDims& d);

/// Dims a config implies for a graph (drops the visit-lag column when off;
/// a single combiner uses one cost layer).
ModelDims dims_for(const CityGraph& graph, const SimGatConfig& config);

/// Env column indices used as model input.
std::vector<std::size_t> env_input_columns(const CityGraph& graph, bool include_visit_lag);

inline constexpr const char* kLstmGates[4] = {"i", "f", "g", "o"};

/// Parameters in a fixed order. Names: W_u b_u W_v b_v W_i b_i W_f b_f W_g b_g
/// W_o b_o a_tilde W_val W_out b_out w_head b_head combiner.
struct SimGatModel {
    SimGatConfig config;
    ModelDims dims;
    std::vector<ad::NamedTensor> params;

    /// Glorot-uniform weights from config.seed, zero biases (forget gate 1),
    /// combiner weights giving each mode an equal share.
    static SimGatModel init(const ModelDims& dims, const SimGatConfig& config);

    const ad::Tensor& param(std::string_view name) const;
    ad::Tensor& param(std::string_view name);
    std::size_t param_count() const;
};

struct ParamGroup {
    std::string component;
    std::vector<std::string> names;
    std::size_t count = 0;
};

struct ParamInventory {
    std::vector<ParamGroup> groups;
    std::size_t total = 0;
    std::size_t analytic_total = 0;
};

ParamInventory describe(const SimGatModel& model);

// ---------------------------------------------------------------------------
// Graph building blocks. Matrices are row-major; n clusters, m neighborhoods.

struct LstmVars {
    ad::Var W[4];  // (s+h) x h, gates i f g o
    ad::Var b[4];  // 1 x h
};

/// Final hidden state (1 x h) of an LSTM run over the rows of `window`.
/// Throws when the window has fewer than `steps` rows.
ad::Var encode_environment(ad::Var window, const LstmVars& lstm, std::size_t steps);

/// e[i][j] = leaky(a_tilde . [U_emb_i || V_emb_j || w]), n x m.
ad::Var attention_scores(ad::Var u_emb, ad::Var v_emb, ad::Var w_emb, ad::Var a_tilde, double slope);

/// sum_mode softplus(weight_mode) * cost_mode + kCombinerEpsilon, m x n.
ad::Var combine_costs(std::span<const ad::Var> costs, ad::Var weights);
inline constexpr double kCombinerEpsilon = 1e-3;

/// e / cost^T.
ad::Var cost_modify(ad::Var e, ad::Var combined_cost);

/// Column-wise softmax (over clusters) of leaky(e_tilde).
ad::Var normalize_attention(ad::Var e_tilde, double slope);

/// H = alpha (V_emb W_val), n x h.
ad::Var aggregate_cluster_state(ad::Var alpha, ad::Var v_emb, ad::Var w_val);

/// mean(lambda - y ln max(lambda, 1e-12)).
ad::Var poisson_loss(ad::Var lambda, ad::Var observed);
/// Scalar Poisson loss of plain numbers; throws on negative counts.
double poisson_loss(std::span<const double> lambda, std::span<const double> observed);

struct ModelVars {
    ad::Var W_u, b_u, W_v, b_v;
    LstmVars lstm;
    ad::Var a_tilde, W_val, W_out, b_out, w_head, b_head, combiner;
    std::vector<ad::Var> all;  // in SimGatModel::params order
};

/// Parameter leaves labeled with their names.
ModelVars bind_params(ad::Tape& tape, const SimGatModel& model);
/// Same, for an externally created set of leaves in params order.
ModelVars bind_params(std::span<const ad::Var> leaves);

/// Inputs of one day.
struct DayTensors {
    ad::Tensor clusters;       // n x l
    ad::Tensor neighborhoods;  // m x k
    ad::Tensor window;         // T x s
    std::vector<ad::Tensor> costs;  // m x n per mode
};

/// Every intermediate of one forward pass.
struct Forward {
    ad::Var U, V, window;  // inputs
    std::vector<ad::Var> costs;
    ad::Var u_emb, v_emb, w_emb;
    ad::Var e, combined_cost, e_tilde, alpha, pair_score, lambda;
};

/// Full pipeline: embeddings, LSTM, scores, cost division, softmax, pair
/// projection, scalar head, exp. Inputs are leaves when `inputs_as_leaves`
/// (so they can be attributed), constants otherwise.
Forward forward(ad::Tape& tape, const ModelVars& vars, const SimGatModel& model, const DayTensors& day,
                bool inputs_as_leaves = false);

/// Tensors for the day at env row `env_row` (window ends on that day).
DayTensors day_tensors(const CityGraph& graph, const SimGatConfig& config, std::size_t env_row);

/// lambda (n x m) for the day at `env_row`.
ad::Tensor predict_flows(const SimGatModel& model, const CityGraph& graph, std::size_t env_row);
/// Attention weights (n x m) for the day at `env_row`.
ad::Tensor attention_weights(const SimGatModel& model, const CityGraph& graph, std::size_t env_row);

// ---------------------------------------------------------------------------
// Training

/// Days usable for supervision (env rows with a full window) split into
/// train/val by a seeded shuffle.
struct DaySplit {
    std::vector<std::size_t> train;  // env rows
    std::vector<std::size_t> val;
};

DaySplit split_days(const CityGraph& graph, std::size_t window, double val_fraction, std::uint64_t seed);

struct TrainReport {
    std::vector<double> train_loss;
    std::vector<double> val_loss;
    std::size_t best_epoch = 0;  // 1-based
    double best_val_loss = 0.0;
    std::uint64_t seed = 0;
    bool operator==(const TrainReport&) const = default;
};

struct TrainResult {
    SimGatModel model;  // best checkpoint
    TrainReport report;
    DaySplit split;
    double wall_seconds = 0.0;  // not part of the report
};

struct EpochInfo {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    const SimGatModel* model = nullptr;  // current weights
};

using EpochCallback = std::function<void(const EpochInfo&)>;

/// Mean per-day loss over `env_rows`.
double evaluate_loss(const SimGatModel& model, const CityGraph& graph, const FlowTable& flows,
                     std::span<const std::size_t> env_rows);

/// Observed counts (n x m) on the date of `env_row`.
ad::Tensor observed_counts(const CityGraph& graph, const FlowTable& flows, std::size_t env_row);

/// Adam, minibatches of days, best-validation checkpoint.
TrainResult train(const CityGraph& graph, const FlowTable& flows, const SimGatConfig& config,
                  const EpochCallback& on_epoch = {});

/// Finite-difference check of every parameter's gradient of the summed
/// Poisson loss over `env_rows`.
ad::GradCheckReport check_gradients(const SimGatModel& model, const CityGraph& graph, const FlowTable& flows,
                                    std::span<const std::size_t> env_rows, double step = 1e-5,
                                    double tolerance = 1e-4);

/// Loss on `val` of the constant rate equal to the mean count over `train`.
double intercept_baseline_loss(const CityGraph& graph, const FlowTable& flows, const DaySplit& split);

struct Adam {
    double lr, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    std::size_t t = 0;
    std::vector<ad::Tensor> m, v;

    explicit Adam(double learning_rate) : lr(learning_rate) {}
    void step(std::vector<ad::NamedTensor>& params, const std::vector<ad::Tensor>& grads);
};

// ---------------------------------------------------------------------------
// Baselines over the cluster-only graph

enum class BaselineKind { Gcn, GraphSage };

const char* baseline_name(BaselineKind k);

/// Symmetric k-nearest-neighbor adjacency (0/1, zero diagonal).
Matrix knn_adjacency(std::span<const Point> xy, std::size_t k = 5);

struct BaselineModel {
    BaselineKind kind = BaselineKind::Gcn;
    std::vector<ad::NamedTensor> params;  // W1 [Wn1] b1 W2 [Wn2] b2 W_head b_head
    Matrix adjacency;
    double slope = 0.2;  // leaky_relu between layers
};

BaselineModel init_baseline(BaselineKind kind, std::size_t in_features, std::size_t hidden, std::size_t n_outputs,
                            const Matrix& adjacency, std::uint64_t seed);

/// lambda (n x m) on a tape, from cluster features X (n x l).
ad::Var baseline_forward(ad::Tape& tape, std::span<const ad::Var> params, const BaselineModel& model, ad::Var x);
ad::Tensor baseline_predict(const BaselineModel& model, const ad::Tensor& x);

struct BaselineResult {
    BaselineModel model;
    TrainReport report;
};

/// Trains on the same day split, loss and optimizer settings as SIM-GAT.
BaselineResult train_baseline(BaselineKind kind, const CityGraph& graph, const FlowTable& flows,
                              const SimGatConfig& config, const std::optional<Matrix>& adjacency = std::nullopt);

// ---------------------------------------------------------------------------
// Grid search

struct GridSpec {
    SimGatConfig base;
    std::vector<double> learning_rates;
    std::vector<std::size_t> batch_sizes;
    std::vector<std::size_t> hidden_dims;
};

struct GridTrial {
    SimGatConfig config;
    TrainReport report;
};

/// Every combination, trained in parallel; results in combination order.
std::vector<GridTrial> grid_search(const CityGraph& graph, const FlowTable& flows, const GridSpec& spec,
                                   std::size_t threads = 0);

}  // namespace simgat
