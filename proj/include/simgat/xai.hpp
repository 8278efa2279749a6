#pragma once

// DeepLIFT attribution of predicted visits to model inputs.

#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "simgat/autodiff.hpp"
#include "simgat/simgat.hpp"

namespace simgat {

struct DeepLiftResult {
    std::vector<ad::Tensor> contributions;  // per input, multiplier * (x - x_ref)
    double output = 0.0;                    // f(x), with frozen nodes at reference values
    double reference_output = 0.0;          // f(x_ref)
    double residual = 0.0;                  // |sum of contributions - (output - reference_output)|
};

/// DeepLIFT on a recorded graph. `element` picks one entry of `output`.
/// Linear ops pass multipliers through unchanged, elementwise nonlinearities
/// use the Rescale rule (secant slope, derivative when the input moves less
/// than 1e-7). Nodes in `frozen` hold their reference-input value in both
/// evaluations and pass nothing back. Throws when `output` is an input leaf.
DeepLiftResult deeplift(const ad::Tape& tape, ad::Var output, std::size_t element, std::span<const ad::Var> inputs,
                        std::span<const ad::Tensor> references, const std::set<std::size_t>& frozen = {});

enum class SoftmaxMode {
    Full,    // attention recomputed for the reference input
    Frozen,  // attention fixed at its reference-input value
};

struct Attribution {
    std::size_t cluster = 0;
    std::size_t neighborhood = 0;
    std::size_t env_row = 0;
    std::vector<double> contributions;  // per cluster feature of the target cluster
    double cluster_inputs = 0.0;        // sum over all cluster rows
    double neighborhood_inputs = 0.0;
    double env_inputs = 0.0;
    double delta = 0.0;  // lambda(x) - lambda(x_ref)
    double residual = 0.0;
};

struct AttributionOptions {
    SoftmaxMode mode = SoftmaxMode::Full;
    std::size_t threads = 1;
};

/// Reference input: zeros for the standardized cluster, neighborhood and
/// environment inputs (the average city). Target: lambda[cluster][neighborhood].
Attribution deeplift_attribute(const SimGatModel& model, const CityGraph& graph, std::size_t env_row,
                               std::size_t cluster, std::size_t neighborhood, const AttributionOptions& options = {});

/// Every (cluster, neighborhood) pair of one day, cluster-major.
std::vector<Attribution> attribute_day(const SimGatModel& model, const CityGraph& graph, std::size_t env_row,
                                       const AttributionOptions& options = {});

struct Summary {
    double min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0, mean = 0.0;
    std::size_t count = 0;
    bool operator==(const Summary&) const = default;
};

/// Box-plot statistics; quartiles by linear interpolation between order
/// statistics. Throws on empty input.
Summary summarize(std::vector<double> values);

struct FeatureSummary {
    std::string feature;
    Summary summary;
    bool operator==(const FeatureSummary&) const = default;
};

/// Per-feature summaries of the contributions in `attributions`.
std::vector<FeatureSummary> summarize_features(const std::vector<std::string>& features,
                                               std::span<const Attribution> attributions);

struct ScenarioResult {
    std::string name;
    Date date;
    std::vector<Attribution> attributions;
    std::vector<FeatureSummary> summaries;
};

/// One summary set per named date. Throws when a date has no env record or
/// lacks a full window.
std::vector<ScenarioResult> scenario_contrast(const SimGatModel& model, const CityGraph& graph,
                                              const std::vector<std::pair<std::string, Date>>& scenarios,
                                              const AttributionOptions& options = {});

struct ScatterPoint {
    std::size_t neighborhood = 0;
    std::string feature;
    double attribute_value = 0.0;
    double contribution = 0.0;
};

struct GroupContrast {
    std::string attribute;
    Date date;
    std::vector<std::size_t> top;     // highest attribute values first
    std::vector<std::size_t> bottom;  // lowest first
    std::vector<FeatureSummary> top_summaries;
    std::vector<FeatureSummary> bottom_summaries;
    std::vector<ScatterPoint> scatter;  // every neighborhood, every feature
};

/// Top-k versus bottom-k neighborhoods by a raw neighborhood attribute.
/// Throws when k is 0 or above m/2, or when the attribute is constant.
GroupContrast group_contrast(const SimGatModel& model, const CityGraph& graph, Date date,
                             const std::string& attribute, std::size_t k, const AttributionOptions& options = {});

}  // namespace simgat
