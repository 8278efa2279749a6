#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "simgat/parallel.hpp"
#include "simgat/xai.hpp"

namespace simgat {

using ad::Tensor;
using ad::Var;

DeepLiftResult deeplift(const ad::Tape& tape, Var output, std::size_t element, std::span<const Var> inputs,
                        std::span<const Tensor> references, const std::set<std::size_t>& frozen) {
    if (tape.op(output.id()) == ad::Op::Leaf) throw ValidationError("attribution target is an input, not a computation");
    if (inputs.size() != references.size()) throw ValidationError("one reference per input is required");
    if (element >= output.value().size()) throw ValidationError("attribution element out of range");

    std::map<std::size_t, Tensor> ref_inputs;
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        if (references[k].shape() != inputs[k].shape())
            throw ValidationError("reference shape " + ad::shape_str(references[k].shape()) + " does not match input " +
                                  ad::shape_str(inputs[k].shape()));
        ref_inputs.emplace(inputs[k].id(), references[k]);
    }
    const std::vector<Tensor> ref = tape.replay(ref_inputs);
    std::vector<Tensor> actual;
    if (frozen.empty()) {
        actual.assign(tape.values().begin(), tape.values().end());
    } else {
        std::map<std::size_t, Tensor> pinned;
        for (std::size_t id : frozen) pinned.emplace(id, ref[id]);
        actual = tape.replay(pinned);
    }

    Tensor seed(output.shape(), 0.0);
    seed[element] = 1.0;
    const auto mult = tape.propagate(output.id(), seed, actual, ref, frozen);

    DeepLiftResult r;
    r.output = actual[output.id()][element];
    r.reference_output = ref[output.id()][element];
    double total = 0.0;
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        const std::size_t id = inputs[k].id();
        Tensor c(inputs[k].shape(), 0.0);
        if (mult[id].size() != 0) {
            for (std::size_t e = 0; e < c.size(); ++e) c[e] = mult[id][e] * (actual[id][e] - ref[id][e]);
        }
        for (double v : c.data()) total += v;
        r.contributions.push_back(std::move(c));
    }
    r.residual = std::fabs(total - (r.output - r.reference_output));
    return r;
}

namespace {

// One tape per day; every pair reuses it.
class DayAttributor {
public:
    DayAttributor(const SimGatModel& model, const CityGraph& graph, std::size_t env_row, SoftmaxMode mode)
        : env_row_(env_row) {
        const ModelVars vars = bind_params(tape_, model);
        f_ = forward(tape_, vars, model, day_tensors(graph, model.config, env_row), true);
        inputs_ = {f_.U, f_.V, f_.window};
        for (const Var& v : inputs_) refs_.emplace_back(v.shape(), 0.0);
        if (mode == SoftmaxMode::Frozen) frozen_.insert(f_.alpha.id());
    }

    Attribution pair(std::size_t i, std::size_t j) const {
        const std::size_t m = f_.lambda.shape()[1];
        if (i >= f_.lambda.shape()[0] || j >= m) throw ValidationError("attribution target out of range");
        const auto r = deeplift(tape_, f_.lambda, i * m + j, inputs_, refs_, frozen_);
        Attribution a;
        a.cluster = i;
        a.neighborhood = j;
        a.env_row = env_row_;
        const Tensor& cu = r.contributions[0];
        const std::size_t l = cu.dim(1);
        for (std::size_t c = 0; c < l; ++c) a.contributions.push_back(cu.at(i, c));
        auto total = [](const Tensor& t) { return std::accumulate(t.data().begin(), t.data().end(), 0.0); };
        a.cluster_inputs = total(cu);
        a.neighborhood_inputs = total(r.contributions[1]);
        a.env_inputs = total(r.contributions[2]);
        a.delta = r.output - r.reference_output;
        a.residual = r.residual;
        return a;
    }

    std::size_t n() const { return f_.lambda.shape()[0]; }
    std::size_t m() const { return f_.lambda.shape()[1]; }

private:
    ad::Tape tape_;
    Forward f_;
    std::vector<Var> inputs_;
    std::vector<Tensor> refs_;
    std::set<std::size_t> frozen_;
    std::size_t env_row_;
};

std::size_t row_of(const CityGraph& graph, Date date) {
    auto row = graph.env.index_of(date);
    if (!row) throw ValidationError("no environment record for " + date.iso());
    return *row;
}

}  // namespace

Attribution deeplift_attribute(const SimGatModel& model, const CityGraph& graph, std::size_t env_row,
                               std::size_t cluster, std::size_t neighborhood, const AttributionOptions& options) {
    return DayAttributor(model, graph, env_row, options.mode).pair(cluster, neighborhood);
}

std::vector<Attribution> attribute_day(const SimGatModel& model, const CityGraph& graph, std::size_t env_row,
                                       const AttributionOptions& options) {
    const DayAttributor day(model, graph, env_row, options.mode);
    std::vector<Attribution> out(day.n() * day.m());
    parallel_for(out.size(), [&](std::size_t k) { out[k] = day.pair(k / day.m(), k % day.m()); },
                 options.threads == 0 ? default_threads() : options.threads);
    return out;
}

Summary summarize(std::vector<double> v) {
    if (v.empty()) throw ValidationError("cannot summarize an empty sample");
    std::sort(v.begin(), v.end());
    auto quantile = [&](double q) {
        const double pos = q * static_cast<double>(v.size() - 1);
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        const std::size_t hi = std::min(lo + 1, v.size() - 1);
        return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
    };
    Summary s;
    s.min = v.front();
    s.max = v.back();
    s.q1 = quantile(0.25);
    s.median = quantile(0.5);
    s.q3 = quantile(0.75);
    s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    s.count = v.size();
    return s;
}

std::vector<FeatureSummary> summarize_features(const std::vector<std::string>& features,
                                               std::span<const Attribution> attributions) {
    std::vector<FeatureSummary> out;
    for (std::size_t f = 0; f < features.size(); ++f) {
        std::vector<double> values;
        for (const auto& a : attributions) values.push_back(a.contributions.at(f));
        out.push_back({features[f], summarize(std::move(values))});
    }
    return out;
}

std::vector<ScenarioResult> scenario_contrast(const SimGatModel& model, const CityGraph& graph,
                                              const std::vector<std::pair<std::string, Date>>& scenarios,
                                              const AttributionOptions& options) {
    IssueList issues;
    for (const auto& [name, date] : scenarios)
        if (!graph.env.index_of(date)) issues.add("scenario '" + name + "': no environment record for " + date.iso());
    issues.throw_if_any();
    std::vector<ScenarioResult> out;
    for (const auto& [name, date] : scenarios) {
        ScenarioResult r{name, date, attribute_day(model, graph, row_of(graph, date), options), {}};
        r.summaries = summarize_features(graph.clusters.columns, r.attributions);
        out.push_back(std::move(r));
    }
    return out;
}

GroupContrast group_contrast(const SimGatModel& model, const CityGraph& graph, Date date,
                             const std::string& attribute, std::size_t k, const AttributionOptions& options) {
    const std::size_t m = graph.n_neighborhoods();
    if (k == 0 || 2 * k > m)
        throw ValidationError("group size k=" + std::to_string(k) + " must be in [1, " + std::to_string(m / 2) + "]");
    const std::vector<double> value = graph.raw_neighborhood_column(attribute);
    if (std::all_of(value.begin(), value.end(), [&](double v) { return v == value[0]; }))
        throw ValidationError("attribute '" + attribute + "' is constant: no ranking possible");

    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return value[a] > value[b]; });
    GroupContrast g;
    g.attribute = attribute;
    g.date = date;
    g.top.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
    g.bottom.assign(order.rbegin(), order.rbegin() + static_cast<std::ptrdiff_t>(k));

    const auto all = attribute_day(model, graph, row_of(graph, date), options);
    auto select = [&](const std::vector<std::size_t>& group) {
        std::vector<Attribution> out;
        for (const auto& a : all)
            if (std::find(group.begin(), group.end(), a.neighborhood) != group.end()) out.push_back(a);
        return out;
    };
    g.top_summaries = summarize_features(graph.clusters.columns, select(g.top));
    g.bottom_summaries = summarize_features(graph.clusters.columns, select(g.bottom));
    for (const auto& a : all)
        for (std::size_t f = 0; f < graph.clusters.columns.size(); ++f)
            g.scatter.push_back({a.neighborhood, graph.clusters.columns[f], value[a.neighborhood], a.contributions[f]});
    return g;
}

}  // namespace simgat
