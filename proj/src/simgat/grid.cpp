#include "simgat/parallel.hpp"
#include "simgat/simgat.hpp"

namespace simgat {

std::vector<GridTrial> grid_search(const CityGraph& graph, const FlowTable& flows, const GridSpec& spec,
                                   std::size_t threads) {
    std::vector<GridTrial> trials;
    const auto lrs = spec.learning_rates.empty() ? std::vector<double>{spec.base.learning_rate} : spec.learning_rates;
    const auto batches =
        spec.batch_sizes.empty() ? std::vector<std::size_t>{spec.base.batch_size} : spec.batch_sizes;
    const auto hiddens = spec.hidden_dims.empty() ? std::vector<std::size_t>{spec.base.hidden_dim} : spec.hidden_dims;
    for (double lr : lrs)
        for (std::size_t b : batches)
            for (std::size_t h : hiddens) {
                SimGatConfig c = spec.base;
                c.learning_rate = lr;
                c.batch_size = b;
                c.hidden_dim = h;
                c.validate();
                trials.push_back({c, {}});
            }
    parallel_for(trials.size(), [&](std::size_t i) { trials[i].report = train(graph, flows, trials[i].config).report; },
                 threads == 0 ? default_threads() : threads);
    return trials;
}

}  // namespace simgat
