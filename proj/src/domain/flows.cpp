#include "simgat/domain.hpp"

namespace simgat {

void FlowTable::add(Date date, std::size_t neighborhood, std::size_t cluster, std::uint64_t count) {
    if (neighborhood >= n_neighborhoods_ || cluster >= n_clusters_) {
        throw ValidationError("flow " + date.iso() + " (" + std::to_string(neighborhood) + "," +
                              std::to_string(cluster) + ") index out of range");
    }
    if (!keys_.emplace(date.days(), neighborhood, cluster).second) {
        throw ValidationError("flow " + date.iso() + " (" + std::to_string(neighborhood) + "," +
                              std::to_string(cluster) + ") appears more than once");
    }
    entries_.push_back({date, neighborhood, cluster, count});
}

Matrix FlowTable::dense(Date date) const {
    Matrix out(n_clusters_, n_neighborhoods_);
    for (const auto& e : entries_)
        if (e.date == date) out(e.cluster, e.neighborhood) = static_cast<double>(e.count);
    return out;
}

Matrix FlowTable::mean_over(std::span<const Date> dates) const {
    Matrix out(n_neighborhoods_, n_clusters_);
    if (dates.empty()) return out;
    std::set<std::int64_t> wanted;
    for (Date d : dates) wanted.insert(d.days());
    for (const auto& e : entries_)
        if (wanted.count(e.date.days())) out(e.neighborhood, e.cluster) += static_cast<double>(e.count);
    for (double& v : out.data) v /= static_cast<double>(wanted.size());
    return out;
}

}  // namespace simgat
