#pragma once

// CSV and JSON readers/writers for every artifact exchanged by the CLI.
// Readers throw ValidationError naming the file and line of each problem.

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "simgat/classic.hpp"
#include "simgat/clustering.hpp"
#include "simgat/simgat.hpp"
#include "simgat/synthcity.hpp"
#include "simgat/transport.hpp"
#include "simgat/xai.hpp"

namespace simgat::io {

using Json = nlohmann::ordered_json;
namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Plain files

struct CsvTable {
    fs::path source;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> lines;  // source line of each row

    /// Index of a required column; throws when absent.
    std::size_t column(std::string_view name) const;
    std::string where(std::size_t row) const;
};

/// RFC 4180 subset: comma separator, double-quoted fields, header required.
CsvTable read_csv(const fs::path& path);
void write_csv(const fs::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

Json read_json(const fs::path& path);
/// Two-space indent, trailing newline.
void write_json(const fs::path& path, const Json& j);

double parse_double(std::string_view text, const std::string& where);
std::int64_t parse_int(std::string_view text, const std::string& where);
bool parse_bool(std::string_view text, const std::string& where);

// ---------------------------------------------------------------------------
// Tabular records

std::vector<Poi> read_pois(const fs::path& path);
void write_pois(const fs::path& path, const std::vector<Poi>& pois);

std::vector<std::pair<std::size_t, std::size_t>> read_merges(const fs::path& path);

/// id,x,y followed by the neighborhood feature columns.
struct NeighborhoodRows {
    std::vector<std::string> ids;
    std::vector<Point> xy;
    std::vector<NeighborhoodFeatures> features;
};
NeighborhoodRows read_neighborhoods(const fs::path& path);
void write_neighborhoods(const fs::path& path, const NeighborhoodRows& rows);

std::vector<EnvRecord> read_env(const fs::path& path);
void write_env(const fs::path& path, const std::vector<EnvRecord>& records);

/// Nodes id,x,y; edges from,to,length_m,speed_kmh,modes[,directed].
RoadNetwork read_network(const fs::path& nodes, const fs::path& edges);
void write_network(const fs::path& nodes, const fs::path& edges, const RoadNetwork& network);

/// date,neighborhood_id,cluster_id,count with ids resolved against the graph.
FlowTable read_flows(const fs::path& path, const CityGraph& graph);
void write_flows(const fs::path& path, const FlowTable& flows, const CityGraph& graph);

void write_attributions(const fs::path& path, const CityGraph& graph, const std::vector<Attribution>& attributions);

// ---------------------------------------------------------------------------
// Structured documents

NeighborhoodFeatures neighborhood_from_row(std::span<const double> row);

Json costs_to_json(const CostMatrixSet& costs);
std::vector<CostLayer> cost_layers_from_json(const Json& j, std::size_t m, std::size_t n, double* cost_floor);

Json clusters_to_json(const DbscanParams& params, const std::vector<Poi>& pois, const ClusterCatalog& catalog);
/// Cluster ids, centroids and raw features read back from clusters.json.
struct ClusterRows {
    std::vector<std::string> ids;
    std::vector<Point> xy;
    std::vector<ClusterFeatures> features;
};
ClusterRows clusters_from_json(const Json& j);

/// city.json: raw cluster and neighborhood features, costs and env records.
Json city_to_json(const CityInputs& inputs, double cost_floor);
CityInputs city_from_json(const Json& j, double* cost_floor = nullptr);
/// Reads and assembles (standardizes and validates) a city.json.
CityGraph load_city(const fs::path& path);

Json column_stats_to_json(const ColumnStats& stats);
ColumnStats column_stats_from_json(const Json& j);

Json config_to_json(const SimGatConfig& config);
/// Unknown keys are rejected; `seed` is mandatory.
SimGatConfig config_from_json(const Json& j);

Json report_to_json(const TrainReport& report);

Json model_to_json(const SimGatModel& model, const CityGraph& graph, const TrainReport* report, const DaySplit* split);
SimGatModel model_from_json(const Json& j);

Json spec_to_json(const ScenarioSpec& spec);
/// Starts from ScenarioSpec::defaults(); `seed` is mandatory.
ScenarioSpec spec_from_json(const Json& j);

Json truth_to_json(const ScenarioSpec& spec, const SyntheticCity& city);

Json gravity_fit_to_json(const GravityFit& fit, GravityMethod method);
Json huff_fit_to_json(const HuffFit& fit);

Json summary_to_json(const Summary& s);
Json feature_summaries_to_json(const std::vector<FeatureSummary>& summaries);

GridSpec grid_from_json(const Json& j);

}  // namespace simgat::io
