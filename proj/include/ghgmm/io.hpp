#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <json.hpp>
#include <string>
#include <utility>
#include <vector>

#include "ghgmm/errors.hpp"
#include "ghgmm/model.hpp"
#include "ghgmm/selection.hpp"
#include "ghgmm/simulate.hpp"

namespace ghgmm::io {

using Json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

// Wide dataset: header `id,t1..tT[,x1..xm]`, one subject per row, no missing
// cells. Malformed content throws InputError naming the row and column
// (1-based, the header is row 1).
struct Table {
    std::vector<std::string> ids;
    LongitudinalDataset data;
};

Table parse_dataset_csv(const std::string& text);
Table read_dataset_csv(const std::string& path);
std::string format_dataset_csv(const std::vector<std::string>& ids, const LongitudinalDataset& data);

// Labels file: header `id,label`, integer labels.
struct Labels {
    std::vector<std::string> ids;
    std::vector<int> labels;
};

Labels parse_labels_csv(const std::string& text);
Labels read_labels_csv(const std::string& path);
std::string format_labels_csv(const std::vector<std::string>& ids, const std::vector<int>& labels);

// Shortest text that reads back to the same double.
std::string format_number(double v);

std::string read_file(const std::string& path);
// Writes to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::string& path, const std::string& content);

std::string sha256_hex(const std::string& bytes);
std::string software_version();

struct RunManifest {
    std::string command;
    std::string config_digest;
    std::uint64_t seed = 0;
    std::string version;
    double wall_seconds = 0.0;
    std::vector<std::pair<std::string, std::string>> inputs;  // path, digest
};

Json to_json(const RunManifest& m);

Json to_json(const ModelSpec& spec);
Json to_json(const ClassParameters& c, const ModelSpec& spec);
Json to_json(const FittedModel& fm, bool with_responsibilities);
Json to_json(const SelectionReport& rep);

// Scenario files mirror ScenarioConfig; `psi` may be a full matrix or its
// diagonal, `theta` a vector or one shared value, omitted skewness is zero.
ScenarioConfig scenario_from_json(const Json& j);
Json to_json(const ScenarioConfig& cfg);

Variant parse_variant(const std::string& weights, const std::string& skew);

}  // namespace ghgmm::io
