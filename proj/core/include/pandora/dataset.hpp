#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <span>
#include <string>
#include <vector>

#include "pandora/features.hpp"
#include "pandora/graph.hpp"
#include "pandora/risk.hpp"

namespace pandora {

/// Per-node values for one day. Rows follow Dataset::node_ids.
struct TimestampTable {
  std::string date;  // YYYY-MM-DD
  std::vector<std::int64_t> confirmed_14d;
  std::vector<double> mobility_mean;
  std::vector<double> temperature_c;

  friend bool operator==(const TimestampTable&, const TimestampTable&) = default;
};

struct Dataset {
  std::vector<std::string> node_ids;
  /// Edges as read, before duplicate merging, so they serialize unchanged.
  std::vector<EdgeInput> edges;
  Graph graph;
  /// The six default attribute columns; NaN marks a missing value.
  AttributeTable attributes;
  std::vector<std::int64_t> confirmed_14d;
  std::vector<RiskLevel> labels;
  /// nodes.csv carried an explicit label column.
  bool explicit_labels = false;
  /// Strictly increasing dates.
  std::vector<TimestampTable> timestamps;

  std::size_t node_count() const noexcept { return node_ids.size(); }
  std::vector<int> label_indices() const;
};

/// Equality with NaN attribute cells treated as equal to each other.
bool same_dataset(const Dataset& a, const Dataset& b);

struct DatasetError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Reads nodes.csv and edges.csv, plus every t_<YYYY-MM-DD>.csv in
/// `timeseries_dir` when given. Labels come from the label column when
/// present, otherwise from confirmed_14d.
Dataset load_dataset(const std::filesystem::path& nodes_path,
                     const std::filesystem::path& edges_path,
                     const std::optional<std::filesystem::path>& timeseries_dir = std::nullopt);

/// Writes nodes.csv, edges.csv and (if any) t_<date>.csv files into `dir`.
void save_dataset(const Dataset& d, const std::filesystem::path& dir);

/// Same files as strings, keyed by file name.
std::vector<std::pair<std::string, std::string>> serialize_dataset(const Dataset& d);

// ---------------------------------------------------------------------------
// Synthetic data

enum class LabelRule {
  /// One attribute profile and one risk level per community.
  Community,
  /// Communities come in pairs sharing an attribute profile; within a pair the
  /// odd community is sparser, so only structure separates the two levels.
  Structural,
};

std::string to_string(LabelRule rule);
LabelRule parse_label_rule(const std::string& text);

struct SynthConfig {
  std::size_t n = 1000;
  std::size_t communities = 4;
  double edge_prob_in = 0.05;
  double edge_prob_out = 0.002;
  LabelRule label_rule = LabelRule::Community;
  /// Internal edge probability multiplier for odd communities under the
  /// structural rule.
  double sparse_factor = 0.3;
  /// Attribute noise, as a fraction of the spacing between community means.
  double attribute_noise = 0.35;
  /// Number of daily timestamp tables to generate.
  std::size_t timestamps = 0;
  std::uint64_t seed = 0;
};

struct SynthResult {
  Dataset dataset;
  /// Community of each node (contiguous blocks).
  std::vector<std::size_t> community;
  /// Accuracy of a nearest-centroid classifier on the attributes, predicting
  /// the attribute profile a node was drawn from.
  double centroid_accuracy = 0.0;
};

/// Stochastic block model with contiguous, near-equal communities. Edges
/// inside a community are "adjacent"; edges between communities are
/// "flight" with a random passenger weight. The risk level of community c is
/// c mod 4, and confirmed_14d is drawn inside that level's range.
SynthResult synth_dataset(const SynthConfig& config);

// ---------------------------------------------------------------------------
// Splits

enum class Split : std::uint8_t { Train, Validation, Test };

std::string to_string(Split s);

struct SplitAssignment {
  std::vector<Split> of_node;
  std::vector<std::size_t> train, validation, test;  // ascending node indices
  /// Classes too small to stratify.
  std::vector<std::string> warnings;
};

struct SplitRatios {
  double train = 0.6;
  double validation = 0.2;
  double test = 0.2;
};

/// Stratified by label and deterministic given the seed. Split sizes are
/// round(ratio · n); each class is spread across the splits in proportion.
SplitAssignment split_dataset(std::span<const int> labels, SplitRatios ratios, std::uint64_t seed);

}  // namespace pandora
