#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "pandora/dataset.hpp"
#include "pandora/features.hpp"
#include "pandora/model.hpp"
#include "pandora/motifs.hpp"

namespace pandora {

/// Everything needed to reproduce one training run.
struct RunConfig {
  AggregatorMode mode = AggregatorMode::HA;
  /// GCN over AFT only, no structure branch.
  bool attribute_only = false;
  /// Sum over the timestamp tables instead of the static attributes.
  bool dynamic = false;
  double alpha = 0.01;
  std::size_t max_epoch = 300;
  std::size_t patience = 50;
  std::size_t hidden_width = 64;
  std::size_t embedding_width = 64;
  std::size_t class_count = kRiskLevelCount;
  OptimizerKind optimizer = OptimizerKind::Adam;
  SplitRatios ratios;
  double inconsistency_limit = 0.05;
  std::size_t max_bins = 10;
  bool weighted_propagation = false;
  std::uint64_t seed = 0;
};

/// Flat JSON object, one key per field.
nlohmann::ordered_json run_config_to_json(const RunConfig& c);
/// Overlays the keys present in `j` onto `base`. Unknown keys and wrongly
/// typed values throw std::invalid_argument naming the key.
RunConfig run_config_from_json(const nlohmann::ordered_json& j, RunConfig base = {});
/// α > 0, max_epoch ≥ 1, widths ≥ 1, class_count ≥ 2.
void validate(const RunConfig& c);

/// Attributes seen at timestamp t: the static table with temperature and
/// mobility replaced by that day's values, plus a confirmed_14d column.
AttributeTable timestamp_attributes(const Dataset& d, std::size_t t);

/// Chi2 schemes fitted on `fit_rows`. Static: one per default attribute.
/// Dynamic: the same plus confirmed_14d, fitted on the pooled timestamp rows.
std::vector<DiscretizationScheme> fit_schemes(const Dataset& d, std::span<const std::size_t> fit_rows,
                                              bool dynamic, const Chi2Config& config);

struct FeaturizedData {
  NmdTable nmd;
  FeatureTensor sft;
  /// One AFT per step (a single one for static runs).
  std::vector<FeatureTensor> aft;
  std::vector<GraphInput> steps;
};

/// Motif counts, SFT, AFT(s) and the propagation operator.
FeaturizedData featurize(const Dataset& d, std::span<const DiscretizationScheme> schemes,
                         bool dynamic, PropagationOptions propagation = {});

struct RunOutput {
  SplitAssignment split;
  std::vector<DiscretizationScheme> schemes;
  FeaturizedData features;
  PandoraModel model;
  TrainResult training;
  /// Forward pass of the restored best model over every node.
  ForwardResult forward;
  Metrics validation;
  Metrics test;
};

ModelConfig model_config_for(const RunConfig& c, const FeaturizedData& f);

/// Split, fit schemes on the training rows, featurize, train, evaluate.
RunOutput run_training(const Dataset& d, const RunConfig& config);

}  // namespace pandora
