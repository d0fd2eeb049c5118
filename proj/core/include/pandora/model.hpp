#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "pandora/matrix.hpp"
#include "pandora/nn.hpp"
#include "pandora/risk.hpp"

namespace pandora {

/// How the attribute and structure embeddings are fused.
enum class AggregatorMode : std::uint8_t {
  HA,  // Hadamard (entrywise) product
  SU,  // entrywise sum
  CO,  // column concatenation
};

std::string to_string(AggregatorMode mode);
AggregatorMode parse_aggregator_mode(const std::string& text);

DenseMatrix aggregate(const DenseMatrix& attr_embedding, const DenseMatrix& struct_embedding,
                      AggregatorMode mode);

struct ModelConfig {
  std::size_t aft_width = 0;
  std::size_t sft_width = 0;
  std::size_t hidden_width = 64;
  std::size_t embedding_width = 64;
  std::size_t class_count = kRiskLevelCount;
  AggregatorMode mode = AggregatorMode::HA;
  /// Drop the structure branch: a plain two-layer GCN over AFT.
  bool attribute_only = false;
  std::uint64_t seed = 0;

  std::size_t classifier_input_width() const noexcept {
    return (!attribute_only && mode == AggregatorMode::CO) ? 2 * embedding_width : embedding_width;
  }
};

nlohmann::ordered_json model_config_to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::ordered_json& j);

/// Two GCN branches (AFT and SFT, weights not shared) feeding one linear
/// classifier over the aggregated embedding.
class PandoraModel {
 public:
  PandoraModel() = default;
  explicit PandoraModel(const ModelConfig& config);

  const ModelConfig& config() const noexcept { return config_; }

  Parameter attr_w1, attr_w2;
  Parameter struct_w1, struct_w2;
  Parameter classifier;

  /// Trainable parameters in a fixed order.
  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
  void zero_grad();

 private:
  ModelConfig config_;
};

/// One timestamp's worth of model input.
struct GraphInput {
  PropagationOperator propagation;
  DenseMatrix aft;
  DenseMatrix sft;
};

struct BranchTape {
  GcnLayerCache layer1;
  GcnLayerCache layer2;
};

struct TimestampTape {
  BranchTape attr;
  BranchTape strct;
  DenseMatrix attr_embedding;
  DenseMatrix struct_embedding;
};

/// Intermediate values recorded by a forward pass for backward().
struct ForwardTape {
  std::vector<TimestampTape> steps;
  DenseMatrix aggregated;
  DenseMatrix probabilities;
  bool recorded = false;
};

struct ForwardResult {
  DenseMatrix probabilities;
  /// Aggregated embedding before the classifier (AET).
  DenseMatrix embedding;
};

/// Ŷ = softmax(Agg(GCN(AFT), GCN(SFT)) · Θ)
ForwardResult forward_static(const PandoraModel& model, const GraphInput& input,
                             ForwardTape* tape = nullptr);

/// Ŷ = softmax((Σ_t Agg(GCN(AFT_t), GCN(SFT_t))) · Θ), one softmax after the sum.
ForwardResult forward_dynamic(const PandoraModel& model, std::span<const GraphInput> steps,
                              ForwardTape* tape = nullptr);

struct BackwardError : std::logic_error {
  using std::logic_error::logic_error;
};

/// Mean cross-entropy over `rows` from a recorded tape; overwrites every
/// parameter's grad with the exact gradient. Returns the loss.
double backward(PandoraModel& model, std::span<const GraphInput> steps, const ForwardTape& tape,
                std::span<const int> labels, std::span<const std::size_t> rows);

/// Loss of the model on `rows`, without touching gradients.
double loss_on(const PandoraModel& model, std::span<const GraphInput> steps,
               std::span<const int> labels, std::span<const std::size_t> rows);

/// Runs forward + backward, then compares against central differences.
GradCheckResult grad_check_model(PandoraModel& model, std::span<const GraphInput> steps,
                                 std::span<const int> labels, std::span<const std::size_t> rows,
                                 const GradCheckOptions& options = {});

// ---------------------------------------------------------------------------
// Training and evaluation

struct TrainConfig {
  double alpha = 0.01;
  std::size_t max_epoch = 300;
  /// Stop after this many epochs without a new best validation loss.
  std::size_t patience = 50;
  OptimizerKind optimizer = OptimizerKind::Adam;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double train_acc = 0.0;
  double val_acc = 0.0;
};

struct TrainingData {
  std::span<const GraphInput> steps;
  std::span<const int> labels;
  std::span<const std::size_t> train_rows;
  std::span<const std::size_t> val_rows;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  /// Epoch whose parameters were restored (best validation loss).
  std::size_t best_epoch = 0;
  std::size_t iterations_to_converge = 0;
  bool stopped_early = false;
  OptimizerState optimizer;
  double astt_seconds = 0.0;  // mean wall time per epoch
  double oit_seconds = 0.0;   // total training wall time
};

/// Raised when the training loss becomes non-finite. Carries the epoch and
/// the parameters from the last finite epoch.
struct NonFiniteLossError : std::runtime_error {
  NonFiniteLossError(std::size_t epoch_, PandoraModel last_good_)
      : std::runtime_error("non-finite training loss at epoch " + std::to_string(epoch_)),
        epoch(epoch_),
        last_good(std::move(last_good_)) {}
  std::size_t epoch;
  PandoraModel last_good;
};

/// Full-batch training. Each epoch: forward over all nodes, cross-entropy on
/// the training rows, backward, optimizer step. Losses and accuracies are
/// recorded from the forward pass that precedes the step. The parameters of
/// the best validation epoch are restored on exit.
TrainResult train(PandoraModel& model, const TrainingData& data, const TrainConfig& config);

struct Metrics {
  double accuracy = 0.0;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  std::vector<std::vector<std::size_t>> confusion;  // [true][predicted]
  std::vector<double> per_class_f1;
  /// Class occurs among the evaluated labels or predictions.
  std::vector<bool> class_present;
  std::size_t iterations_to_converge = 0;
  double astt_seconds = 0.0;
  double oit_seconds = 0.0;
  double tet_seconds = 0.0;
};

/// Accuracy, macro precision/recall/F1 (over classes that occur in the
/// labels or the predictions; 0/0 counts as 0) and the confusion matrix.
Metrics evaluate(const DenseMatrix& probabilities, std::span<const int> labels,
                 std::span<const std::size_t> rows);
Metrics evaluate(const DenseMatrix& probabilities, std::span<const int> labels);

std::vector<int> argmax_rows(const DenseMatrix& m);

nlohmann::ordered_json metrics_to_json(const Metrics& m);

// ---------------------------------------------------------------------------
// Checkpoints

struct Checkpoint {
  PandoraModel model;
  std::optional<OptimizerState> optimizer;
  /// Free-form payload stored alongside (e.g. discretization schemes).
  nlohmann::ordered_json extra = nlohmann::ordered_json::object();
};

nlohmann::ordered_json checkpoint_to_json(const PandoraModel& model,
                                          const OptimizerState* optimizer,
                                          const nlohmann::ordered_json& extra);
Checkpoint checkpoint_from_json(const nlohmann::ordered_json& j);

/// FNV-1a over the serialized model config.
std::string config_hash(const ModelConfig& config);

}  // namespace pandora
