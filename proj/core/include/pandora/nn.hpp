#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "pandora/matrix.hpp"

namespace pandora {

struct Parameter {
  std::string name;
  DenseMatrix value;
  DenseMatrix grad;

  Parameter() = default;
  Parameter(std::string n, DenseMatrix v)
      : name(std::move(n)), value(std::move(v)), grad(value.rows(), value.cols()) {}

  void zero_grad() { grad = DenseMatrix(value.rows(), value.cols()); }
};

/// Glorot-uniform initialized rows×cols parameter.
Parameter glorot_parameter(std::string name, std::size_t rows, std::size_t cols,
                           std::uint64_t seed);

/// Sparse view of a square propagation matrix.
///
/// Each output entry Σ_j P(i,j)·H(j,c) is summed over the nonzero terms in
/// ascending order of value, so the result for a node does not depend on how
/// nodes are numbered. Copies share the underlying storage.
class PropagationOperator {
 public:
  PropagationOperator();
  explicit PropagationOperator(DenseMatrix p);

  std::size_t size() const noexcept { return data_->dense.rows(); }
  const DenseMatrix& dense() const noexcept { return data_->dense; }

  DenseMatrix apply(const DenseMatrix& h) const;
  DenseMatrix apply_transpose(const DenseMatrix& h) const;

 private:
  struct Entry {
    std::size_t col;
    double value;
  };
  struct Data {
    DenseMatrix dense;
    std::vector<std::vector<Entry>> rows;
    std::vector<std::vector<Entry>> cols;
  };
  static DenseMatrix product(const std::vector<std::vector<Entry>>& rows, const DenseMatrix& h);

  std::shared_ptr<const Data> data_;
};

enum class Activation { Relu, Identity };

DenseMatrix relu(const DenseMatrix& x);

struct GcnLayerCache {
  DenseMatrix input;
  DenseMatrix pre_activation;
  Activation activation = Activation::Identity;
};

/// σ(P·H·W). Stores what the backward pass needs when `cache` is given.
DenseMatrix gcn_layer(const PropagationOperator& p, const DenseMatrix& h, const Parameter& w,
                      Activation activation, GcnLayerCache* cache = nullptr);
DenseMatrix gcn_layer(const DenseMatrix& p, const DenseMatrix& h, const Parameter& w,
                      Activation activation);

/// Accumulates ∂L/∂W into w.grad and returns ∂L/∂H (empty if not requested).
DenseMatrix gcn_layer_backward(const PropagationOperator& p, const GcnLayerCache& cache,
                               Parameter& w, const DenseMatrix& d_out, bool want_input_grad);

/// Gradient of a linear map y = W·x with respect to W, given ∂L/∂y.
DenseMatrix linear_weight_grad(const DenseMatrix& d_y, const DenseMatrix& x);

/// Row-wise softmax with max-shift.
DenseMatrix softmax_rows(const DenseMatrix& logits);

struct CrossEntropyResult {
  double loss = 0.0;
  /// Some predicted probability for a true class was below 1e-12 and was
  /// clamped.
  bool clamped = false;
};

inline constexpr double kProbabilityFloor = 1e-12;

/// Mean over rows of −Σ_l Y(i,l)·ln Ŷ(i,l).
CrossEntropyResult cross_entropy(const DenseMatrix& targets, const DenseMatrix& predicted);
/// Same, restricted to the listed rows.
CrossEntropyResult cross_entropy(const DenseMatrix& targets, const DenseMatrix& predicted,
                                 std::span<const std::size_t> rows);

/// Gradient of the mean cross-entropy at the softmax input: (Ŷ − Y)/|rows| on
/// the listed rows and zero elsewhere.
DenseMatrix softmax_cross_entropy_grad(const DenseMatrix& targets, const DenseMatrix& predicted,
                                       std::span<const std::size_t> rows);

DenseMatrix one_hot_rows(std::span<const int> labels, std::size_t classes);

enum class OptimizerKind { Adam, Sgd };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::Adam;
  double alpha = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct OptimizerState {
  OptimizerConfig config;
  std::vector<DenseMatrix> first_moment;
  std::vector<DenseMatrix> second_moment;
  std::uint64_t step = 0;
};

OptimizerState make_optimizer_state(std::span<Parameter* const> params, OptimizerConfig config);

/// One update from the gradients currently stored in the parameters.
/// Throws std::domain_error naming the parameter if a gradient is not finite.
void optimizer_step(std::span<Parameter* const> params, OptimizerState& state);

struct GradCheckOptions {
  double h = 1e-5;
  /// Entries sampled across all parameters (every entry if fewer exist).
  std::size_t samples = 200;
  /// Denominator floor: entries with |numeric| below it are compared on an
  /// absolute scale.
  double floor = 1e-4;
  std::uint64_t seed = 0;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t entries_checked = 0;
  std::string worst_parameter;
};

/// Compares each parameter's stored grad against central differences of
/// `loss`. The error for an entry is |analytic − numeric| / max(|numeric|, floor).
GradCheckResult grad_check(std::span<Parameter* const> params, const std::function<double()>& loss,
                           const GradCheckOptions& options = {});

}  // namespace pandora
