#include "pandora/nn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace pandora {

Parameter glorot_parameter(std::string name, std::size_t rows, std::size_t cols,
                           std::uint64_t seed) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-limit, limit);
  DenseMatrix v(rows, cols);
  for (double& x : v.data()) x = dist(rng);
  return Parameter(std::move(name), std::move(v));
}

PropagationOperator::PropagationOperator() : data_(std::make_shared<const Data>()) {}

PropagationOperator::PropagationOperator(DenseMatrix p) {
  if (p.rows() != p.cols()) {
    throw ShapeError("propagation matrix must be square, got " + p.shape_string());
  }
  auto d = std::make_shared<Data>();
  const std::size_t n = p.rows();
  d->rows.resize(n);
  d->cols.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double v = p(i, j);
      if (v != 0.0) {
        d->rows[i].push_back({j, v});
        d->cols[j].push_back({i, v});
      }
    }
  d->dense = std::move(p);
  data_ = std::move(d);
}

DenseMatrix PropagationOperator::product(const std::vector<std::vector<Entry>>& rows,
                                         const DenseMatrix& h) {
  const std::size_t n = rows.size(), m = h.cols();
  DenseMatrix out(n, m);
  std::vector<double> terms;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& nz = rows[i];
    const std::size_t k = nz.size();
    terms.resize(k * m);
    for (std::size_t t = 0; t < k; ++t) {
      const double* src = h.row(nz[t].col).data();
      for (std::size_t c = 0; c < m; ++c) terms[c * k + t] = nz[t].value * src[c];
    }
    // Summing in sorted order makes the result independent of node order.
    for (std::size_t c = 0; c < m; ++c) {
      double* slice = terms.data() + c * k;
      if (k <= 32) {
        for (std::size_t a = 1; a < k; ++a) {
          const double v = slice[a];
          std::size_t b = a;
          for (; b > 0 && slice[b - 1] > v; --b) slice[b] = slice[b - 1];
          slice[b] = v;
        }
      } else {
        std::sort(slice, slice + k);
      }
      double s = 0.0;
      for (std::size_t t = 0; t < k; ++t) s += slice[t];
      out(i, c) = s;
    }
  }
  return out;
}

DenseMatrix PropagationOperator::apply(const DenseMatrix& h) const {
  if (h.rows() != size()) {
    throw ShapeError("propagation: operator is " + dense().shape_string() + " but input is " +
                     h.shape_string());
  }
  return product(data_->rows, h);
}

DenseMatrix PropagationOperator::apply_transpose(const DenseMatrix& h) const {
  if (h.rows() != size()) {
    throw ShapeError("propagation: operator is " + dense().shape_string() + " but input is " +
                     h.shape_string());
  }
  return product(data_->cols, h);
}

DenseMatrix relu(const DenseMatrix& x) {
  DenseMatrix out = x;
  for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
  return out;
}

DenseMatrix gcn_layer(const PropagationOperator& p, const DenseMatrix& h, const Parameter& w,
                      Activation activation, GcnLayerCache* cache) {
  if (h.cols() != w.value.rows()) {
    throw ShapeError("gcn_layer: features " + h.shape_string() + " do not match weight " +
                     w.value.shape_string());
  }
  DenseMatrix z = p.apply(matmul(h, w.value));
  DenseMatrix out = activation == Activation::Relu ? relu(z) : z;
  if (cache != nullptr) {
    cache->input = h;
    cache->pre_activation = std::move(z);
    cache->activation = activation;
  }
  return out;
}

DenseMatrix gcn_layer(const DenseMatrix& p, const DenseMatrix& h, const Parameter& w,
                      Activation activation) {
  return gcn_layer(PropagationOperator(p), h, w, activation);
}

DenseMatrix gcn_layer_backward(const PropagationOperator& p, const GcnLayerCache& cache,
                               Parameter& w, const DenseMatrix& d_out, bool want_input_grad) {
  require_same_shape(cache.pre_activation, d_out, "gcn_layer_backward");
  DenseMatrix dz = d_out;
  if (cache.activation == Activation::Relu) {
    for (std::size_t i = 0; i < dz.size(); ++i)
      if (!(cache.pre_activation.data()[i] > 0.0)) dz.data()[i] = 0.0;
  }
  const DenseMatrix d_hw = p.apply_transpose(dz);
  add_inplace(w.grad, matmul_tn(cache.input, d_hw));
  if (!want_input_grad) return {};
  return matmul_nt(d_hw, w.value);
}

DenseMatrix linear_weight_grad(const DenseMatrix& d_y, const DenseMatrix& x) {
  // y (m×1) = W (m×d) · x (d×1)  =>  ∂L/∂W = ∂L/∂y · xᵀ
  return matmul_nt(d_y, x);
}

DenseMatrix softmax_rows(const DenseMatrix& logits) {
  DenseMatrix out(logits.rows(), logits.cols());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    const auto in = logits.row(i);
    auto dst = out.row(i);
    const double mx = *std::max_element(in.begin(), in.end());
    double sum = 0.0;
    for (std::size_t j = 0; j < in.size(); ++j) {
      dst[j] = std::exp(in[j] - mx);
      sum += dst[j];
    }
    for (double& v : dst) v /= sum;
  }
  return out;
}

CrossEntropyResult cross_entropy(const DenseMatrix& targets, const DenseMatrix& predicted) {
  std::vector<std::size_t> rows(targets.rows());
  std::iota(rows.begin(), rows.end(), 0);
  return cross_entropy(targets, predicted, rows);
}

CrossEntropyResult cross_entropy(const DenseMatrix& targets, const DenseMatrix& predicted,
                                 std::span<const std::size_t> rows) {
  require_same_shape(targets, predicted, "cross_entropy");
  if (rows.empty()) throw std::invalid_argument("cross_entropy: no rows to evaluate");
  CrossEntropyResult r;
  double total = 0.0;
  for (std::size_t i : rows) {
    double row_loss = 0.0;
    for (std::size_t l = 0; l < targets.cols(); ++l) {
      const double y = targets(i, l);
      if (y == 0.0) continue;
      double p = predicted(i, l);
      if (p < kProbabilityFloor) {
        p = kProbabilityFloor;
        r.clamped = true;
      }
      row_loss -= y * std::log(p);
    }
    total += row_loss;
  }
  r.loss = total / static_cast<double>(rows.size());
  return r;
}

DenseMatrix softmax_cross_entropy_grad(const DenseMatrix& targets, const DenseMatrix& predicted,
                                       std::span<const std::size_t> rows) {
  require_same_shape(targets, predicted, "softmax_cross_entropy_grad");
  DenseMatrix g(targets.rows(), targets.cols());
  if (rows.empty()) return g;
  const double inv = 1.0 / static_cast<double>(rows.size());
  for (std::size_t i : rows)
    for (std::size_t l = 0; l < targets.cols(); ++l)
      g(i, l) = (predicted(i, l) - targets(i, l)) * inv;
  return g;
}

DenseMatrix one_hot_rows(std::span<const int> labels, std::size_t classes) {
  DenseMatrix y(labels.size(), classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= classes) {
      throw std::out_of_range("label " + std::to_string(labels[i]) + " outside [0, " +
                              std::to_string(classes) + ")");
    }
    y(i, static_cast<std::size_t>(labels[i])) = 1.0;
  }
  return y;
}

OptimizerState make_optimizer_state(std::span<Parameter* const> params, OptimizerConfig config) {
  OptimizerState s;
  s.config = config;
  for (const Parameter* p : params) {
    s.first_moment.emplace_back(p->value.rows(), p->value.cols());
    s.second_moment.emplace_back(p->value.rows(), p->value.cols());
  }
  return s;
}

void optimizer_step(std::span<Parameter* const> params, OptimizerState& state) {
  if (state.first_moment.size() != params.size()) {
    throw std::invalid_argument("optimizer_step: state was built for a different parameter set");
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    const Parameter& p = *params[k];
    require_same_shape(p.value, p.grad, "optimizer_step");
    require_same_shape(p.value, state.first_moment[k], "optimizer_step");
    if (!p.grad.all_finite()) {
      throw std::domain_error("optimizer_step: non-finite gradient in parameter '" + p.name + "'");
    }
  }
  ++state.step;
  const auto& c = state.config;
  if (c.kind == OptimizerKind::Sgd) {
    for (Parameter* p : params)
      for (std::size_t i = 0; i < p->value.size(); ++i)
        p->value.data()[i] -= c.alpha * p->grad.data()[i];
    return;
  }
  const double t = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(c.beta1, t);
  const double bias2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& value = params[k]->value.data();
    const auto& grad = params[k]->grad.data();
    auto& m = state.first_moment[k].data();
    auto& v = state.second_moment[k].data();
    for (std::size_t i = 0; i < value.size(); ++i) {
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * grad[i];
      v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * grad[i] * grad[i];
      const double m_hat = m[i] / bias1;
      const double v_hat = v[i] / bias2;
      value[i] -= c.alpha * m_hat / (std::sqrt(v_hat) + c.epsilon);
    }
  }
}

GradCheckResult grad_check(std::span<Parameter* const> params, const std::function<double()>& loss,
                           const GradCheckOptions& options) {
  struct Slot {
    std::size_t param;
    std::size_t index;
  };
  std::vector<Slot> slots;
  for (std::size_t k = 0; k < params.size(); ++k)
    for (std::size_t i = 0; i < params[k]->value.size(); ++i) slots.push_back({k, i});
  if (slots.size() > options.samples) {
    std::mt19937_64 rng(options.seed);
    std::shuffle(slots.begin(), slots.end(), rng);
    slots.resize(options.samples);
  }

  GradCheckResult result;
  for (const Slot& s : slots) {
    Parameter& p = *params[s.param];
    double& x = p.value.data()[s.index];
    const double original = x;
    const double x_plus = original + options.h;
    const double x_minus = original - options.h;
    x = x_plus;
    const double f_plus = loss();
    x = x_minus;
    const double f_minus = loss();
    x = original;
    const double numeric = (f_plus - f_minus) / (x_plus - x_minus);
    const double analytic = p.grad.data()[s.index];
    const double err =
        std::abs(analytic - numeric) / std::max(std::abs(numeric), options.floor);
    if (err > result.max_relative_error || result.entries_checked == 0) {
      result.max_relative_error = err;
      result.worst_parameter = p.name;
    }
    ++result.entries_checked;
  }
  return result;
}

}  // namespace pandora
