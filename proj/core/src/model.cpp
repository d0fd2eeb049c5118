#include "pandora/model.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <set>

namespace pandora {

// ---------------------------------------------------------------------------
// Risk labels

RiskLevel assign_risk_label(std::int64_t infected_14d) {
  if (infected_14d < 0) {
    throw std::invalid_argument("assign_risk_label: negative infection count " +
                                std::to_string(infected_14d));
  }
  if (infected_14d == 0) return RiskLevel::RiskFree;
  if (infected_14d <= 150) return RiskLevel::Low;
  if (infected_14d <= 750) return RiskLevel::Medium;
  return RiskLevel::High;
}

std::string to_string(RiskLevel level) {
  switch (level) {
    case RiskLevel::RiskFree: return "risk_free";
    case RiskLevel::Low: return "low";
    case RiskLevel::Medium: return "medium";
    case RiskLevel::High: return "high";
  }
  return "?";
}

RiskLevel parse_risk_level(const std::string& text) {
  if (text == "risk_free") return RiskLevel::RiskFree;
  if (text == "low") return RiskLevel::Low;
  if (text == "medium") return RiskLevel::Medium;
  if (text == "high") return RiskLevel::High;
  throw std::invalid_argument("unknown risk level '" + text +
                              "' (expected risk_free|low|medium|high)");
}

// ---------------------------------------------------------------------------
// Aggregation

std::string to_string(AggregatorMode mode) {
  switch (mode) {
    case AggregatorMode::HA: return "HA";
    case AggregatorMode::SU: return "SU";
    case AggregatorMode::CO: return "CO";
  }
  return "?";
}

AggregatorMode parse_aggregator_mode(const std::string& text) {
  if (text == "HA" || text == "ha") return AggregatorMode::HA;
  if (text == "SU" || text == "su") return AggregatorMode::SU;
  if (text == "CO" || text == "co") return AggregatorMode::CO;
  throw std::invalid_argument("unknown aggregator '" + text + "' (expected HA|SU|CO)");
}

DenseMatrix aggregate(const DenseMatrix& attr_embedding, const DenseMatrix& struct_embedding,
                      AggregatorMode mode) {
  switch (mode) {
    case AggregatorMode::HA: return hadamard(attr_embedding, struct_embedding);
    case AggregatorMode::SU: return add(attr_embedding, struct_embedding);
    case AggregatorMode::CO: return hconcat(attr_embedding, struct_embedding);
  }
  throw std::invalid_argument("aggregate: unknown mode");
}

// ---------------------------------------------------------------------------
// Model

nlohmann::ordered_json model_config_to_json(const ModelConfig& c) {
  nlohmann::ordered_json j;
  j["aft_width"] = c.aft_width;
  j["sft_width"] = c.sft_width;
  j["hidden_width"] = c.hidden_width;
  j["embedding_width"] = c.embedding_width;
  j["class_count"] = c.class_count;
  j["mode"] = to_string(c.mode);
  j["attribute_only"] = c.attribute_only;
  j["seed"] = c.seed;
  return j;
}

ModelConfig model_config_from_json(const nlohmann::ordered_json& j) {
  ModelConfig c;
  c.aft_width = j.at("aft_width").get<std::size_t>();
  c.sft_width = j.at("sft_width").get<std::size_t>();
  c.hidden_width = j.at("hidden_width").get<std::size_t>();
  c.embedding_width = j.at("embedding_width").get<std::size_t>();
  c.class_count = j.at("class_count").get<std::size_t>();
  c.mode = parse_aggregator_mode(j.at("mode").get<std::string>());
  c.attribute_only = j.at("attribute_only").get<bool>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

PandoraModel::PandoraModel(const ModelConfig& config) : config_(config) {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("ModelConfig: ") + what);
  };
  require(config.aft_width >= 1, "aft_width must be >= 1");
  require(config.attribute_only || config.sft_width >= 1, "sft_width must be >= 1");
  require(config.hidden_width >= 1, "hidden_width must be >= 1");
  require(config.embedding_width >= 1, "embedding_width must be >= 1");
  require(config.class_count >= 2, "class_count must be >= 2");

  const std::uint64_t s = config.seed;
  attr_w1 = glorot_parameter("attr_w1", config.aft_width, config.hidden_width, splitmix64(s + 1));
  attr_w2 = glorot_parameter("attr_w2", config.hidden_width, config.embedding_width,
                             splitmix64(s + 2));
  if (!config.attribute_only) {
    struct_w1 = glorot_parameter("struct_w1", config.sft_width, config.hidden_width,
                                 splitmix64(s + 3));
    struct_w2 = glorot_parameter("struct_w2", config.hidden_width, config.embedding_width,
                                 splitmix64(s + 4));
  }
  classifier = glorot_parameter("classifier", config.classifier_input_width(), config.class_count,
                                splitmix64(s + 5));
}

std::vector<Parameter*> PandoraModel::parameters() {
  if (config_.attribute_only) return {&attr_w1, &attr_w2, &classifier};
  return {&attr_w1, &attr_w2, &struct_w1, &struct_w2, &classifier};
}

std::vector<const Parameter*> PandoraModel::parameters() const {
  if (config_.attribute_only) return {&attr_w1, &attr_w2, &classifier};
  return {&attr_w1, &attr_w2, &struct_w1, &struct_w2, &classifier};
}

void PandoraModel::zero_grad() {
  for (Parameter* p : parameters()) p->zero_grad();
}

// ---------------------------------------------------------------------------
// Forward / backward

namespace {

DenseMatrix embed_branch(const PropagationOperator& p, const DenseMatrix& x, const Parameter& w1,
                         const Parameter& w2, BranchTape* tape) {
  DenseMatrix h1 = gcn_layer(p, x, w1, Activation::Relu, tape ? &tape->layer1 : nullptr);
  return gcn_layer(p, h1, w2, Activation::Identity, tape ? &tape->layer2 : nullptr);
}

DenseMatrix embed_timestamp(const PandoraModel& model, const GraphInput& in, TimestampTape* tape) {
  const auto& c = model.config();
  if (in.aft.rows() != in.propagation.size()) {
    throw ShapeError("AFT has " + std::to_string(in.aft.rows()) + " rows for a " +
                     std::to_string(in.propagation.size()) + "-node graph");
  }
  DenseMatrix attr = embed_branch(in.propagation, in.aft, model.attr_w1, model.attr_w2,
                                  tape ? &tape->attr : nullptr);
  if (c.attribute_only) {
    if (tape) tape->attr_embedding = attr;
    return attr;
  }
  if (in.sft.rows() != in.propagation.size()) {
    throw ShapeError("SFT has " + std::to_string(in.sft.rows()) + " rows for a " +
                     std::to_string(in.propagation.size()) + "-node graph");
  }
  DenseMatrix strct = embed_branch(in.propagation, in.sft, model.struct_w1, model.struct_w2,
                                   tape ? &tape->strct : nullptr);
  DenseMatrix agg = aggregate(attr, strct, c.mode);
  if (tape) {
    tape->attr_embedding = std::move(attr);
    tape->struct_embedding = std::move(strct);
  }
  return agg;
}

ForwardResult classify(const PandoraModel& model, DenseMatrix aggregated, ForwardTape* tape) {
  ForwardResult r;
  r.probabilities = softmax_rows(matmul(aggregated, model.classifier.value));
  r.embedding = std::move(aggregated);
  if (tape) {
    tape->aggregated = r.embedding;
    tape->probabilities = r.probabilities;
    tape->recorded = true;
  }
  return r;
}

}  // namespace

ForwardResult forward_static(const PandoraModel& model, const GraphInput& input, ForwardTape* tape) {
  if (tape) {
    *tape = ForwardTape{};
    tape->steps.resize(1);
  }
  DenseMatrix agg = embed_timestamp(model, input, tape ? &tape->steps[0] : nullptr);
  return classify(model, std::move(agg), tape);
}

ForwardResult forward_dynamic(const PandoraModel& model, std::span<const GraphInput> steps,
                              ForwardTape* tape) {
  if (steps.empty()) throw std::invalid_argument("forward_dynamic: need at least one timestamp");
  const std::size_t n = steps.front().propagation.size();
  for (std::size_t t = 0; t < steps.size(); ++t) {
    if (steps[t].propagation.size() != n || steps[t].aft.rows() != n ||
        (!model.config().attribute_only && steps[t].sft.rows() != n)) {
      throw std::invalid_argument("forward_dynamic: timestamp " + std::to_string(t) +
                                  " does not cover the same " + std::to_string(n) + " nodes");
    }
  }
  if (tape) {
    *tape = ForwardTape{};
    tape->steps.resize(steps.size());
  }
  DenseMatrix sum;
  for (std::size_t t = 0; t < steps.size(); ++t) {
    DenseMatrix agg = embed_timestamp(model, steps[t], tape ? &tape->steps[t] : nullptr);
    if (t == 0) {
      sum = std::move(agg);
    } else {
      add_inplace(sum, agg);
    }
  }
  return classify(model, std::move(sum), tape);
}

namespace {

void check_labels(std::span<const int> labels, std::size_t n, std::span<const std::size_t> rows) {
  if (labels.size() != n) {
    throw std::invalid_argument("expected " + std::to_string(n) + " labels, got " +
                                std::to_string(labels.size()));
  }
  for (std::size_t r : rows)
    if (r >= n) throw std::out_of_range("row index " + std::to_string(r) + " out of range");
}

void branch_backward(const PropagationOperator& p, const BranchTape& tape, Parameter& w1,
                     Parameter& w2, const DenseMatrix& d_embedding) {
  const DenseMatrix d_h1 = gcn_layer_backward(p, tape.layer2, w2, d_embedding, true);
  gcn_layer_backward(p, tape.layer1, w1, d_h1, false);
}

}  // namespace

double backward(PandoraModel& model, std::span<const GraphInput> steps, const ForwardTape& tape,
                std::span<const int> labels, std::span<const std::size_t> rows) {
  if (!tape.recorded) throw BackwardError("backward called before a recorded forward pass");
  if (tape.steps.size() != steps.size()) {
    throw BackwardError("backward: tape has " + std::to_string(tape.steps.size()) +
                        " timestamps but " + std::to_string(steps.size()) + " inputs were given");
  }
  const auto& c = model.config();
  const std::size_t n = tape.probabilities.rows();
  check_labels(labels, n, rows);
  model.zero_grad();

  const DenseMatrix y = one_hot_rows(labels, c.class_count);
  const double loss = cross_entropy(y, tape.probabilities, rows).loss;
  const DenseMatrix d_logits = softmax_cross_entropy_grad(y, tape.probabilities, rows);

  model.classifier.grad = matmul_tn(tape.aggregated, d_logits);
  const DenseMatrix d_agg = matmul_nt(d_logits, model.classifier.value);

  for (std::size_t t = 0; t < steps.size(); ++t) {
    const auto& st = tape.steps[t];
    const auto& p = steps[t].propagation;
    if (c.attribute_only) {
      branch_backward(p, st.attr, model.attr_w1, model.attr_w2, d_agg);
      continue;
    }
    DenseMatrix d_attr, d_struct;
    switch (c.mode) {
      case AggregatorMode::HA:
        d_attr = hadamard(d_agg, st.struct_embedding);
        d_struct = hadamard(d_agg, st.attr_embedding);
        break;
      case AggregatorMode::SU:
        d_attr = d_agg;
        d_struct = d_agg;
        break;
      case AggregatorMode::CO: {
        const std::size_t w = c.embedding_width;
        d_attr = DenseMatrix(n, w);
        d_struct = DenseMatrix(n, w);
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < w; ++j) {
            d_attr(i, j) = d_agg(i, j);
            d_struct(i, j) = d_agg(i, w + j);
          }
        break;
      }
    }
    branch_backward(p, st.attr, model.attr_w1, model.attr_w2, d_attr);
    branch_backward(p, st.strct, model.struct_w1, model.struct_w2, d_struct);
  }
  return loss;
}

namespace {

ForwardResult run_forward(const PandoraModel& model, std::span<const GraphInput> steps,
                          ForwardTape* tape) {
  if (steps.size() == 1) return forward_static(model, steps.front(), tape);
  return forward_dynamic(model, steps, tape);
}

double accuracy_on(const DenseMatrix& probs, std::span<const int> labels,
                   std::span<const std::size_t> rows) {
  if (rows.empty()) return 0.0;
  std::size_t hit = 0;
  for (std::size_t r : rows) {
    const auto row = probs.row(r);
    const auto best = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
    if (best == labels[r]) ++hit;
  }
  return static_cast<double>(hit) / static_cast<double>(rows.size());
}

}  // namespace

double loss_on(const PandoraModel& model, std::span<const GraphInput> steps,
               std::span<const int> labels, std::span<const std::size_t> rows) {
  const auto r = run_forward(model, steps, nullptr);
  check_labels(labels, r.probabilities.rows(), rows);
  return cross_entropy(one_hot_rows(labels, model.config().class_count), r.probabilities, rows).loss;
}

GradCheckResult grad_check_model(PandoraModel& model, std::span<const GraphInput> steps,
                                 std::span<const int> labels, std::span<const std::size_t> rows,
                                 const GradCheckOptions& options) {
  ForwardTape tape;
  run_forward(model, steps, &tape);
  backward(model, steps, tape, labels, rows);
  const auto params = model.parameters();
  return grad_check(params, [&] { return loss_on(model, steps, labels, rows); }, options);
}

// ---------------------------------------------------------------------------
// Training

TrainResult train(PandoraModel& model, const TrainingData& data, const TrainConfig& config) {
  using clock = std::chrono::steady_clock;
  if (data.train_rows.empty()) throw std::invalid_argument("train: training split is empty");
  if (data.val_rows.empty()) throw std::invalid_argument("train: validation split is empty");
  if (data.steps.empty()) throw std::invalid_argument("train: no graph input");
  if (!(config.alpha >= 0.0)) throw std::invalid_argument("train: alpha must be >= 0");

  TrainResult result;
  const auto params = model.parameters();
  OptimizerConfig oc;
  oc.kind = config.optimizer;
  oc.alpha = config.alpha;
  result.optimizer = make_optimizer_state(params, oc);

  const DenseMatrix y = one_hot_rows(data.labels, model.config().class_count);
  double best_val = std::numeric_limits<double>::infinity();
  PandoraModel best = model;
  std::size_t since_best = 0;

  const auto start = clock::now();
  for (std::size_t epoch = 1; epoch <= config.max_epoch; ++epoch) {
    ForwardTape tape;
    const ForwardResult fr = run_forward(model, data.steps, &tape);
    const double train_loss = backward(model, data.steps, tape, data.labels, data.train_rows);
    const double val_loss = cross_entropy(y, fr.probabilities, data.val_rows).loss;
    if (!std::isfinite(train_loss) || !std::isfinite(val_loss)) {
      throw NonFiniteLossError(epoch, best);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = train_loss;
    rec.val_loss = val_loss;
    rec.train_acc = accuracy_on(fr.probabilities, data.labels, data.train_rows);
    rec.val_acc = accuracy_on(fr.probabilities, data.labels, data.val_rows);
    result.history.push_back(rec);

    if (val_loss < best_val) {
      best_val = val_loss;
      best = model;
      result.best_epoch = epoch;
      since_best = 0;
    } else {
      ++since_best;
    }
    if (since_best >= config.patience) {
      result.stopped_early = true;
      break;
    }
    optimizer_step(params, result.optimizer);
  }
  const auto elapsed = std::chrono::duration<double>(clock::now() - start).count();

  // Copy parameter values back rather than assigning the model so the
  // pointers held by callers stay valid.
  const auto best_params = best.parameters();
  for (std::size_t k = 0; k < params.size(); ++k) {
    params[k]->value = best_params[k]->value;
    params[k]->zero_grad();
  }
  result.iterations_to_converge = result.best_epoch;
  result.oit_seconds = elapsed;
  result.astt_seconds =
      result.history.empty() ? 0.0 : elapsed / static_cast<double>(result.history.size());
  return result;
}

// ---------------------------------------------------------------------------
// Evaluation

std::vector<int> argmax_rows(const DenseMatrix& m) {
  std::vector<int> out(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const auto row = m.row(i);
    out[i] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

Metrics evaluate(const DenseMatrix& probabilities, std::span<const int> labels,
                 std::span<const std::size_t> rows) {
  if (rows.empty()) throw std::invalid_argument("evaluate: empty evaluation set");
  check_labels(labels, probabilities.rows(), rows);
  const std::size_t k = probabilities.cols();
  Metrics m;
  m.confusion.assign(k, std::vector<std::size_t>(k, 0));
  m.class_present.assign(k, false);
  m.per_class_f1.assign(k, 0.0);

  const auto predicted = argmax_rows(probabilities);
  std::size_t correct = 0;
  for (std::size_t r : rows) {
    if (labels[r] < 0 || static_cast<std::size_t>(labels[r]) >= k) {
      throw std::out_of_range("evaluate: label " + std::to_string(labels[r]) + " outside [0, " +
                              std::to_string(k) + ")");
    }
    const auto t = static_cast<std::size_t>(labels[r]);
    const auto p = static_cast<std::size_t>(predicted[r]);
    ++m.confusion[t][p];
    m.class_present[t] = true;
    m.class_present[p] = true;
    if (t == p) ++correct;
  }
  m.accuracy = static_cast<double>(correct) / static_cast<double>(rows.size());

  std::size_t present = 0;
  for (std::size_t c = 0; c < k; ++c) {
    if (!m.class_present[c]) continue;
    ++present;
    std::size_t predicted_c = 0, actual_c = 0;
    for (std::size_t o = 0; o < k; ++o) {
      predicted_c += m.confusion[o][c];
      actual_c += m.confusion[c][o];
    }
    const double tp = static_cast<double>(m.confusion[c][c]);
    const double precision = predicted_c ? tp / static_cast<double>(predicted_c) : 0.0;
    const double recall = actual_c ? tp / static_cast<double>(actual_c) : 0.0;
    const double f1 =
        (precision + recall) > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
    m.macro_precision += precision;
    m.macro_recall += recall;
    m.per_class_f1[c] = f1;
    m.macro_f1 += f1;
  }
  m.macro_precision /= static_cast<double>(present);
  m.macro_recall /= static_cast<double>(present);
  m.macro_f1 /= static_cast<double>(present);
  return m;
}

Metrics evaluate(const DenseMatrix& probabilities, std::span<const int> labels) {
  std::vector<std::size_t> rows(probabilities.rows());
  std::iota(rows.begin(), rows.end(), 0);
  return evaluate(probabilities, labels, rows);
}

nlohmann::ordered_json metrics_to_json(const Metrics& m) {
  nlohmann::ordered_json j;
  j["accuracy"] = m.accuracy;
  j["macro_precision"] = m.macro_precision;
  j["macro_recall"] = m.macro_recall;
  j["macro_f1"] = m.macro_f1;
  j["confusion"] = m.confusion;
  j["iterations_to_converge"] = m.iterations_to_converge;
  j["astt_seconds"] = m.astt_seconds;
  j["oit_seconds"] = m.oit_seconds;
  j["tet_seconds"] = m.tet_seconds;
  return j;
}

// ---------------------------------------------------------------------------
// Checkpoints

std::string config_hash(const ModelConfig& config) {
  const std::string text = model_config_to_json(config).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

nlohmann::ordered_json matrix_json(const DenseMatrix& m) {
  nlohmann::ordered_json j;
  j["rows"] = m.rows();
  j["cols"] = m.cols();
  j["values"] = m.data();
  return j;
}

DenseMatrix matrix_from_json(const nlohmann::ordered_json& j) {
  return DenseMatrix(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>(),
                     j.at("values").get<std::vector<double>>());
}

}  // namespace

nlohmann::ordered_json checkpoint_to_json(const PandoraModel& model,
                                          const OptimizerState* optimizer,
                                          const nlohmann::ordered_json& extra) {
  nlohmann::ordered_json j;
  j["format"] = "pandora-checkpoint";
  j["version"] = 1;
  j["config"] = model_config_to_json(model.config());
  j["config_hash"] = config_hash(model.config());
  nlohmann::ordered_json params = nlohmann::ordered_json::array();
  for (const Parameter* p : model.parameters()) {
    nlohmann::ordered_json pj = matrix_json(p->value);
    pj["name"] = p->name;
    params.push_back(std::move(pj));
  }
  j["parameters"] = std::move(params);
  if (optimizer) {
    nlohmann::ordered_json o;
    o["kind"] = optimizer->config.kind == OptimizerKind::Adam ? "adam" : "sgd";
    o["alpha"] = optimizer->config.alpha;
    o["beta1"] = optimizer->config.beta1;
    o["beta2"] = optimizer->config.beta2;
    o["epsilon"] = optimizer->config.epsilon;
    o["step"] = optimizer->step;
    o["first_moment"] = nlohmann::ordered_json::array();
    o["second_moment"] = nlohmann::ordered_json::array();
    for (const auto& m : optimizer->first_moment) o["first_moment"].push_back(matrix_json(m));
    for (const auto& v : optimizer->second_moment) o["second_moment"].push_back(matrix_json(v));
    j["optimizer"] = std::move(o);
  }
  j["extra"] = extra;
  return j;
}

Checkpoint checkpoint_from_json(const nlohmann::ordered_json& j) {
  if (j.value("format", std::string{}) != "pandora-checkpoint") {
    throw std::invalid_argument("not a pandora checkpoint");
  }
  Checkpoint cp;
  const ModelConfig config = model_config_from_json(j.at("config"));
  if (j.contains("config_hash") && j.at("config_hash").get<std::string>() != config_hash(config)) {
    throw std::invalid_argument("checkpoint config hash does not match its config");
  }
  cp.model = PandoraModel(config);
  const auto params = cp.model.parameters();
  const auto& pj = j.at("parameters");
  if (pj.size() != params.size()) throw std::invalid_argument("checkpoint parameter count mismatch");
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (pj[k].at("name").get<std::string>() != params[k]->name) {
      throw std::invalid_argument("checkpoint parameter order mismatch at '" + params[k]->name + "'");
    }
    DenseMatrix v = matrix_from_json(pj[k]);
    require_same_shape(params[k]->value, v, "checkpoint parameter");
    params[k]->value = std::move(v);
  }
  if (j.contains("optimizer")) {
    const auto& o = j.at("optimizer");
    OptimizerState s;
    s.config.kind = o.at("kind").get<std::string>() == "sgd" ? OptimizerKind::Sgd : OptimizerKind::Adam;
    s.config.alpha = o.at("alpha").get<double>();
    s.config.beta1 = o.at("beta1").get<double>();
    s.config.beta2 = o.at("beta2").get<double>();
    s.config.epsilon = o.at("epsilon").get<double>();
    s.step = o.at("step").get<std::uint64_t>();
    for (const auto& m : o.at("first_moment")) s.first_moment.push_back(matrix_from_json(m));
    for (const auto& v : o.at("second_moment")) s.second_moment.push_back(matrix_from_json(v));
    cp.optimizer = std::move(s);
  }
  if (j.contains("extra")) cp.extra = j.at("extra");
  return cp;
}

}  // namespace pandora
