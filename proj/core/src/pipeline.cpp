#include "pandora/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <map>

namespace pandora {

// ---------------------------------------------------------------------------
// Run config

nlohmann::ordered_json run_config_to_json(const RunConfig& c) {
  nlohmann::ordered_json j;
  j["mode"] = to_string(c.mode);
  j["attribute_only"] = c.attribute_only;
  j["dynamic"] = c.dynamic;
  j["alpha"] = c.alpha;
  j["max_epoch"] = c.max_epoch;
  j["patience"] = c.patience;
  j["hidden_width"] = c.hidden_width;
  j["embedding_width"] = c.embedding_width;
  j["class_count"] = c.class_count;
  j["optimizer"] = c.optimizer == OptimizerKind::Adam ? "adam" : "sgd";
  j["train_ratio"] = c.ratios.train;
  j["validation_ratio"] = c.ratios.validation;
  j["test_ratio"] = c.ratios.test;
  j["inconsistency_limit"] = c.inconsistency_limit;
  j["max_bins"] = c.max_bins;
  j["weighted_propagation"] = c.weighted_propagation;
  j["seed"] = c.seed;
  return j;
}

namespace {

template <class T>
T typed(const nlohmann::ordered_json& v, const std::string& key) {
  try {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw std::invalid_argument("");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw std::invalid_argument("");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw std::invalid_argument("");
    } else {
      if (!v.is_number_unsigned()) throw std::invalid_argument("");
    }
    return v.get<T>();
  } catch (const std::exception&) {
    throw std::invalid_argument("config key '" + key + "' has the wrong type");
  }
}

}  // namespace

RunConfig run_config_from_json(const nlohmann::ordered_json& j, RunConfig c) {
  if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
  using Setter = std::function<void(const nlohmann::ordered_json&, const std::string&)>;
  const std::map<std::string, Setter> setters = {
      {"mode", [&](auto& v, auto& k) { c.mode = parse_aggregator_mode(typed<std::string>(v, k)); }},
      {"attribute_only", [&](auto& v, auto& k) { c.attribute_only = typed<bool>(v, k); }},
      {"dynamic", [&](auto& v, auto& k) { c.dynamic = typed<bool>(v, k); }},
      {"alpha", [&](auto& v, auto& k) { c.alpha = typed<double>(v, k); }},
      {"max_epoch", [&](auto& v, auto& k) { c.max_epoch = typed<std::size_t>(v, k); }},
      {"patience", [&](auto& v, auto& k) { c.patience = typed<std::size_t>(v, k); }},
      {"hidden_width", [&](auto& v, auto& k) { c.hidden_width = typed<std::size_t>(v, k); }},
      {"embedding_width", [&](auto& v, auto& k) { c.embedding_width = typed<std::size_t>(v, k); }},
      {"class_count", [&](auto& v, auto& k) { c.class_count = typed<std::size_t>(v, k); }},
      {"optimizer",
       [&](auto& v, auto& k) {
         const auto s = typed<std::string>(v, k);
         if (s == "adam") c.optimizer = OptimizerKind::Adam;
         else if (s == "sgd") c.optimizer = OptimizerKind::Sgd;
         else throw std::invalid_argument("config key 'optimizer' must be adam or sgd");
       }},
      {"train_ratio", [&](auto& v, auto& k) { c.ratios.train = typed<double>(v, k); }},
      {"validation_ratio", [&](auto& v, auto& k) { c.ratios.validation = typed<double>(v, k); }},
      {"test_ratio", [&](auto& v, auto& k) { c.ratios.test = typed<double>(v, k); }},
      {"inconsistency_limit", [&](auto& v, auto& k) { c.inconsistency_limit = typed<double>(v, k); }},
      {"max_bins", [&](auto& v, auto& k) { c.max_bins = typed<std::size_t>(v, k); }},
      {"weighted_propagation", [&](auto& v, auto& k) { c.weighted_propagation = typed<bool>(v, k); }},
      {"seed", [&](auto& v, auto& k) { c.seed = typed<std::uint64_t>(v, k); }},
  };
  for (const auto& [key, value] : j.items()) {
    const auto it = setters.find(key);
    if (it == setters.end()) throw std::invalid_argument("unknown config key '" + key + "'");
    it->second(value, key);
  }
  return c;
}

void validate(const RunConfig& c) {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw std::invalid_argument(what);
  };
  require(std::isfinite(c.alpha) && c.alpha > 0.0, "alpha must be > 0");
  require(c.max_epoch >= 1, "max_epoch must be >= 1");
  require(c.hidden_width >= 1, "hidden_width must be >= 1");
  require(c.embedding_width >= 1, "embedding_width must be >= 1");
  require(c.class_count >= 2, "class_count must be >= 2");
  require(c.max_bins >= 1, "max_bins must be >= 1");
  require(c.inconsistency_limit >= 0.0 && c.inconsistency_limit <= 1.0,
          "inconsistency_limit must lie in [0, 1]");
}

// ---------------------------------------------------------------------------
// Features

AttributeTable timestamp_attributes(const Dataset& d, std::size_t t) {
  const TimestampTable& ts = d.timestamps.at(t);
  AttributeTable a = d.attributes;
  for (std::size_t c = 0; c < a.names.size(); ++c) {
    if (a.names[c] == "temperature_c") a.columns[c] = ts.temperature_c;
    if (a.names[c] == "mobility_mean") a.columns[c] = ts.mobility_mean;
  }
  a.names.push_back("confirmed_14d");
  a.columns.emplace_back(ts.confirmed_14d.begin(), ts.confirmed_14d.end());
  return a;
}

namespace {

void require_complete(const AttributeTable& t, std::span<const std::size_t> rows) {
  for (std::size_t c = 0; c < t.columns.size(); ++c)
    for (std::size_t r : rows)
      if (std::isnan(t.columns[c][r])) {
        throw std::invalid_argument("node '" + t.node_ids[r] + "' is missing attribute '" +
                                    t.names[c] + "'");
      }
}

}  // namespace

std::vector<DiscretizationScheme> fit_schemes(const Dataset& d, std::span<const std::size_t> fit_rows,
                                              bool dynamic, const Chi2Config& config) {
  if (fit_rows.empty()) throw std::invalid_argument("fit_schemes: no rows to fit on");
  const auto labels = d.label_indices();
  std::vector<std::vector<double>> columns;
  std::vector<int> y;
  std::vector<std::string> names;

  if (!dynamic) {
    require_complete(d.attributes, fit_rows);
    names = d.attributes.names;
    columns.resize(names.size());
    for (std::size_t r : fit_rows) {
      for (std::size_t c = 0; c < names.size(); ++c) columns[c].push_back(d.attributes.columns[c][r]);
      y.push_back(labels[r]);
    }
  } else {
    if (d.timestamps.empty()) throw std::invalid_argument("dynamic run needs timestamp tables");
    for (std::size_t t = 0; t < d.timestamps.size(); ++t) {
      const AttributeTable a = timestamp_attributes(d, t);
      require_complete(a, fit_rows);
      if (names.empty()) {
        names = a.names;
        columns.resize(names.size());
      }
      for (std::size_t r : fit_rows) {
        for (std::size_t c = 0; c < names.size(); ++c) columns[c].push_back(a.columns[c][r]);
        y.push_back(labels[r]);
      }
    }
  }
  return chi2_discretize_all(columns, names, y, config);
}

FeaturizedData featurize(const Dataset& d, std::span<const DiscretizationScheme> schemes,
                         bool dynamic, PropagationOptions propagation) {
  FeaturizedData f;
  f.nmd = count_nmd(d.graph);
  std::vector<double> transport(d.node_count());
  for (std::size_t v = 0; v < d.node_count(); ++v) transport[v] = d.graph.flight_weight(v);
  f.sft = build_sft(d.graph, f.nmd, transport);
  const PropagationOperator p(renormalized_propagation(d.graph, propagation));

  if (!dynamic) {
    f.aft.push_back(build_aft(d.attributes, schemes));
  } else {
    if (d.timestamps.empty()) throw std::invalid_argument("dynamic run needs timestamp tables");
    for (std::size_t t = 0; t < d.timestamps.size(); ++t)
      f.aft.push_back(build_aft(timestamp_attributes(d, t), schemes));
  }
  for (const auto& aft : f.aft) f.steps.push_back(GraphInput{p, aft.values, f.sft.values});
  return f;
}

// ---------------------------------------------------------------------------
// Runs

ModelConfig model_config_for(const RunConfig& c, const FeaturizedData& f) {
  ModelConfig m;
  m.aft_width = f.aft.front().values.cols();
  m.sft_width = f.sft.values.cols();
  m.hidden_width = c.hidden_width;
  m.embedding_width = c.embedding_width;
  m.class_count = c.class_count;
  m.mode = c.mode;
  m.attribute_only = c.attribute_only;
  m.seed = c.seed;
  return m;
}

RunOutput run_training(const Dataset& d, const RunConfig& config) {
  validate(config);
  RunOutput out;
  const auto labels = d.label_indices();
  for (int l : labels) {
    if (static_cast<std::size_t>(l) >= config.class_count) {
      throw std::invalid_argument("label " + std::to_string(l) + " does not fit class_count " +
                                  std::to_string(config.class_count));
    }
  }
  out.split = split_dataset(labels, config.ratios, config.seed);
  if (out.split.train.empty() || out.split.validation.empty()) {
    throw std::invalid_argument("training and validation splits must be nonempty");
  }

  Chi2Config chi2;
  chi2.inconsistency_limit = config.inconsistency_limit;
  chi2.max_bins = config.max_bins;
  out.schemes = fit_schemes(d, out.split.train, config.dynamic, chi2);
  out.features = featurize(d, out.schemes, config.dynamic, {config.weighted_propagation});

  out.model = PandoraModel(model_config_for(config, out.features));
  TrainConfig tc;
  tc.alpha = config.alpha;
  tc.max_epoch = config.max_epoch;
  tc.patience = config.patience;
  tc.optimizer = config.optimizer;
  TrainingData data{out.features.steps, labels, out.split.train, out.split.validation};
  out.training = train(out.model, data, tc);

  const auto start = std::chrono::steady_clock::now();
  out.forward = config.dynamic ? forward_dynamic(out.model, out.features.steps)
                               : forward_static(out.model, out.features.steps.front());
  if (!out.split.test.empty()) out.test = evaluate(out.forward.probabilities, labels, out.split.test);
  const double tet =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  out.validation = evaluate(out.forward.probabilities, labels, out.split.validation);

  for (Metrics* m : {&out.test, &out.validation}) {
    m->iterations_to_converge = out.training.iterations_to_converge;
    m->astt_seconds = out.training.astt_seconds;
    m->oit_seconds = out.training.oit_seconds;
    m->tet_seconds = tet;
  }
  return out;
}

}  // namespace pandora
