#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pandora/csv.hpp"
#include "pandora/pipeline.hpp"

using namespace pandora;
using nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

struct Globals {
  bool quiet = false;
  std::optional<std::uint64_t> seed;
  fs::path out_dir = ".";
};

struct DataPaths {
  std::string nodes, edges, timeseries;

  void add_to(CLI::App* cmd, bool required = true) {
    auto* n = cmd->add_option("--nodes", nodes, "nodes.csv")->check(CLI::ExistingFile);
    auto* e = cmd->add_option("--edges", edges, "edges.csv")->check(CLI::ExistingFile);
    if (required) {
      n->required();
      e->required();
    }
    cmd->add_option("--timeseries", timeseries, "directory of t_YYYY-MM-DD.csv files")
        ->check(CLI::ExistingDirectory);
  }

  Dataset load() const {
    std::optional<fs::path> ts;
    if (!timeseries.empty()) ts = timeseries;
    return load_dataset(nodes, edges, ts);
  }
};

class Run {
 public:
  Run(const Globals& g, std::string command, std::vector<std::string> argv)
      : globals_(g), command_(std::move(command)), argv_(std::move(argv)),
        start_(std::chrono::steady_clock::now()), started_utc_(utc_now()) {}

  const Globals& globals() const { return globals_; }

  void info(const std::string& line) const {
    if (!globals_.quiet) std::cout << line << '\n';
  }

  fs::path output(const std::string& name) const {
    fs::create_directories(globals_.out_dir);
    return globals_.out_dir / name;
  }

  void write(const std::string& name, const std::string& content) {
    write_to(output(name), content);
  }

  void write_to(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    write_file_atomic(path, content);
    outputs_.push_back(path.string());
  }

  ordered_json config = ordered_json::object();
  std::uint64_t seed = 0;
  ordered_json timings = ordered_json::object();

  void finish() {
    ordered_json meta;
    meta["command"] = command_;
    meta["argv"] = argv_;
    meta["seed"] = seed;
    meta["config"] = config;
    meta["versions"] = {{"pandora", PANDORA_VERSION},
                        {"compiler", __VERSION__},
                        {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                              std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                              std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
                        {"cli11", CLI11_VERSION}};
    meta["outputs"] = outputs_;
    timings["started_utc"] = started_utc_;
    timings["wall_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    meta["timings"] = timings;
    write_file_atomic(output("run_meta.json"), meta.dump(2) + "\n");
  }

 private:
  static std::string utc_now() {
    const std::time_t t = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
  }

  Globals globals_;
  std::string command_;
  std::vector<std::string> argv_;
  std::chrono::steady_clock::time_point start_;
  std::string started_utc_;
  std::vector<std::string> outputs_;
};

std::string json_text(const ordered_json& j) { return j.dump(2) + "\n"; }

ordered_json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open '" + path.string() + "'");
  try {
    return ordered_json::parse(in);
  } catch (const ordered_json::parse_error& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
}

std::string class_name(std::size_t k, std::size_t classes) {
  if (classes == kRiskLevelCount) return to_string(static_cast<RiskLevel>(k));
  return std::to_string(k);
}

std::string matrix_csv(const std::vector<std::string>& ids, const std::vector<std::string>& header,
                       const DenseMatrix& m) {
  std::string out = "node_id";
  for (const auto& h : header) out += "," + csv_field(h);
  out += "\n";
  for (std::size_t i = 0; i < m.rows(); ++i) {
    out += csv_field(ids[i]);
    for (std::size_t j = 0; j < m.cols(); ++j) out += "," + format_number(m(i, j));
    out += "\n";
  }
  return out;
}

std::string nmd_csv(const std::vector<std::string>& ids, const NmdTable& nmd) {
  std::ostringstream os;
  write_nmd_csv(os, ids, nmd);
  return os.str();
}

std::string splits_csv(const Dataset& d, const SplitAssignment& s) {
  std::string out = "node_index,node_id,label,split\n";
  for (std::size_t i = 0; i < d.node_count(); ++i) {
    out += std::to_string(i) + "," + csv_field(d.node_ids[i]) + "," + to_string(d.labels[i]) +
           "," + to_string(s.of_node[i]) + "\n";
  }
  return out;
}

std::string history_csv(const TrainResult& r) {
  std::string out = "epoch,train_loss,val_loss,train_acc,val_acc\n";
  for (const auto& e : r.history) {
    out += std::to_string(e.epoch) + "," + format_number(e.train_loss) + "," +
           format_number(e.val_loss) + "," + format_number(e.train_acc) + "," +
           format_number(e.val_acc) + "\n";
  }
  return out;
}

// Wall-clock fields live in run_meta.json so every other output is
// reproducible byte for byte.
ordered_json metrics_without_timings(const Metrics& m) {
  auto j = metrics_to_json(m);
  j.erase("astt_seconds");
  j.erase("oit_seconds");
  j.erase("tet_seconds");
  return j;
}

std::vector<std::string> column_header(const std::string& prefix, std::size_t n) {
  std::vector<std::string> h;
  for (std::size_t i = 0; i < n; ++i) h.push_back(prefix + std::to_string(i));
  return h;
}

// ---------------------------------------------------------------------------
// Run configuration assembly: defaults < --config file < flags.

struct TrainFlags {
  std::string config_path;
  std::optional<std::string> mode, optimizer;
  std::optional<double> alpha, inconsistency_limit, train_ratio, validation_ratio, test_ratio;
  std::optional<std::size_t> max_epoch, patience, hidden_width, embedding_width, class_count,
      max_bins;
  bool attribute_only = false, dynamic = false, weighted = false;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
    cmd->add_option("--mode", mode, "aggregator: HA, SU or CO");
    cmd->add_flag("--attribute-only", attribute_only, "single-branch GCN over attributes");
    cmd->add_flag("--dynamic", dynamic, "train on the timestamp tables");
    cmd->add_option("--alpha", alpha, "learning rate");
    cmd->add_option("--max-epoch", max_epoch);
    cmd->add_option("--patience", patience);
    cmd->add_option("--hidden-width", hidden_width);
    cmd->add_option("--embedding-width", embedding_width);
    cmd->add_option("--class-count", class_count);
    cmd->add_option("--optimizer", optimizer, "adam or sgd");
    cmd->add_option("--train-ratio", train_ratio);
    cmd->add_option("--validation-ratio", validation_ratio);
    cmd->add_option("--test-ratio", test_ratio);
    cmd->add_option("--inconsistency-limit", inconsistency_limit);
    cmd->add_option("--max-bins", max_bins);
    cmd->add_flag("--weighted-propagation", weighted, "use edge weights in propagation");
  }

  // Returns the run config; data paths found in the config file fill any
  // that were not given on the command line.
  RunConfig resolve(const Globals& g, DataPaths& paths) const {
    RunConfig c;
    if (!config_path.empty()) {
      auto j = read_json(config_path);
      if (!j.is_object()) throw std::invalid_argument(config_path + ": expected a JSON object");
      const fs::path base = fs::path(config_path).parent_path();
      for (auto [key, target] : {std::pair{"nodes", &paths.nodes}, std::pair{"edges", &paths.edges},
                                 std::pair{"timeseries", &paths.timeseries}}) {
        if (!j.contains(key)) continue;
        if (!j[key].is_string()) throw std::invalid_argument(std::string(key) + ": expected a string");
        if (target->empty()) {
          const fs::path p = j[key].get<std::string>();
          *target = (p.is_absolute() ? p : base / p).string();
        }
        j.erase(key);
      }
      c = run_config_from_json(j, c);
    }
    ordered_json o = ordered_json::object();
    if (mode) o["mode"] = *mode;
    if (optimizer) o["optimizer"] = *optimizer;
    if (alpha) o["alpha"] = *alpha;
    if (inconsistency_limit) o["inconsistency_limit"] = *inconsistency_limit;
    if (train_ratio) o["train_ratio"] = *train_ratio;
    if (validation_ratio) o["validation_ratio"] = *validation_ratio;
    if (test_ratio) o["test_ratio"] = *test_ratio;
    if (max_epoch) o["max_epoch"] = *max_epoch;
    if (patience) o["patience"] = *patience;
    if (hidden_width) o["hidden_width"] = *hidden_width;
    if (embedding_width) o["embedding_width"] = *embedding_width;
    if (class_count) o["class_count"] = *class_count;
    if (max_bins) o["max_bins"] = *max_bins;
    if (attribute_only) o["attribute_only"] = true;
    if (dynamic) o["dynamic"] = true;
    if (weighted) o["weighted_propagation"] = true;
    if (g.seed) o["seed"] = *g.seed;
    c = run_config_from_json(o, c);
    validate(c);
    if (paths.nodes.empty() || paths.edges.empty()) {
      throw std::invalid_argument("--nodes and --edges are required (on the command line or in --config)");
    }
    return c;
  }
};

// ---------------------------------------------------------------------------
// Subcommands

int cmd_motifs(Run& run, const DataPaths& paths, const std::string& out, std::size_t ensemble,
               std::size_t swaps) {
  const Dataset d = paths.load();
  run.seed = run.globals().seed.value_or(0);
  run.config = {{"nodes", paths.nodes}, {"edges", paths.edges}, {"ensemble", ensemble}};
  const auto start = std::chrono::steady_clock::now();
  const auto nmd = count_nmd(d.graph);
  run.timings["count_seconds"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  run.write_to(out.empty() ? run.output("nmd.csv") : fs::path(out), nmd_csv(d.node_ids, nmd));

  const auto totals = motif_totals(nmd);
  for (auto k : kAllMotifKinds)
    run.info(to_string(k) + ": " + std::to_string(totals[static_cast<std::size_t>(k)]));

  if (ensemble > 0) {
    SignificanceOptions opt;
    opt.ensemble = ensemble;
    opt.swaps = swaps;
    opt.seed = run.seed;
    ordered_json report = ordered_json::array();
    for (auto k : kAllMotifKinds) {
      const auto r = motif_significance(d.graph, k, opt);
      report.push_back({{"motif", to_string(k)},
                        {"f_ori", r.f_ori},
                        {"f_rand_mean", r.f_rand_mean},
                        {"f_rand_std", r.f_rand_std},
                        {"z_score", std::isfinite(r.z_score) ? ordered_json(r.z_score)
                                                             : ordered_json(r.z_score > 0 ? "inf" : "-inf")},
                        {"degenerate_null", r.degenerate_null},
                        {"passes_P", r.passes_P},
                        {"passes_U", r.passes_U},
                        {"passes_D", r.passes_D}});
      run.info(to_string(k) + " z=" + report.back()["z_score"].dump());
    }
    run.write("significance.json", json_text(report));
  }
  return 0;
}

int cmd_featurize(Run& run, DataPaths paths, const TrainFlags& flags) {
  const RunConfig c = flags.resolve(run.globals(), paths);
  const Dataset d = paths.load();
  run.seed = c.seed;
  run.config = run_config_to_json(c);
  const auto split = split_dataset(d.label_indices(), c.ratios, c.seed);
  Chi2Config chi2;
  chi2.inconsistency_limit = c.inconsistency_limit;
  chi2.max_bins = c.max_bins;
  const auto schemes = fit_schemes(d, split.train, c.dynamic, chi2);
  const auto f = featurize(d, schemes, c.dynamic, {c.weighted_propagation});

  run.write("nmd.csv", nmd_csv(d.node_ids, f.nmd));
  run.write("sft.csv", matrix_csv(d.node_ids, f.sft.column_names, f.sft.values));
  if (f.aft.size() == 1) {
    run.write("aft.csv", matrix_csv(d.node_ids, f.aft[0].column_names, f.aft[0].values));
  } else {
    for (std::size_t t = 0; t < f.aft.size(); ++t) {
      run.write("aft_" + d.timestamps[t].date + ".csv",
                matrix_csv(d.node_ids, f.aft[t].column_names, f.aft[t].values));
    }
  }
  run.write("schemes.json", json_text(schemes_to_json(schemes)));
  run.write("splits.csv", splits_csv(d, split));
  for (const auto& s : split.warnings) std::cerr << "pandora: warning: " << s << '\n';
  run.info("featurized " + std::to_string(d.node_count()) + " nodes: AFT width " +
           std::to_string(f.aft[0].values.cols()) + ", SFT width " +
           std::to_string(f.sft.values.cols()));
  return 0;
}

int train_one(Run& run, const Dataset& d, const RunConfig& c) {
  const RunOutput r = run_training(d, c);
  for (const auto& s : r.split.warnings) std::cerr << "pandora: warning: " << s << '\n';

  ordered_json metrics;
  metrics["validation"] = metrics_without_timings(r.validation);
  metrics["test"] = r.split.test.empty() ? ordered_json(nullptr) : metrics_without_timings(r.test);
  metrics["best_epoch"] = r.training.best_epoch;
  metrics["epochs_run"] = r.training.history.size();
  metrics["stopped_early"] = r.training.stopped_early;

  ordered_json extra;
  extra["run_config"] = run_config_to_json(c);
  extra["schemes"] = schemes_to_json(r.schemes);

  const auto& emb = r.forward.embedding;
  run.write("history.csv", history_csv(r.training));
  run.write("metrics.json", json_text(metrics));
  run.write("embeddings.csv", matrix_csv(d.node_ids, column_header("e", emb.cols()), emb));
  run.write("checkpoint.json", json_text(checkpoint_to_json(r.model, &r.training.optimizer, extra)));
  run.write("schemes.json", json_text(schemes_to_json(r.schemes)));
  run.write("splits.csv", splits_csv(d, r.split));
  run.write("config.json", json_text(run_config_to_json(c)));

  run.timings["astt_seconds"] = r.training.astt_seconds;
  run.timings["oit_seconds"] = r.training.oit_seconds;
  run.timings["tet_seconds"] = r.test.tet_seconds;

  std::ostringstream os;
  os.precision(4);
  os << (c.attribute_only ? std::string("GCN") : to_string(c.mode)) << ": best epoch "
     << r.training.best_epoch << " of " << r.training.history.size() << ", val acc "
     << r.validation.accuracy << ", test acc " << r.test.accuracy << ", test macro-F1 "
     << r.test.macro_f1;
  run.info(os.str());
  return 0;
}

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char ch : s) out += ch == '\'' ? std::string("'\\''") : std::string(1, ch);
  return out + "'";
}

// One child process per configuration, run one after another.
int train_grid(Run& run, const DataPaths& paths, const RunConfig& base) {
  const fs::path self = fs::read_symlink("/proc/self/exe");
  struct Entry {
    std::string name;
    bool attribute_only;
    AggregatorMode mode;
  };
  const std::vector<Entry> grid = {{"GCN", true, AggregatorMode::HA},
                                   {"HA", false, AggregatorMode::HA},
                                   {"SU", false, AggregatorMode::SU},
                                   {"CO", false, AggregatorMode::CO}};
  ordered_json summary = ordered_json::array();
  int failures = 0;
  for (const auto& e : grid) {
    RunConfig c = base;
    c.attribute_only = e.attribute_only;
    c.mode = e.mode;
    const fs::path dir = run.output(e.name);
    fs::create_directories(dir);
    const fs::path cfg = dir / "grid_config.json";
    auto j = run_config_to_json(c);
    j["nodes"] = fs::absolute(paths.nodes).string();
    j["edges"] = fs::absolute(paths.edges).string();
    if (!paths.timeseries.empty()) j["timeseries"] = fs::absolute(paths.timeseries).string();
    write_file_atomic(cfg, json_text(j));
    std::string cmd = shell_quote(self.string()) + " train --config " + shell_quote(cfg.string()) +
                      " --out-dir " + shell_quote(dir.string());
    if (run.globals().quiet) cmd += " --quiet";
    const int status = std::system(cmd.c_str());
    ordered_json item = {{"run", e.name}, {"exit_status", status}};
    if (status == 0) {
      const auto m = read_json(dir / "metrics.json");
      item["val_accuracy"] = m["validation"]["accuracy"];
      item["test_accuracy"] = m["test"].is_null() ? ordered_json(nullptr) : m["test"]["accuracy"];
      item["best_epoch"] = m["best_epoch"];
    } else {
      ++failures;
    }
    summary.push_back(item);
  }
  run.write("grid_summary.json", json_text(summary));
  if (failures) throw std::runtime_error(std::to_string(failures) + " grid run(s) failed");
  return 0;
}

int cmd_train(Run& run, DataPaths paths, const TrainFlags& flags, bool grid) {
  const RunConfig c = flags.resolve(run.globals(), paths);
  run.seed = c.seed;
  run.config = run_config_to_json(c);
  run.config["nodes"] = paths.nodes;
  run.config["edges"] = paths.edges;
  if (!paths.timeseries.empty()) run.config["timeseries"] = paths.timeseries;
  if (grid) return train_grid(run, paths, c);
  return train_one(run, paths.load(), c);
}

struct Restored {
  Checkpoint checkpoint;
  RunConfig config;
  std::vector<DiscretizationScheme> schemes;
};

Restored restore(const std::string& path) {
  Restored r;
  r.checkpoint = checkpoint_from_json(read_json(path));
  const auto& extra = r.checkpoint.extra;
  if (!extra.contains("run_config") || !extra.contains("schemes")) {
    throw std::invalid_argument(path + ": checkpoint lacks run_config or schemes");
  }
  r.config = run_config_from_json(extra["run_config"]);
  r.schemes = schemes_from_json(extra["schemes"]);
  return r;
}

ForwardResult predict_all(const Restored& r, const Dataset& d) {
  const auto f = featurize(d, r.schemes, r.config.dynamic, {r.config.weighted_propagation});
  return r.config.dynamic ? forward_dynamic(r.checkpoint.model, f.steps)
                          : forward_static(r.checkpoint.model, f.steps.front());
}

int cmd_evaluate(Run& run, const DataPaths& paths, const std::string& checkpoint,
                 const std::string& which) {
  const Restored r = restore(checkpoint);
  const Dataset d = paths.load();
  run.seed = r.config.seed;
  run.config = {{"checkpoint", checkpoint}, {"split", which}, {"run_config", run_config_to_json(r.config)}};
  const auto labels = d.label_indices();
  const auto start = std::chrono::steady_clock::now();
  const auto fwd = predict_all(r, d);

  std::vector<std::size_t> rows;
  if (which == "all") {
    for (std::size_t i = 0; i < d.node_count(); ++i) rows.push_back(i);
  } else {
    // The split is a pure function of labels, ratios and seed.
    const auto s = split_dataset(labels, r.config.ratios, r.config.seed);
    rows = which == "train" ? s.train : which == "validation" ? s.validation : s.test;
  }
  if (rows.empty()) throw std::invalid_argument("split '" + which + "' is empty");
  for (int l : labels) {
    if (static_cast<std::size_t>(l) >= r.checkpoint.model.config().class_count) {
      throw std::invalid_argument("dataset label outside the model's classes");
    }
  }
  const auto m = evaluate(fwd.probabilities, labels, rows);
  run.timings["tet_seconds"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  run.write("metrics.json", json_text(metrics_without_timings(m)));
  std::ostringstream os;
  os.precision(4);
  os << which << " (" << rows.size() << " nodes): accuracy " << m.accuracy << ", macro-F1 "
     << m.macro_f1;
  run.info(os.str());
  return 0;
}

int cmd_predict(Run& run, const DataPaths& paths, const std::string& checkpoint, const std::string& out) {
  const Restored r = restore(checkpoint);
  const Dataset d = paths.load();
  run.seed = r.config.seed;
  run.config = {{"checkpoint", checkpoint}, {"run_config", run_config_to_json(r.config)}};
  const auto fwd = predict_all(r, d);
  const std::size_t k = fwd.probabilities.cols();
  const auto pred = argmax_rows(fwd.probabilities);
  std::string csv = "node_id,predicted";
  for (std::size_t c = 0; c < k; ++c) csv += ",p_" + class_name(c, k);
  csv += "\n";
  for (std::size_t i = 0; i < d.node_count(); ++i) {
    csv += csv_field(d.node_ids[i]) + "," + class_name(static_cast<std::size_t>(pred[i]), k);
    for (std::size_t c = 0; c < k; ++c) csv += "," + format_number(fwd.probabilities(i, c));
    csv += "\n";
  }
  run.write_to(out.empty() ? run.output("predictions.csv") : fs::path(out), csv);
  run.info("predicted " + std::to_string(d.node_count()) + " nodes");
  return 0;
}

int cmd_synth(Run& run, SynthConfig cfg, const std::string& rule) {
  cfg.label_rule = parse_label_rule(rule);
  cfg.seed = run.globals().seed.value_or(0);
  if (cfg.n == 0 || cfg.communities == 0 || cfg.communities > cfg.n) {
    throw std::invalid_argument("need 1 <= communities <= n");
  }
  for (double p : {cfg.edge_prob_in, cfg.edge_prob_out, cfg.sparse_factor}) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("probabilities must lie in [0, 1]");
  }
  run.seed = cfg.seed;
  run.config = {{"n", cfg.n},
                {"communities", cfg.communities},
                {"edge_prob_in", cfg.edge_prob_in},
                {"edge_prob_out", cfg.edge_prob_out},
                {"label_rule", rule},
                {"sparse_factor", cfg.sparse_factor},
                {"attribute_noise", cfg.attribute_noise},
                {"timestamps", cfg.timestamps}};
  const auto s = synth_dataset(cfg);
  for (auto& [name, text] : serialize_dataset(s.dataset)) run.write(name, text);
  std::string comm = "node_id,community\n";
  for (std::size_t i = 0; i < s.community.size(); ++i)
    comm += csv_field(s.dataset.node_ids[i]) + "," + std::to_string(s.community[i]) + "\n";
  run.write("communities.csv", comm);
  std::ostringstream os;
  os.precision(4);
  os << "synthesized " << cfg.n << " nodes, " << s.dataset.graph.edge_count()
     << " edges; nearest-centroid attribute accuracy " << s.centroid_accuracy;
  run.info(os.str());
  return 0;
}

int cmd_gradcheck(Run& run, std::size_t n, const std::string& mode_text, std::size_t samples) {
  run.seed = run.globals().seed.value_or(0);
  run.config = {{"nodes", n}, {"mode", mode_text}, {"samples", samples}};
  if (n < 2) throw std::invalid_argument("--nodes must be at least 2");
  std::vector<AggregatorMode> modes;
  if (mode_text == "all") {
    modes = {AggregatorMode::HA, AggregatorMode::SU, AggregatorMode::CO};
  } else {
    modes = {parse_aggregator_mode(mode_text)};
  }

  std::mt19937_64 rng(run.seed);
  std::bernoulli_distribution edge(0.2);
  std::uniform_int_distribution<int> bin(0, 3), label(0, 3);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t u = 0; u < n; ++u)
    for (std::size_t v = u + 1; v < n; ++v)
      if (edge(rng)) edges.emplace_back(u, v);
  GraphInput in;
  in.propagation = PropagationOperator(renormalized_propagation(Graph::from_edges(n, edges)));
  in.aft = DenseMatrix(n, 12);
  in.sft = DenseMatrix(n, 8);
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t b = 0; b < 3; ++b) in.aft(i, b * 4 + static_cast<std::size_t>(bin(rng))) = 1.0;
    for (std::size_t j = 0; j < 8; ++j) in.sft(i, j) = unit(rng);
    labels[i] = label(rng);
  }
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < n; ++i) rows.push_back(i);
  const std::vector<GraphInput> steps = {in};

  double worst = 0.0;
  ordered_json report = ordered_json::object();
  for (auto mode : modes) {
    ModelConfig mc;
    mc.aft_width = 12;
    mc.sft_width = 8;
    mc.hidden_width = 16;
    mc.embedding_width = 16;
    mc.mode = mode;
    mc.seed = run.seed;
    PandoraModel model(mc);
    GradCheckOptions opt;
    opt.samples = samples;
    opt.seed = run.seed;
    const auto r = grad_check_model(model, steps, labels, rows, opt);
    worst = std::max(worst, r.max_relative_error);
    report[to_string(mode)] = {{"max_relative_error", r.max_relative_error},
                               {"entries_checked", r.entries_checked},
                               {"worst_parameter", r.worst_parameter}};
    if (!run.globals().quiet) {
      std::printf("%s max relative error %.3e (%zu entries)\n", to_string(mode).c_str(),
                  r.max_relative_error, r.entries_checked);
    }
  }
  run.write("gradcheck.json", json_text(report));
  std::printf("max relative error %.3e\n", worst);
  return worst < 1e-5 ? 0 : 1;
}

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Infection-risk classification on geographical networks"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);
  Globals g;
  std::uint64_t seed = 0;
  std::string out_dir = ".";
  app.add_flag("--quiet,-q", g.quiet, "suppress progress output");
  auto* seed_opt = app.add_option("--seed", seed, "random seed");
  app.add_option("--out-dir", out_dir, "output directory");
  app.fallthrough();

  DataPaths motif_paths;
  std::string motif_out;
  std::size_t ensemble = 0, swaps = 0;
  auto* motifs = app.add_subcommand("motifs", "per-node motif degree counts");
  motif_paths.add_to(motifs);
  motifs->add_option("--out", motif_out, "NMD CSV path (default <out-dir>/nmd.csv)");
  motifs->add_option("--significance", ensemble, "null-model ensemble size; 0 skips the test");
  motifs->add_option("--swaps", swaps, "attempted swaps per null graph (default 10x edges)");

  DataPaths feat_paths;
  TrainFlags feat_flags;
  auto* feat = app.add_subcommand("featurize", "fit discretization and write AFT/SFT");
  feat_paths.add_to(feat, false);
  feat_flags.add_to(feat);

  DataPaths train_paths;
  TrainFlags train_flags;
  bool grid = false;
  auto* train_cmd = app.add_subcommand("train", "train a model");
  train_paths.add_to(train_cmd, false);
  train_flags.add_to(train_cmd);
  train_cmd->add_flag("--grid", grid, "train GCN, HA, SU and CO in separate processes");

  DataPaths eval_paths;
  std::string eval_ckpt, eval_split = "test";
  auto* eval = app.add_subcommand("evaluate", "metrics of a checkpoint on a dataset");
  eval_paths.add_to(eval);
  eval->add_option("--checkpoint", eval_ckpt)->required()->check(CLI::ExistingFile);
  eval->add_option("--split", eval_split, "train, validation, test or all")
      ->check(CLI::IsMember({"train", "validation", "test", "all"}));

  DataPaths pred_paths;
  std::string pred_ckpt, pred_out;
  auto* pred = app.add_subcommand("predict", "class probabilities per node");
  pred_paths.add_to(pred);
  pred->add_option("--checkpoint", pred_ckpt)->required()->check(CLI::ExistingFile);
  pred->add_option("--out", pred_out, "CSV path (default <out-dir>/predictions.csv)");

  SynthConfig synth_cfg;
  std::string rule = "community";
  auto* synth = app.add_subcommand("synth", "generate a planted-partition dataset");
  synth->add_option("--n", synth_cfg.n, "node count");
  synth->add_option("--communities", synth_cfg.communities);
  synth->add_option("--p-in", synth_cfg.edge_prob_in, "edge probability inside a community");
  synth->add_option("--p-out", synth_cfg.edge_prob_out, "edge probability across communities");
  synth->add_option("--label-rule", rule, "community or structural");
  synth->add_option("--sparse-factor", synth_cfg.sparse_factor);
  synth->add_option("--attribute-noise", synth_cfg.attribute_noise);
  synth->add_option("--timestamps", synth_cfg.timestamps, "daily tables to generate");

  std::size_t gc_nodes = 20, gc_samples = 1'000'000;
  std::string gc_mode = "all";
  auto* gc = app.add_subcommand("gradcheck", "finite-difference check of the model gradient");
  gc->add_option("--nodes", gc_nodes, "random graph size");
  gc->add_option("--mode", gc_mode, "HA, SU, CO or all");
  gc->add_option("--samples", gc_samples, "entries to check (all if fewer)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (*seed_opt) g.seed = seed;
  g.out_dir = out_dir;
  std::vector<std::string> args(argv + 1, argv + argc);
  auto* sub = app.get_subcommands().front();
  Run run(g, sub->get_name(), args);
  try {
    int status = 0;
    if (sub == motifs) status = cmd_motifs(run, motif_paths, motif_out, ensemble, swaps);
    else if (sub == feat) status = cmd_featurize(run, feat_paths, feat_flags);
    else if (sub == train_cmd) status = cmd_train(run, train_paths, train_flags, grid);
    else if (sub == eval) status = cmd_evaluate(run, eval_paths, eval_ckpt, eval_split);
    else if (sub == pred) status = cmd_predict(run, pred_paths, pred_ckpt, pred_out);
    else if (sub == synth) status = cmd_synth(run, synth_cfg, rule);
    else if (sub == gc) status = cmd_gradcheck(run, gc_nodes, gc_mode, gc_samples);
    run.finish();
    return status;
  } catch (const std::exception& e) {
    std::cerr << "pandora: error: " << one_line(e.what()) << '\n';
    return 1;
  }
}
