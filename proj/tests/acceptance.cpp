// Acceptance checks. One PASS/FAIL line per criterion; exit status is the
// number of failures.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "pandora/pipeline.hpp"

using namespace pandora;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Outcome motif_oracle() {
  const auto start = Clock::now();
  const double ps[] = {0.1, 0.3, 0.5};
  std::size_t mismatches = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const std::size_t n = 2 + seed % 19;  // 2..20
    const auto g = Graph::from_edges(n, oracle::erdos_renyi(n, ps[seed % 3], seed * 7919 + 1));
    if (count_nmd(g) != count_nmd_bruteforce(g)) ++mismatches;
  }
  const double t = seconds_since(start);
  return {mismatches == 0 && t < 10.0, fmt("200 graphs, %zu mismatches, %.2fs", mismatches, t)};
}

Outcome gradients() {
  const auto start = Clock::now();
  const std::size_t n = 20;
  const std::vector<GraphInput> steps = {fixture::random_input(n, 0.2, 24, 8, 101)};
  const auto labels = fixture::random_labels(n, 4, 102);
  const auto rows = fixture::range(0, 14);
  GradCheckOptions opt;
  opt.h = 1e-5;
  opt.samples = 1'000'000;  // every entry
  double worst = 0.0;
  std::string detail;
  for (auto mode : {AggregatorMode::HA, AggregatorMode::SU, AggregatorMode::CO}) {
    auto cfg = fixture::small_config(mode, 103, 24, 8);
    cfg.hidden_width = 16;
    cfg.embedding_width = 16;
    PandoraModel m(cfg);
    const auto r = grad_check_model(m, steps, labels, rows, opt);
    worst = std::max(worst, r.max_relative_error);
    detail += fmt("%s %.2e (%zu entries) ", to_string(mode).c_str(), r.max_relative_error,
                  r.entries_checked);
  }
  const double t = seconds_since(start);
  return {worst < 1e-5 && t < 5.0, detail + fmt("%.2fs", t)};
}

Outcome risk_table() {
  const std::pair<std::int64_t, RiskLevel> table[] = {
      {0, RiskLevel::RiskFree}, {1, RiskLevel::Low},     {150, RiskLevel::Low},
      {151, RiskLevel::Medium}, {750, RiskLevel::Medium}, {751, RiskLevel::High}};
  std::size_t bad = 0;
  for (const auto& [n, level] : table) bad += assign_risk_label(n) != level;
  return {bad == 0, fmt("%zu of 6 boundaries wrong", bad)};
}

Outcome single_timestamp() {
  std::size_t identical = 0;
  const AggregatorMode modes[] = {AggregatorMode::HA, AggregatorMode::SU, AggregatorMode::CO};
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const std::size_t n = 5 + seed % 30;
    const std::vector<GraphInput> one = {fixture::random_input(n, 0.25, 12, 8, seed + 500)};
    auto cfg = fixture::small_config(modes[seed % 3], seed);
    cfg.attribute_only = seed % 7 == 0;
    const PandoraModel m(cfg);
    const auto s = forward_static(m, one[0]);
    const auto d = forward_dynamic(m, one);
    identical += s.probabilities == d.probabilities && s.embedding == d.embedding;
  }
  return {identical == 50, fmt("%zu of 50 bit-identical", identical)};
}

Outcome softmax_ce() {
  const auto z = oracle::random_matrix(500, 4, 77, -40.0, 40.0);
  const auto p = softmax_rows(z);
  double worst = 0.0;
  for (std::size_t i = 0; i < p.rows(); ++i) {
    const auto row = p.row(i);
    worst = std::max(worst, std::abs(std::accumulate(row.begin(), row.end(), 0.0) - 1.0));
  }
  const double ce = cross_entropy(DenseMatrix{{1, 0}}, DenseMatrix{{0.5, 0.5}}).loss;
  const double ce_err = std::abs(ce - std::log(2.0));
  return {worst <= 1e-12 && ce_err <= 1e-12,
          fmt("max row-sum error %.1e, |CE - ln2| %.1e", worst, ce_err)};
}

struct Comparison {
  std::vector<double> gcn_acc;
  std::vector<std::vector<double>> mode_acc{3};
  std::vector<std::size_t> gcn_iters, co_iters;
  double seconds = 0.0;
};

const Comparison& comparison() {
  static const Comparison c = [] {
    Comparison out;
    const auto start = Clock::now();
    const AggregatorMode modes[] = {AggregatorMode::HA, AggregatorMode::SU, AggregatorMode::CO};
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      SynthConfig sc;
      sc.n = 1000;
      sc.communities = 4;
      sc.label_rule = LabelRule::Structural;
      sc.seed = seed;
      const auto data = synth_dataset(sc).dataset;
      RunConfig rc;
      rc.seed = seed;
      rc.attribute_only = true;
      const auto gcn = run_training(data, rc);
      out.gcn_acc.push_back(gcn.validation.accuracy);
      out.gcn_iters.push_back(gcn.training.iterations_to_converge);
      rc.attribute_only = false;
      for (std::size_t k = 0; k < 3; ++k) {
        rc.mode = modes[k];
        const auto r = run_training(data, rc);
        out.mode_acc[k].push_back(r.validation.accuracy);
        if (modes[k] == AggregatorMode::CO) out.co_iters.push_back(r.training.iterations_to_converge);
      }
    }
    out.seconds = seconds_since(start);
    return out;
  }();
  return c;
}

double mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double median(std::vector<std::size_t> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? static_cast<double>(v[m]) : 0.5 * static_cast<double>(v[m - 1] + v[m]);
}

Outcome relative_accuracy() {
  const auto& c = comparison();
  const double gcn = mean(c.gcn_acc);
  bool all_close = true, one_better = false;
  std::string detail = fmt("GCN %.4f", gcn);
  const char* names[] = {"HA", "SU", "CO"};
  for (std::size_t k = 0; k < 3; ++k) {
    const double a = mean(c.mode_acc[k]);
    all_close = all_close && a >= gcn - 0.01;
    one_better = one_better || a > gcn;
    detail += fmt(", %s %.4f", names[k], a);
  }
  detail += fmt(" (mean val acc over 5 seeds), %.1fs", c.seconds);
  return {all_close && one_better && c.seconds < 300.0, detail};
}

Outcome convergence_speed() {
  const auto& c = comparison();
  const double co = median(c.co_iters), gcn = median(c.gcn_iters);
  return {co <= gcn, fmt("median iterations CO %.1f, GCN %.1f", co, gcn)};
}

Outcome chi2_examples() {
  const std::vector<double> x = {1, 2, 3, 4};
  Chi2Config cfg;
  cfg.inconsistency_limit = 0.0;
  const auto split = chi2_discretize(x, std::vector<int>{0, 0, 1, 1}, cfg);
  const bool two = split.bin_count() == 2 && split.cut_points[0] > 2.0 && split.cut_points[0] < 3.0;
  const auto flat = chi2_discretize(x, std::vector<int>{1, 1, 1, 1}, cfg);
  return {two && flat.bin_count() == 1,
          fmt("%zu bins (cut %.3g), uniform labels %zu bin(s)", split.bin_count(),
              split.cut_points.empty() ? NAN : split.cut_points[0], flat.bin_count())};
}

Outcome permutation() {
  std::size_t exact = 0;
  const AggregatorMode modes[] = {AggregatorMode::HA, AggregatorMode::SU, AggregatorMode::CO};
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const std::size_t n = 10;
    const auto g = Graph::from_edges(n, oracle::erdos_renyi(n, 0.3, seed + 1234));
    const auto perm = oracle::random_permutation(n, seed + 99);
    GraphInput a{PropagationOperator(renormalized_propagation(g)),
                 fixture::one_hot_blocks(n, 3, 4, seed), oracle::random_matrix(n, 8, seed, 0.0, 1.0)};
    GraphInput b{PropagationOperator(renormalized_propagation(g.permuted(perm))),
                 oracle::permute_rows(a.aft, perm), oracle::permute_rows(a.sft, perm)};
    const PandoraModel m(fixture::small_config(modes[seed % 3], seed));
    const auto ra = forward_static(m, a);
    const auto rb = forward_static(m, b);
    exact += rb.probabilities == oracle::permute_rows(ra.probabilities, perm) &&
             rb.embedding == oracle::permute_rows(ra.embedding, perm);
  }
  return {exact == 20, fmt("%zu of 20 exact", exact)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

int run(const std::string& cmd) { return std::system((cmd + " >/dev/null 2>&1").c_str()); }

Outcome cli_determinism(const std::string& cli) {
  if (cli.empty()) return {false, "no CLI path given"};
  const fs::path root = fs::temp_directory_path() / "pandora_acceptance_cli";
  fs::remove_all(root);
  fs::create_directories(root);
  const std::string q = "'" + cli + "'";
  if (run(q + " synth --n 200 --seed 5 --out-dir '" + (root / "data").string() + "'") != 0)
    return {false, "synth failed"};
  const std::string common = " train --nodes '" + (root / "data/nodes.csv").string() +
                             "' --edges '" + (root / "data/edges.csv").string() +
                             "' --max-epoch 40 --mode CO --seed 9 --quiet --out-dir ";
  for (const char* name : {"a", "b"})
    if (run(q + common + "'" + (root / name).string() + "'") != 0)
      return {false, std::string("train run ") + name + " failed"};
  bool same = true;
  for (const char* file : {"history.csv", "checkpoint.json"}) {
    const auto a = slurp(root / "a" / file), b = slurp(root / "b" / file);
    same = same && !a.empty() && a == b;
  }
  fs::remove_all(root);
  return {same, same ? "history.csv and checkpoint.json byte-identical" : "outputs differ"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::string cli = argc > 1 ? argv[1] : "";
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"motif counts match brute force", motif_oracle},
      {"gradient check per aggregator", gradients},
      {"risk label boundaries", risk_table},
      {"dynamic T=1 equals static", single_timestamp},
      {"softmax and cross-entropy", softmax_ce},
      {"two-branch accuracy vs GCN", relative_accuracy},
      {"CO converges no slower than GCN", convergence_speed},
      {"chi2 examples", chi2_examples},
      {"permutation equivariance", permutation},
      {"train CLI determinism", [&] { return cli_determinism(cli); }},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("%s C%zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first,
                o.detail.c_str());
    std::fflush(stdout);
  }
  return failures;
}
