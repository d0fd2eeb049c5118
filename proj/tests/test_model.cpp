#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fixtures.hpp"
#include "pandora/model.hpp"

using namespace pandora;

namespace {

const AggregatorMode kModes[] = {AggregatorMode::HA, AggregatorMode::SU, AggregatorMode::CO};

// Labels read straight off the first one-hot block of the AFT.
std::vector<int> planted_labels(const DenseMatrix& aft) {
  std::vector<int> y(aft.rows());
  for (std::size_t i = 0; i < aft.rows(); ++i)
    for (int b = 0; b < 4; ++b)
      if (aft(i, static_cast<std::size_t>(b)) == 1.0) y[i] = b;
  return y;
}

}  // namespace

TEST_CASE("aggregate examples") {
  const auto a = oracle::random_matrix(5, 4, 1);
  CHECK(aggregate(a, DenseMatrix(5, 4, 1.0), AggregatorMode::HA) == a);
  CHECK(aggregate(a, DenseMatrix(5, 4), AggregatorMode::SU) == a);
  const auto co = aggregate(DenseMatrix(3, 64), DenseMatrix(3, 64), AggregatorMode::CO);
  CHECK(co.rows() == 3);
  CHECK(co.cols() == 128);
  CHECK_THROWS_AS(aggregate(a, DenseMatrix(5, 3), AggregatorMode::HA), ShapeError);
  CHECK_THROWS_AS(aggregate(a, DenseMatrix(4, 4), AggregatorMode::CO), ShapeError);
}

TEST_CASE("aggregator algebra") {
  const auto a = oracle::random_matrix(6, 3, 1);
  const auto b = oracle::random_matrix(6, 3, 2);
  const auto c = oracle::random_matrix(6, 3, 3);
  for (auto mode : {AggregatorMode::HA, AggregatorMode::SU}) {
    CHECK(aggregate(a, b, mode) == aggregate(b, a, mode));
    CHECK(max_abs_diff(aggregate(aggregate(a, b, mode), c, mode),
                       aggregate(a, aggregate(b, c, mode), mode)) < 1e-15);
  }
  const auto ab = aggregate(a, b, AggregatorMode::CO);
  const auto ba = aggregate(b, a, AggregatorMode::CO);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      CHECK(ab(i, j) == ba(i, j + 3));
      CHECK(ab(i, j + 3) == ba(i, j));
    }
}

TEST_CASE("model shapes") {
  for (auto mode : kModes) {
    const PandoraModel m(fixture::small_config(mode, 1));
    CHECK(m.parameters().size() == 5);
    CHECK(m.classifier.value.rows() == (mode == AggregatorMode::CO ? 10u : 5u));
    CHECK(m.attr_w2.value.cols() == m.struct_w2.value.cols());
  }
  auto cfg = fixture::small_config(AggregatorMode::CO, 1);
  cfg.attribute_only = true;
  const PandoraModel gcn(cfg);
  CHECK(gcn.parameters().size() == 3);
  CHECK(gcn.classifier.value.rows() == 5);
  cfg.hidden_width = 0;
  CHECK_THROWS_AS(PandoraModel{cfg}, std::invalid_argument);
}

TEST_CASE("forward_static contracts") {
  const auto in = fixture::random_input(12, 0.3, 12, 8, 4);
  for (auto mode : kModes) {
    PandoraModel m(fixture::small_config(mode, 2));
    const auto r = forward_static(m, in);
    for (std::size_t i = 0; i < 12; ++i) {
      const auto row = r.probabilities.row(i);
      CHECK(std::abs(std::accumulate(row.begin(), row.end(), 0.0) - 1.0) <= 1e-12);
    }
    CHECK(r.embedding.cols() == m.classifier.value.rows());
    m.classifier.value = DenseMatrix(m.classifier.value.rows(), 4);
    const auto uniform = forward_static(m, in);
    for (double p : uniform.probabilities.data()) CHECK(p == 0.25);
  }
  auto bad = in;
  bad.aft = DenseMatrix(11, 12);
  CHECK_THROWS_AS(forward_static(PandoraModel(fixture::small_config(AggregatorMode::HA, 2)), bad),
                  ShapeError);
}

TEST_CASE("forward_static is permutation equivariant") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const std::size_t n = 10;
    const auto edges = oracle::erdos_renyi(n, 0.35, seed);
    const auto g = Graph::from_edges(n, edges);
    const auto perm = oracle::random_permutation(n, seed + 50);
    GraphInput a{PropagationOperator(renormalized_propagation(g)),
                 fixture::one_hot_blocks(n, 3, 4, seed), oracle::random_matrix(n, 8, seed, 0, 1)};
    GraphInput b{PropagationOperator(renormalized_propagation(g.permuted(perm))),
                 oracle::permute_rows(a.aft, perm), oracle::permute_rows(a.sft, perm)};
    const PandoraModel m(fixture::small_config(kModes[seed % 3], seed));
    const auto ra = forward_static(m, a);
    const auto rb = forward_static(m, b);
    CHECK(rb.probabilities == oracle::permute_rows(ra.probabilities, perm));
  }
}

TEST_CASE("forward_dynamic") {
  const auto in = fixture::random_input(9, 0.3, 12, 8, 7);
  const PandoraModel m(fixture::small_config(AggregatorMode::SU, 5));
  const std::vector<GraphInput> one = {in};
  const auto s = forward_static(m, in);
  const auto d = forward_dynamic(m, one);
  CHECK(d.probabilities == s.probabilities);
  CHECK(d.embedding == s.embedding);

  const std::vector<GraphInput> twice = {in, in};
  CHECK(forward_dynamic(m, twice).embedding == scale(s.embedding, 2.0));

  const std::vector<GraphInput> three = {fixture::random_input(9, 0.3, 12, 8, 1),
                                         fixture::random_input(9, 0.3, 12, 8, 2),
                                         fixture::random_input(9, 0.3, 12, 8, 3)};
  const auto r3 = forward_dynamic(m, three);
  DenseMatrix sum = forward_static(m, three[0]).embedding;
  add_inplace(sum, forward_static(m, three[1]).embedding);
  add_inplace(sum, forward_static(m, three[2]).embedding);
  CHECK(r3.embedding == sum);
  for (std::size_t i = 0; i < 9; ++i) {
    const auto row = r3.probabilities.row(i);
    CHECK(std::abs(std::accumulate(row.begin(), row.end(), 0.0) - 1.0) <= 1e-12);
  }

  const std::vector<GraphInput> mismatched = {in, fixture::random_input(8, 0.3, 12, 8, 2)};
  CHECK_THROWS_AS(forward_dynamic(m, mismatched), std::invalid_argument);
  CHECK_THROWS_AS(forward_dynamic(m, std::span<const GraphInput>{}), std::invalid_argument);
}

TEST_CASE("backward matches finite differences in every mode") {
  const auto in = fixture::random_input(15, 0.3, 12, 8, 11);
  const std::vector<GraphInput> steps = {in};
  const auto labels = fixture::random_labels(15, 4, 3);
  const auto rows = fixture::range(0, 10);
  for (auto mode : kModes) {
    PandoraModel m(fixture::small_config(mode, 9));
    GradCheckOptions opt;
    opt.samples = 400;
    const auto r = grad_check_model(m, steps, labels, rows, opt);
    CHECK(r.max_relative_error < 1e-6);
  }
  auto cfg = fixture::small_config(AggregatorMode::HA, 9);
  cfg.attribute_only = true;
  PandoraModel gcn(cfg);
  CHECK(grad_check_model(gcn, steps, labels, rows).max_relative_error < 1e-6);

  const std::vector<GraphInput> dyn = {fixture::random_input(15, 0.3, 12, 8, 1),
                                       fixture::random_input(15, 0.3, 12, 8, 2)};
  PandoraModel dm(fixture::small_config(AggregatorMode::HA, 4));
  CHECK(grad_check_model(dm, dyn, labels, rows).max_relative_error < 1e-6);
}

TEST_CASE("backward before forward is rejected") {
  PandoraModel m(fixture::small_config(AggregatorMode::HA, 1));
  const std::vector<GraphInput> steps = {fixture::random_input(5, 0.5, 12, 8, 1)};
  const std::vector<int> labels = {0, 1, 2, 3, 0};
  const auto rows = fixture::range(0, 5);
  ForwardTape tape;
  CHECK_THROWS_AS(backward(m, steps, tape, labels, rows), BackwardError);
}

TEST_CASE("risk labels") {
  CHECK(assign_risk_label(0) == RiskLevel::RiskFree);
  CHECK(assign_risk_label(1) == RiskLevel::Low);
  CHECK(assign_risk_label(150) == RiskLevel::Low);
  CHECK(assign_risk_label(151) == RiskLevel::Medium);
  CHECK(assign_risk_label(750) == RiskLevel::Medium);
  CHECK(assign_risk_label(751) == RiskLevel::High);
  CHECK_THROWS_AS(assign_risk_label(-1), std::invalid_argument);
  RiskLevel prev = RiskLevel::RiskFree;
  for (std::int64_t n = 0; n < 2000; ++n) {
    const auto l = assign_risk_label(n);
    CHECK(l >= prev);
    prev = l;
  }
  for (auto l : {RiskLevel::RiskFree, RiskLevel::Low, RiskLevel::Medium, RiskLevel::High})
    CHECK(parse_risk_level(to_string(l)) == l);
  CHECK_THROWS(parse_risk_level("severe"));
}

TEST_CASE("evaluate examples") {
  const DenseMatrix perfect = {{0.9, 0.1}, {0.2, 0.8}};
  const std::vector<int> y = {0, 1};
  auto m = evaluate(perfect, y);
  CHECK(m.accuracy == 1.0);
  CHECK(m.macro_f1 == 1.0);

  const DenseMatrix one_class = {{0.9, 0.1}, {0.9, 0.1}, {0.8, 0.2}, {0.6, 0.4}};
  const std::vector<int> balanced = {0, 0, 1, 1};
  m = evaluate(one_class, balanced);
  CHECK(m.accuracy == 0.5);
  CHECK(m.macro_recall == 0.5);
  CHECK(m.macro_precision == 0.25);
  CHECK(m.confusion == std::vector<std::vector<std::size_t>>{{2, 0}, {2, 0}});

  const std::vector<std::size_t> single = {1};
  m = evaluate(perfect, y, single);
  CHECK(m.accuracy == 1.0);
  std::size_t nonzero = 0;
  for (const auto& row : m.confusion)
    for (auto c : row) nonzero += c != 0;
  CHECK(nonzero == 1);

  const std::vector<std::size_t> none;
  CHECK_THROWS(evaluate(perfect, y, none));
}

TEST_CASE("evaluate invariants on random predictions") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto p = softmax_rows(oracle::random_matrix(40, 4, seed, -2, 2));
    const auto y = fixture::random_labels(40, 4, seed + 1);
    const auto m = evaluate(p, y);
    std::size_t total = 0, trace = 0;
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 4; ++j) {
        total += m.confusion[i][j];
        if (i == j) trace += m.confusion[i][j];
      }
    CHECK(total == 40);
    CHECK(m.accuracy == doctest::Approx(static_cast<double>(trace) / 40.0));
    double lo = 1.0, hi = 0.0;
    for (std::size_t c = 0; c < 4; ++c)
      if (m.class_present[c]) {
        lo = std::min(lo, m.per_class_f1[c]);
        hi = std::max(hi, m.per_class_f1[c]);
      }
    CHECK(m.macro_f1 >= lo - 1e-15);
    CHECK(m.macro_f1 <= hi + 1e-15);
  }
}

TEST_CASE("training on planted labels") {
  const std::size_t n = 80;
  GraphInput in = fixture::random_input(n, 0.02, 12, 8, 21);
  const std::vector<GraphInput> steps = {in};
  const auto labels = planted_labels(in.aft);
  const auto train_rows = fixture::range(0, 60);
  const auto val_rows = fixture::range(60, 80);
  TrainingData data{steps, labels, train_rows, val_rows};

  auto cfg = fixture::small_config(AggregatorMode::HA, 3);
  cfg.hidden_width = 64;
  cfg.embedding_width = 64;
  PandoraModel m(cfg);
  TrainConfig tc;
  tc.patience = 1000;
  const auto r = train(m, data, tc);
  REQUIRE(r.history.size() == 300);
  double best_train_acc = 0.0;
  for (const auto& e : r.history) best_train_acc = std::max(best_train_acc, e.train_acc);
  CHECK(best_train_acc >= 0.95);

  // Window-10 moving average of the training loss keeps falling until the
  // restored epoch.
  std::vector<double> smooth;
  for (std::size_t e = 10; e <= r.best_epoch; ++e) {
    double s = 0.0;
    for (std::size_t k = e - 10; k < e; ++k) s += r.history[k].train_loss;
    smooth.push_back(s / 10.0);
  }
  for (std::size_t i = 1; i < smooth.size(); ++i) CHECK(smooth[i] < smooth[i - 1]);
}

TEST_CASE("training with zero learning rate changes nothing") {
  const std::vector<GraphInput> steps = {fixture::random_input(30, 0.1, 12, 8, 2)};
  const auto labels = fixture::random_labels(30, 4, 5);
  const auto tr = fixture::range(0, 20), va = fixture::range(20, 30);
  PandoraModel m(fixture::small_config(AggregatorMode::CO, 7));
  const PandoraModel before = m;
  TrainConfig tc;
  tc.alpha = 0.0;
  tc.max_epoch = 20;
  const auto r = train(m, {steps, labels, tr, va}, tc);
  for (const auto& e : r.history) CHECK(e.train_loss == r.history.front().train_loss);
  CHECK(m.classifier.value == before.classifier.value);
  CHECK(m.attr_w1.value == before.attr_w1.value);
  // No strict improvement after the first epoch, so patience ends the run.
  TrainConfig early = tc;
  early.patience = 5;
  const auto r2 = train(m, {steps, labels, tr, va}, early);
  CHECK(r2.stopped_early);
  CHECK(r2.history.size() == 6);
  CHECK(r2.best_epoch == 1);
}

TEST_CASE("training is deterministic") {
  const std::vector<GraphInput> steps = {fixture::random_input(40, 0.1, 12, 8, 9)};
  const auto labels = fixture::random_labels(40, 4, 6);
  const auto tr = fixture::range(0, 25), va = fixture::range(25, 40);
  TrainConfig tc;
  tc.max_epoch = 40;
  PandoraModel a(fixture::small_config(AggregatorMode::HA, 1));
  PandoraModel b(fixture::small_config(AggregatorMode::HA, 1));
  const auto ra = train(a, {steps, labels, tr, va}, tc);
  const auto rb = train(b, {steps, labels, tr, va}, tc);
  REQUIRE(ra.history.size() == rb.history.size());
  for (std::size_t i = 0; i < ra.history.size(); ++i) {
    CHECK(ra.history[i].train_loss == rb.history[i].train_loss);
    CHECK(ra.history[i].val_acc == rb.history[i].val_acc);
  }
  CHECK(a.classifier.value == b.classifier.value);
  CHECK(ra.iterations_to_converge == ra.best_epoch);
}

TEST_CASE("training rejects empty splits") {
  const std::vector<GraphInput> steps = {fixture::random_input(10, 0.2, 12, 8, 1)};
  const auto labels = fixture::random_labels(10, 4, 1);
  const auto tr = fixture::range(0, 5);
  const std::vector<std::size_t> empty;
  PandoraModel m(fixture::small_config(AggregatorMode::HA, 1));
  CHECK_THROWS(train(m, {steps, labels, tr, empty}, {}));
  CHECK_THROWS(train(m, {steps, labels, empty, tr}, {}));
}

TEST_CASE("non-finite loss aborts with the epoch") {
  GraphInput in = fixture::random_input(10, 0.2, 12, 8, 1);
  in.sft(0, 0) = std::numeric_limits<double>::infinity();
  const std::vector<GraphInput> steps = {in};
  const auto labels = fixture::random_labels(10, 4, 1);
  const auto tr = fixture::range(0, 6), va = fixture::range(6, 10);
  PandoraModel m(fixture::small_config(AggregatorMode::SU, 1));
  try {
    train(m, {steps, labels, tr, va}, {});
    FAIL("expected an error");
  } catch (const NonFiniteLossError& e) {
    CHECK(e.epoch == 1);
    CHECK(e.last_good.classifier.value == m.classifier.value);
  }
}

TEST_CASE("checkpoint round trip") {
  PandoraModel m(fixture::small_config(AggregatorMode::CO, 12));
  const std::vector<GraphInput> steps = {fixture::random_input(20, 0.2, 12, 8, 3)};
  const auto labels = fixture::random_labels(20, 4, 2);
  const auto tr = fixture::range(0, 14), va = fixture::range(14, 20);
  TrainConfig tc;
  tc.max_epoch = 5;
  const auto r = train(m, {steps, labels, tr, va}, tc);
  nlohmann::ordered_json extra;
  extra["note"] = "x";
  const auto j = checkpoint_to_json(m, &r.optimizer, extra);
  const auto cp = checkpoint_from_json(nlohmann::ordered_json::parse(j.dump()));
  CHECK(cp.model.config().mode == AggregatorMode::CO);
  CHECK(cp.model.classifier.value == m.classifier.value);
  CHECK(cp.model.struct_w1.value == m.struct_w1.value);
  REQUIRE(cp.optimizer.has_value());
  CHECK(cp.optimizer->step == r.optimizer.step);
  CHECK(cp.optimizer->second_moment == r.optimizer.second_moment);
  CHECK(cp.extra["note"] == "x");
  CHECK(forward_static(cp.model, steps[0]).probabilities == forward_static(m, steps[0]).probabilities);

  auto tampered = j;
  tampered["config"]["hidden_width"] = 7;
  CHECK_THROWS(checkpoint_from_json(tampered));
  CHECK(config_hash(m.config()).size() == 16);
}
