#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "oracles.hpp"
#include "pandora/features.hpp"

using namespace pandora;

namespace {

double skewness(const std::vector<double>& x) {
  const double n = static_cast<double>(x.size());
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double m2 = 0.0, m3 = 0.0;
  for (double v : x) {
    m2 += (v - mean) * (v - mean);
    m3 += (v - mean) * (v - mean) * (v - mean);
  }
  m2 /= n;
  m3 /= n;
  return m3 / std::pow(m2, 1.5);
}

}  // namespace

TEST_CASE("chi2_statistic examples") {
  CHECK(chi2_statistic(DenseMatrix{{5, 5}, {5, 5}}) == 0.0);
  CHECK(chi2_statistic(DenseMatrix{{10, 0}, {0, 10}}) == doctest::Approx(20.0));
  CHECK(chi2_statistic(DenseMatrix{{1, 0}, {0, 0}}) == 0.0);
  CHECK_THROWS_AS(chi2_statistic(DenseMatrix(2, 2)), std::invalid_argument);
}

TEST_CASE("chi2_statistic matches the definition and is permutation invariant") {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> cnt(0, 9);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::vector<double>> t(2, std::vector<double>(4));
    DenseMatrix m(2, 4), swapped(2, 4);
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t j = 0; j < 4; ++j) t[i][j] = m(i, j) = cnt(rng);
    if (std::accumulate(m.data().begin(), m.data().end(), 0.0) == 0.0) continue;
    const std::size_t col_perm[] = {2, 0, 3, 1};
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t j = 0; j < 4; ++j) swapped(1 - i, col_perm[j]) = m(i, j);
    CHECK(chi2_statistic(m) == doctest::Approx(oracle::chi2(t)).epsilon(1e-12));
    CHECK(chi2_statistic(swapped) == doctest::Approx(chi2_statistic(m)).epsilon(1e-12));
  }
}

TEST_CASE("chi2_discretize separates a clean split") {
  const std::vector<double> values = {1, 2, 3, 4};
  const std::vector<int> labels = {0, 0, 1, 1};
  Chi2Config cfg;
  cfg.inconsistency_limit = 0.0;
  const auto s = chi2_discretize(values, labels, cfg, "x");
  REQUIRE(s.cut_points.size() == 1);
  CHECK(s.bin_count() == 2);
  CHECK(s.cut_points[0] > 2.0);
  CHECK(s.cut_points[0] < 3.0);
  CHECK(s.inconsistency == 0.0);
  CHECK_FALSE(s.degenerate);
}

TEST_CASE("chi2_discretize merges uniform labels into one bin") {
  const std::vector<double> values = {1, 2, 3, 4, 5, 6};
  const std::vector<int> labels(6, 2);
  const auto s = chi2_discretize(values, labels);
  CHECK(s.bin_count() == 1);
}

TEST_CASE("chi2_discretize flags single-valued input") {
  const std::vector<double> values = {3, 3, 3};
  const std::vector<int> labels = {0, 1, 0};
  const auto s = chi2_discretize(values, labels);
  CHECK(s.degenerate);
  CHECK(s.bin_count() == 1);
}

TEST_CASE("chi2_discretize respects the bin cap and partitions the range") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 100.0);
  std::uniform_int_distribution<int> lab(0, 3);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> values(100);
    std::vector<int> labels(100);
    for (auto& v : values) v = u(rng);
    for (auto& l : labels) l = lab(rng);
    Chi2Config cfg;
    cfg.max_bins = 10;
    const auto s = chi2_discretize(values, labels, cfg);
    CHECK(s.bin_count() <= 10);
    for (std::size_t i = 1; i < s.cut_points.size(); ++i) CHECK(s.cut_points[i - 1] < s.cut_points[i]);
    // Each observed value falls in exactly one bin and every bin is used.
    std::vector<int> used(s.bin_count(), 0);
    for (double v : values) ++used[s.bin_of(v)];
    for (int c : used) CHECK(c > 0);
  }
}

TEST_CASE("chi2_discretize keeps the inconsistency limit when uncapped") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> values;
  std::vector<int> labels;
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < 60; ++i) {
      values.push_back(4.0 * c + g(rng));
      labels.push_back(c);
    }
  Chi2Config cfg;
  cfg.max_bins = 1000;
  const auto s = chi2_discretize(values, labels, cfg);
  CHECK_FALSE(s.capped);
  CHECK(s.inconsistency <= cfg.inconsistency_limit);
  const std::vector<DiscretizationScheme> one = {s};
  const std::vector<std::vector<double>> cols = {values};
  CHECK(inconsistency_rate(one, cols, labels) == doctest::Approx(s.inconsistency));
}

TEST_CASE("joint discretization is deterministic") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::vector<double>> cols(3, std::vector<double>(80));
  std::vector<int> labels(80);
  for (std::size_t i = 0; i < 80; ++i) {
    labels[i] = static_cast<int>(i % 4);
    for (auto& c : cols) c[i] = u(rng) + 0.3 * labels[i];
  }
  const std::vector<std::string> names = {"a", "b", "c"};
  const auto s1 = chi2_discretize_all(cols, names, labels);
  const auto s2 = chi2_discretize_all(cols, names, labels);
  REQUIRE(s1.size() == 3);
  for (std::size_t a = 0; a < 3; ++a) {
    CHECK(s1[a].attribute == names[a]);
    CHECK(s1[a].cut_points == s2[a].cut_points);
  }
}

TEST_CASE("left-closed bins") {
  DiscretizationScheme s;
  s.cut_points = {1.0, 2.0};
  CHECK(s.bin_of(0.5) == 0);
  CHECK(s.bin_of(1.0) == 1);
  CHECK(s.bin_of(1.999) == 1);
  CHECK(s.bin_of(2.0) == 2);
  CHECK(s.bin_of(1e9) == 2);
}

TEST_CASE("scheme json round trip keeps order") {
  std::vector<DiscretizationScheme> s(2);
  s[0].attribute = "zeta";
  s[0].cut_points = {0.5, 1.25};
  s[1].attribute = "alpha";
  const auto j = schemes_to_json(s);
  CHECK(j.dump() == R"({"zeta":[0.5,1.25],"alpha":[]})");
  const auto back = schemes_from_json(j);
  REQUIRE(back.size() == 2);
  CHECK(back[0].attribute == "zeta");
  CHECK(back[0].cut_points == s[0].cut_points);
  CHECK(back[1].bin_count() == 1);
  CHECK_THROWS(schemes_from_json(nlohmann::ordered_json::parse(R"({"x":[2,1]})")));
}

TEST_CASE("boxcox formula identities") {
  const std::vector<double> x = {0.5, 1.0, 2.0, 7.0};
  const auto y1 = boxcox_transform(x, 1.0);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(y1[i] == doctest::Approx(x[i] - 1.0));
  const std::vector<double> e = {std::exp(1.0)};
  CHECK(boxcox_transform(e, 0.0)[0] == doctest::Approx(1.0));
  const std::vector<double> bad = {1.0, 0.0};
  CHECK_THROWS_AS(boxcox_transform(bad, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(boxcox(bad), std::invalid_argument);
}

TEST_CASE("boxcox with lambda 1 after a +1 shift is the identity") {
  const std::vector<double> x = {-3.0, 0.0, 2.5, 10.0};
  const auto shifted = shift_positive(x);
  CHECK(shifted[0] == 1.0);
  const auto y = boxcox_transform(shifted, 1.0);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(y[i] + x[0] == doctest::Approx(x[i]));
  const std::vector<double> pos = {1.0, 2.0};
  CHECK(shift_positive(pos) == pos);
}

TEST_CASE("boxcox recovers a log-normal sample") {
  std::mt19937_64 rng(21);
  std::lognormal_distribution<double> ln(0.0, 0.8);
  std::vector<double> x(1000);
  for (auto& v : x) v = ln(rng);
  const auto r = boxcox(x);
  CHECK(std::abs(r.lambda) < 0.2);
  CHECK(std::abs(skewness(r.values)) <= std::abs(skewness(x)));
  // λ maximizes the likelihood over its grid neighbours.
  CHECK(boxcox_log_likelihood(x, r.lambda) >= boxcox_log_likelihood(x, r.lambda + 0.01));
  CHECK(boxcox_log_likelihood(x, r.lambda) >= boxcox_log_likelihood(x, r.lambda - 0.01));
}

TEST_CASE("one_hot") {
  CHECK(one_hot(0, 3) == std::vector<double>{1, 0, 0});
  CHECK(one_hot(2, 3) == std::vector<double>{0, 0, 1});
  CHECK_THROWS_AS(one_hot(3, 3), std::out_of_range);
}

TEST_CASE("build_aft block structure") {
  AttributeTable t;
  t.node_ids = {"n1", "n2", "n3"};
  t.names = {"population_density", "icu_beds_per_1000", "temperature_c", "unemployment_rate"};
  t.columns = {{5, 5, 50}, {1, 1, 3}, {10, 10, -2}, {0.1, 0.1, 0.2}};
  std::vector<DiscretizationScheme> schemes(4);
  for (std::size_t a = 0; a < 4; ++a) {
    schemes[a].attribute = t.names[a];
    for (int c = 1; c < 10; ++c) schemes[a].cut_points.push_back(-100.0 + 20.0 * c);
  }
  const auto aft = build_aft(t, schemes);
  CHECK(aft.role == FeatureRole::AFT);
  CHECK(aft.values.rows() == 3);
  CHECK(aft.values.cols() == 40);
  for (std::size_t v = 0; v < 3; ++v) {
    const auto row = aft.values.row(v);
    CHECK(std::accumulate(row.begin(), row.end(), 0.0) == 4.0);
    for (std::size_t b = 0; b < 4; ++b) {
      const double block = std::accumulate(row.begin() + 10 * b, row.begin() + 10 * (b + 1), 0.0);
      CHECK(block == 1.0);
    }
  }
  for (std::size_t c = 0; c < 40; ++c) CHECK(aft.values(0, c) == aft.values(1, c));
  CHECK(aft.column_names.front() == "population_density_bin0");

  // A value exactly on a cut point goes to the right-hand bin.
  AttributeTable edge = t;
  edge.columns[0] = {-80.0, -80.0, -80.0};
  const auto e = build_aft(edge, schemes);
  CHECK(e.values(0, 1) == 1.0);
  CHECK(e.values(0, 0) == 0.0);

  AttributeTable missing = t;
  missing.columns[2][1] = std::nan("");
  try {
    build_aft(missing, schemes);
    FAIL("expected an error");
  } catch (const std::invalid_argument& ex) {
    const std::string msg = ex.what();
    CHECK(msg.find("n2") != std::string::npos);
    CHECK(msg.find("temperature_c") != std::string::npos);
  }
}

TEST_CASE("attribute families") {
  CHECK(attribute_family("icu_beds_per_1000") == "med");
  CHECK(attribute_family("death_rate") == "med");
  CHECK(attribute_family("mobility_mean") == "mobility");
  CHECK_THROWS(attribute_family("shoe_size"));
  CHECK(default_attribute_names().size() == 6);
}

TEST_CASE("build_sft examples") {
  using E = std::vector<std::pair<std::size_t, std::size_t>>;
  const auto tri = Graph::from_edges(3, E{{0, 1}, {1, 2}, {0, 2}});
  const std::vector<double> none(3, 0.0);
  const auto s = build_sft(tri, count_nmd(tri), none);
  CHECK(s.role == FeatureRole::SFT);
  CHECK(s.values.cols() == 8);
  for (std::size_t v = 0; v < 3; ++v) {
    CHECK(s.values(v, 0) == 1.0);
    CHECK(s.values(v, 3) == 1.0);
    CHECK(s.values(v, 1) == 0.0);
  }

  const auto star = Graph::from_edges(5, E{{0, 1}, {0, 2}, {0, 3}});
  const std::vector<double> freq = {4.0, 0.0, 0.0, 0.0, 0.0};
  const auto st = build_sft(star, count_nmd(star), freq);
  CHECK(st.values(0, 0) > st.values(1, 0));
  CHECK(st.values(0, 2) == 1.0);
  for (std::size_t c = 0; c < 8; ++c) CHECK(st.values(4, c) == 0.0);
  for (double v : st.values.data()) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}
