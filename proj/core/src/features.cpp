#include "pandora/features.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>

#include <boost/math/distributions/chi_squared.hpp>

namespace pandora {

double chi2_statistic(const DenseMatrix& table) {
  const std::size_t m = table.rows(), k = table.cols();
  std::vector<double> row_sum(m, 0.0), col_sum(k, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < k; ++j) {
      const double a = table(i, j);
      if (a < 0.0 || !std::isfinite(a)) {
        throw std::invalid_argument("chi2_statistic: counts must be finite and non-negative");
      }
      row_sum[i] += a;
      col_sum[j] += a;
      total += a;
    }
  if (total <= 0.0) throw std::invalid_argument("chi2_statistic: contingency table is all zero");

  double chi2 = 0.0;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < k; ++j) {
      const double expected = row_sum[i] * col_sum[j] / total;
      if (expected <= 0.0) continue;
      const double d = table(i, j) - expected;
      chi2 += d * d / expected;
    }
  return chi2;
}

std::size_t DiscretizationScheme::bin_of(double value) const {
  return static_cast<std::size_t>(
      std::upper_bound(cut_points.begin(), cut_points.end(), value) - cut_points.begin());
}

namespace {

struct Interval {
  double lo;
  double hi;
  std::vector<double> counts;  // per class
};

using IntervalList = std::vector<Interval>;

double pair_chi2(const Interval& a, const Interval& b) {
  const std::size_t k = a.counts.size();
  DenseMatrix t(2, k);
  for (std::size_t j = 0; j < k; ++j) {
    t(0, j) = a.counts[j];
    t(1, j) = b.counts[j];
  }
  return chi2_statistic(t);
}

void merge_at(IntervalList& iv, std::size_t i) {
  iv[i].hi = iv[i + 1].hi;
  for (std::size_t j = 0; j < iv[i].counts.size(); ++j) iv[i].counts[j] += iv[i + 1].counts[j];
  iv.erase(iv.begin() + static_cast<std::ptrdiff_t>(i) + 1);
}

/// Repeatedly merges the adjacent pair with the lowest χ² while it is within
/// `threshold` (or, with `min_intervals`, while the list is too long).
void merge_intervals(IntervalList& iv, double threshold, std::size_t min_intervals = 0) {
  if (iv.size() < 2) return;
  std::vector<double> chi(iv.size() - 1);
  for (std::size_t i = 0; i + 1 < iv.size(); ++i) chi[i] = pair_chi2(iv[i], iv[i + 1]);
  while (iv.size() > 1) {
    const auto best = static_cast<std::size_t>(std::min_element(chi.begin(), chi.end()) - chi.begin());
    if (min_intervals != 0 ? iv.size() <= min_intervals : !(chi[best] <= threshold)) break;
    merge_at(iv, best);
    chi.erase(chi.begin() + static_cast<std::ptrdiff_t>(best));
    if (best < chi.size()) chi[best] = pair_chi2(iv[best], iv[best + 1]);
    if (best > 0) chi[best - 1] = pair_chi2(iv[best - 1], iv[best]);
  }
}

std::vector<double> cuts_of(const IntervalList& iv) {
  std::vector<double> cuts;
  cuts.reserve(iv.empty() ? 0 : iv.size() - 1);
  for (std::size_t i = 0; i + 1 < iv.size(); ++i) {
    const double lo = iv[i].hi, hi = iv[i + 1].lo;
    double cut = lo + (hi - lo) / 2.0;
    if (!(cut > lo)) cut = hi;
    cuts.push_back(cut);
  }
  return cuts;
}

struct ClassIndex {
  std::vector<int> classes;
  std::vector<std::size_t> of_sample;
};

ClassIndex index_classes(std::span<const int> labels) {
  ClassIndex ci;
  ci.classes.assign(labels.begin(), labels.end());
  std::sort(ci.classes.begin(), ci.classes.end());
  ci.classes.erase(std::unique(ci.classes.begin(), ci.classes.end()), ci.classes.end());
  ci.of_sample.reserve(labels.size());
  for (int l : labels) {
    ci.of_sample.push_back(static_cast<std::size_t>(
        std::lower_bound(ci.classes.begin(), ci.classes.end(), l) - ci.classes.begin()));
  }
  return ci;
}

IntervalList initial_intervals(std::span<const double> values, const ClassIndex& ci) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  IntervalList iv;
  for (std::size_t idx : order) {
    const double v = values[idx];
    if (iv.empty() || iv.back().hi != v) {
      iv.push_back(Interval{v, v, std::vector<double>(ci.classes.size(), 0.0)});
    }
    iv.back().counts[ci.of_sample[idx]] += 1.0;
  }
  return iv;
}

double joint_inconsistency(std::span<const IntervalList> states,
                           std::span<const std::vector<double>> columns, const ClassIndex& ci) {
  const std::size_t n = ci.of_sample.size();
  if (n == 0) return 0.0;
  std::vector<std::vector<double>> cuts;
  cuts.reserve(states.size());
  for (const auto& s : states) cuts.push_back(cuts_of(s));

  std::map<std::vector<std::size_t>, std::vector<std::size_t>> patterns;
  std::vector<std::size_t> key(states.size());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t a = 0; a < states.size(); ++a) {
      key[a] = static_cast<std::size_t>(
          std::upper_bound(cuts[a].begin(), cuts[a].end(), columns[a][i]) - cuts[a].begin());
    }
    auto& counts = patterns[key];
    if (counts.empty()) counts.assign(ci.classes.size(), 0);
    ++counts[ci.of_sample[i]];
  }
  std::size_t inconsistent = 0;
  for (const auto& [_, counts] : patterns) {
    const std::size_t total = std::accumulate(counts.begin(), counts.end(), std::size_t{0});
    inconsistent += total - *std::max_element(counts.begin(), counts.end());
  }
  return static_cast<double>(inconsistent) / static_cast<double>(n);
}

double threshold_for(double sig_level, std::size_t class_count) {
  if (class_count < 2) return std::numeric_limits<double>::infinity();
  boost::math::chi_squared dist(static_cast<double>(class_count - 1));
  return boost::math::quantile(boost::math::complement(dist, sig_level));
}

void validate_inputs(std::span<const std::vector<double>> columns, std::span<const int> labels) {
  if (labels.empty()) throw std::invalid_argument("chi2_discretize: labels are empty");
  for (const auto& col : columns) {
    if (col.size() != labels.size()) {
      throw std::invalid_argument("chi2_discretize: value and label counts differ");
    }
    for (double v : col)
      if (!std::isfinite(v)) throw std::invalid_argument("chi2_discretize: non-finite value");
  }
}

}  // namespace

std::vector<DiscretizationScheme> chi2_discretize_all(std::span<const std::vector<double>> columns,
                                                      std::span<const std::string> names,
                                                      std::span<const int> labels,
                                                      const Chi2Config& config) {
  if (names.size() != columns.size()) {
    throw std::invalid_argument("chi2_discretize_all: one name per column required");
  }
  if (config.max_bins < 1) throw std::invalid_argument("chi2_discretize_all: max_bins must be >= 1");
  validate_inputs(columns, labels);
  const ClassIndex ci = index_classes(labels);
  const std::size_t attrs = columns.size();
  const auto& levels = config.sig_levels;

  std::vector<IntervalList> accepted;
  accepted.reserve(attrs);
  for (const auto& col : columns) accepted.push_back(initial_intervals(col, ci));

  // Phase 1: one shared significance level, lowered step by step, merging
  // every attribute until the joint inconsistency rate exceeds the limit.
  std::size_t next_level = 0;
  for (; next_level < levels.size(); ++next_level) {
    auto trial = accepted;
    const double theta = threshold_for(levels[next_level], ci.classes.size());
    for (auto& iv : trial) merge_intervals(iv, theta);
    if (joint_inconsistency(trial, columns, ci) > config.inconsistency_limit) break;
    accepted = std::move(trial);
  }

  // Phase 2: each attribute continues on its own schedule from where phase 1
  // stopped and drops out at its first inconsistent merge.
  std::vector<std::size_t> level(attrs, next_level);
  std::vector<bool> mergeable(attrs, true);
  bool any = true;
  while (any) {
    any = false;
    for (std::size_t a = 0; a < attrs; ++a) {
      if (!mergeable[a]) continue;
      if (level[a] >= levels.size()) {
        mergeable[a] = false;
        continue;
      }
      any = true;
      auto trial = accepted;
      const std::size_t before = trial[a].size();
      merge_intervals(trial[a], threshold_for(levels[level[a]], ci.classes.size()));
      if (trial[a].size() == before) {
        ++level[a];
        continue;
      }
      if (joint_inconsistency(trial, columns, ci) <= config.inconsistency_limit) {
        accepted = std::move(trial);
        ++level[a];
      } else {
        mergeable[a] = false;
      }
    }
  }

  std::vector<DiscretizationScheme> out;
  out.reserve(attrs);
  for (std::size_t a = 0; a < attrs; ++a) {
    DiscretizationScheme s;
    s.attribute = names[a];
    s.degenerate = initial_intervals(columns[a], ci).size() < 2;
    if (accepted[a].size() > config.max_bins) {
      merge_intervals(accepted[a], 0.0, config.max_bins);
      s.capped = true;
    }
    s.cut_points = cuts_of(accepted[a]);
    out.push_back(std::move(s));
  }
  for (std::size_t a = 0; a < attrs; ++a) {
    const IntervalList single[1] = {accepted[a]};
    out[a].inconsistency = joint_inconsistency(single, columns.subspan(a, 1), ci);
  }
  return out;
}

DiscretizationScheme chi2_discretize(std::span<const double> values, std::span<const int> labels,
                                     const Chi2Config& config, std::string attribute) {
  const std::vector<double> column(values.begin(), values.end());
  const std::string name = std::move(attribute);
  auto schemes = chi2_discretize_all(std::span(&column, 1), std::span(&name, 1), labels, config);
  return std::move(schemes.front());
}

double inconsistency_rate(std::span<const DiscretizationScheme> schemes,
                          std::span<const std::vector<double>> columns,
                          std::span<const int> labels) {
  if (schemes.size() != columns.size()) {
    throw std::invalid_argument("inconsistency_rate: one scheme per column required");
  }
  validate_inputs(columns, labels);
  const ClassIndex ci = index_classes(labels);
  std::map<std::vector<std::size_t>, std::map<std::size_t, std::size_t>> patterns;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    std::vector<std::size_t> key;
    key.reserve(schemes.size());
    for (std::size_t a = 0; a < schemes.size(); ++a) key.push_back(schemes[a].bin_of(columns[a][i]));
    ++patterns[key][ci.of_sample[i]];
  }
  std::size_t inconsistent = 0;
  for (const auto& [_, counts] : patterns) {
    std::size_t total = 0, best = 0;
    for (const auto& [cls, c] : counts) {
      total += c;
      best = std::max(best, c);
    }
    inconsistent += total - best;
  }
  return static_cast<double>(inconsistent) / static_cast<double>(labels.size());
}

nlohmann::ordered_json schemes_to_json(std::span<const DiscretizationScheme> schemes) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& s : schemes) j[s.attribute] = s.cut_points;
  return j;
}

std::vector<DiscretizationScheme> schemes_from_json(const nlohmann::ordered_json& j) {
  if (!j.is_object()) throw std::invalid_argument("discretization schemes must be a JSON object");
  std::vector<DiscretizationScheme> out;
  for (auto it = j.begin(); it != j.end(); ++it) {
    DiscretizationScheme s;
    s.attribute = it.key();
    s.cut_points = it.value().get<std::vector<double>>();
    for (std::size_t i = 1; i < s.cut_points.size(); ++i) {
      if (!(s.cut_points[i - 1] < s.cut_points[i])) {
        throw std::invalid_argument("cut points for '" + s.attribute + "' are not strictly increasing");
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

void require_positive(std::span<const double> values) {
  for (double x : values) {
    if (!(x > 0.0) || !std::isfinite(x)) {
      throw std::invalid_argument(
          "boxcox: input values must be finite and > 0; shift with x - min(x) + 1 first "
          "(see shift_positive)");
    }
  }
}

}  // namespace

std::vector<double> boxcox_transform(std::span<const double> values, double lambda) {
  require_positive(values);
  std::vector<double> out;
  out.reserve(values.size());
  for (double x : values) out.push_back(lambda == 0.0 ? std::log(x) : (std::pow(x, lambda) - 1.0) / lambda);
  return out;
}

double boxcox_log_likelihood(std::span<const double> values, double lambda) {
  const auto y = boxcox_transform(values, lambda);
  const double n = static_cast<double>(y.size());
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : y) var += (v - mean) * (v - mean);
  var /= n;
  double log_sum = 0.0;
  for (double x : values) log_sum += std::log(x);
  if (!(var > 0.0) || !std::isfinite(var)) return -std::numeric_limits<double>::infinity();
  return -0.5 * n * std::log(var) + (lambda - 1.0) * log_sum;
}

BoxCoxResult boxcox(std::span<const double> values) {
  require_positive(values);
  if (values.empty()) return {};
  double best_lambda = 1.0;
  double best_ll = -std::numeric_limits<double>::infinity();
  for (int i = 0; i <= 1000; ++i) {
    const double lambda = -5.0 + 0.01 * i;
    const double ll = boxcox_log_likelihood(values, i == 500 ? 0.0 : lambda);
    if (ll > best_ll) {
      best_ll = ll;
      best_lambda = i == 500 ? 0.0 : lambda;
    }
  }
  return {boxcox_transform(values, best_lambda), best_lambda};
}

std::vector<double> shift_positive(std::span<const double> values) {
  std::vector<double> out(values.begin(), values.end());
  if (out.empty()) return out;
  const double lo = *std::min_element(out.begin(), out.end());
  if (lo > 0.0) return out;
  for (double& x : out) x = x - lo + 1.0;
  return out;
}

// ---------------------------------------------------------------------------

std::vector<double> one_hot(std::size_t category, std::size_t classes) {
  if (classes == 0) throw std::invalid_argument("one_hot: class count must be positive");
  if (category >= classes) {
    throw std::out_of_range("one_hot: category " + std::to_string(category) + " outside [0, " +
                            std::to_string(classes) + ")");
  }
  std::vector<double> v(classes, 0.0);
  v[category] = 1.0;
  return v;
}

const std::vector<double>& AttributeTable::column(const std::string& name) const {
  auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw std::invalid_argument("attribute table has no column '" + name + "'");
  return columns[static_cast<std::size_t>(it - names.begin())];
}

const std::vector<std::string>& default_attribute_names() {
  static const std::vector<std::string> names = {
      "population_density", "icu_beds_per_1000", "death_rate",
      "temperature_c",      "unemployment_rate", "mobility_mean"};
  return names;
}

std::string attribute_family(const std::string& attribute) {
  if (attribute == "population_density") return "demo";
  if (attribute == "icu_beds_per_1000" || attribute == "death_rate") return "med";
  if (attribute == "temperature_c") return "geo_clim";
  if (attribute == "unemployment_rate") return "eco";
  if (attribute == "mobility_mean") return "mobility";
  if (attribute == "confirmed_14d") return "infection";
  throw std::invalid_argument("unknown attribute '" + attribute + "'");
}

FeatureTensor build_aft(const AttributeTable& raw, std::span<const DiscretizationScheme> schemes) {
  std::size_t width = 0;
  for (const auto& s : schemes) width += s.bin_count();

  FeatureTensor t;
  t.role = FeatureRole::AFT;
  t.values = DenseMatrix(raw.node_count(), width);
  for (const auto& s : schemes)
    for (std::size_t b = 0; b < s.bin_count(); ++b)
      t.column_names.push_back(s.attribute + "_bin" + std::to_string(b));

  std::size_t offset = 0;
  for (const auto& s : schemes) {
    const auto& col = raw.column(s.attribute);
    for (std::size_t v = 0; v < raw.node_count(); ++v) {
      if (std::isnan(col[v])) {
        throw std::invalid_argument("node '" + raw.node_ids[v] + "' is missing attribute '" +
                                    s.attribute + "'");
      }
      t.values(v, offset + s.bin_of(col[v])) = 1.0;
    }
    offset += s.bin_count();
  }
  return t;
}

FeatureTensor build_sft(const Graph& g, const NmdTable& nmd, std::span<const double> transport_freq) {
  const std::size_t n = g.node_count();
  if (nmd.size() != n) throw std::invalid_argument("build_sft: NMD table does not cover every node");
  if (transport_freq.size() != n) {
    throw std::invalid_argument("build_sft: transport frequency does not cover every node");
  }
  FeatureTensor t;
  t.role = FeatureRole::SFT;
  t.column_names = {"degree", "flight_degree", "transport_freq", "mt31",
                    "mt32",   "mt41",          "mt42",           "mt43"};
  t.values = DenseMatrix(n, t.column_names.size());
  for (std::size_t v = 0; v < n; ++v) {
    t.values(v, 0) = static_cast<double>(g.degree(v));
    t.values(v, 1) = static_cast<double>(g.flight_degree(v));
    t.values(v, 2) = std::max(0.0, transport_freq[v]);
    for (std::size_t k = 0; k < kMotifKindCount; ++k)
      t.values(v, 3 + k) = static_cast<double>(nmd[v].counts[k]);
  }
  for (std::size_t c = 0; c < t.values.cols(); ++c) {
    double mx = 0.0;
    for (std::size_t v = 0; v < n; ++v) mx = std::max(mx, t.values(v, c));
    if (mx > 0.0)
      for (std::size_t v = 0; v < n; ++v) t.values(v, c) /= mx;
  }
  return t;
}

}  // namespace pandora
