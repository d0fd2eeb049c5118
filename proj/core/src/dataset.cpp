#include "pandora/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <regex>
#include <unordered_map>

#include "pandora/csv.hpp"

namespace pandora {

std::vector<int> Dataset::label_indices() const {
  std::vector<int> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) out[i] = static_cast<int>(labels[i]);
  return out;
}

namespace {

bool same_values(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::isnan(a[i]) && std::isnan(b[i])) continue;
    if (a[i] != b[i]) return false;
  }
  return true;
}

}  // namespace

bool same_dataset(const Dataset& a, const Dataset& b) {
  if (a.node_ids != b.node_ids || !(a.graph == b.graph) || a.confirmed_14d != b.confirmed_14d ||
      a.labels != b.labels || a.explicit_labels != b.explicit_labels ||
      a.timestamps != b.timestamps || a.attributes.names != b.attributes.names ||
      a.attributes.node_ids != b.attributes.node_ids || a.edges.size() != b.edges.size() ||
      a.attributes.columns.size() != b.attributes.columns.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.edges.size(); ++i) {
    const auto &x = a.edges[i], &y = b.edges[i];
    if (x.src != y.src || x.dst != y.dst || x.kind != y.kind || x.weight != y.weight) return false;
  }
  for (std::size_t c = 0; c < a.attributes.columns.size(); ++c)
    if (!same_values(a.attributes.columns[c], b.attributes.columns[c])) return false;
  return true;
}

// ---------------------------------------------------------------------------
// Loading

namespace {

const std::vector<std::string>& timestamp_columns() {
  static const std::vector<std::string> cols = {"node_id", "confirmed_14d", "mobility_mean",
                                                "temperature_c"};
  return cols;
}

TimestampTable load_timestamp(const std::filesystem::path& path, const std::string& date,
                              const std::unordered_map<std::string, std::size_t>& index) {
  const CsvTable t = read_csv(path);
  const std::size_t c_id = t.require_column("node_id");
  const std::size_t c_conf = t.require_column("confirmed_14d");
  const std::size_t c_mob = t.require_column("mobility_mean");
  const std::size_t c_temp = t.require_column("temperature_c");

  const std::size_t n = index.size();
  TimestampTable ts;
  ts.date = date;
  ts.confirmed_14d.assign(n, 0);
  ts.mobility_mean.assign(n, 0.0);
  ts.temperature_c.assign(n, 0.0);
  std::vector<bool> seen(n, false);
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto it = index.find(t.cell(r, c_id));
    if (it == index.end()) t.fail(r, c_id, "unknown node id '" + t.cell(r, c_id) + "'");
    if (seen[it->second]) t.fail(r, c_id, "duplicate node id '" + t.cell(r, c_id) + "'");
    seen[it->second] = true;
    ts.confirmed_14d[it->second] = t.count(r, c_conf);
    ts.mobility_mean[it->second] = t.number(r, c_mob);
    ts.temperature_c[it->second] = t.number(r, c_temp);
  }
  for (const auto& [id, i] : index) {
    if (!seen[i]) throw DatasetError(path.string() + ": node '" + id + "' has no row");
  }
  return ts;
}

}  // namespace

Dataset load_dataset(const std::filesystem::path& nodes_path,
                     const std::filesystem::path& edges_path,
                     const std::optional<std::filesystem::path>& timeseries_dir) {
  Dataset d;
  const CsvTable nodes = read_csv(nodes_path);
  const std::size_t c_id = nodes.require_column("node_id");
  const auto& names = default_attribute_names();
  std::vector<std::size_t> c_attr;
  for (const auto& name : names) c_attr.push_back(nodes.require_column(name));
  const std::size_t c_conf = nodes.require_column("confirmed_14d");
  const std::size_t c_label = nodes.find_column("label");
  d.explicit_labels = c_label != std::string::npos;

  std::unordered_map<std::string, std::size_t> index;
  d.attributes.names = names;
  d.attributes.columns.assign(names.size(), {});
  for (std::size_t r = 0; r < nodes.rows.size(); ++r) {
    const std::string& id = nodes.cell(r, c_id);
    if (id.empty()) nodes.fail(r, c_id, "empty node id");
    if (!index.emplace(id, d.node_ids.size()).second) {
      nodes.fail(r, c_id, "duplicate node id '" + id + "'");
    }
    d.node_ids.push_back(id);
    for (std::size_t a = 0; a < names.size(); ++a)
      d.attributes.columns[a].push_back(nodes.number(r, c_attr[a], true));
    const long long confirmed = nodes.count(r, c_conf);
    d.confirmed_14d.push_back(confirmed);
    if (d.explicit_labels) {
      try {
        d.labels.push_back(parse_risk_level(nodes.cell(r, c_label)));
      } catch (const std::invalid_argument& e) {
        nodes.fail(r, c_label, e.what());
      }
    } else {
      d.labels.push_back(assign_risk_label(confirmed));
    }
  }
  d.attributes.node_ids = d.node_ids;

  const CsvTable edges = read_csv(edges_path);
  const std::size_t c_src = edges.require_column("src_id");
  const std::size_t c_dst = edges.require_column("dst_id");
  const std::size_t c_kind = edges.require_column("kind");
  const std::size_t c_weight = edges.require_column("weight");
  for (std::size_t r = 0; r < edges.rows.size(); ++r) {
    EdgeInput e;
    e.src = edges.cell(r, c_src);
    e.dst = edges.cell(r, c_dst);
    if (!index.count(e.src)) edges.fail(r, c_src, "unknown node id '" + e.src + "'");
    if (!index.count(e.dst)) edges.fail(r, c_dst, "unknown node id '" + e.dst + "'");
    if (e.src == e.dst) edges.fail(r, c_dst, "self-loop on '" + e.src + "'");
    try {
      e.kind = parse_edge_kind(edges.cell(r, c_kind));
    } catch (const std::invalid_argument& ex) {
      edges.fail(r, c_kind, ex.what());
    }
    e.weight = edges.number(r, c_weight);
    if (!(e.weight > 0.0)) edges.fail(r, c_weight, "weight must be positive");
    d.edges.push_back(std::move(e));
  }
  d.graph = build_graph(d.node_ids, d.edges).graph;

  if (timeseries_dir) {
    if (!std::filesystem::is_directory(*timeseries_dir)) {
      throw DatasetError("timeseries directory '" + timeseries_dir->string() + "' does not exist");
    }
    static const std::regex pattern(R"(t_(\d{4}-\d{2}-\d{2})\.csv)");
    std::map<std::string, std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(*timeseries_dir)) {
      std::smatch m;
      const std::string name = entry.path().filename().string();
      if (entry.is_regular_file() && std::regex_match(name, m, pattern)) files[m[1]] = entry.path();
    }
    for (const auto& [date, path] : files) d.timestamps.push_back(load_timestamp(path, date, index));
  }
  return d;
}

// ---------------------------------------------------------------------------
// Saving

namespace {

std::string cell_number(double v) { return std::isnan(v) ? std::string{} : format_number(v); }

}  // namespace

std::vector<std::pair<std::string, std::string>> serialize_dataset(const Dataset& d) {
  std::vector<std::pair<std::string, std::string>> files;

  std::string nodes = "node_id";
  for (const auto& name : d.attributes.names) nodes += "," + name;
  nodes += ",confirmed_14d";
  if (d.explicit_labels) nodes += ",label";
  nodes += "\n";
  for (std::size_t i = 0; i < d.node_count(); ++i) {
    nodes += csv_field(d.node_ids[i]);
    for (const auto& col : d.attributes.columns) nodes += "," + cell_number(col[i]);
    nodes += "," + std::to_string(d.confirmed_14d[i]);
    if (d.explicit_labels) nodes += "," + to_string(d.labels[i]);
    nodes += "\n";
  }
  files.emplace_back("nodes.csv", std::move(nodes));

  std::string edges = "src_id,dst_id,kind,weight\n";
  for (const auto& e : d.edges) {
    edges += csv_field(e.src) + "," + csv_field(e.dst) + "," + to_string(e.kind) + "," +
             format_number(e.weight) + "\n";
  }
  files.emplace_back("edges.csv", std::move(edges));

  for (const auto& ts : d.timestamps) {
    std::string text;
    for (const auto& c : timestamp_columns()) text += (text.empty() ? "" : ",") + c;
    text += "\n";
    for (std::size_t i = 0; i < d.node_count(); ++i) {
      text += csv_field(d.node_ids[i]) + "," + std::to_string(ts.confirmed_14d[i]) + "," +
              format_number(ts.mobility_mean[i]) + "," + format_number(ts.temperature_c[i]) + "\n";
    }
    files.emplace_back("t_" + ts.date + ".csv", std::move(text));
  }
  return files;
}

void save_dataset(const Dataset& d, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& [name, text] : serialize_dataset(d)) write_file_atomic(dir / name, text);
}

// ---------------------------------------------------------------------------
// Synthetic data

std::string to_string(LabelRule rule) {
  return rule == LabelRule::Community ? "community" : "structural";
}

LabelRule parse_label_rule(const std::string& text) {
  if (text == "community") return LabelRule::Community;
  if (text == "structural") return LabelRule::Structural;
  throw std::invalid_argument("unknown label rule '" + text + "' (expected community|structural)");
}

namespace {

struct AttributeProfile {
  double base;
  double spacing;
  bool non_negative;
};

// population_density, icu_beds_per_1000, death_rate, temperature_c,
// unemployment_rate, mobility_mean
constexpr AttributeProfile kProfiles[] = {
    {40.0, 60.0, true}, {1.0, 0.8, true}, {0.6, 0.5, true},
    {2.0, 6.0, false},  {3.0, 1.5, true}, {-20.0, 8.0, false},
};

std::string date_after(int days) {
  static constexpr int kMonthDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  int y = 2020, m = 11, d = 1 + days;
  auto month_len = [&] {
    const bool leap = (y % 4 == 0 && y % 100 != 0) || y % 400 == 0;
    return kMonthDays[m - 1] + (m == 2 && leap ? 1 : 0);
  };
  while (d > month_len()) {
    d -= month_len();
    if (++m > 12) {
      m = 1;
      ++y;
    }
  }
  char buf[48];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", y, m, d);
  return buf;
}

std::int64_t draw_confirmed(RiskLevel level, std::mt19937_64& rng) {
  auto uniform = [&](std::int64_t lo, std::int64_t hi) {
    return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng);
  };
  switch (level) {
    case RiskLevel::RiskFree: return 0;
    case RiskLevel::Low: return uniform(1, 150);
    case RiskLevel::Medium: return uniform(151, 750);
    case RiskLevel::High: return uniform(751, 3000);
  }
  return 0;
}

double nearest_centroid_accuracy(const AttributeTable& t, const std::vector<std::size_t>& group,
                                 std::size_t groups) {
  const std::size_t n = t.node_count(), a = t.columns.size();
  std::vector<std::vector<double>> z(a, std::vector<double>(n));
  for (std::size_t c = 0; c < a; ++c) {
    const auto& col = t.columns[c];
    const double mean = std::accumulate(col.begin(), col.end(), 0.0) / static_cast<double>(n);
    double var = 0.0;
    for (double v : col) var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / static_cast<double>(n));
    for (std::size_t i = 0; i < n; ++i) z[c][i] = sd > 0.0 ? (col[i] - mean) / sd : 0.0;
  }
  std::vector<std::vector<double>> centroid(groups, std::vector<double>(a, 0.0));
  std::vector<std::size_t> size(groups, 0);
  for (std::size_t i = 0; i < n; ++i) {
    ++size[group[i]];
    for (std::size_t c = 0; c < a; ++c) centroid[group[i]][c] += z[c][i];
  }
  for (std::size_t g = 0; g < groups; ++g)
    for (double& v : centroid[g]) v /= static_cast<double>(std::max<std::size_t>(size[g], 1));
  std::size_t hit = 0;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t g = 0; g < groups; ++g) {
      double dist = 0.0;
      for (std::size_t c = 0; c < a; ++c) dist += (z[c][i] - centroid[g][c]) * (z[c][i] - centroid[g][c]);
      if (dist < best_d) {
        best_d = dist;
        best = g;
      }
    }
    if (best == group[i]) ++hit;
  }
  return static_cast<double>(hit) / static_cast<double>(n);
}

}  // namespace

SynthResult synth_dataset(const SynthConfig& cfg) {
  if (cfg.communities < 1) throw std::invalid_argument("synth: communities must be >= 1");
  if (cfg.n < cfg.communities) throw std::invalid_argument("synth: n must be >= communities");
  auto check_prob = [](double p, const char* what) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw std::invalid_argument(std::string("synth: ") + what + " must lie in [0, 1]");
    }
  };
  check_prob(cfg.edge_prob_in, "edge_prob_in");
  check_prob(cfg.edge_prob_out, "edge_prob_out");
  check_prob(cfg.sparse_factor, "sparse_factor");
  if (!(cfg.attribute_noise >= 0.0)) throw std::invalid_argument("synth: attribute_noise must be >= 0");

  std::mt19937_64 rng(cfg.seed);
  SynthResult out;
  Dataset& d = out.dataset;
  const std::size_t n = cfg.n, k = cfg.communities;

  out.community.resize(n);
  {
    const std::size_t base = n / k, extra = n % k;
    std::size_t v = 0;
    for (std::size_t c = 0; c < k; ++c)
      for (std::size_t s = 0; s < base + (c < extra ? 1 : 0); ++s) out.community[v++] = c;
  }
  const bool structural = cfg.label_rule == LabelRule::Structural;
  const std::size_t groups = structural ? (k + 1) / 2 : k;
  std::vector<std::size_t> group(n);
  for (std::size_t i = 0; i < n; ++i) group[i] = structural ? out.community[i] / 2 : out.community[i];

  const int width = static_cast<int>(std::to_string(n - 1).size());
  for (std::size_t i = 0; i < n; ++i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "R%0*zu", width, i);
    d.node_ids.emplace_back(buf);
  }

  std::bernoulli_distribution coin(0.5);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const std::size_t ci = out.community[i], cj = out.community[j];
      double p = cfg.edge_prob_out;
      if (ci == cj) p = cfg.edge_prob_in * (structural && ci % 2 == 1 ? cfg.sparse_factor : 1.0);
      if (!(unit(rng) < p)) continue;
      EdgeInput e;
      e.src = d.node_ids[i];
      e.dst = d.node_ids[j];
      if (ci == cj) {
        e.kind = EdgeKind::Adjacent;
        e.weight = 1.0;
      } else {
        e.kind = EdgeKind::Flight;
        e.weight = static_cast<double>(std::uniform_int_distribution<int>(1, 20)(rng));
      }
      d.edges.push_back(std::move(e));
    }
  }
  d.graph = build_graph(d.node_ids, d.edges).graph;

  const auto& names = default_attribute_names();
  d.attributes.node_ids = d.node_ids;
  d.attributes.names = names;
  d.attributes.columns.assign(names.size(), std::vector<double>(n));
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<std::vector<double>> position(names.size(), std::vector<double>(groups));
  for (std::size_t a = 0; a < names.size(); ++a) {
    std::vector<std::size_t> perm(groups);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    for (std::size_t g = 0; g < groups; ++g) position[a][g] = static_cast<double>(perm[g]);
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t a = 0; a < names.size(); ++a) {
      const auto& p = kProfiles[a];
      double v = p.base + p.spacing * position[a][group[i]] +
                 cfg.attribute_noise * p.spacing * gauss(rng);
      if (p.non_negative) v = std::max(v, 0.0);
      d.attributes.columns[a][i] = v;
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    const auto level = static_cast<RiskLevel>(out.community[i] % kRiskLevelCount);
    d.confirmed_14d.push_back(draw_confirmed(level, rng));
    d.labels.push_back(level);
  }

  for (std::size_t t = 0; t < cfg.timestamps; ++t) {
    TimestampTable ts;
    ts.date = date_after(static_cast<int>(t));
    for (std::size_t i = 0; i < n; ++i) {
      ts.confirmed_14d.push_back(draw_confirmed(d.labels[i], rng));
      ts.mobility_mean.push_back(d.attributes.columns[5][i] +
                                 cfg.attribute_noise * kProfiles[5].spacing * gauss(rng));
      ts.temperature_c.push_back(d.attributes.columns[3][i] +
                                 cfg.attribute_noise * kProfiles[3].spacing * gauss(rng));
    }
    d.timestamps.push_back(std::move(ts));
  }

  out.centroid_accuracy = nearest_centroid_accuracy(d.attributes, group, groups);
  return out;
}

// ---------------------------------------------------------------------------
// Splits

std::string to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Validation: return "validation";
    case Split::Test: return "test";
  }
  return "?";
}

SplitAssignment split_dataset(std::span<const int> labels, SplitRatios ratios, std::uint64_t seed) {
  if (ratios.train < 0.0 || ratios.validation < 0.0 || ratios.test < 0.0 ||
      std::abs(ratios.train + ratios.validation + ratios.test - 1.0) > 1e-9) {
    throw std::invalid_argument("split ratios must be non-negative and sum to 1");
  }
  const std::size_t n = labels.size();
  if (n == 0) throw std::invalid_argument("cannot split an empty dataset");

  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < n; ++i) by_class[labels[i]].push_back(i);

  struct Ranked {
    double rank;
    int label;
    std::size_t order;
    std::size_t node;
  };
  std::vector<Ranked> ranked;
  ranked.reserve(n);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  SplitAssignment out;
  for (auto& [label, members] : by_class) {
    std::shuffle(members.begin(), members.end(), rng);
    const std::size_t m = members.size();
    const bool stratify = m >= 3;
    if (!stratify) {
      out.warnings.push_back("class " + std::to_string(label) + " has only " + std::to_string(m) +
                             " member(s); split without stratification");
    }
    for (std::size_t k = 0; k < m; ++k) {
      const double rank =
          stratify ? (static_cast<double>(k) + 0.5) / static_cast<double>(m) : unit(rng);
      ranked.push_back({rank, label, k, members[k]});
    }
  }
  std::sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) {
    if (a.rank != b.rank) return a.rank < b.rank;
    if (a.label != b.label) return a.label < b.label;
    return a.order < b.order;
  });

  const auto dn = static_cast<double>(n);
  const std::size_t n_train = std::min(n, static_cast<std::size_t>(std::llround(ratios.train * dn)));
  const std::size_t n_val =
      std::min(n - n_train, static_cast<std::size_t>(std::llround(ratios.validation * dn)));
  out.of_node.assign(n, Split::Test);
  for (std::size_t r = 0; r < n; ++r) {
    const Split s = r < n_train ? Split::Train : (r < n_train + n_val ? Split::Validation : Split::Test);
    out.of_node[ranked[r].node] = s;
  }
  for (std::size_t i = 0; i < n; ++i) {
    switch (out.of_node[i]) {
      case Split::Train: out.train.push_back(i); break;
      case Split::Validation: out.validation.push_back(i); break;
      case Split::Test: out.test.push_back(i); break;
    }
  }
  return out;
}

}  // namespace pandora
