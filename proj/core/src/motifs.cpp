#include "pandora/motifs.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <limits>
#include <ostream>
#include <random>
#include <set>
#include <stdexcept>

namespace pandora {

std::string to_string(MotifKind kind) {
  switch (kind) {
    case MotifKind::MT31: return "mt31";
    case MotifKind::MT32: return "mt32";
    case MotifKind::MT41: return "mt41";
    case MotifKind::MT42: return "mt42";
    case MotifKind::MT43: return "mt43";
  }
  return "?";
}

MotifKind parse_motif_kind(const std::string& text) {
  std::string lower;
  for (char c : text) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  for (MotifKind k : kAllMotifKinds)
    if (to_string(k) == lower) return k;
  throw std::invalid_argument("unknown motif '" + text + "' (expected mt31|mt32|mt41|mt42|mt43)");
}

std::size_t motif_order(MotifKind kind) {
  return (kind == MotifKind::MT31 || kind == MotifKind::MT32) ? 3 : 4;
}

namespace {

std::vector<std::size_t> neighbor_ids(const Graph& g, std::size_t v) {
  std::vector<std::size_t> out;
  out.reserve(g.degree(v));
  for (const auto& n : g.neighbors(v)) out.push_back(n.node);
  return out;
}

void bump(NmdTable& t, MotifKind k, std::initializer_list<std::size_t> nodes) {
  for (std::size_t v : nodes) ++t[v][k];
}

}  // namespace

NmdTable count_nmd(const Graph& g) {
  const std::size_t n = g.node_count();
  NmdTable table(n);

  std::vector<std::vector<std::size_t>> nbrs(n);
  for (std::size_t v = 0; v < n; ++v) nbrs[v] = neighbor_ids(g, v);

  // Membership marks for the current triangle's vertices, reused across
  // triangles: bit 0 = adjacent to a, bit 1 = b, bit 2 = c.
  std::vector<std::uint8_t> mark(n, 0);
  std::vector<std::size_t> touched;
  std::vector<std::size_t> inse;

  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b : nbrs[a]) {
      if (b <= a) continue;
      const auto& na = nbrs[a];
      const auto& nb = nbrs[b];
      inse.clear();
      std::set_intersection(na.begin(), na.end(), nb.begin(), nb.end(), std::back_inserter(inse));

      // Wedges centred on a (ends b, x) and on b (ends a, x). Each wedge is
      // reached from both of its edges; keep the visit whose edge end is the
      // smaller of the two ends.
      for (std::size_t x : na) {
        if (x == b || x < b || std::binary_search(inse.begin(), inse.end(), x)) continue;
        bump(table, MotifKind::MT32, {a, b, x});
      }
      for (std::size_t x : nb) {
        if (x == a || x < a || std::binary_search(inse.begin(), inse.end(), x)) continue;
        bump(table, MotifKind::MT32, {a, b, x});
      }

      for (std::size_t c : inse) {
        if (c <= b) continue;
        bump(table, MotifKind::MT31, {a, b, c});

        const std::size_t tri[3] = {a, b, c};
        for (int bit = 0; bit < 3; ++bit) {
          for (std::size_t d : nbrs[tri[bit]]) {
            if (d == a || d == b || d == c) continue;
            if (mark[d] == 0) touched.push_back(d);
            mark[d] |= static_cast<std::uint8_t>(1u << bit);
          }
        }
        for (std::size_t d : touched) {
          const std::uint8_t m = mark[d];
          mark[d] = 0;
          const int hits = std::popcount(static_cast<unsigned>(m));
          if (hits == 3) {
            // A 4-clique holds four triangles; count it from the one
            // missing its largest vertex.
            if (d > c) bump(table, MotifKind::MT41, {a, b, c, d});
          } else if (hits == 2) {
            // A diamond holds two triangles sharing an edge; each sees the
            // other's apex as d. Count from the triangle whose apex is smaller.
            const std::size_t apex = (m & 1u) == 0 ? a : ((m & 2u) == 0 ? b : c);
            if (d > apex) bump(table, MotifKind::MT42, {a, b, c, d});
          } else {
            bump(table, MotifKind::MT43, {a, b, c, d});
          }
        }
        touched.clear();
      }
    }
  }
  return table;
}

NmdTable count_nmd_bruteforce(const Graph& g) {
  const std::size_t n = g.node_count();
  if (n > kBruteForceNodeLimit) {
    throw std::invalid_argument("count_nmd_bruteforce: " + std::to_string(n) +
                                " nodes exceeds the limit of " +
                                std::to_string(kBruteForceNodeLimit));
  }
  NmdTable table(n);
  std::vector<std::uint64_t> adj(n, 0);
  for (std::size_t u = 0; u < n; ++u)
    for (const auto& nb : g.neighbors(u)) adj[u] |= (std::uint64_t{1} << nb.node);
  auto e = [&](std::size_t u, std::size_t v) -> int { return (adj[u] >> v) & 1u; };

  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      for (std::size_t k = j + 1; k < n; ++k) {
        const int edges = e(i, j) + e(i, k) + e(j, k);
        if (edges == 3) bump(table, MotifKind::MT31, {i, j, k});
        if (edges == 2) bump(table, MotifKind::MT32, {i, j, k});
      }

  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      for (std::size_t k = j + 1; k < n; ++k)
        for (std::size_t l = k + 1; l < n; ++l) {
          const std::size_t s[4] = {i, j, k, l};
          int deg[4] = {0, 0, 0, 0};
          int edges = 0;
          for (int x = 0; x < 4; ++x)
            for (int y = x + 1; y < 4; ++y)
              if (e(s[x], s[y])) {
                ++edges;
                ++deg[x];
                ++deg[y];
              }
          const int max_deg = *std::max_element(deg, deg + 4);
          const int min_deg = *std::min_element(deg, deg + 4);
          if (edges == 6) {
            bump(table, MotifKind::MT41, {i, j, k, l});
          } else if (edges == 5) {
            bump(table, MotifKind::MT42, {i, j, k, l});
          } else if (edges == 4 && max_deg == 3 && min_deg == 1) {
            // Four edges on four nodes: either the 4-cycle (all degree 2) or
            // the paw (degrees 3,2,2,1).
            bump(table, MotifKind::MT43, {i, j, k, l});
          }
        }
  return table;
}

std::array<std::uint64_t, kMotifKindCount> motif_totals(const NmdTable& nmd) {
  std::array<std::uint64_t, kMotifKindCount> totals{};
  for (const auto& v : nmd)
    for (std::size_t k = 0; k < kMotifKindCount; ++k) totals[k] += v.counts[k];
  for (MotifKind k : kAllMotifKinds) totals[static_cast<std::size_t>(k)] /= motif_order(k);
  return totals;
}

Graph rewire_null_model(const Graph& g, std::size_t swaps, std::uint64_t seed) {
  auto edges = g.edge_list();
  if (edges.size() < 2) {
    throw std::invalid_argument("rewire_null_model: need at least 2 edges, graph has " +
                                std::to_string(edges.size()));
  }
  std::vector<std::set<std::size_t>> adj(g.node_count());
  for (auto [u, v] : edges) {
    adj[u].insert(v);
    adj[v].insert(u);
  }

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, edges.size() - 1);
  std::bernoulli_distribution flip(0.5);

  for (std::size_t attempt = 0; attempt < swaps; ++attempt) {
    const std::size_t i = pick(rng);
    const std::size_t j = pick(rng);
    const bool orient = flip(rng);
    if (i == j) continue;
    auto [a, b] = edges[i];
    auto [c, d] = edges[j];
    if (orient) std::swap(c, d);
    // (a,b),(c,d) -> (a,d),(c,b)
    if (a == d || c == b) continue;
    if (adj[a].count(d) || adj[c].count(b)) continue;
    adj[a].erase(b);
    adj[b].erase(a);
    adj[c].erase(d);
    adj[d].erase(c);
    adj[a].insert(d);
    adj[d].insert(a);
    adj[c].insert(b);
    adj[b].insert(c);
    edges[i] = {std::min(a, d), std::max(a, d)};
    edges[j] = {std::min(c, b), std::max(c, b)};
  }

  Graph out(g.node_count());
  for (std::size_t u = 0; u < adj.size(); ++u)
    for (std::size_t v : adj[u])
      if (u < v) out.add_edge(u, v, EdgeKind::Adjacent, 1.0);
  return out;
}

SignificanceReport significance_from_counts(MotifKind motif, std::uint64_t f_ori,
                                            std::span<const double> null_counts,
                                            const SignificanceThresholds& thresholds) {
  if (null_counts.size() < 2) {
    throw std::invalid_argument("motif significance needs an ensemble of at least 2 graphs");
  }
  SignificanceReport r;
  r.motif = motif;
  r.f_ori = f_ori;
  double sum = 0.0;
  for (double c : null_counts) sum += c;
  r.f_rand_mean = sum / static_cast<double>(null_counts.size());
  double ss = 0.0;
  for (double c : null_counts) ss += (c - r.f_rand_mean) * (c - r.f_rand_mean);
  r.f_rand_std = std::sqrt(ss / static_cast<double>(null_counts.size() - 1));

  const double diff = static_cast<double>(f_ori) - r.f_rand_mean;
  if (r.f_rand_std > 0.0) {
    r.z_score = diff / r.f_rand_std;
  } else {
    r.degenerate_null = true;
    if (diff > 0.0) {
      r.z_score = std::numeric_limits<double>::infinity();
    } else if (diff < 0.0) {
      r.z_score = -std::numeric_limits<double>::infinity();
    } else {
      r.z_score = 0.0;
    }
  }
  r.passes_P = r.z_score > thresholds.z_cutoff;
  r.passes_U = static_cast<double>(f_ori) >= thresholds.min_frequency;
  r.passes_D = diff > thresholds.min_excess * r.f_rand_mean;
  return r;
}

SignificanceReport motif_significance(const Graph& g, MotifKind motif,
                                      const SignificanceOptions& options) {
  if (options.ensemble < 2) {
    throw std::invalid_argument("motif_significance: ensemble must be >= 2");
  }
  const auto k = static_cast<std::size_t>(motif);
  const std::uint64_t f_ori = motif_totals(count_nmd(g))[k];
  const std::size_t swaps = options.swaps != 0 ? options.swaps : 10 * g.edge_count();

  std::mt19937_64 seeder(options.seed);
  std::vector<double> null_counts;
  null_counts.reserve(options.ensemble);
  for (std::size_t i = 0; i < options.ensemble; ++i) {
    const Graph null_graph = rewire_null_model(g, swaps, seeder());
    null_counts.push_back(static_cast<double>(motif_totals(count_nmd(null_graph))[k]));
  }
  return significance_from_counts(motif, f_ori, null_counts, options.thresholds);
}

void write_nmd_csv(std::ostream& os, std::span<const std::string> node_ids, const NmdTable& nmd) {
  if (node_ids.size() != nmd.size()) {
    throw std::invalid_argument("write_nmd_csv: node id count does not match NMD table");
  }
  os << "node_id,mt31,mt32,mt41,mt42,mt43\n";
  for (std::size_t v = 0; v < nmd.size(); ++v) {
    os << node_ids[v];
    for (auto c : nmd[v].counts) os << ',' << c;
    os << '\n';
  }
}

}  // namespace pandora
