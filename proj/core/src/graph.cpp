#include "pandora/graph.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

namespace pandora {

std::string to_string(EdgeKind kind) {
  return kind == EdgeKind::Flight ? "flight" : "adjacent";
}

EdgeKind parse_edge_kind(const std::string& text) {
  if (text == "adjacent") return EdgeKind::Adjacent;
  if (text == "flight") return EdgeKind::Flight;
  throw GraphError("unknown edge kind '" + text + "' (expected adjacent|flight)");
}

Graph Graph::from_edges(std::size_t node_count,
                        std::span<const std::pair<std::size_t, std::size_t>> edges) {
  Graph g(node_count);
  for (auto [u, v] : edges) g.add_edge(u, v, EdgeKind::Adjacent, 1.0);
  return g;
}

bool Graph::has_edge(std::size_t u, std::size_t v) const { return find_edge(u, v) != nullptr; }

const Neighbor* Graph::find_edge(std::size_t u, std::size_t v) const {
  const auto& nbrs = adjacency_.at(u);
  auto it = std::lower_bound(nbrs.begin(), nbrs.end(), v,
                             [](const Neighbor& n, std::size_t x) { return n.node < x; });
  return (it != nbrs.end() && it->node == v) ? &*it : nullptr;
}

std::vector<std::pair<std::size_t, std::size_t>> Graph::edge_list() const {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  out.reserve(edge_count_);
  for (std::size_t u = 0; u < adjacency_.size(); ++u)
    for (const auto& n : adjacency_[u])
      if (u < n.node) out.emplace_back(u, n.node);
  return out;
}

std::size_t Graph::flight_degree(std::size_t v) const {
  const auto& nbrs = adjacency_.at(v);
  return static_cast<std::size_t>(std::count_if(
      nbrs.begin(), nbrs.end(), [](const Neighbor& n) { return n.kinds.has(EdgeKind::Flight); }));
}

double Graph::flight_weight(std::size_t v) const {
  double w = 0.0;
  for (const auto& n : adjacency_.at(v))
    if (n.kinds.has(EdgeKind::Flight)) w += n.weight;
  return w;
}

namespace {

void insert_half(std::vector<Neighbor>& nbrs, std::size_t v, EdgeKind kind, double weight,
                 bool& inserted) {
  auto it = std::lower_bound(nbrs.begin(), nbrs.end(), v,
                             [](const Neighbor& n, std::size_t x) { return n.node < x; });
  if (it != nbrs.end() && it->node == v) {
    it->kinds.insert(kind);
    it->weight += weight;
    inserted = false;
    return;
  }
  EdgeKindSet kinds;
  kinds.insert(kind);
  nbrs.insert(it, Neighbor{v, kinds, weight});
  inserted = true;
}

}  // namespace

void Graph::add_edge(std::size_t u, std::size_t v, EdgeKind kind, double weight) {
  if (u >= adjacency_.size() || v >= adjacency_.size()) {
    throw GraphError("edge (" + std::to_string(u) + ", " + std::to_string(v) +
                     ") references a node outside [0, " + std::to_string(adjacency_.size()) + ")");
  }
  if (u == v) throw GraphError("self-loop on node " + std::to_string(u));
  if (!(weight >= 0.0) || !std::isfinite(weight)) {
    throw GraphError("edge (" + std::to_string(u) + ", " + std::to_string(v) +
                     ") has invalid weight " + std::to_string(weight));
  }
  bool inserted = false;
  insert_half(adjacency_[u], v, kind, weight, inserted);
  insert_half(adjacency_[v], u, kind, weight, inserted);
  if (inserted) ++edge_count_;
}

Graph Graph::permuted(std::span<const std::size_t> perm) const {
  if (perm.size() != adjacency_.size()) throw GraphError("permutation size mismatch");
  Graph out(adjacency_.size());
  for (std::size_t u = 0; u < adjacency_.size(); ++u) {
    auto& dst = out.adjacency_[perm[u]];
    dst.reserve(adjacency_[u].size());
    for (const auto& n : adjacency_[u]) dst.push_back(Neighbor{perm[n.node], n.kinds, n.weight});
    std::sort(dst.begin(), dst.end(),
              [](const Neighbor& a, const Neighbor& b) { return a.node < b.node; });
  }
  out.edge_count_ = edge_count_;
  return out;
}

LabeledGraph build_graph(std::span<const std::string> node_ids, std::span<const EdgeInput> edges) {
  std::unordered_map<std::string, std::size_t> index;
  index.reserve(node_ids.size());
  for (std::size_t i = 0; i < node_ids.size(); ++i) {
    if (!index.emplace(node_ids[i], i).second) {
      throw GraphError("duplicate node id '" + node_ids[i] + "'");
    }
  }
  auto describe = [](const EdgeInput& e) {
    return "(" + e.src + ", " + e.dst + ", " + to_string(e.kind) + ", " + std::to_string(e.weight) +
           ")";
  };

  LabeledGraph out{std::vector<std::string>(node_ids.begin(), node_ids.end()),
                   Graph(node_ids.size())};
  for (const auto& e : edges) {
    auto su = index.find(e.src);
    auto dv = index.find(e.dst);
    if (su == index.end()) {
      throw GraphError("edge " + describe(e) + " references unknown node id '" + e.src + "'");
    }
    if (dv == index.end()) {
      throw GraphError("edge " + describe(e) + " references unknown node id '" + e.dst + "'");
    }
    if (su->second == dv->second) throw GraphError("edge " + describe(e) + " is a self-loop");
    out.graph.add_edge(su->second, dv->second, e.kind, e.weight);
  }
  return out;
}

DenseMatrix adjacency_matrix(const Graph& g) {
  const std::size_t n = g.node_count();
  DenseMatrix a(n, n);
  for (std::size_t u = 0; u < n; ++u)
    for (const auto& nb : g.neighbors(u)) a(u, nb.node) = 1.0;
  return a;
}

DenseMatrix renormalized_propagation(const Graph& g, PropagationOptions options) {
  const std::size_t n = g.node_count();
  std::vector<double> inv_sqrt(n);
  for (std::size_t u = 0; u < n; ++u) {
    double d = 1.0;
    for (const auto& nb : g.neighbors(u)) d += options.weighted ? nb.weight : 1.0;
    inv_sqrt[u] = 1.0 / std::sqrt(d);
  }
  DenseMatrix p(n, n);
  for (std::size_t u = 0; u < n; ++u) {
    p(u, u) = inv_sqrt[u] * inv_sqrt[u];
    for (const auto& nb : g.neighbors(u)) {
      const double a = options.weighted ? nb.weight : 1.0;
      p(u, nb.node) = inv_sqrt[u] * a * inv_sqrt[nb.node];
    }
  }
  return p;
}

DenseMatrix normalized_laplacian(const Graph& g) {
  const std::size_t n = g.node_count();
  std::vector<double> inv_sqrt(n);
  for (std::size_t u = 0; u < n; ++u) {
    if (g.degree(u) == 0) {
      throw GraphError("normalized_laplacian: node " + std::to_string(u) +
                       " is isolated (degree 0)");
    }
    inv_sqrt[u] = 1.0 / std::sqrt(static_cast<double>(g.degree(u)));
  }
  DenseMatrix l = DenseMatrix::identity(n);
  for (std::size_t u = 0; u < n; ++u)
    for (const auto& nb : g.neighbors(u)) l(u, nb.node) = -inv_sqrt[u] * inv_sqrt[nb.node];
  return l;
}

}  // namespace pandora
