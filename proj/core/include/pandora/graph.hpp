#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "pandora/matrix.hpp"

namespace pandora {

enum class EdgeKind : std::uint8_t { Adjacent = 1, Flight = 2 };

/// Bit set over EdgeKind; merged edges carry the union of their kinds.
struct EdgeKindSet {
  std::uint8_t bits = 0;

  bool has(EdgeKind k) const noexcept { return (bits & static_cast<std::uint8_t>(k)) != 0; }
  void insert(EdgeKind k) noexcept { bits |= static_cast<std::uint8_t>(k); }
  friend bool operator==(EdgeKindSet, EdgeKindSet) = default;
};

std::string to_string(EdgeKind kind);
EdgeKind parse_edge_kind(const std::string& text);

struct EdgeInput {
  std::string src;
  std::string dst;
  EdgeKind kind = EdgeKind::Adjacent;
  double weight = 1.0;
};

struct Neighbor {
  std::size_t node;
  EdgeKindSet kinds;
  double weight;

  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

struct GraphError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Undirected simple graph over dense node indices.
///
/// Neighbor lists are strictly sorted by node index, symmetric, and never
/// contain the node itself. Self-loops only appear inside the renormalized
/// propagation operator.
class Graph {
 public:
  Graph() = default;
  explicit Graph(std::size_t node_count) : adjacency_(node_count) {}

  /// Builds from index pairs. Duplicate pairs merge: weights add, kinds union.
  static Graph from_edges(std::size_t node_count,
                          std::span<const std::pair<std::size_t, std::size_t>> edges);

  std::size_t node_count() const noexcept { return adjacency_.size(); }
  std::size_t edge_count() const noexcept { return edge_count_; }
  std::size_t degree(std::size_t v) const { return adjacency_.at(v).size(); }

  std::span<const Neighbor> neighbors(std::size_t v) const { return adjacency_.at(v); }
  bool has_edge(std::size_t u, std::size_t v) const;
  const Neighbor* find_edge(std::size_t u, std::size_t v) const;

  /// Edges as (u, v) with u < v, ordered lexicographically.
  std::vector<std::pair<std::size_t, std::size_t>> edge_list() const;

  /// Number of incident edges tagged Flight.
  std::size_t flight_degree(std::size_t v) const;
  /// Sum of weights of incident Flight edges.
  double flight_weight(std::size_t v) const;

  /// Inserts or merges an undirected edge. Rejects self-loops and bad indices.
  void add_edge(std::size_t u, std::size_t v, EdgeKind kind, double weight = 1.0);

  /// Relabels node v as perm[v].
  Graph permuted(std::span<const std::size_t> perm) const;

  friend bool operator==(const Graph&, const Graph&) = default;

 private:
  std::vector<std::vector<Neighbor>> adjacency_;
  std::size_t edge_count_ = 0;
};

/// Graph plus the external identifiers of its nodes.
struct LabeledGraph {
  std::vector<std::string> node_ids;
  Graph graph;
};

/// Maps identifier edges onto dense indices in node_ids order.
LabeledGraph build_graph(std::span<const std::string> node_ids, std::span<const EdgeInput> edges);

/// Binary adjacency: A(i,j) = 1 iff {i,j} is an edge. Weights are ignored.
DenseMatrix adjacency_matrix(const Graph& g);

struct PropagationOptions {
  /// Use stored edge weights instead of the binary adjacency.
  bool weighted = false;
};

/// D̄^{-1/2} (A + I) D̄^{-1/2}, with D̄ the degree matrix of A + I.
DenseMatrix renormalized_propagation(const Graph& g, PropagationOptions options = {});

/// I − D^{-1/2} A D^{-1/2}. Undefined for isolated nodes, which are rejected.
DenseMatrix normalized_laplacian(const Graph& g);

}  // namespace pandora
