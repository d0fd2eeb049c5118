#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "pandora/graph.hpp"

namespace pandora {

/// The five transmission motifs, in vector-index order.
///
///   MT31  triangle
///   MT32  induced open wedge (path on three nodes)
///   MT41  4-clique
///   MT42  diamond (4-clique minus one edge)
///   MT43  paw (triangle with one pendant node)
///
/// All counts are induced-subgraph counts: a 3-set that is a triangle never
/// also counts as a wedge, and a 4-clique never counts as a diamond or paw.
enum class MotifKind : std::uint8_t { MT31 = 0, MT32, MT41, MT42, MT43 };

inline constexpr std::size_t kMotifKindCount = 5;
inline constexpr std::array<MotifKind, kMotifKindCount> kAllMotifKinds = {
    MotifKind::MT31, MotifKind::MT32, MotifKind::MT41, MotifKind::MT42, MotifKind::MT43};

std::string to_string(MotifKind kind);
MotifKind parse_motif_kind(const std::string& text);
/// Number of nodes in the motif (3 or 4).
std::size_t motif_order(MotifKind kind);

/// Node motif degree: how many instances of each motif contain the node.
struct NmdVector {
  std::array<std::uint64_t, kMotifKindCount> counts{};

  std::uint64_t operator[](MotifKind k) const { return counts[static_cast<std::size_t>(k)]; }
  std::uint64_t& operator[](MotifKind k) { return counts[static_cast<std::size_t>(k)]; }
  friend bool operator==(const NmdVector&, const NmdVector&) = default;
};

using NmdTable = std::vector<NmdVector>;

/// Edge-driven neighborhood search: for every edge (a, b) intersect N(a) and
/// N(b), then extend each triangle to a fourth node. Every unordered node set
/// is counted exactly once.
NmdTable count_nmd(const Graph& g);

inline constexpr std::size_t kBruteForceNodeLimit = 64;

/// Exhaustive census of every 3- and 4-subset. Reference for count_nmd.
/// Throws std::invalid_argument above kBruteForceNodeLimit nodes.
NmdTable count_nmd_bruteforce(const Graph& g);

/// Total number of instances of each motif, i.e. Σ_v NMD(v) / motif order.
std::array<std::uint64_t, kMotifKindCount> motif_totals(const NmdTable& nmd);

/// Degree-preserving null model: `swaps` attempted double-edge swaps, each
/// rejected if it would create a self-loop or a parallel edge. All output
/// edges are Adjacent with weight 1.
Graph rewire_null_model(const Graph& g, std::size_t swaps, std::uint64_t seed);

struct SignificanceThresholds {
  double z_cutoff = 2.0;     // P, as a z-score cutoff
  double min_frequency = 0;  // U
  double min_excess = 0.0;   // D, relative to the null mean
};

struct SignificanceReport {
  MotifKind motif = MotifKind::MT31;
  std::uint64_t f_ori = 0;
  double f_rand_mean = 0.0;
  double f_rand_std = 0.0;
  double z_score = 0.0;
  /// Null ensemble had zero spread; z_score holds ±infinity (or 0 if f_ori
  /// equals the mean).
  bool degenerate_null = false;
  bool passes_P = false;
  bool passes_U = false;
  bool passes_D = false;
};

struct SignificanceOptions {
  std::size_t ensemble = 100;
  /// Attempted swaps per null graph; 0 means 10 × edge count.
  std::size_t swaps = 0;
  std::uint64_t seed = 0;
  SignificanceThresholds thresholds;
};

/// Builds a report from the observed count and the null-ensemble counts.
SignificanceReport significance_from_counts(MotifKind motif, std::uint64_t f_ori,
                                            std::span<const double> null_counts,
                                            const SignificanceThresholds& thresholds);

SignificanceReport motif_significance(const Graph& g, MotifKind motif,
                                      const SignificanceOptions& options);

/// CSV with header node_id,mt31,mt32,mt41,mt42,mt43.
void write_nmd_csv(std::ostream& os, std::span<const std::string> node_ids, const NmdTable& nmd);

}  // namespace pandora
