#pragma once

#include <random>
#include <vector>

#include "oracles.hpp"
#include "pandora/model.hpp"

namespace fixture {

// Random one-hot blocks of `bins` columns each.
inline pandora::DenseMatrix one_hot_blocks(std::size_t n, std::size_t blocks, std::size_t bins,
                                           std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, bins - 1);
  pandora::DenseMatrix m(n, blocks * bins);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t b = 0; b < blocks; ++b) m(i, b * bins + pick(rng)) = 1.0;
  return m;
}

inline pandora::GraphInput random_input(std::size_t n, double p, std::size_t aft_width,
                                        std::size_t sft_width, std::uint64_t seed) {
  const auto edges = oracle::erdos_renyi(n, p, seed);
  pandora::GraphInput in;
  in.propagation = pandora::PropagationOperator(
      pandora::renormalized_propagation(pandora::Graph::from_edges(n, edges)));
  in.aft = one_hot_blocks(n, aft_width / 4, 4, seed + 1);
  in.sft = oracle::random_matrix(n, sft_width, seed + 2, 0.0, 1.0);
  return in;
}

inline pandora::ModelConfig small_config(pandora::AggregatorMode mode, std::uint64_t seed,
                                         std::size_t aft_width = 12, std::size_t sft_width = 8) {
  pandora::ModelConfig c;
  c.aft_width = aft_width;
  c.sft_width = sft_width;
  c.hidden_width = 6;
  c.embedding_width = 5;
  c.class_count = 4;
  c.mode = mode;
  c.seed = seed;
  return c;
}

inline std::vector<int> random_labels(std::size_t n, std::size_t classes, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pick(0, static_cast<int>(classes) - 1);
  std::vector<int> y(n);
  for (auto& v : y) v = pick(rng);
  return y;
}

inline std::vector<std::size_t> range(std::size_t lo, std::size_t hi) {
  std::vector<std::size_t> r;
  for (std::size_t i = lo; i < hi; ++i) r.push_back(i);
  return r;
}

}  // namespace fixture
