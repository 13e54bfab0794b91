#pragma once

// Seeded benchmark digraphs with planted ground truth. The decision for
// ordered pair (i, j) uses counter i * N + j of a CounterRng, so output is
// independent of generation order and identical across platforms.

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "flowscope/error.hpp"
#include "flowscope/graph.hpp"
#include "flowscope/partition.hpp"
#include "flowscope/rng.hpp"

namespace flowscope {

struct PlantedGraph {
  DirectedGraph graph;
  Partition planted;
  std::vector<std::size_t> block_sizes;
  double p_in = 0.0;
  double p_out = 0.0;
  std::uint64_t seed = 0;
};

namespace detail {

inline std::vector<std::string> numbered_labels(std::size_t n) {
  std::vector<std::string> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = "n" + std::to_string(i);
  return labels;
}

inline std::vector<CommunityId> block_assignment(const std::vector<std::size_t>& sizes) {
  std::vector<CommunityId> a;
  for (std::size_t b = 0; b < sizes.size(); ++b) a.insert(a.end(), sizes[b], static_cast<CommunityId>(b));
  return a;
}

}  // namespace detail

/// Directed SBM without self-loops: ordered pairs within a block connect
/// with p_in, across blocks with p_out.
inline PlantedGraph directed_sbm(const std::vector<std::size_t>& block_sizes, double p_in, double p_out,
                                 std::uint64_t seed) {
  if (block_sizes.empty()) throw ParameterError("directed_sbm needs at least one block");
  for (std::size_t s : block_sizes)
    if (s < 1) throw ParameterError("block sizes must be >= 1");
  if (!(p_out >= 0.0 && p_out < p_in && p_in <= 1.0)) throw ParameterError("need 0 <= p_out < p_in <= 1");
  const auto assignment = detail::block_assignment(block_sizes);
  const std::size_t n = assignment.size();
  const CounterRng rng(seed, 0);
  const BernoulliThreshold within(p_in), across(p_out);
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const auto& test = assignment[i] == assignment[j] ? within : across;
      if (test.accept(rng.at(i * n + j))) edges.push_back({static_cast<NodeId>(i), static_cast<NodeId>(j), 1.0});
    }
  return {DirectedGraph(detail::numbered_labels(n), std::move(edges)), Partition(assignment), block_sizes, p_in, p_out,
          seed};
}

/// Feed-forward layers: each pair (layer l, layer l+1) gets an edge with
/// probability p_forward. Planted partition = layers.
inline PlantedGraph layered_flow_graph(const std::vector<std::size_t>& layer_sizes, double p_forward,
                                       std::uint64_t seed) {
  if (layer_sizes.size() < 2) throw ParameterError("layered graph needs at least two layers");
  for (std::size_t s : layer_sizes)
    if (s < 1) throw ParameterError("layer sizes must be >= 1");
  if (!(p_forward > 0.0 && p_forward <= 1.0)) throw ParameterError("p_forward must lie in (0,1]");
  const auto assignment = detail::block_assignment(layer_sizes);
  const std::size_t n = assignment.size();
  const CounterRng rng(seed, 1);
  const BernoulliThreshold forward(p_forward);
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (assignment[j] == assignment[i] + 1 && forward.accept(rng.at(i * n + j)))
        edges.push_back({static_cast<NodeId>(i), static_cast<NodeId>(j), 1.0});
  return {DirectedGraph(detail::numbered_labels(n), std::move(edges)), Partition(assignment), layer_sizes, p_forward,
          0.0, seed};
}

}  // namespace flowscope
