#pragma once

// Weighted directed graph with stable string labels, edge-list ingestion,
// degree vectors, weak components and induced subgraphs.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "flowscope/error.hpp"

namespace flowscope {

using NodeId = std::uint32_t;

struct Edge {
  NodeId source = 0;
  NodeId target = 0;
  double weight = 1.0;

  friend bool operator==(const Edge&, const Edge&) = default;
};

struct DegreeVectors {
  std::vector<double> in_degree;   // column sums of A
  std::vector<double> out_degree;  // row sums of A
};

/// Immutable weighted digraph stored as out- and in-CSR.
///
/// At most one edge per ordered pair: duplicate input edges are summed.
/// Self-loops are kept. Out-edges of a node are sorted by target, and the
/// edge id of an edge is its position in the out-CSR.
class DirectedGraph {
 public:
  DirectedGraph() = default;

  DirectedGraph(std::vector<std::string> labels, std::vector<Edge> edges) : labels_(std::move(labels)) {
    index_.reserve(labels_.size());
    for (std::size_t i = 0; i < labels_.size(); ++i) {
      if (labels_[i].empty()) throw ParameterError("node label must be non-empty");
      if (!index_.emplace(labels_[i], static_cast<NodeId>(i)).second)
        throw ParameterError("duplicate node label '" + labels_[i] + "'");
    }
    const std::size_t n = labels_.size();
    for (const Edge& e : edges) {
      if (e.source >= n || e.target >= n) throw ParameterError("edge endpoint out of range");
      if (!(e.weight > 0.0) || !std::isfinite(e.weight)) throw ParameterError("edge weight must be positive and finite");
    }
    std::stable_sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
      return a.source != b.source ? a.source < b.source : a.target < b.target;
    });
    std::vector<Edge> merged;
    merged.reserve(edges.size());
    for (const Edge& e : edges) {
      if (!merged.empty() && merged.back().source == e.source && merged.back().target == e.target)
        merged.back().weight += e.weight;
      else
        merged.push_back(e);
    }

    out_offsets_.assign(n + 1, 0);
    in_offsets_.assign(n + 1, 0);
    for (const Edge& e : merged) {
      ++out_offsets_[e.source + 1];
      ++in_offsets_[e.target + 1];
    }
    std::partial_sum(out_offsets_.begin(), out_offsets_.end(), out_offsets_.begin());
    std::partial_sum(in_offsets_.begin(), in_offsets_.end(), in_offsets_.begin());

    out_targets_.resize(merged.size());
    out_weights_.resize(merged.size());
    for (std::size_t k = 0; k < merged.size(); ++k) {
      out_targets_[k] = merged[k].target;
      out_weights_[k] = merged[k].weight;
    }
    in_sources_.resize(merged.size());
    in_weights_.resize(merged.size());
    in_edge_ids_.resize(merged.size());
    std::vector<std::size_t> cursor(in_offsets_.begin(), in_offsets_.end() - 1);
    for (std::size_t k = 0; k < merged.size(); ++k) {
      const std::size_t slot = cursor[merged[k].target]++;
      in_sources_[slot] = merged[k].source;
      in_weights_[slot] = merged[k].weight;
      in_edge_ids_[slot] = k;
    }
  }

  std::size_t num_nodes() const noexcept { return labels_.size(); }
  std::size_t num_edges() const noexcept { return out_targets_.size(); }

  const std::vector<std::string>& labels() const noexcept { return labels_; }
  const std::string& label(NodeId v) const { return labels_.at(v); }

  bool contains(std::string_view label) const { return index_.find(std::string(label)) != index_.end(); }

  NodeId index_of(std::string_view label) const {
    auto it = index_.find(std::string(label));
    if (it == index_.end()) throw LookupError("unknown node label '" + std::string(label) + "'");
    return it->second;
  }

  std::span<const NodeId> out_neighbors(NodeId v) const {
    return {out_targets_.data() + out_offsets_[v], out_offsets_[v + 1] - out_offsets_[v]};
  }
  std::span<const double> out_weights(NodeId v) const {
    return {out_weights_.data() + out_offsets_[v], out_offsets_[v + 1] - out_offsets_[v]};
  }
  std::span<const NodeId> in_neighbors(NodeId v) const {
    return {in_sources_.data() + in_offsets_[v], in_offsets_[v + 1] - in_offsets_[v]};
  }
  std::span<const double> in_weights(NodeId v) const {
    return {in_weights_.data() + in_offsets_[v], in_offsets_[v + 1] - in_offsets_[v]};
  }
  /// Out-CSR edge ids of the in-edges of v, aligned with in_neighbors(v).
  std::span<const std::size_t> in_edge_ids(NodeId v) const {
    return {in_edge_ids_.data() + in_offsets_[v], in_offsets_[v + 1] - in_offsets_[v]};
  }
  std::size_t out_edge_begin(NodeId v) const { return out_offsets_[v]; }

  std::vector<Edge> edges() const {
    std::vector<Edge> result;
    result.reserve(num_edges());
    for (NodeId u = 0; u < num_nodes(); ++u)
      for (std::size_t k = out_offsets_[u]; k < out_offsets_[u + 1]; ++k)
        result.push_back({u, out_targets_[k], out_weights_[k]});
    return result;
  }

  Edge edge(std::size_t id) const {
    auto it = std::upper_bound(out_offsets_.begin(), out_offsets_.end(), id);
    const auto source = static_cast<NodeId>(std::distance(out_offsets_.begin(), it) - 1);
    return {source, out_targets_[id], out_weights_[id]};
  }

  /// Weight of u->v, or 0 when absent.
  double weight(NodeId u, NodeId v) const {
    auto nbrs = out_neighbors(u);
    auto it = std::lower_bound(nbrs.begin(), nbrs.end(), v);
    if (it == nbrs.end() || *it != v) return 0.0;
    return out_weights_[out_offsets_[u] + static_cast<std::size_t>(it - nbrs.begin())];
  }

  double total_weight() const {
    double s = 0.0;
    for (double w : out_weights_) s += w;
    return s;
  }

  friend bool operator==(const DirectedGraph& a, const DirectedGraph& b) {
    return a.labels_ == b.labels_ && a.out_offsets_ == b.out_offsets_ && a.out_targets_ == b.out_targets_ &&
           a.out_weights_ == b.out_weights_;
  }

 private:
  std::vector<std::string> labels_;
  std::unordered_map<std::string, NodeId> index_;
  std::vector<std::size_t> out_offsets_{0};
  std::vector<NodeId> out_targets_;
  std::vector<double> out_weights_;
  std::vector<std::size_t> in_offsets_{0};
  std::vector<NodeId> in_sources_;
  std::vector<double> in_weights_;
  std::vector<std::size_t> in_edge_ids_;
};

/// Incremental builder that assigns indices to labels by first appearance.
class GraphBuilder {
 public:
  NodeId add_node(const std::string& label) {
    auto [it, inserted] = index_.emplace(label, static_cast<NodeId>(labels_.size()));
    if (inserted) labels_.push_back(label);
    return it->second;
  }

  void add_edge(const std::string& source, const std::string& target, double weight = 1.0) {
    const NodeId s = add_node(source);
    const NodeId t = add_node(target);
    edges_.push_back({s, t, weight});
  }

  void add_edge(NodeId source, NodeId target, double weight = 1.0) { edges_.push_back({source, target, weight}); }

  std::size_t num_nodes() const noexcept { return labels_.size(); }

  DirectedGraph build() && { return DirectedGraph(std::move(labels_), std::move(edges_)); }

 private:
  std::vector<std::string> labels_;
  std::unordered_map<std::string, NodeId> index_;
  std::vector<Edge> edges_;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\r' || s.front() == '\n')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\r' || s.back() == '\n')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split(std::string_view line, char delim) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find(delim, start);
    fields.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return fields;
}

inline bool parse_double(std::string_view s, double& out) {
  if (s.empty()) return false;
  // from_chars rejects a leading '+', strtod accepts hex and inf; keep it strict.
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last && std::isfinite(out);
}

}  // namespace detail

/// Parses edge-list text. Lines starting with '#' and blank lines are
/// skipped. The delimiter (tab or comma) is detected from the first data
/// line. When `directed` is false every row also adds the reverse edge.
inline DirectedGraph parse_edge_list(std::istream& in, bool directed = true, bool weighted = false) {
  GraphBuilder builder;
  std::string line;
  std::size_t line_no = 0;
  char delim = 0;
  std::size_t rows = 0;
  const std::size_t expected = weighted ? 3 : 2;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = detail::trim(line);
    if (view.empty() || view.front() == '#') continue;
    if (delim == 0) delim = view.find('\t') != std::string_view::npos ? '\t' : ',';
    auto fields = detail::split(view, delim);
    if (fields.size() != expected)
      throw ParseError(line_no, "expected " + std::to_string(expected) + " fields, found " + std::to_string(fields.size()));
    if (fields[0].empty() || fields[1].empty()) throw ParseError(line_no, "empty node label");
    double w = 1.0;
    if (weighted) {
      if (!detail::parse_double(fields[2], w)) throw ParseError(line_no, "non-numeric weight '" + std::string(fields[2]) + "'");
      if (!(w > 0.0)) throw ParseError(line_no, "weight must be positive");
    }
    const std::string source(fields[0]);
    const std::string target(fields[1]);
    builder.add_edge(source, target, w);
    if (!directed && source != target) builder.add_edge(target, source, w);
    ++rows;
  }
  if (rows == 0) throw EmptyGraphError("edge list contains no edges");
  return std::move(builder).build();
}

inline DirectedGraph load_edge_list(const std::string& path, bool directed = true, bool weighted = false) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open edge list '" + path + "'");
  return parse_edge_list(in, directed, weighted);
}

/// Writes `source,target,weight` rows in edge-id order. Isolated nodes are
/// not representable in the format and are dropped on reload.
inline void write_edge_list(std::ostream& out, const DirectedGraph& g, bool weighted = true) {
  out << (weighted ? "# source,target,weight\n" : "# source,target\n");
  out << std::setprecision(17);
  for (const Edge& e : g.edges()) {
    out << g.label(e.source) << ',' << g.label(e.target);
    if (weighted) out << ',' << e.weight;
    out << '\n';
  }
}

inline DegreeVectors degree_vectors(const DirectedGraph& g) {
  const std::size_t n = g.num_nodes();
  DegreeVectors d{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
  for (NodeId u = 0; u < n; ++u) {
    auto nbrs = g.out_neighbors(u);
    auto ws = g.out_weights(u);
    for (std::size_t k = 0; k < nbrs.size(); ++k) {
      d.out_degree[u] += ws[k];
      d.in_degree[nbrs[k]] += ws[k];
    }
  }
  return d;
}

/// Weakly connected components, largest first (ties: smallest member).
/// Each component lists its nodes in ascending index order.
inline std::vector<std::vector<NodeId>> weakly_connected_components(const DirectedGraph& g) {
  const std::size_t n = g.num_nodes();
  std::vector<NodeId> parent(n);
  std::iota(parent.begin(), parent.end(), NodeId{0});
  auto find = [&](NodeId x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  };
  for (NodeId u = 0; u < n; ++u)
    for (NodeId v : g.out_neighbors(u)) {
      NodeId a = find(u), b = find(v);
      if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
  std::unordered_map<NodeId, std::size_t> slot;
  std::vector<std::vector<NodeId>> comps;
  for (NodeId u = 0; u < n; ++u) {
    auto [it, inserted] = slot.emplace(find(u), comps.size());
    if (inserted) comps.emplace_back();
    comps[it->second].push_back(u);
  }
  std::stable_sort(comps.begin(), comps.end(), [](const auto& a, const auto& b) { return a.size() > b.size(); });
  return comps;
}

/// Subgraph on `nodes` with indices compacted in ascending original order.
inline DirectedGraph induced_subgraph(const DirectedGraph& g, std::span<const NodeId> nodes) {
  std::vector<NodeId> sorted(nodes.begin(), nodes.end());
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  constexpr NodeId kAbsent = static_cast<NodeId>(-1);
  std::vector<NodeId> remap(g.num_nodes(), kAbsent);
  std::vector<std::string> labels;
  labels.reserve(sorted.size());
  for (NodeId v : sorted) {
    if (v >= g.num_nodes()) throw LookupError("node index out of range");
    remap[v] = static_cast<NodeId>(labels.size());
    labels.push_back(g.label(v));
  }
  std::vector<Edge> edges;
  for (NodeId u : sorted) {
    auto nbrs = g.out_neighbors(u);
    auto ws = g.out_weights(u);
    for (std::size_t k = 0; k < nbrs.size(); ++k)
      if (remap[nbrs[k]] != kAbsent) edges.push_back({remap[u], remap[nbrs[k]], ws[k]});
  }
  return DirectedGraph(std::move(labels), std::move(edges));
}

inline DirectedGraph induced_subgraph(const DirectedGraph& g, std::span<const std::string> labels) {
  std::vector<NodeId> ids;
  ids.reserve(labels.size());
  for (const auto& l : labels) ids.push_back(g.index_of(l));
  return induced_subgraph(g, std::span<const NodeId>(ids));
}

inline DirectedGraph largest_weak_component(const DirectedGraph& g) {
  auto comps = weakly_connected_components(g);
  if (comps.empty()) return g;
  return induced_subgraph(g, std::span<const NodeId>(comps.front()));
}

}  // namespace flowscope
