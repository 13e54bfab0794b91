#pragma once

// Role-based similarity: in/out path-count profiles damped by alpha/lambda1,
// cosine similarity between profiles, a relaxed minimum spanning tree
// projection, and flow roles found by Markov Stability on that projection.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <tuple>
#include <vector>

#include "flowscope/error.hpp"
#include "flowscope/graph.hpp"
#include "flowscope/markov.hpp"
#include "flowscope/parallel.hpp"
#include "flowscope/partition.hpp"
#include "flowscope/stability.hpp"

namespace flowscope {

struct ProfileMatrix {
  /// N x 2K: columns 0..K-1 incoming paths of length 1..K, then outgoing.
  Eigen::MatrixXd x;
  double rbs_alpha = 0.9;
  double lambda1 = 1.0;
  std::size_t k_max = 0;
  /// Set when lambda1 was numerically zero and 1 was used instead.
  bool lambda_fallback = false;
};

namespace detail {

inline bool has_cycle(const DirectedGraph& g) {
  const std::size_t n = g.num_nodes();
  std::vector<std::size_t> indeg(n, 0);
  for (NodeId u = 0; u < n; ++u)
    for (NodeId v : g.out_neighbors(u)) ++indeg[v];
  std::vector<NodeId> stack;
  for (NodeId u = 0; u < n; ++u)
    if (indeg[u] == 0) stack.push_back(u);
  std::size_t removed = 0;
  while (!stack.empty()) {
    const NodeId u = stack.back();
    stack.pop_back();
    ++removed;
    for (NodeId v : g.out_neighbors(u))
      if (--indeg[v] == 0) stack.push_back(v);
  }
  return removed < n;
}

inline Eigen::VectorXd multiply(const DirectedGraph& g, const Eigen::VectorXd& v, bool transpose) {
  Eigen::VectorXd y = Eigen::VectorXd::Zero(v.size());
  for (NodeId u = 0; u < g.num_nodes(); ++u) {
    auto nbrs = g.out_neighbors(u);
    auto ws = g.out_weights(u);
    for (std::size_t k = 0; k < nbrs.size(); ++k) {
      if (transpose)
        y[nbrs[k]] += ws[k] * v[u];
      else
        y[u] += ws[k] * v[nbrs[k]];
    }
  }
  return y;
}

}  // namespace detail

namespace detail {

/// Strongly connected components (iterative Tarjan); component id per node.
inline std::vector<std::size_t> strong_components(const DirectedGraph& g, std::size_t& count) {
  const std::size_t n = g.num_nodes();
  constexpr std::size_t kUnset = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> index(n, kUnset), low(n, 0), comp(n, kUnset);
  std::vector<std::uint8_t> on_stack(n, 0);
  std::vector<NodeId> stack;
  std::vector<std::pair<NodeId, std::size_t>> call;
  std::size_t next = 0;
  count = 0;
  for (NodeId root = 0; root < n; ++root) {
    if (index[root] != kUnset) continue;
    call.push_back({root, 0});
    while (!call.empty()) {
      auto& [u, pos] = call.back();
      if (pos == 0) {
        index[u] = low[u] = next++;
        stack.push_back(u);
        on_stack[u] = 1;
      }
      auto nbrs = g.out_neighbors(u);
      if (pos < nbrs.size()) {
        const NodeId v = nbrs[pos++];
        if (index[v] == kUnset)
          call.push_back({v, 0});
        else if (on_stack[v])
          low[u] = std::min(low[u], index[v]);
        continue;
      }
      const NodeId done = u;
      call.pop_back();
      if (!call.empty()) low[call.back().first] = std::min(low[call.back().first], low[done]);
      if (low[done] == index[done]) {
        NodeId w;
        do {
          w = stack.back();
          stack.pop_back();
          on_stack[w] = 0;
          comp[w] = count;
        } while (w != done);
        ++count;
      }
    }
  }
  return comp;
}

}  // namespace detail

/// Perron root of the adjacency matrix: the largest Perron root over the
/// strongly connected components (0 for acyclic graphs). Each component is
/// irreducible, so power iteration on A_c + I converges geometrically, and
/// the Collatz-Wielandt bounds min/max (Bv)_i / v_i bracket the root.
inline double adjacency_spectral_radius(const DirectedGraph& g, double tol = 1e-10, int max_iter = 5000) {
  if (!detail::has_cycle(g)) return 0.0;
  std::size_t count = 0;
  const auto comp = detail::strong_components(g, count);
  std::vector<std::vector<NodeId>> members(count);
  for (NodeId u = 0; u < g.num_nodes(); ++u) members[comp[u]].push_back(u);
  std::vector<std::size_t> local(g.num_nodes(), 0);
  double radius = 0.0;
  for (std::size_t c = 0; c < count; ++c) {
    const auto& mem = members[c];
    for (std::size_t i = 0; i < mem.size(); ++i) local[mem[i]] = i;
    bool internal = false;
    for (NodeId u : mem)
      for (NodeId v : g.out_neighbors(u)) internal = internal || comp[v] == c;
    if (!internal) continue;
    const std::size_t m = mem.size();
    std::vector<double> v(m, 1.0), y(m);
    double lo = 0.0, hi = 0.0;
    for (int it = 0; it < max_iter; ++it) {
      for (std::size_t i = 0; i < m; ++i) {
        double acc = v[i];
        auto nbrs = g.out_neighbors(mem[i]);
        auto ws = g.out_weights(mem[i]);
        for (std::size_t k = 0; k < nbrs.size(); ++k)
          if (comp[nbrs[k]] == c) acc += ws[k] * v[local[nbrs[k]]];
        y[i] = acc;
      }
      lo = std::numeric_limits<double>::infinity();
      hi = 0.0;
      double top = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        const double ratio = y[i] / v[i];
        lo = std::min(lo, ratio);
        hi = std::max(hi, ratio);
        top = std::max(top, y[i]);
      }
      for (std::size_t i = 0; i < m; ++i) v[i] = y[i] / top;
      if (hi - lo <= tol * hi) break;
    }
    radius = std::max(radius, 0.5 * (lo + hi) - 1.0);
  }
  return radius;
}

struct ProfileOptions {
  /// 0 selects K automatically.
  std::size_t k_max = 0;
  double auto_ratio = 1e-6;
  std::size_t auto_cap = 200;
};

inline ProfileMatrix profile_matrix(const DirectedGraph& g, double rbs_alpha = 0.9, const ProfileOptions& opt = {}) {
  if (!(rbs_alpha > 0.0 && rbs_alpha < 1.0)) throw ParameterError("rbs_alpha must lie in (0,1)");
  if (g.num_edges() == 0) throw ParameterError("profile matrix needs a graph with at least one edge");
  ProfileMatrix pm;
  pm.rbs_alpha = rbs_alpha;
  pm.lambda1 = adjacency_spectral_radius(g);
  if (pm.lambda1 < 1e-12) {
    pm.lambda1 = 1.0;
    pm.lambda_fallback = true;
  }
  const double scale = rbs_alpha / pm.lambda1;
  const auto n = static_cast<Eigen::Index>(g.num_nodes());
  std::vector<Eigen::VectorXd> in_cols, out_cols;
  Eigen::VectorXd vin = Eigen::VectorXd::Ones(n);
  Eigen::VectorXd vout = Eigen::VectorXd::Ones(n);
  const std::size_t limit = opt.k_max > 0 ? opt.k_max : opt.auto_cap;
  double first_norm = 0.0;
  for (std::size_t k = 1; k <= limit; ++k) {
    vin = scale * detail::multiply(g, vin, true);
    vout = scale * detail::multiply(g, vout, false);
    in_cols.push_back(vin);
    out_cols.push_back(vout);
    const double norm = vin.lpNorm<1>();
    if (k == 1) first_norm = norm;
    if (opt.k_max == 0 && norm / first_norm < opt.auto_ratio) break;
  }
  pm.k_max = in_cols.size();
  const auto k = static_cast<Eigen::Index>(pm.k_max);
  pm.x.resize(n, 2 * k);
  for (Eigen::Index c = 0; c < k; ++c) {
    pm.x.col(c) = in_cols[static_cast<std::size_t>(c)];
    pm.x.col(k + c) = out_cols[static_cast<std::size_t>(c)];
  }
  return pm;
}

/// Cosine similarity of profile rows. Zero rows: 0 to others, 1 to self.
inline Eigen::MatrixXd rbs_similarity(const Eigen::MatrixXd& x) {
  const Eigen::Index n = x.rows();
  Eigen::VectorXd norms = x.rowwise().norm();
  Eigen::MatrixXd y = x * x.transpose();
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i; j < n; ++j) {
      double v = 0.0;
      if (i == j)
        v = 1.0;
      else if (norms[i] > 0.0 && norms[j] > 0.0)
        v = std::clamp(y(i, j) / (norms[i] * norms[j]), -1.0, 1.0);
      y(i, j) = v;
      y(j, i) = v;
    }
  return y;
}

inline Eigen::MatrixXd rbs_similarity(const ProfileMatrix& pm) { return rbs_similarity(pm.x); }

struct UndirectedEdge {
  NodeId a = 0;
  NodeId b = 0;  // a < b
  friend auto operator<=>(const UndirectedEdge&, const UndirectedEdge&) = default;
};

struct RmstGraph {
  std::size_t n = 0;
  double gamma = 0.5;
  std::size_t k_neighbor = 1;
  std::vector<UndirectedEdge> mst;    // sorted
  std::vector<UndirectedEdge> edges;  // sorted, superset of mst
  std::vector<double> similarity;     // Y per entry of edges
  double max_distance = 0.0;          // over all pairs
};

/// Minimum spanning tree of the complete graph with weights d, under the
/// strict order (d_ij, min(i,j), max(i,j)) so the tree is unique.
inline std::vector<UndirectedEdge> minimum_spanning_tree(const Eigen::MatrixXd& d) {
  const auto n = static_cast<std::size_t>(d.rows());
  struct Key {
    double w;
    NodeId lo, hi;
    bool operator<(const Key& o) const { return std::tie(w, lo, hi) < std::tie(o.w, o.lo, o.hi); }
  };
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<Key> best(n, Key{kInf, 0, 0});
  std::vector<std::uint8_t> in_tree(n, 0);
  std::vector<UndirectedEdge> tree;
  if (n == 0) return tree;
  in_tree[0] = 1;
  for (NodeId j = 1; j < n; ++j) best[j] = {d(0, j), 0, j};
  for (std::size_t step = 1; step < n; ++step) {
    NodeId pick = 0;
    bool found = false;
    for (NodeId j = 0; j < n; ++j)
      if (!in_tree[j] && (!found || best[j] < best[pick])) {
        pick = j;
        found = true;
      }
    in_tree[pick] = 1;
    tree.push_back({best[pick].lo, best[pick].hi});
    for (NodeId j = 0; j < n; ++j) {
      if (in_tree[j]) continue;
      const Key cand{d(pick, j), std::min(pick, j), std::max(pick, j)};
      if (cand < best[j]) best[j] = cand;
    }
  }
  std::sort(tree.begin(), tree.end());
  return tree;
}

/// Largest MST edge weight on the tree path between every pair, by one
/// traversal of the tree per source node.
inline Eigen::MatrixXd mst_path_maximum(const Eigen::MatrixXd& d, const std::vector<UndirectedEdge>& tree) {
  const auto n = static_cast<std::size_t>(d.rows());
  std::vector<std::vector<NodeId>> adj(n);
  for (const auto& e : tree) {
    adj[e.a].push_back(e.b);
    adj[e.b].push_back(e.a);
  }
  Eigen::MatrixXd mlink = Eigen::MatrixXd::Zero(d.rows(), d.cols());
  std::vector<NodeId> stack;
  std::vector<std::uint8_t> visited(n);
  for (NodeId s = 0; s < n; ++s) {
    std::fill(visited.begin(), visited.end(), 0);
    stack.assign(1, s);
    visited[s] = 1;
    while (!stack.empty()) {
      const NodeId u = stack.back();
      stack.pop_back();
      for (NodeId v : adj[u]) {
        if (visited[v]) continue;
        visited[v] = 1;
        mlink(s, v) = std::max(mlink(s, u), d(u, v));
        stack.push_back(v);
      }
    }
  }
  return mlink;
}

/// Distance to the k-th nearest other node, per node.
inline std::vector<double> kth_neighbor_distance(const Eigen::MatrixXd& d, std::size_t k) {
  const auto n = static_cast<std::size_t>(d.rows());
  std::vector<double> out(n, 0.0);
  std::vector<double> row;
  for (std::size_t i = 0; i < n; ++i) {
    row.clear();
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) row.push_back(d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
    const std::size_t kk = std::min(k, row.size());
    std::nth_element(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(kk - 1), row.end());
    out[i] = row[kk - 1];
  }
  return out;
}

/// Relaxed MST on cosine distances d = 1 - Y: keeps the MST plus every pair
/// with d_ij < mlink_ij + gamma (d_i^k + d_j^k).
inline RmstGraph rmst(const Eigen::MatrixXd& similarity, double gamma = 0.5, std::size_t k_neighbor = 1) {
  const Eigen::Index n = similarity.rows();
  if (n < 2) throw ParameterError("RMST needs at least two nodes");
  if (similarity.cols() != n) throw DimensionError("similarity matrix must be square");
  if (!(gamma > 0.0)) throw ParameterError("gamma must be positive");
  if (k_neighbor < 1) throw ParameterError("k_neighbor must be >= 1");
  Eigen::MatrixXd d = (1.0 - similarity.array()).max(0.0).matrix();
  d.diagonal().setZero();
  RmstGraph g;
  g.n = static_cast<std::size_t>(n);
  g.gamma = gamma;
  g.k_neighbor = k_neighbor;
  g.mst = minimum_spanning_tree(d);
  const Eigen::MatrixXd mlink = mst_path_maximum(d, g.mst);
  const auto dk = kth_neighbor_distance(d, k_neighbor);
  std::vector<UndirectedEdge> edges;
  std::size_t tree_pos = 0;
  for (NodeId i = 0; i < g.n; ++i)
    for (NodeId j = i + 1; j < g.n; ++j) {
      const bool in_mst = tree_pos < g.mst.size() && g.mst[tree_pos] == UndirectedEdge{i, j};
      if (in_mst) ++tree_pos;
      if (in_mst || d(i, j) < mlink(i, j) + gamma * (dk[i] + dk[j])) {
        edges.push_back({i, j});
        g.similarity.push_back(similarity(i, j));
      }
    }
  g.edges = std::move(edges);
  g.max_distance = d.maxCoeff();
  return g;
}

/// Symmetric digraph of the RMST carrying g's labels. Similarity weights
/// use Y_ij per edge, floored so that orthogonal MST edges keep the graph
/// connected; otherwise every edge has weight 1.
inline DirectedGraph rmst_as_graph(const RmstGraph& r, const std::vector<std::string>& labels,
                                   bool similarity_weights = true) {
  if (labels.size() != r.n) throw DimensionError("label count does not match RMST size");
  std::vector<Edge> edges;
  edges.reserve(2 * r.edges.size());
  for (std::size_t k = 0; k < r.edges.size(); ++k) {
    const auto& e = r.edges[k];
    const double w = similarity_weights && k < r.similarity.size() ? std::max(r.similarity[k], 1e-9) : 1.0;
    edges.push_back({e.a, e.b, w});
    edges.push_back({e.b, e.a, w});
  }
  return DirectedGraph(labels, std::move(edges));
}

struct RoleStats {
  std::size_t members = 0;
  double mean_in_degree = 0.0;
  double mean_out_degree = 0.0;
};

struct RoleReport {
  Partition roles;
  std::vector<RoleStats> stats;
  std::optional<RobustWindow> window;
  std::vector<SweepRecord> sweep;
};

struct RoleSweepParameters {
  std::vector<double> times = log_times(1e-2, 1e2, 60);
  std::size_t n_runs = 100;
  std::uint64_t base_seed = 1;
  double vi_threshold = 0.05;
  TimeMode mode = TimeMode::continuous;
  unsigned workers = 1;
  bool similarity_weights = true;
};

inline std::vector<RoleStats> role_statistics(const DirectedGraph& g, const Partition& roles) {
  const auto deg = degree_vectors(g);
  std::vector<RoleStats> stats(roles.num_communities());
  for (std::size_t i = 0; i < roles.size(); ++i) {
    auto& s = stats[roles[i]];
    ++s.members;
    s.mean_in_degree += deg.in_degree[i];
    s.mean_out_degree += deg.out_degree[i];
  }
  for (auto& s : stats) {
    s.mean_in_degree /= static_cast<double>(s.members);
    s.mean_out_degree /= static_cast<double>(s.members);
  }
  return stats;
}

/// Markov Stability (combinatorial walk, no teleportation) on the RMST
/// graph; roles come from the most persistent robust window whose
/// partition is not all-singletons. Without such a window the
/// non-singleton sweep point with the lowest ensemble VI is used (latest
/// time on ties). When all profiles are parallel there is a single role.
inline RoleReport extract_roles(const DirectedGraph& g, const RmstGraph& rmst_graph,
                                const RoleSweepParameters& params = {}) {
  if (rmst_graph.n != g.num_nodes()) throw DimensionError("RMST graph and input graph differ in node count");
  if (rmst_graph.max_distance <= 1e-12) {
    RoleReport report;
    report.roles = Partition::all_in_one(g.num_nodes());
    report.stats = role_statistics(g, report.roles);
    return report;
  }
  const DirectedGraph sim = rmst_as_graph(rmst_graph, g.labels(), params.similarity_weights);
  const TransitionSystem ts = build_random_walk(sim);
  const StationaryDistribution pi = degree_stationary(sim, ts);
  SweepOptions opt;
  opt.workers = params.workers;
  RoleReport report;
  report.sweep = stability_sweep(ts, pi, params.times, params.n_runs, params.mode, params.base_seed, opt);
  const std::size_t n = g.num_nodes();
  auto trivial = [n](const Partition& p) { return n > 1 && p.num_communities() == n; };
  for (const auto& w : select_robust_partitions(report.sweep, params.vi_threshold)) {
    if (trivial(w.partition)) continue;
    report.window = w;
    report.roles = w.partition;
    break;
  }
  if (!report.window) {
    const SweepRecord* pick = nullptr;
    for (const auto& rec : report.sweep) {
      if (trivial(rec.best_partition)) continue;
      if (!pick || rec.mean_pairwise_vi <= pick->mean_pairwise_vi) pick = &rec;
    }
    report.roles = pick ? pick->best_partition : report.sweep.back().best_partition;
  }
  report.stats = role_statistics(g, report.roles);
  return report;
}

}  // namespace flowscope
