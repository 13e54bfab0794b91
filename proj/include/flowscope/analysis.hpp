#pragma once

// Between-community analysis: bridgeness of boundary edges, cross-tabulation
// of two partitions, external-friend proportions and audience overlap.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "flowscope/chi_square.hpp"
#include "flowscope/error.hpp"
#include "flowscope/graph.hpp"
#include "flowscope/parallel.hpp"
#include "flowscope/partition.hpp"

namespace flowscope {

struct BoundaryEdge {
  std::size_t edge_id = 0;
  NodeId source = 0;
  NodeId target = 0;
  double raw_mass = 0.0;
  double bridgeness = 0.0;
  double bridgeness_ratio = 0.0;
};

/// Flow from community `flow_from` to `flow_to`. Paths run along edges from
/// nodes of flow_to to nodes of flow_from (content travels against the
/// follow direction). Boundary edges go from flow_to into flow_from.
struct BridgenessReport {
  CommunityId flow_from = 0;
  CommunityId flow_to = 0;
  /// Sorted by bridgeness ratio, descending (ties: edge id).
  std::vector<BoundaryEdge> boundary;
  /// Fractional shortest-path mass of every edge of the graph, by edge id.
  std::vector<double> edge_mass;
  std::size_t reachable_pairs = 0;
  std::size_t unreachable_pairs = 0;
  double crossing_mass = 0.0;
  bool no_reachable_pairs = false;
};

namespace detail {

// Brandes accumulation from one source with targets restricted by mask.
inline void accumulate_source(const DirectedGraph& g, NodeId s, const std::vector<std::uint8_t>& is_target,
                              std::vector<double>& edge_mass, std::size_t& reached, std::vector<std::int64_t>& dist,
                              std::vector<double>& sigma, std::vector<double>& delta, std::vector<NodeId>& order) {
  const std::size_t n = g.num_nodes();
  std::fill(dist.begin(), dist.end(), -1);
  std::fill(sigma.begin(), sigma.end(), 0.0);
  std::fill(delta.begin(), delta.end(), 0.0);
  order.clear();
  dist[s] = 0;
  sigma[s] = 1.0;
  order.push_back(s);
  for (std::size_t head = 0; head < order.size(); ++head) {
    const NodeId u = order[head];
    for (NodeId v : g.out_neighbors(u)) {
      if (dist[v] < 0) {
        dist[v] = dist[u] + 1;
        order.push_back(v);
      }
      if (dist[v] == dist[u] + 1) sigma[v] += sigma[u];
    }
  }
  for (NodeId v : order)
    if (v != s && is_target[v]) ++reached;
  for (std::size_t k = order.size(); k-- > 1;) {
    const NodeId v = order[k];
    const double carried = (is_target[v] ? 1.0 : 0.0) + delta[v];
    if (carried == 0.0) continue;
    auto preds = g.in_neighbors(v);
    auto ids = g.in_edge_ids(v);
    for (std::size_t p = 0; p < preds.size(); ++p) {
      const NodeId u = preds[p];
      if (dist[u] < 0 || dist[u] + 1 != dist[v]) continue;
      const double c = sigma[u] / sigma[v] * carried;
      edge_mass[ids[p]] += c;
      delta[u] += c;
    }
  }
  (void)n;
}

}  // namespace detail

inline BridgenessReport edge_bridgeness(const DirectedGraph& g, const Partition& partition, CommunityId flow_from,
                                        CommunityId flow_to, unsigned workers = 1) {
  if (partition.size() != g.num_nodes()) throw PartitionError("partition does not cover the graph");
  if (flow_from >= partition.num_communities() || flow_to >= partition.num_communities())
    throw ParameterError("unknown community");
  if (flow_from == flow_to) throw ParameterError("bridgeness needs two distinct communities");
  const std::size_t n = g.num_nodes();
  const std::size_t m = g.num_edges();
  std::vector<std::uint8_t> is_target(n, 0);
  std::vector<NodeId> sources;
  std::size_t n_targets = 0;
  for (NodeId v = 0; v < n; ++v) {
    if (partition[v] == flow_from) {
      is_target[v] = 1;
      ++n_targets;
    }
    if (partition[v] == flow_to) sources.push_back(v);
  }

  // Fixed-size source blocks reduce in block order, independent of workers.
  constexpr std::size_t kBlock = 64;
  const std::size_t n_blocks = (sources.size() + kBlock - 1) / kBlock;
  std::vector<std::vector<double>> block_mass(n_blocks);
  std::vector<std::size_t> block_reached(n_blocks, 0);
  parallel_for(n_blocks, workers, [&](std::size_t b) {
    std::vector<double> mass(m, 0.0);
    std::vector<std::int64_t> dist(n);
    std::vector<double> sigma(n), delta(n);
    std::vector<NodeId> order;
    order.reserve(n);
    const std::size_t end = std::min(sources.size(), (b + 1) * kBlock);
    for (std::size_t k = b * kBlock; k < end; ++k)
      detail::accumulate_source(g, sources[k], is_target, mass, block_reached[b], dist, sigma, delta, order);
    block_mass[b] = std::move(mass);
  });

  BridgenessReport r;
  r.flow_from = flow_from;
  r.flow_to = flow_to;
  r.edge_mass.assign(m, 0.0);
  std::vector<double> column(n_blocks);
  for (std::size_t e = 0; e < m; ++e) {
    for (std::size_t b = 0; b < n_blocks; ++b) column[b] = block_mass[b][e];
    r.edge_mass[e] = pairwise_sum(column);
  }
  for (std::size_t c : block_reached) r.reachable_pairs += c;
  r.unreachable_pairs = sources.size() * n_targets - r.reachable_pairs;
  r.no_reachable_pairs = r.reachable_pairs == 0;

  std::vector<double> crossing;
  for (NodeId u : sources) {
    const std::size_t base = g.out_edge_begin(u);
    auto nbrs = g.out_neighbors(u);
    for (std::size_t k = 0; k < nbrs.size(); ++k) {
      if (!is_target[nbrs[k]]) continue;
      BoundaryEdge be;
      be.edge_id = base + k;
      be.source = u;
      be.target = nbrs[k];
      be.raw_mass = r.edge_mass[be.edge_id];
      r.boundary.push_back(be);
      crossing.push_back(be.raw_mass);
    }
  }
  r.crossing_mass = pairwise_sum(crossing);
  const double expected = r.boundary.empty() ? 0.0 : r.crossing_mass / static_cast<double>(r.boundary.size());
  for (auto& be : r.boundary) {
    be.bridgeness = r.reachable_pairs > 0 ? be.raw_mass / static_cast<double>(r.reachable_pairs) : 0.0;
    be.bridgeness_ratio = expected > 0.0 ? be.raw_mass / expected : 0.0;
  }
  std::stable_sort(r.boundary.begin(), r.boundary.end(), [](const BoundaryEdge& a, const BoundaryEdge& b) {
    return a.bridgeness_ratio > b.bridgeness_ratio;
  });
  return r;
}

inline void write_bridgeness(std::ostream& out, const DirectedGraph& g, const BridgenessReport& r) {
  out << "source_label,target_label,raw_mass,bridgeness,bridgeness_ratio\n";
  out.precision(17);
  for (const auto& be : r.boundary)
    out << g.label(be.source) << ',' << g.label(be.target) << ',' << be.raw_mass << ',' << be.bridgeness << ','
        << be.bridgeness_ratio << '\n';
}

struct CrossTabRow {
  /// Pearson statistic of this row against the remaining rows.
  double chi2 = 0.0;
  /// Sum over cells of (obs - exp)^2 / exp for this row alone.
  double row_statistic = 0.0;
  int dof = 0;
  double p_value = 1.0;
  /// Some expected cell below 1.
  bool unreliable = false;
};

struct CrossTab {
  std::vector<CommunityId> row_ids;  // communities of partition A
  std::vector<CommunityId> col_ids;  // communities of partition B
  std::vector<std::vector<std::size_t>> counts;
  std::vector<std::vector<double>> expected;
  std::vector<CrossTabRow> rows;
  std::size_t common_nodes = 0;

  /// +1 above expectation, -1 below, 0 equal.
  int sign(std::size_t r, std::size_t c) const {
    const double diff = static_cast<double>(counts[r][c]) - expected[r][c];
    return diff > 0 ? 1 : (diff < 0 ? -1 : 0);
  }
};

inline constexpr double kSignificanceLevel = 0.001;

/// Contingency table over the nodes present in both partitions (matched by
/// label) with an independent chi-square per row against the column
/// marginals. The row sum alone has null law (1 - n_r/N) chi2(dof); scaling
/// by N / (N - n_r) gives the row-versus-rest statistic, which is chi2(dof).
inline CrossTab cross_tabulate(const Partition& pa, const Partition& pb, const std::vector<std::string>& labels_a,
                               const std::vector<std::string>& labels_b) {
  if (pa.size() != labels_a.size() || pb.size() != labels_b.size())
    throw DimensionError("partition and label list sizes differ");
  std::map<std::string, CommunityId> b_of;
  for (std::size_t i = 0; i < labels_b.size(); ++i) b_of.emplace(labels_b[i], pb[i]);
  std::vector<std::pair<CommunityId, CommunityId>> common;
  for (std::size_t i = 0; i < labels_a.size(); ++i) {
    auto it = b_of.find(labels_a[i]);
    if (it != b_of.end()) common.emplace_back(pa[i], it->second);
  }
  if (common.empty()) throw ParameterError("partitions share no nodes");
  std::set<CommunityId> rs, cs;
  for (auto [a, b] : common) {
    rs.insert(a);
    cs.insert(b);
  }
  CrossTab ct;
  ct.row_ids.assign(rs.begin(), rs.end());
  ct.col_ids.assign(cs.begin(), cs.end());
  ct.common_nodes = common.size();
  std::map<CommunityId, std::size_t> rpos, cpos;
  for (std::size_t k = 0; k < ct.row_ids.size(); ++k) rpos[ct.row_ids[k]] = k;
  for (std::size_t k = 0; k < ct.col_ids.size(); ++k) cpos[ct.col_ids[k]] = k;
  ct.counts.assign(ct.row_ids.size(), std::vector<std::size_t>(ct.col_ids.size(), 0));
  for (auto [a, b] : common) ++ct.counts[rpos[a]][cpos[b]];

  std::vector<double> col_total(ct.col_ids.size(), 0.0);
  for (const auto& row : ct.counts)
    for (std::size_t c = 0; c < row.size(); ++c) col_total[c] += static_cast<double>(row[c]);
  const double total = static_cast<double>(common.size());
  ct.expected.assign(ct.row_ids.size(), std::vector<double>(ct.col_ids.size(), 0.0));
  for (std::size_t r = 0; r < ct.counts.size(); ++r) {
    double row_total = 0.0;
    for (std::size_t v : ct.counts[r]) row_total += static_cast<double>(v);
    CrossTabRow stat;
    int used_cols = 0;
    for (std::size_t c = 0; c < ct.col_ids.size(); ++c) {
      if (col_total[c] <= 0.0) continue;
      ++used_cols;
      const double e = row_total * col_total[c] / total;
      ct.expected[r][c] = e;
      if (e < 1.0) stat.unreliable = true;
      const double diff = static_cast<double>(ct.counts[r][c]) - e;
      stat.row_statistic += diff * diff / e;
    }
    stat.chi2 = row_total < total ? stat.row_statistic * total / (total - row_total) : 0.0;
    stat.dof = used_cols - 1;
    stat.p_value = chi_square_p_value(stat.chi2, stat.dof);
    ct.rows.push_back(stat);
  }
  return ct;
}

/// Matrix block with per-row statistics, then a block of +/-/= signs.
/// The flag is `***` for p < 0.001, `ns` otherwise, suffixed with
/// `|low_expected` when some expected count is below 1.
inline void write_crosstab(std::ostream& out, const CrossTab& ct) {
  out.precision(17);
  out << "community";
  for (CommunityId c : ct.col_ids) out << ',' << c;
  out << ",chi2,dof,p_value,flag\n";
  for (std::size_t r = 0; r < ct.row_ids.size(); ++r) {
    out << ct.row_ids[r];
    for (std::size_t v : ct.counts[r]) out << ',' << v;
    const auto& s = ct.rows[r];
    out << ',' << s.chi2 << ',' << s.dof << ',' << s.p_value << ',' << (s.p_value < kSignificanceLevel ? "***" : "ns")
        << (s.unreliable ? "|low_expected" : "") << '\n';
  }
  out << "\n# sign of observed minus expected\ncommunity";
  for (CommunityId c : ct.col_ids) out << ',' << c;
  out << '\n';
  for (std::size_t r = 0; r < ct.row_ids.size(); ++r) {
    out << ct.row_ids[r];
    for (std::size_t c = 0; c < ct.col_ids.size(); ++c) {
      const int sg = ct.sign(r, c);
      out << ',' << (sg > 0 ? '+' : (sg < 0 ? '-' : '='));
    }
    out << '\n';
  }
}

struct FriendProportions {
  std::vector<double> proportions;  // one per node with friends, in node order
  double mean = 0.0;
  std::size_t without_friends = 0;
};

/// Per role: for each node, the share of its friends (out-neighbors, self
/// excluded) outside its own interest community.
inline std::vector<FriendProportions> external_friend_proportion(const DirectedGraph& g, const Partition& interest,
                                                                 const Partition& roles) {
  if (interest.size() != g.num_nodes() || roles.size() != g.num_nodes())
    throw PartitionError("partitions must cover the graph");
  std::vector<FriendProportions> out(roles.num_communities());
  for (NodeId u = 0; u < g.num_nodes(); ++u) {
    std::size_t friends = 0, outside = 0;
    for (NodeId v : g.out_neighbors(u)) {
      if (v == u) continue;
      ++friends;
      if (interest[v] != interest[u]) ++outside;
    }
    auto& fp = out[roles[u]];
    if (friends == 0) {
      ++fp.without_friends;
      continue;
    }
    fp.proportions.push_back(static_cast<double>(outside) / static_cast<double>(friends));
  }
  for (auto& fp : out)
    if (!fp.proportions.empty()) fp.mean = pairwise_sum(fp.proportions) / static_cast<double>(fp.proportions.size());
  return out;
}

struct CommunityAudience {
  std::string community;
  std::size_t unique_followers = 0;
  std::size_t exclusive_followers = 0;
  double exclusive_percent = 0.0;
};

struct AudienceOverlap {
  std::vector<CommunityAudience> communities;  // in key order
  std::size_t global_unique = 0;
};

inline AudienceOverlap audience_overlap(const std::map<std::string, std::set<std::string>>& followers) {
  if (followers.empty()) throw ParameterError("no follower sets supplied");
  std::map<std::string, std::size_t> membership;
  for (const auto& [c, set] : followers)
    for (const auto& f : set) ++membership[f];
  AudienceOverlap r;
  r.global_unique = membership.size();
  for (const auto& [c, set] : followers) {
    CommunityAudience a;
    a.community = c;
    a.unique_followers = set.size();
    for (const auto& f : set)
      if (membership[f] == 1) ++a.exclusive_followers;
    a.exclusive_percent =
        set.empty() ? 0.0 : 100.0 * static_cast<double>(a.exclusive_followers) / static_cast<double>(set.size());
    r.communities.push_back(std::move(a));
  }
  return r;
}

/// Reads `community_label,follower_label` rows ('#' lines skipped).
inline std::map<std::string, std::set<std::string>> parse_follower_sets(std::istream& in) {
  std::map<std::string, std::set<std::string>> sets;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto view = detail::trim(line);
    if (view.empty() || view.front() == '#') continue;
    const char delim = view.find('\t') != std::string_view::npos ? '\t' : ',';
    auto fields = detail::split(view, delim);
    if (fields.size() != 2 || fields[0].empty() || fields[1].empty())
      throw ParseError(line_no, "expected community_label,follower_label");
    sets[std::string(fields[0])].insert(std::string(fields[1]));
  }
  return sets;
}

inline void write_audience_overlap(std::ostream& out, const AudienceOverlap& r) {
  out.precision(17);
  out << "community,unique_followers,exclusive_followers,exclusive_percent\n";
  for (const auto& a : r.communities)
    out << a.community << ',' << a.unique_followers << ',' << a.exclusive_followers << ',' << a.exclusive_percent
        << '\n';
  out << "# global_unique_followers=" << r.global_unique << '\n';
}

}  // namespace flowscope
