#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "flowscope/error.hpp"
#include "flowscope/graph.hpp"

namespace flowscope {

using CommunityId = std::uint32_t;

/// Node -> community assignment with contiguous, fully used community ids.
class Partition {
 public:
  Partition() = default;

  /// Validates that every id in 0..max is used.
  explicit Partition(std::vector<CommunityId> assignment) : assignment_(std::move(assignment)) {
    if (assignment_.empty()) return;
    const CommunityId max_id = *std::max_element(assignment_.begin(), assignment_.end());
    std::vector<bool> used(static_cast<std::size_t>(max_id) + 1, false);
    for (CommunityId c : assignment_) used[c] = true;
    if (std::find(used.begin(), used.end(), false) != used.end())
      throw PartitionError("community ids must be contiguous and every id in use");
    count_ = static_cast<std::size_t>(max_id) + 1;
  }

  /// Relabels arbitrary ids to 0..c-1 in order of first appearance.
  template <class Id>
  static Partition from_labels(std::span<const Id> raw) {
    std::map<Id, CommunityId> remap;
    std::vector<CommunityId> assignment;
    assignment.reserve(raw.size());
    for (const Id& r : raw) {
      auto [it, inserted] = remap.emplace(r, static_cast<CommunityId>(remap.size()));
      assignment.push_back(it->second);
    }
    return Partition(std::move(assignment));
  }
  template <class Id>
  static Partition from_labels(const std::vector<Id>& raw) {
    return from_labels(std::span<const Id>(raw));
  }

  static Partition all_in_one(std::size_t n) { return Partition(std::vector<CommunityId>(n, 0)); }

  static Partition singletons(std::size_t n) {
    std::vector<CommunityId> a(n);
    for (std::size_t i = 0; i < n; ++i) a[i] = static_cast<CommunityId>(i);
    return Partition(std::move(a));
  }

  std::size_t size() const noexcept { return assignment_.size(); }
  std::size_t num_communities() const noexcept { return count_; }
  CommunityId operator[](std::size_t i) const { return assignment_[i]; }
  const std::vector<CommunityId>& assignment() const noexcept { return assignment_; }

  std::vector<std::size_t> community_sizes() const {
    std::vector<std::size_t> sizes(count_, 0);
    for (CommunityId c : assignment_) ++sizes[c];
    return sizes;
  }

  std::vector<std::vector<NodeId>> members() const {
    std::vector<std::vector<NodeId>> m(count_);
    for (std::size_t i = 0; i < assignment_.size(); ++i) m[assignment_[i]].push_back(static_cast<NodeId>(i));
    return m;
  }

  /// Same grouping of nodes, ignoring community numbering.
  bool same_grouping(const Partition& other) const {
    if (size() != other.size() || count_ != other.count_) return false;
    std::vector<CommunityId> map_ab(count_, static_cast<CommunityId>(-1));
    for (std::size_t i = 0; i < size(); ++i) {
      CommunityId& m = map_ab[assignment_[i]];
      if (m == static_cast<CommunityId>(-1))
        m = other.assignment_[i];
      else if (m != other.assignment_[i])
        return false;
    }
    return true;
  }

  friend bool operator==(const Partition&, const Partition&) = default;

 private:
  std::vector<CommunityId> assignment_;
  std::size_t count_ = 0;
};

/// Normalized variation of information, H(A|B) + H(B|A) divided by log N.
///
/// Cell contributions are summed in sorted order so the result is
/// bitwise symmetric in its arguments.
inline double variation_of_information(const Partition& a, const Partition& b) {
  if (a.size() != b.size()) throw DimensionError("partitions cover different node counts");
  const std::size_t n = a.size();
  if (n < 2) throw ParameterError("variation of information needs at least two nodes");
  std::unordered_map<std::uint64_t, std::size_t> joint;
  for (std::size_t i = 0; i < n; ++i) ++joint[(static_cast<std::uint64_t>(a[i]) << 32) | b[i]];
  const auto size_a = a.community_sizes();
  const auto size_b = b.community_sizes();
  const double inv_n = 1.0 / static_cast<double>(n);
  std::vector<double> terms;
  terms.reserve(joint.size());
  for (const auto& [key, count] : joint) {
    const auto ca = static_cast<std::size_t>(key >> 32);
    const auto cb = static_cast<std::size_t>(key & 0xffffffffu);
    const double pij = static_cast<double>(count) * inv_n;
    // log(p_ij / p_i) + log(p_ij / p_j), with counts to keep exact zeros
    const double t = std::log(static_cast<double>(count) / static_cast<double>(size_a[ca])) +
                     std::log(static_cast<double>(count) / static_cast<double>(size_b[cb]));
    terms.push_back(-pij * t);
  }
  std::sort(terms.begin(), terms.end());
  double vi = 0.0;
  for (double t : terms) vi += t;
  vi /= std::log(static_cast<double>(n));
  return std::clamp(vi, 0.0, 1.0);
}

// Partition file: header line, then `label,community_index` per node.

inline void write_partition(std::ostream& out, const DirectedGraph& g, const Partition& p) {
  if (p.size() != g.num_nodes()) throw DimensionError("partition does not match graph");
  out << "label,community\n";
  for (std::size_t i = 0; i < p.size(); ++i) out << g.label(static_cast<NodeId>(i)) << ',' << p[i] << '\n';
}

/// Label -> community map as read from a partition file.
struct LabeledPartition {
  std::vector<std::string> labels;
  std::vector<CommunityId> communities;
};

inline LabeledPartition parse_partition(std::istream& in) {
  LabeledPartition result;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    auto view = detail::trim(line);
    if (view.empty() || view.front() == '#') continue;
    const char delim = view.find('\t') != std::string_view::npos ? '\t' : ',';
    auto fields = detail::split(view, delim);
    if (fields.size() != 2) throw ParseError(line_no, "expected 2 fields in partition row");
    std::uint32_t c = 0;
    auto [ptr, ec] = std::from_chars(fields[1].data(), fields[1].data() + fields[1].size(), c);
    if (ec != std::errc() || ptr != fields[1].data() + fields[1].size()) {
      if (!header_seen && result.labels.empty()) {
        header_seen = true;
        continue;
      }
      throw ParseError(line_no, "non-integer community index");
    }
    result.labels.emplace_back(fields[0]);
    result.communities.push_back(c);
  }
  return result;
}

inline LabeledPartition load_partition(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open partition file '" + path + "'");
  return parse_partition(in);
}

/// Aligns a labeled partition to the nodes of g; every node must be present.
inline Partition align_partition(const DirectedGraph& g, const LabeledPartition& lp) {
  std::vector<std::int64_t> raw(g.num_nodes(), -1);
  for (std::size_t k = 0; k < lp.labels.size(); ++k) {
    if (!g.contains(lp.labels[k])) continue;
    raw[g.index_of(lp.labels[k])] = lp.communities[k];
  }
  for (std::size_t i = 0; i < raw.size(); ++i)
    if (raw[i] < 0) throw PartitionError("node '" + g.label(static_cast<NodeId>(i)) + "' missing from partition");
  return Partition::from_labels(raw);
}

}  // namespace flowscope
