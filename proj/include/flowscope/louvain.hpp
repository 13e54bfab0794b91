#pragma once

// Louvain maximization of F(H) = sum_c sum_{i,j in c} B_ij for a symmetric
// matrix B with arbitrary signs, stored as CSR including the diagonal.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "flowscope/partition.hpp"
#include "flowscope/rng.hpp"

namespace flowscope {

struct SymmetricQuality {
  std::size_t n = 0;
  std::vector<std::size_t> offsets{0};
  std::vector<std::uint32_t> cols;
  std::vector<double> vals;
  /// Sum of |B_ij| over entries dropped by thresholding.
  double dropped_mass = 0.0;

  std::span<const std::uint32_t> row_cols(std::size_t i) const {
    return {cols.data() + offsets[i], offsets[i + 1] - offsets[i]};
  }
  std::span<const double> row_vals(std::size_t i) const {
    return {vals.data() + offsets[i], offsets[i + 1] - offsets[i]};
  }

  /// F(H) for an assignment over the n rows.
  double evaluate(std::span<const CommunityId> assignment) const {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      auto cs = row_cols(i);
      auto vs = row_vals(i);
      double row = 0.0;
      for (std::size_t k = 0; k < cs.size(); ++k)
        if (assignment[cs[k]] == assignment[i]) row += vs[k];
      total += row;
    }
    return total;
  }
};

struct LouvainOptions {
  /// Minimum objective improvement for a node move.
  double min_gain = 1e-12;
  int max_levels = 64;
  int max_passes = 1000;
};

namespace detail {

// Sums B over blocks of the assignment; communities must be 0..c-1.
inline SymmetricQuality aggregate(const SymmetricQuality& b, std::span<const CommunityId> comm, std::size_t c) {
  std::vector<std::vector<std::uint32_t>> members(c);
  for (std::size_t i = 0; i < b.n; ++i) members[comm[i]].push_back(static_cast<std::uint32_t>(i));
  SymmetricQuality out;
  out.n = c;
  out.offsets.assign(1, 0);
  out.dropped_mass = b.dropped_mass;
  std::vector<double> scratch(c, 0.0);
  std::vector<std::uint8_t> seen(c, 0);
  std::vector<std::uint32_t> touched;
  for (std::size_t a = 0; a < c; ++a) {
    touched.clear();
    for (std::uint32_t i : members[a]) {
      auto cs = b.row_cols(i);
      auto vs = b.row_vals(i);
      for (std::size_t k = 0; k < cs.size(); ++k) {
        const CommunityId t = comm[cs[k]];
        if (!seen[t]) {
          seen[t] = 1;
          touched.push_back(t);
        }
        scratch[t] += vs[k];
      }
    }
    std::sort(touched.begin(), touched.end());
    for (std::uint32_t t : touched) {
      out.cols.push_back(t);
      out.vals.push_back(scratch[t]);
      scratch[t] = 0.0;
      seen[t] = 0;
    }
    out.offsets.push_back(out.cols.size());
  }
  return out;
}

// Local-move phase at one level. Returns true when any node moved.
inline bool local_moves(const SymmetricQuality& b, std::vector<CommunityId>& comm, CounterRng& rng,
                        const LouvainOptions& opt) {
  const std::size_t n = b.n;
  std::vector<std::size_t> size(n, 1);
  std::vector<CommunityId> empty;  // free community ids, kept sorted descending
  std::vector<double> link(n, 0.0);
  std::vector<std::uint8_t> seen(n, 0);
  std::vector<CommunityId> touched;
  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0u);
  bool any_move = false;

  for (int pass = 0; pass < opt.max_passes; ++pass) {
    shuffle(std::span<std::uint32_t>(order), rng);
    bool moved = false;
    for (std::uint32_t i : order) {
      const CommunityId home = comm[i];
      touched.clear();
      auto cs = b.row_cols(i);
      auto vs = b.row_vals(i);
      for (std::size_t k = 0; k < cs.size(); ++k) {
        if (cs[k] == i) continue;
        const CommunityId c = comm[cs[k]];
        if (!seen[c]) {
          seen[c] = 1;
          touched.push_back(c);
        }
        link[c] += vs[k];
      }
      // Gains are relative to i sitting alone: joining c adds 2 * link[c].
      const double stay = seen[home] ? 2.0 * link[home] : 0.0;
      std::sort(touched.begin(), touched.end());
      constexpr CommunityId kIsolate = static_cast<CommunityId>(-1);
      bool have = false;
      double top = 0.0;
      CommunityId top_c = home;
      for (CommunityId c : touched) {
        if (c == home) continue;
        const double g = 2.0 * link[c];
        if (!have || g > top) {
          top = g;
          top_c = c;
          have = true;
        }
      }
      if (size[home] > 1 && (!have || 0.0 > top)) {
        top = 0.0;
        top_c = kIsolate;
        have = true;
      }
      CommunityId best = home;
      if (have && top > stay + opt.min_gain) best = top_c;

      for (CommunityId c : touched) {
        link[c] = 0.0;
        seen[c] = 0;
      }
      if (best == home) continue;
      if (best == kIsolate) {
        best = empty.back();
        empty.pop_back();
      }
      --size[home];
      if (size[home] == 0) {
        empty.push_back(home);
        std::sort(empty.begin(), empty.end(), std::greater<>());
      }
      ++size[best];
      comm[i] = best;
      moved = true;
      any_move = true;
    }
    if (!moved) break;
  }
  return any_move;
}

}  // namespace detail

struct LouvainResult {
  Partition partition;
  double value = 0.0;
  int levels = 0;
};

/// Seeded Louvain. Visit order is a fresh shuffle per pass; ties between
/// candidate communities go to the smallest community index.
inline LouvainResult louvain(const SymmetricQuality& b, std::uint64_t seed, const LouvainOptions& opt = {}) {
  if (b.n == 0) return {Partition(), 0.0, 0};
  std::vector<CommunityId> node_comm(b.n);
  std::iota(node_comm.begin(), node_comm.end(), CommunityId{0});
  SymmetricQuality level = b;
  int levels = 0;
  for (; levels < opt.max_levels; ++levels) {
    CounterRng rng(seed, static_cast<std::uint64_t>(levels));
    std::vector<CommunityId> comm(level.n);
    std::iota(comm.begin(), comm.end(), CommunityId{0});
    if (!detail::local_moves(level, comm, rng, opt)) break;
    const Partition compact = Partition::from_labels(comm);
    for (auto& c : node_comm) c = compact[c];
    if (compact.num_communities() == level.n) break;
    level = detail::aggregate(level, compact.assignment(), compact.num_communities());
    if (level.n == 1) {
      ++levels;
      break;
    }
  }
  Partition p = Partition::from_labels(node_comm);
  const double value = b.evaluate(p.assignment());
  return {std::move(p), value, levels};
}

}  // namespace flowscope
