#pragma once

// Markov Stability of partitions and its optimization over Markov time.
//
// r(t, H) = trace H^T (Pi P(t) - pi^T pi) H. Louvain maximizes the same
// trace through the symmetrized matrix B = (Q + Q^T) / 2.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <vector>

#include "flowscope/error.hpp"
#include "flowscope/louvain.hpp"
#include "flowscope/markov.hpp"
#include "flowscope/parallel.hpp"
#include "flowscope/partition.hpp"
#include "flowscope/rng.hpp"

namespace flowscope {

struct StabilityScore {
  double markov_time = 0.0;
  double value = 0.0;
  Partition partition;
};

/// r(t, H) from the action P(t) H; P(t) is never formed.
inline StabilityScore stability_score(const TransitionSystem& ts, const StationaryDistribution& pi,
                                      const Partition& partition, double t, TimeMode mode) {
  const std::size_t n = ts.size();
  if (partition.size() != n) throw PartitionError("partition does not cover all nodes");
  const std::size_t c = partition.num_communities();
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(c));
  for (std::size_t i = 0; i < n; ++i) h(static_cast<Eigen::Index>(i), partition[i]) = 1.0;
  const Eigen::MatrixXd ph = transition_action(ts, t, mode, h);
  std::vector<double> retained(n);
  std::vector<double> mass(c, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    retained[i] = pi.pi[ii] * ph(ii, partition[i]);
    mass[partition[i]] += pi.pi[ii];
  }
  std::vector<double> squares(c);
  for (std::size_t k = 0; k < c; ++k) squares[k] = mass[k] * mass[k];
  return {t, pairwise_sum(retained) - pairwise_sum(squares), partition};
}

struct QualityOptions {
  /// Above this size B is assembled from column blocks and thresholded.
  std::size_t dense_cap = 5000;
  double threshold = 1e-12;
  std::size_t block_columns = 256;
};

/// B = (Q + Q^T)/2 with Q = Pi P(t) - pi^T pi.
inline SymmetricQuality symmetrized_quality(const TransitionSystem& ts, const StationaryDistribution& pi, double t,
                                            TimeMode mode, const QualityOptions& opt = {}) {
  const std::size_t n = ts.size();
  const auto ni = static_cast<Eigen::Index>(n);
  const Eigen::VectorXd& p = pi.pi;
  SymmetricQuality b;
  b.n = n;
  b.offsets.assign(1, 0);
  if (n <= opt.dense_cap) {
    const Eigen::MatrixXd pt = transition_at_time(ts, t, mode);
    b.cols.reserve(n * n);
    b.vals.reserve(n * n);
    for (Eigen::Index i = 0; i < ni; ++i) {
      for (Eigen::Index j = 0; j < ni; ++j) {
        b.cols.push_back(static_cast<std::uint32_t>(j));
        b.vals.push_back(0.5 * (p[i] * pt(i, j) + p[j] * pt(j, i)) - p[i] * p[j]);
      }
      b.offsets.push_back(b.cols.size());
    }
    return b;
  }
  // Column blocks of P(t) give Q(:, J); each entry contributes half to B_ij
  // and half to B_ji.
  std::vector<Eigen::Triplet<double>> triplets;
  for (Eigen::Index start = 0; start < ni; start += static_cast<Eigen::Index>(opt.block_columns)) {
    const Eigen::Index width = std::min<Eigen::Index>(static_cast<Eigen::Index>(opt.block_columns), ni - start);
    Eigen::MatrixXd e = Eigen::MatrixXd::Zero(ni, width);
    for (Eigen::Index k = 0; k < width; ++k) e(start + k, k) = 1.0;
    const Eigen::MatrixXd cols = transition_action(ts, t, mode, std::move(e));
    for (Eigen::Index k = 0; k < width; ++k) {
      const Eigen::Index j = start + k;
      for (Eigen::Index i = 0; i < ni; ++i) {
        const double q = 0.5 * (p[i] * cols(i, k) - p[i] * p[j]);
        triplets.emplace_back(static_cast<int>(i), static_cast<int>(j), q);
        triplets.emplace_back(static_cast<int>(j), static_cast<int>(i), q);
      }
    }
  }
  SparseRowMatrix sym(ni, ni);
  sym.setFromTriplets(triplets.begin(), triplets.end());
  triplets.clear();
  for (Eigen::Index i = 0; i < ni; ++i) {
    for (SparseRowMatrix::InnerIterator it(sym, i); it; ++it) {
      if (std::abs(it.value()) < opt.threshold) {
        b.dropped_mass += std::abs(it.value());
        continue;
      }
      b.cols.push_back(static_cast<std::uint32_t>(it.col()));
      b.vals.push_back(it.value());
    }
    b.offsets.push_back(b.cols.size());
  }
  return b;
}

inline StabilityScore louvain_optimize(const TransitionSystem& ts, const StationaryDistribution& pi, double t,
                                       TimeMode mode, std::uint64_t seed, const QualityOptions& qopt = {}) {
  const SymmetricQuality b = symmetrized_quality(ts, pi, t, mode, qopt);
  LouvainResult r = louvain(b, seed);
  return {t, r.value, std::move(r.partition)};
}

struct SweepRecord {
  double markov_time = 0.0;
  Partition best_partition;
  double best_value = 0.0;
  std::size_t n_communities = 0;
  double mean_pairwise_vi = 0.0;
  std::size_t n_runs = 0;
};

struct SweepOptions {
  unsigned workers = 1;
  QualityOptions quality{};
  /// Above this ensemble size a fixed subsample of pairs is used for VI.
  std::size_t all_pairs_limit = 50;
  std::size_t sampled_pairs = 1000;
};

/// `count` log-spaced values from lo to hi inclusive.
inline std::vector<double> log_times(double lo, double hi, std::size_t count) {
  if (!(lo > 0.0 && hi >= lo) || count == 0) throw ParameterError("invalid logarithmic time grid");
  std::vector<double> t(count);
  if (count == 1) {
    t[0] = lo;
    return t;
  }
  const double a = std::log10(lo);
  const double b = std::log10(hi);
  for (std::size_t k = 0; k < count; ++k)
    t[k] = std::pow(10.0, a + (b - a) * static_cast<double>(k) / static_cast<double>(count - 1));
  t.front() = lo;
  t.back() = hi;
  return t;
}

namespace detail {

/// Run-index pairs whose VI is averaged; depends on n_runs and seed only.
inline std::vector<std::pair<std::size_t, std::size_t>> vi_pairs(std::size_t n_runs, std::uint64_t seed,
                                                                  const SweepOptions& opt) {
  std::vector<std::pair<std::size_t, std::size_t>> all;
  for (std::size_t i = 0; i < n_runs; ++i)
    for (std::size_t j = i + 1; j < n_runs; ++j) all.emplace_back(i, j);
  if (n_runs <= opt.all_pairs_limit || all.size() <= opt.sampled_pairs) return all;
  CounterRng rng(seed, 0x5649u);  // "VI"
  for (std::size_t k = 0; k < opt.sampled_pairs; ++k) {
    const std::size_t j = k + static_cast<std::size_t>(rng.below(all.size() - k));
    std::swap(all[k], all[j]);
  }
  all.resize(opt.sampled_pairs);
  std::sort(all.begin(), all.end());
  return all;
}

}  // namespace detail

inline double mean_pairwise_vi(const std::vector<Partition>& runs,
                               const std::vector<std::pair<std::size_t, std::size_t>>& pairs) {
  if (pairs.empty() || runs.front().size() < 2) return 0.0;
  std::vector<double> vis;
  vis.reserve(pairs.size());
  for (auto [i, j] : pairs) vis.push_back(variation_of_information(runs[i], runs[j]));
  return pairwise_sum(vis) / static_cast<double>(vis.size());
}

/// Louvain ensembles with seeds base_seed .. base_seed + n_runs - 1 at
/// every time; the best run is kept (ties: lowest seed).
inline std::vector<SweepRecord> stability_sweep(const TransitionSystem& ts, const StationaryDistribution& pi,
                                                const std::vector<double>& times, std::size_t n_runs, TimeMode mode,
                                                std::uint64_t base_seed, const SweepOptions& opt = {}) {
  if (times.empty()) throw ParameterError("sweep needs at least one Markov time");
  if (n_runs == 0) throw ParameterError("n_runs must be >= 1");
  for (std::size_t k = 0; k < times.size(); ++k) {
    detail::check_time(times[k], mode);
    if (k > 0 && !(times[k] > times[k - 1])) throw ParameterError("sweep times must be strictly increasing");
  }
  const auto pairs = detail::vi_pairs(n_runs, base_seed, opt);
  std::vector<SweepRecord> records;
  records.reserve(times.size());
  for (double t : times) {
    const SymmetricQuality b = symmetrized_quality(ts, pi, t, mode, opt.quality);
    std::vector<LouvainResult> runs(n_runs);
    parallel_for(n_runs, opt.workers, [&](std::size_t r) { runs[r] = louvain(b, base_seed + r); });
    std::size_t best = 0;
    for (std::size_t r = 1; r < n_runs; ++r)
      if (runs[r].value > runs[best].value) best = r;
    std::vector<Partition> parts;
    parts.reserve(n_runs);
    for (auto& r : runs) parts.push_back(r.partition);
    SweepRecord rec;
    rec.markov_time = t;
    rec.best_partition = runs[best].partition;
    rec.best_value = runs[best].value;
    rec.n_communities = rec.best_partition.num_communities();
    rec.mean_pairwise_vi = mean_pairwise_vi(parts, pairs);
    rec.n_runs = n_runs;
    records.push_back(std::move(rec));
  }
  return records;
}

struct RobustWindow {
  double t_start = 0.0;
  double t_end = 0.0;
  std::size_t first_index = 0;
  std::size_t last_index = 0;
  Partition partition;
  /// log(t_end / t_start); infinite when t_start is 0.
  double persistence = 0.0;
  double mean_vi_in_window = 0.0;
};

/// Maximal runs of at least two consecutive sweep points sharing one best
/// partition with ensemble VI <= vi_threshold at each point, most
/// persistent first (ties: earlier start).
inline std::vector<RobustWindow> select_robust_partitions(const std::vector<SweepRecord>& sweep, double vi_threshold) {
  if (sweep.empty()) throw ParameterError("empty sweep");
  std::vector<RobustWindow> windows;
  auto emit = [&](std::size_t first, std::size_t last) {
    if (last <= first) return;
    RobustWindow w;
    w.first_index = first;
    w.last_index = last;
    w.t_start = sweep[first].markov_time;
    w.t_end = sweep[last].markov_time;
    w.partition = sweep[first].best_partition;
    w.persistence = w.t_start > 0.0 ? std::log(w.t_end / w.t_start) : std::numeric_limits<double>::infinity();
    double s = 0.0;
    for (std::size_t k = first; k <= last; ++k) s += sweep[k].mean_pairwise_vi;
    w.mean_vi_in_window = s / static_cast<double>(last - first + 1);
    windows.push_back(std::move(w));
  };
  bool open = false;
  std::size_t first = 0;
  for (std::size_t k = 0; k < sweep.size(); ++k) {
    const bool ok = sweep[k].mean_pairwise_vi <= vi_threshold;
    if (!ok) {
      if (open) emit(first, k - 1);
      open = false;
      continue;
    }
    if (open && sweep[k].best_partition.same_grouping(sweep[k - 1].best_partition)) continue;
    if (open) emit(first, k - 1);
    open = true;
    first = k;
  }
  if (open) emit(first, sweep.size() - 1);
  std::stable_sort(windows.begin(), windows.end(),
                   [](const RobustWindow& a, const RobustWindow& b) { return a.persistence > b.persistence; });
  return windows;
}

}  // namespace flowscope
