#pragma once

// Random-walk operators on directed graphs with uniform teleportation.
//
// M(alpha) = alpha * D_out^-1 A + [(1 - alpha) I + alpha diag(a)] 11^T / N
// is never materialized: it is held as a sparse part S plus a rank-one term
// w 1^T / N, with w_i = (1 - alpha) + alpha a_i (w_i = 1 at dangling nodes).

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <vector>

#include "flowscope/error.hpp"
#include "flowscope/graph.hpp"

namespace flowscope {

enum class TimeMode { discrete, continuous };

inline const char* to_string(TimeMode m) { return m == TimeMode::discrete ? "discrete" : "continuous"; }

inline TimeMode parse_time_mode(const std::string& s) {
  if (s == "discrete") return TimeMode::discrete;
  if (s == "continuous") return TimeMode::continuous;
  throw ParameterError("mode must be 'discrete' or 'continuous', got '" + s + "'");
}

using SparseRowMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

class TransitionSystem {
 public:
  TransitionSystem(SparseRowMatrix sparse_part, std::vector<double> rank_one, std::vector<std::uint8_t> dangling,
                   double alpha)
      : sparse_(std::move(sparse_part)),
        sparse_t_(sparse_.transpose()),
        w_(Eigen::Map<const Eigen::VectorXd>(rank_one.data(), static_cast<Eigen::Index>(rank_one.size()))),
        dangling_(std::move(dangling)),
        alpha_(alpha) {}

  std::size_t size() const noexcept { return dangling_.size(); }
  double teleport_alpha() const noexcept { return alpha_; }
  const std::vector<std::uint8_t>& dangling() const noexcept { return dangling_; }
  const SparseRowMatrix& sparse_part() const noexcept { return sparse_; }
  const Eigen::VectorXd& rank_one_weights() const noexcept { return w_; }

  /// Row vector times M: (xM)_j = sum_i x_i S_ij + (x . w) / N.
  Eigen::VectorXd left_apply(const Eigen::VectorXd& x) const {
    Eigen::VectorXd y = sparse_t_ * x;
    y.array() += x.dot(w_) / static_cast<double>(size());
    return y;
  }

  /// Rows of X times M.
  Eigen::MatrixXd left_apply_rows(const Eigen::MatrixXd& x) const {
    Eigen::MatrixXd y = x * sparse_;
    const Eigen::VectorXd xw = x * w_ / static_cast<double>(size());
    y.colwise() += xw;
    return y;
  }

  /// M times columns of V: (MV) = S V + w (1^T V) / N.
  Eigen::MatrixXd right_apply(const Eigen::MatrixXd& v) const {
    Eigen::MatrixXd y = sparse_ * v;
    const Eigen::RowVectorXd colsum = v.colwise().sum() / static_cast<double>(size());
    y.noalias() += w_ * colsum;
    return y;
  }

  Eigen::MatrixXd dense() const {
    Eigen::MatrixXd m = Eigen::MatrixXd(sparse_);
    m.colwise() += w_ / static_cast<double>(size());
    return m;
  }

 private:
  SparseRowMatrix sparse_;
  SparseRowMatrix sparse_t_;
  Eigen::VectorXd w_;
  std::vector<std::uint8_t> dangling_;
  double alpha_;
};

namespace detail {

inline TransitionSystem make_transition(const DirectedGraph& g, double alpha, double teleport) {
  const std::size_t n = g.num_nodes();
  if (n == 0) throw EmptyGraphError("graph has no nodes");
  const auto deg = degree_vectors(g);
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(g.num_edges());
  std::vector<std::uint8_t> dangling(n, 0);
  std::vector<double> w(n, teleport);
  for (NodeId u = 0; u < n; ++u) {
    if (deg.out_degree[u] <= 0.0) {
      dangling[u] = 1;
      w[u] = 1.0;
      continue;
    }
    auto nbrs = g.out_neighbors(u);
    auto ws = g.out_weights(u);
    for (std::size_t k = 0; k < nbrs.size(); ++k)
      triplets.emplace_back(static_cast<int>(u), static_cast<int>(nbrs[k]), alpha * ws[k] / deg.out_degree[u]);
  }
  SparseRowMatrix s(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  s.setFromTriplets(triplets.begin(), triplets.end());
  return TransitionSystem(std::move(s), std::move(w), std::move(dangling), alpha);
}

}  // namespace detail

/// Teleportation-augmented walk; teleport_alpha must lie in (0,1).
inline TransitionSystem build_transition(const DirectedGraph& g, double teleport_alpha = 0.85) {
  if (!(teleport_alpha > 0.0 && teleport_alpha < 1.0))
    throw ParameterError("teleport_alpha must lie in (0,1), got " + std::to_string(teleport_alpha));
  return detail::make_transition(g, teleport_alpha, 1.0 - teleport_alpha);
}

/// Combinatorial walk D^-1 A without teleportation (dangling rows jump
/// uniformly). Intended for symmetric graphs.
inline TransitionSystem build_random_walk(const DirectedGraph& g) { return detail::make_transition(g, 1.0, 0.0); }

struct StationaryDistribution {
  Eigen::VectorXd pi;
  double residual = 0.0;
  int iterations = 0;
};

/// PageRank by power iteration from the uniform vector.
inline StationaryDistribution stationary_distribution(const TransitionSystem& ts, double tol = 1e-12,
                                                      int max_iter = 10000) {
  if (!(tol > 0.0)) throw ParameterError("tolerance must be positive");
  const auto n = static_cast<Eigen::Index>(ts.size());
  Eigen::VectorXd x = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  double residual = 0.0;
  for (int it = 1; it <= max_iter; ++it) {
    Eigen::VectorXd y = ts.left_apply(x);
    y /= y.sum();
    residual = (y - x).lpNorm<1>();
    x = std::move(y);
    if (residual <= tol) {
      const Eigen::VectorXd check = ts.left_apply(x);
      return {x, (x - check).lpNorm<1>(), it};
    }
  }
  throw ConvergenceError("power iteration did not converge in " + std::to_string(max_iter) + " iterations", residual);
}

/// Stationary distribution of the combinatorial walk on a symmetric graph:
/// pi_i = d_i / sum d. Falls back to power iteration when the graph has
/// dangling nodes.
inline StationaryDistribution degree_stationary(const DirectedGraph& g, const TransitionSystem& ts) {
  const auto deg = degree_vectors(g);
  const auto n = static_cast<Eigen::Index>(g.num_nodes());
  double total = 0.0;
  for (double d : deg.out_degree) {
    if (d <= 0.0) return stationary_distribution(ts);
    total += d;
  }
  Eigen::VectorXd pi(n);
  for (Eigen::Index i = 0; i < n; ++i) pi[i] = deg.out_degree[static_cast<std::size_t>(i)] / total;
  return {pi, (pi - ts.left_apply(pi)).lpNorm<1>(), 0};
}

namespace detail {

inline void check_time(double t, TimeMode mode) {
  if (!(t >= 0.0) || !std::isfinite(t)) throw ParameterError("Markov time must be finite and >= 0");
  if (mode == TimeMode::discrete && std::floor(t) != t)
    throw ParameterError("discrete Markov time must be a nonnegative integer");
}

// Largest Taylor step; exp(-tau) * sum_{k>K} tau^k/k! < 1e-17 with K <= 14.
inline constexpr double kMaxTaylorStep = 0.5;
inline constexpr double kTaylorTail = 1e-18;

/// exp(-tau (I - M)) applied to a block through `apply` (one M product).
/// Terms are nonnegative multiples of M^k, whose norm is bounded by 1.
template <class Apply>
Eigen::MatrixXd taylor_block(const Eigen::MatrixXd& v, double tau, Apply&& apply) {
  Eigen::MatrixXd sum = v;
  Eigen::MatrixXd term = v;
  double coeff = 1.0;
  for (int k = 1; k < 64; ++k) {
    coeff *= tau / k;
    term = apply(term) * (tau / k);
    sum += term;
    if (coeff < kTaylorTail) break;
  }
  return sum * std::exp(-tau);
}

}  // namespace detail

/// Dense P(t). Discrete: M^t by repeated application to the identity rows.
/// Continuous: exp(-t(I - M)) by scaling and squaring of a truncated Taylor
/// series. Negative round-off is clamped to zero.
inline Eigen::MatrixXd transition_at_time(const TransitionSystem& ts, double t, TimeMode mode) {
  detail::check_time(t, mode);
  const auto n = static_cast<Eigen::Index>(ts.size());
  Eigen::MatrixXd p = Eigen::MatrixXd::Identity(n, n);
  if (t == 0.0) return p;
  if (mode == TimeMode::discrete) {
    const auto steps = static_cast<std::int64_t>(t);
    for (std::int64_t k = 0; k < steps; ++k) p = ts.left_apply_rows(p);
  } else {
    int squarings = 0;
    double tau = t;
    while (tau > detail::kMaxTaylorStep) {
      tau *= 0.5;
      ++squarings;
    }
    p = detail::taylor_block(p, tau, [&](const Eigen::MatrixXd& x) { return ts.left_apply_rows(x); });
    for (int s = 0; s < squarings; ++s) {
      Eigen::MatrixXd sq = p * p;
      p = std::move(sq);
    }
  }
  return p.cwiseMax(0.0);
}

/// P(t) V without forming P(t): used for community indicator blocks.
inline Eigen::MatrixXd transition_action(const TransitionSystem& ts, double t, TimeMode mode, Eigen::MatrixXd v) {
  detail::check_time(t, mode);
  if (t == 0.0) return v;
  auto apply = [&](const Eigen::MatrixXd& x) { return ts.right_apply(x); };
  if (mode == TimeMode::discrete) {
    const auto steps = static_cast<std::int64_t>(t);
    for (std::int64_t k = 0; k < steps; ++k) v = apply(v);
    return v;
  }
  const auto steps = static_cast<int>(std::ceil(t / detail::kMaxTaylorStep));
  const double tau = t / steps;
  for (int s = 0; s < steps; ++s) v = detail::taylor_block(v, tau, apply);
  return v;
}

/// x P(t) for a row vector x.
inline Eigen::VectorXd transition_left_action(const TransitionSystem& ts, double t, TimeMode mode, Eigen::VectorXd x) {
  detail::check_time(t, mode);
  if (t == 0.0) return x;
  auto apply = [&](const Eigen::MatrixXd& v) -> Eigen::MatrixXd { return ts.left_apply(v.col(0)); };
  if (mode == TimeMode::discrete) {
    const auto steps = static_cast<std::int64_t>(t);
    for (std::int64_t k = 0; k < steps; ++k) x = ts.left_apply(x);
    return x;
  }
  const auto steps = static_cast<int>(std::ceil(t / detail::kMaxTaylorStep));
  const double tau = t / steps;
  Eigen::MatrixXd v = x;
  for (int s = 0; s < steps; ++s) v = detail::taylor_block(v, tau, apply);
  return v.col(0);
}

// Dense dump: int64 rows, int64 cols, then row-major float64 entries.

inline void write_dense_dump(std::ostream& out, const Eigen::MatrixXd& m) {
  const std::int64_t dims[2] = {m.rows(), m.cols()};
  out.write(reinterpret_cast<const char*>(dims), sizeof(dims));
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = m;
  out.write(reinterpret_cast<const char*>(rm.data()), static_cast<std::streamsize>(sizeof(double) * rm.size()));
}

inline Eigen::MatrixXd read_dense_dump(std::istream& in) {
  std::int64_t dims[2] = {0, 0};
  if (!in.read(reinterpret_cast<char*>(dims), sizeof(dims)) || dims[0] < 0 || dims[1] < 0)
    throw Error("truncated dense dump header");
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(dims[0], dims[1]);
  if (!in.read(reinterpret_cast<char*>(rm.data()), static_cast<std::streamsize>(sizeof(double) * rm.size())))
    throw Error("truncated dense dump body");
  return rm;
}

}  // namespace flowscope
