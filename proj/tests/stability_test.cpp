#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "flowscope/stability.hpp"
#include "oracles.hpp"

using namespace flowscope;

namespace {

/// Two directed cliques of size k with one edge each way between them.
DirectedGraph two_cliques(std::size_t k) {
  std::vector<std::string> labels;
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < 2 * k; ++i) labels.push_back("q" + std::to_string(i));
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < k; ++j)
        if (i != j) edges.push_back({static_cast<NodeId>(b * k + i), static_cast<NodeId>(b * k + j), 1.0});
  edges.push_back({0, static_cast<NodeId>(k), 1.0});
  edges.push_back({static_cast<NodeId>(k), 0, 1.0});
  return DirectedGraph(labels, edges);
}

Partition blocks(std::size_t k) {
  std::vector<CommunityId> a(2 * k, 0);
  for (std::size_t i = k; i < 2 * k; ++i) a[i] = 1;
  return Partition(a);
}

Partition random_partition(std::size_t n, std::size_t max_c, std::mt19937_64& gen) {
  std::uniform_int_distribution<std::uint32_t> d(0, static_cast<std::uint32_t>(max_c - 1));
  std::vector<std::uint32_t> raw(n);
  for (auto& r : raw) r = d(gen);
  return Partition::from_labels(raw);
}

}  // namespace

TEST(PartitionType, ValidatesContiguousIds) {
  EXPECT_THROW(Partition({0, 2}), PartitionError);
  EXPECT_EQ(Partition({1, 0, 1}).num_communities(), 2u);
  EXPECT_EQ(Partition::from_labels(std::vector<int>{7, 3, 7}).assignment(), (std::vector<CommunityId>{0, 1, 0}));
}

TEST(StabilityScore, AllInOneIsZero) {
  std::mt19937_64 gen(41);
  for (int rep = 0; rep < 10; ++rep) {
    auto g = oracle::random_digraph(12, 0.25, gen);
    auto ts = build_transition(g);
    auto pi = stationary_distribution(ts);
    for (double t : {0.0, 0.5, 3.0, 40.0})
      EXPECT_NEAR(stability_score(ts, pi, Partition::all_in_one(12), t, TimeMode::continuous).value, 0.0, 1e-12);
    for (double t : {0.0, 1.0, 7.0})
      EXPECT_NEAR(stability_score(ts, pi, Partition::all_in_one(12), t, TimeMode::discrete).value, 0.0, 1e-12);
  }
}

TEST(StabilityScore, SingletonsAtTimeZero) {
  std::mt19937_64 gen(43);
  auto g = oracle::random_digraph(10, 0.3, gen);
  auto ts = build_transition(g);
  auto pi = stationary_distribution(ts);
  const double expected = 1.0 - pi.pi.squaredNorm();
  EXPECT_NEAR(stability_score(ts, pi, Partition::singletons(10), 0.0, TimeMode::discrete).value, expected, 1e-12);
}

TEST(StabilityScore, TwoCliquesMatchesDenseQ) {
  auto g = two_cliques(4);
  auto ts = build_transition(g);
  auto pi = stationary_distribution(ts);
  const Eigen::MatrixXd m = oracle::teleport_matrix(g, 0.85);
  const Eigen::VectorXd pref = oracle::stationary(m);
  for (auto mode : {TimeMode::discrete, TimeMode::continuous}) {
    const Eigen::MatrixXd p = mode == TimeMode::discrete ? m : oracle::expm_transition(m, 1.0);
    const double ref = oracle::stability(oracle::q_matrix(p, pref), blocks(4).assignment());
    EXPECT_NEAR(stability_score(ts, pi, blocks(4), 1.0, mode).value, ref, 1e-10);
  }
}

TEST(StabilityScore, RejectsWrongSize) {
  auto g = two_cliques(3);
  auto ts = build_transition(g);
  auto pi = stationary_distribution(ts);
  EXPECT_THROW(stability_score(ts, pi, Partition::all_in_one(3), 1.0, TimeMode::continuous), PartitionError);
}

TEST(StabilityScore, SymmetrizedTraceIdentity) {
  std::mt19937_64 gen(47);
  for (int rep = 0; rep < 20; ++rep) {
    const std::size_t n = 5 + rep % 11;
    auto g = oracle::random_digraph(n, 0.3, gen);
    const Eigen::MatrixXd m = oracle::teleport_matrix(g, 0.85);
    const Eigen::MatrixXd q = oracle::q_matrix(oracle::expm_transition(m, 1.3), oracle::stationary(m));
    const Eigen::MatrixXd b = 0.5 * (q + q.transpose());
    auto p = random_partition(n, 4, gen);
    EXPECT_NEAR(oracle::stability(q, p.assignment()), oracle::stability(b, p.assignment()), 1e-12);
  }
}

TEST(Louvain, TwoFiveCliquesRecoveredForEverySeed) {
  auto g = two_cliques(5);
  auto ts = build_transition(g);
  auto pi = stationary_distribution(ts);
  // exhaustive check that the two-clique split is optimal at t = 1
  const Eigen::MatrixXd m = oracle::teleport_matrix(g, 0.85);
  const Eigen::MatrixXd q = oracle::q_matrix(oracle::expm_transition(m, 1.0), oracle::stationary(m));
  std::size_t count = 0;
  const double best = oracle::exhaustive_optimum(q, &count);
  EXPECT_EQ(count, 115975u);  // Bell(10)
  EXPECT_NEAR(oracle::stability(q, blocks(5).assignment()), best, 1e-12);
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    auto r = louvain_optimize(ts, pi, 1.0, TimeMode::continuous, seed);
    EXPECT_TRUE(r.partition.same_grouping(blocks(5))) << "seed " << seed;
    EXPECT_NEAR(r.value, best, 1e-10);
  }
}

TEST(Louvain, SingleNodeIsTrivial) {
  DirectedGraph g({"solo"}, {});
  auto ts = build_transition(g);
  auto pi = stationary_distribution(ts);
  auto r = louvain_optimize(ts, pi, 1.0, TimeMode::continuous, 3);
  EXPECT_EQ(r.partition.num_communities(), 1u);
  EXPECT_NEAR(r.value, 0.0, 1e-15);
}

TEST(Louvain, ReportedValueMatchesIndependentScore) {
  std::mt19937_64 gen(53);
  for (int rep = 0; rep < 10; ++rep) {
    auto g = oracle::random_digraph(20, 0.15, gen);
    auto ts = build_transition(g);
    auto pi = stationary_distribution(ts);
    for (auto [t, mode] : {std::pair{2.0, TimeMode::discrete}, std::pair{1.5, TimeMode::continuous}}) {
      auto r = louvain_optimize(ts, pi, t, mode, static_cast<std::uint64_t>(rep));
      EXPECT_NEAR(r.value, stability_score(ts, pi, r.partition, t, mode).value, 1e-10);
    }
  }
}

TEST(Louvain, DeterministicPerSeed) {
  std::mt19937_64 gen(59);
  auto g = oracle::random_digraph(30, 0.1, gen);
  auto ts = build_transition(g);
  auto pi = stationary_distribution(ts);
  auto a = louvain_optimize(ts, pi, 2.0, TimeMode::continuous, 99);
  auto b = louvain_optimize(ts, pi, 2.0, TimeMode::continuous, 99);
  EXPECT_EQ(a.partition, b.partition);
  EXPECT_EQ(a.value, b.value);
}

TEST(Louvain, BestOfHundredMatchesExhaustiveOnSevenNodes) {
  std::mt19937_64 gen(61);
  for (int rep = 0; rep < 5; ++rep) {
    auto g = oracle::random_digraph(7, 0.35, gen);
    auto ts = build_transition(g);
    auto pi = stationary_distribution(ts);
    const Eigen::MatrixXd m = oracle::teleport_matrix(g, 0.85);
    const Eigen::MatrixXd q = oracle::q_matrix(oracle::expm_transition(m, 1.0), oracle::stationary(m));
    auto sweep = stability_sweep(ts, pi, {1.0}, 100, TimeMode::continuous, 0);
    EXPECT_NEAR(sweep[0].best_value, oracle::exhaustive_optimum(q), 1e-10);
  }
}

TEST(VariationOfInformation, IdentityAndExtremes) {
  auto p = Partition({0, 0, 1, 1, 2});
  EXPECT_EQ(variation_of_information(p, p), 0.0);
  for (std::size_t n : {2u, 5u, 64u})
    EXPECT_NEAR(variation_of_information(Partition::all_in_one(n), Partition::singletons(n)), 1.0, 1e-15);
}

TEST(VariationOfInformation, NineNodeHandComputation) {
  Partition a({0, 0, 0, 1, 1, 1, 2, 2, 2});
  Partition b({0, 0, 1, 1, 1, 2, 2, 2, 2});
  // joint counts: (0,0)=2 (0,1)=1 (1,1)=2 (1,2)=1 (2,2)=3; sizes A 3,3,3; B 2,3,4
  auto h = [](std::initializer_list<double> counts) {
    double s = 0;
    for (double c : counts) s -= c / 9 * std::log(c / 9);
    return s;
  };
  const double vi = 2 * h({2, 1, 2, 1, 3}) - h({3, 3, 3}) - h({2, 3, 4});
  EXPECT_NEAR(variation_of_information(a, b), vi / std::log(9.0), 1e-14);
}

TEST(VariationOfInformation, Errors) {
  EXPECT_THROW(variation_of_information(Partition::all_in_one(3), Partition::all_in_one(4)), DimensionError);
  EXPECT_THROW(variation_of_information(Partition::all_in_one(1), Partition::all_in_one(1)), ParameterError);
}

TEST(Sweep, SingleRunHasZeroVi) {
  auto g = two_cliques(4);
  auto ts = build_transition(g);
  auto pi = stationary_distribution(ts);
  auto rec = stability_sweep(ts, pi, {0.5, 1.0}, 1, TimeMode::continuous, 5);
  ASSERT_EQ(rec.size(), 2u);
  for (const auto& r : rec) {
    EXPECT_EQ(r.mean_pairwise_vi, 0.0);
    EXPECT_EQ(r.n_runs, 1u);
  }
}

TEST(Sweep, DiscreteTimeZeroGivesSingletonValue) {
  std::mt19937_64 gen(67);
  auto g = oracle::random_digraph(9, 0.3, gen);
  auto ts = build_transition(g);
  auto pi = stationary_distribution(ts);
  auto rec = stability_sweep(ts, pi, {0.0}, 10, TimeMode::discrete, 1);
  EXPECT_NEAR(rec[0].best_value, 1.0 - pi.pi.squaredNorm(), 1e-12);
  EXPECT_EQ(rec[0].n_communities, 9u);
}

TEST(Sweep, BestOfNIsMonotone) {
  std::mt19937_64 gen(71);
  auto g = oracle::random_digraph(25, 0.12, gen);
  auto ts = build_transition(g);
  auto pi = stationary_distribution(ts);
  double prev = -1e300;
  for (std::size_t n : {1u, 2u, 5u, 10u, 30u}) {
    auto rec = stability_sweep(ts, pi, {3.0}, n, TimeMode::continuous, 100);
    EXPECT_GE(rec[0].best_value, prev);
    prev = rec[0].best_value;
  }
}

TEST(Sweep, WorkerCountDoesNotChangeResults) {
  std::mt19937_64 gen(73);
  auto g = oracle::random_digraph(25, 0.12, gen);
  auto ts = build_transition(g);
  auto pi = stationary_distribution(ts);
  SweepOptions one, four;
  four.workers = 4;
  auto a = stability_sweep(ts, pi, {1.0, 4.0}, 60, TimeMode::continuous, 7, one);
  auto b = stability_sweep(ts, pi, {1.0, 4.0}, 60, TimeMode::continuous, 7, four);
  for (std::size_t k = 0; k < a.size(); ++k) {
    EXPECT_EQ(a[k].best_partition, b[k].best_partition);
    EXPECT_EQ(a[k].best_value, b[k].best_value);
    EXPECT_EQ(a[k].mean_pairwise_vi, b[k].mean_pairwise_vi);
  }
}

TEST(Sweep, ParameterErrors) {
  auto g = two_cliques(3);
  auto ts = build_transition(g);
  auto pi = stationary_distribution(ts);
  EXPECT_THROW(stability_sweep(ts, pi, {}, 5, TimeMode::continuous, 0), ParameterError);
  EXPECT_THROW(stability_sweep(ts, pi, {1.0, 1.0}, 5, TimeMode::continuous, 0), ParameterError);
  EXPECT_THROW(stability_sweep(ts, pi, {1.0}, 0, TimeMode::continuous, 0), ParameterError);
  EXPECT_THROW(stability_sweep(ts, pi, {0.5}, 5, TimeMode::discrete, 0), ParameterError);
}

namespace {

SweepRecord record(double t, const Partition& p, double vi) {
  SweepRecord r;
  r.markov_time = t;
  r.best_partition = p;
  r.n_communities = p.num_communities();
  r.mean_pairwise_vi = vi;
  r.n_runs = 100;
  return r;
}

Partition modulo_partition(std::size_t n, std::size_t c) {
  std::vector<CommunityId> a(n);
  for (std::size_t i = 0; i < n; ++i) a[i] = static_cast<CommunityId>(i % c);
  return Partition(a);
}

}  // namespace

TEST(RobustWindows, PlateauFixture) {
  const auto thirteen = modulo_partition(60, 13);
  std::vector<SweepRecord> sweep;
  sweep.push_back(record(2.0, modulo_partition(60, 20), 0.2));
  sweep.push_back(record(3.1, modulo_partition(60, 17), 0.08));
  for (double t : {4.3, 4.9, 5.5, 6.1}) sweep.push_back(record(t, thirteen, 0.01));
  sweep.push_back(record(7.5, modulo_partition(60, 9), 0.12));
  auto w = select_robust_partitions(sweep, 0.05);
  ASSERT_EQ(w.size(), 1u);
  EXPECT_EQ(w[0].t_start, 4.3);
  EXPECT_EQ(w[0].t_end, 6.1);
  EXPECT_EQ(w[0].partition.num_communities(), 13u);
  EXPECT_NEAR(w[0].persistence, std::log(6.1 / 4.3), 1e-15);
  EXPECT_NEAR(w[0].mean_vi_in_window, 0.01, 1e-15);
}

TEST(RobustWindows, AllDifferentGivesNothing) {
  std::vector<SweepRecord> sweep;
  for (std::size_t k = 0; k < 5; ++k) sweep.push_back(record(1.0 + k, modulo_partition(12, k + 1), 0.0));
  EXPECT_TRUE(select_robust_partitions(sweep, 0.05).empty());
}

TEST(RobustWindows, ThreePointRule) {
  std::vector<SweepRecord> sweep{record(1, modulo_partition(10, 2), 0), record(2, modulo_partition(10, 2), 0),
                                 record(3, modulo_partition(10, 3), 0)};
  auto w = select_robust_partitions(sweep, 0.05);
  ASSERT_EQ(w.size(), 1u);
  EXPECT_EQ(w[0].first_index, 0u);
  EXPECT_EQ(w[0].last_index, 1u);
}

TEST(RobustWindows, RankedByPersistenceAndVi) {
  std::vector<SweepRecord> sweep{record(1, modulo_partition(10, 2), 0), record(2, modulo_partition(10, 2), 0),
                                 record(3, modulo_partition(10, 3), 0), record(30, modulo_partition(10, 3), 0),
                                 record(40, modulo_partition(10, 3), 0.5)};
  auto w = select_robust_partitions(sweep, 0.05);
  ASSERT_EQ(w.size(), 2u);
  EXPECT_EQ(w[0].t_start, 3.0);
  EXPECT_EQ(w[0].t_end, 30.0);
  EXPECT_THROW(select_robust_partitions({}, 0.05), ParameterError);
}
