#include <gtest/gtest.h>

#include <boost/math/distributions/chi_squared.hpp>
#include <random>
#include <sstream>

#include "flowscope/analysis.hpp"
#include "flowscope/synthetic.hpp"
#include "oracles.hpp"

using namespace flowscope;

namespace {

// C1 = {0,1,2}, C2 = {3,4,5}, each a complete digraph, plus extra edges.
DirectedGraph cliques_with(const std::vector<Edge>& extra) {
  std::vector<Edge> edges = extra;
  for (NodeId b : {0u, 3u})
    for (NodeId i = 0; i < 3; ++i)
      for (NodeId j = 0; j < 3; ++j)
        if (i != j) edges.push_back({b + i, b + j, 1.0});
  return DirectedGraph({"a0", "a1", "a2", "b0", "b1", "b2"}, edges);
}

const Partition kTwo({0, 0, 0, 1, 1, 1});

/// Two random communities of size n/2 with sparse crossing edges; with
/// one_way set, crossing edges only run from the first half to the second.
DirectedGraph two_community_digraph(std::size_t n, std::mt19937_64& gen, bool one_way = false) {
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<std::string> labels;
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < n; ++i) labels.push_back("v" + std::to_string(i));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const bool same = (i < n / 2) == (j < n / 2);
      if (one_way && !same && i >= n / 2) continue;
      if (u(gen) < (same ? 0.15 : 0.03)) edges.push_back({static_cast<NodeId>(i), static_cast<NodeId>(j), 1.0});
    }
  return DirectedGraph(labels, edges);
}

Partition halves(std::size_t n) {
  std::vector<CommunityId> a(n, 0);
  for (std::size_t i = n / 2; i < n; ++i) a[i] = 1;
  return Partition(a);
}

std::vector<std::string> names(std::size_t n, const std::string& prefix = "u") {
  std::vector<std::string> v;
  for (std::size_t i = 0; i < n; ++i) v.push_back(prefix + std::to_string(i));
  return v;
}

}  // namespace

TEST(Bridgeness, SingleBridge) {
  // flow C1 -> C2 travels along b0 -> a0
  auto g = cliques_with({{3, 0, 1.0}});
  auto r = edge_bridgeness(g, kTwo, 0, 1);
  ASSERT_EQ(r.boundary.size(), 1u);
  EXPECT_EQ(r.reachable_pairs, 9u);
  EXPECT_NEAR(r.boundary[0].raw_mass, 9.0, 1e-12);
  EXPECT_NEAR(r.boundary[0].bridgeness, 1.0, 1e-12);
  EXPECT_NEAR(r.boundary[0].bridgeness_ratio, 1.0, 1e-12);
  EXPECT_EQ(g.label(r.boundary[0].source), "b0");
}

TEST(Bridgeness, TwoSymmetricBridges) {
  // b0 -> a0 and b1 -> a1; pairs split evenly by symmetry
  auto g = cliques_with({{3, 0, 1.0}, {4, 1, 1.0}});
  auto r = edge_bridgeness(g, kTwo, 0, 1);
  ASSERT_EQ(r.boundary.size(), 2u);
  for (const auto& be : r.boundary) {
    EXPECT_NEAR(be.bridgeness, 0.5, 1e-12);
    EXPECT_NEAR(be.bridgeness_ratio, 1.0, 1e-12);
  }
}

TEST(Bridgeness, OneWayBridgeReverseIsEmpty) {
  auto g = cliques_with({{3, 0, 1.0}});
  auto r = edge_bridgeness(g, kTwo, 1, 0);
  EXPECT_TRUE(r.boundary.empty());
  EXPECT_TRUE(r.no_reachable_pairs);
  EXPECT_EQ(r.unreachable_pairs, 9u);
}

TEST(Bridgeness, MatchesPathEnumeration) {
  std::mt19937_64 gen(131);
  for (int rep = 0; rep < 5; ++rep) {
    auto g = two_community_digraph(40, gen);
    const auto part = halves(40);
    auto r = edge_bridgeness(g, part, 0, 1);
    std::vector<NodeId> src, dst;
    for (NodeId v = 0; v < 40; ++v) (part[v] == 1 ? src : dst).push_back(v);
    std::size_t reachable = 0;
    auto ref = oracle::enumerate_path_mass(g, src, dst, &reachable);
    EXPECT_EQ(r.reachable_pairs, reachable);
    for (std::size_t e = 0; e < g.num_edges(); ++e) {
      const auto edge = g.edge(e);
      auto it = ref.find({edge.source, edge.target});
      EXPECT_NEAR(r.edge_mass[e], it == ref.end() ? 0.0 : it->second, 1e-9);
    }
  }
}

TEST(Bridgeness, ConservationAndMeanRatio) {
  std::mt19937_64 gen(137);
  for (int rep = 0; rep < 20; ++rep) {
    const bool one_way = rep % 2 == 0;
    auto g = two_community_digraph(40, gen, one_way);
    auto r = edge_bridgeness(g, halves(40), 1, 0);
    ASSERT_FALSE(r.boundary.empty());
    double raw = 0.0, ratio = 0.0;
    for (const auto& be : r.boundary) {
      raw += be.raw_mass;
      ratio += be.bridgeness_ratio;
    }
    // one-way crossings: each pair crosses exactly once; otherwise a
    // shortest path may cross, return and cross again
    if (one_way) {
      EXPECT_NEAR(raw, static_cast<double>(r.reachable_pairs), 1e-9);
    } else {
      EXPECT_GE(raw, static_cast<double>(r.reachable_pairs) - 1e-9);
    }
    EXPECT_NEAR(raw, r.crossing_mass, 1e-9);
    EXPECT_NEAR(ratio / static_cast<double>(r.boundary.size()), 1.0, 1e-9);
    for (std::size_t k = 1; k < r.boundary.size(); ++k)
      EXPECT_GE(r.boundary[k - 1].bridgeness_ratio, r.boundary[k].bridgeness_ratio);
  }
}

TEST(Bridgeness, WorkerCountDoesNotChangeResult) {
  std::mt19937_64 gen(139);
  auto g = two_community_digraph(200, gen);
  auto a = edge_bridgeness(g, halves(200), 0, 1, 1);
  auto b = edge_bridgeness(g, halves(200), 0, 1, 4);
  EXPECT_EQ(a.edge_mass, b.edge_mass);
}

TEST(Bridgeness, Errors) {
  auto g = cliques_with({{3, 0, 1.0}});
  EXPECT_THROW(edge_bridgeness(g, kTwo, 0, 0), ParameterError);
  EXPECT_THROW(edge_bridgeness(g, kTwo, 0, 2), ParameterError);
  EXPECT_THROW(edge_bridgeness(g, Partition({0, 1}), 0, 1), PartitionError);
}

TEST(Bridgeness, ReportFormat) {
  auto g = cliques_with({{3, 0, 1.0}});
  std::ostringstream out;
  write_bridgeness(out, g, edge_bridgeness(g, kTwo, 0, 1));
  EXPECT_EQ(out.str(), "source_label,target_label,raw_mass,bridgeness,bridgeness_ratio\nb0,a0,9,1,1\n");
}

TEST(ChiSquare, MatchesBoost) {
  for (int dof : {1, 2, 3, 7, 20, 60})
    for (double x : {0.01, 0.5, 1.0, 3.3, 10.0, 25.0, 80.0, 200.0}) {
      boost::math::chi_squared dist(dof);
      const double ref = boost::math::cdf(boost::math::complement(dist, x));
      EXPECT_NEAR(chi_square_p_value(x, dof), ref, 1e-13 + 1e-11 * ref) << dof << " " << x;
    }
}

TEST(ChiSquare, StrictlyDecreasing) {
  double prev = 1.0;
  for (double x = 0.25; x < 40.0; x += 0.25) {
    const double p = chi_square_p_value(x, 5);
    EXPECT_LT(p, prev);
    prev = p;
  }
  EXPECT_EQ(chi_square_p_value(3.0, 0), 1.0);
}

TEST(CrossTab, HandCalculatedTwoByTwo) {
  // rows of A over columns of B: [[10, 20], [30, 40]]
  std::vector<CommunityId> a, b;
  auto fill = [&](CommunityId r, CommunityId c, int k) {
    for (int i = 0; i < k; ++i) {
      a.push_back(r);
      b.push_back(c);
    }
  };
  fill(0, 0, 10);
  fill(0, 1, 20);
  fill(1, 0, 30);
  fill(1, 1, 40);
  auto labels = names(a.size());
  auto ct = cross_tabulate(Partition(a), Partition(b), labels, labels);
  EXPECT_EQ(ct.counts, (std::vector<std::vector<std::size_t>>{{10, 20}, {30, 40}}));
  EXPECT_NEAR(ct.expected[0][0], 12.0, 1e-12);
  EXPECT_NEAR(ct.expected[0][1], 18.0, 1e-12);
  EXPECT_NEAR(ct.rows[0].row_statistic, 4.0 / 12.0 + 4.0 / 18.0, 1e-12);
  EXPECT_NEAR(ct.rows[1].row_statistic, 4.0 / 28.0 + 4.0 / 42.0, 1e-12);
  // row against rest is the whole 2x2 Pearson statistic here
  const double full = 4.0 / 12.0 + 4.0 / 18.0 + 4.0 / 28.0 + 4.0 / 42.0;
  EXPECT_NEAR(ct.rows[0].chi2, full, 1e-12);
  EXPECT_NEAR(ct.rows[1].chi2, full, 1e-12);
  EXPECT_NEAR(ct.rows[0].p_value, std::erfc(std::sqrt(full / 2.0)), 1e-12);
  EXPECT_EQ(ct.rows[0].dof, 1);
  EXPECT_EQ(ct.sign(0, 0), -1);
  EXPECT_EQ(ct.sign(1, 0), 1);
  EXPECT_EQ(ct.common_nodes, 100u);
}

TEST(CrossTab, IdenticalPartitionsAreSignificant) {
  std::vector<CommunityId> a;
  for (CommunityId c = 0; c < 3; ++c) a.insert(a.end(), 10 + 5 * c, c);
  auto labels = names(a.size());
  auto ct = cross_tabulate(Partition(a), Partition(a), labels, labels);
  for (std::size_t r = 0; r < 3; ++r) {
    for (std::size_t c = 0; c < 3; ++c)
      if (r != c) {
        EXPECT_EQ(ct.counts[r][c], 0u);
      }
    EXPECT_LT(ct.rows[r].p_value, kSignificanceLevel);
    EXPECT_EQ(ct.rows[r].dof, 2);
  }
}

TEST(CrossTab, MatchesByLabelAndIgnoresUncommonNodes) {
  // b lists nodes in reverse order and adds one node absent from a
  auto la = names(6);
  std::vector<std::string> lb{"u5", "u4", "u3", "u2", "u1", "u0", "extra"};
  auto ct = cross_tabulate(Partition({0, 0, 0, 1, 1, 1}), Partition({0, 0, 1, 1, 2, 2, 0}), la, lb);
  EXPECT_EQ(ct.common_nodes, 6u);
  EXPECT_EQ(ct.counts, (std::vector<std::vector<std::size_t>>{{0, 1, 2}, {2, 1, 0}}));
  EXPECT_FALSE(ct.rows[0].unreliable);  // every expected count is exactly 1
  EXPECT_THROW(cross_tabulate(Partition({0}), Partition({0}), {"x"}, {"y"}), ParameterError);
}

TEST(CrossTab, ColumnPermutationInvariance) {
  std::mt19937_64 gen(149);
  std::uniform_int_distribution<CommunityId> ra(0, 2), rb(0, 4);
  std::vector<CommunityId> a(300), b(300), bp(300);
  const CommunityId perm[5] = {3, 0, 4, 1, 2};
  for (std::size_t i = 0; i < 300; ++i) {
    a[i] = ra(gen);
    b[i] = rb(gen);
  }
  b[0] = 0, b[1] = 1, b[2] = 2, b[3] = 3, b[4] = 4;
  for (std::size_t i = 0; i < 300; ++i) bp[i] = perm[b[i]];
  auto labels = names(300);
  auto x = cross_tabulate(Partition::from_labels(a), Partition(b), labels, labels);
  auto y = cross_tabulate(Partition::from_labels(a), Partition(bp), labels, labels);
  for (std::size_t r = 0; r < x.rows.size(); ++r) EXPECT_NEAR(x.rows[r].chi2, y.rows[r].chi2, 1e-12);
}

TEST(CrossTab, NullRowsRoughlyUniform) {
  std::mt19937_64 gen(151);
  std::uniform_int_distribution<CommunityId> ra(0, 2), rb(0, 7);
  std::size_t low = 0, total = 0;
  auto labels = names(3000);
  for (int rep = 0; rep < 60; ++rep) {
    std::vector<CommunityId> a(3000), b(3000);
    for (std::size_t i = 0; i < 3000; ++i) {
      a[i] = ra(gen);
      b[i] = rb(gen);
    }
    auto ct = cross_tabulate(Partition::from_labels(a), Partition::from_labels(b), labels, labels);
    for (const auto& row : ct.rows) {
      ++total;
      if (row.p_value < 0.05) ++low;
    }
  }
  const double rate = static_cast<double>(low) / static_cast<double>(total);
  EXPECT_GE(rate, 0.01);
  EXPECT_LE(rate, 0.12);
}

TEST(CrossTab, ReportFormat) {
  auto labels = names(4);
  std::ostringstream out;
  write_crosstab(out, cross_tabulate(Partition({0, 0, 1, 1}), Partition({0, 1, 1, 1}), labels, labels));
  const std::string s = out.str();
  EXPECT_EQ(s.substr(0, s.find('\n')), "community,0,1,chi2,dof,p_value,flag");
  EXPECT_NE(s.find("ns|low_expected"), std::string::npos);
  EXPECT_NE(s.find("\n0,+,-\n1,-,+\n"), std::string::npos);
}

TEST(FriendProportion, SmallCases) {
  // node 0 follows 1,2,3,4 with 3,4 outside; node 5 follows only inside
  DirectedGraph g({"a", "b", "c", "d", "e", "f"},
                  {{0, 1, 1}, {0, 2, 1}, {0, 3, 1}, {0, 4, 1}, {5, 1, 1}, {5, 2, 1}, {5, 5, 1}});
  Partition interest({0, 0, 0, 1, 1, 0});
  Partition roles({0, 1, 1, 1, 1, 2});
  auto fp = external_friend_proportion(g, interest, roles);
  ASSERT_EQ(fp.size(), 3u);
  EXPECT_EQ(fp[0].proportions, std::vector<double>{0.5});
  EXPECT_EQ(fp[2].proportions, std::vector<double>{0.0});
  EXPECT_EQ(fp[1].proportions.size(), 0u);
  EXPECT_EQ(fp[1].without_friends, 4u);
}

TEST(FriendProportion, MediatorsExceedListeners) {
  // listeners (layer 0) follow mediators in their own interest community;
  // mediators follow sinks in another one
  auto planted = layered_flow_graph({20, 20, 20}, 0.5, 3);
  std::vector<CommunityId> interest(60, 0);
  for (std::size_t i = 40; i < 60; ++i) interest[i] = 1;
  auto fp = external_friend_proportion(planted.graph, Partition(interest), planted.planted);
  EXPECT_GT(fp[1].mean, fp[0].mean);
  EXPECT_EQ(fp[2].without_friends, 20u);
}

TEST(Audience, DisjointAndIdentical) {
  std::map<std::string, std::set<std::string>> disjoint, same;
  for (int i = 0; i < 10; ++i) {
    disjoint["x"].insert("p" + std::to_string(i));
    disjoint["y"].insert("q" + std::to_string(i));
    same["x"].insert("p" + std::to_string(i));
    same["y"].insert("p" + std::to_string(i));
  }
  auto d = audience_overlap(disjoint);
  EXPECT_EQ(d.global_unique, 20u);
  for (const auto& c : d.communities) EXPECT_EQ(c.exclusive_percent, 100.0);
  auto s = audience_overlap(same);
  EXPECT_EQ(s.global_unique, 10u);
  for (const auto& c : s.communities) EXPECT_EQ(c.exclusive_percent, 0.0);
  EXPECT_THROW(audience_overlap({}), ParameterError);
}

TEST(Audience, ConstructedExclusivity) {
  // 100 followers each; shared blocks AB = 4, AC = 26, BC = 20
  std::map<std::string, std::set<std::string>> f;
  auto add = [&](std::initializer_list<const char*> cs, const std::string& tag, int k) {
    for (int i = 0; i < k; ++i)
      for (const char* c : cs) f[c].insert(tag + std::to_string(i));
  };
  add({"A"}, "a", 70);
  add({"B"}, "b", 76);
  add({"C"}, "c", 54);
  add({"A", "B"}, "ab", 4);
  add({"A", "C"}, "ac", 26);
  add({"B", "C"}, "bc", 20);
  auto r = audience_overlap(f);
  ASSERT_EQ(r.communities.size(), 3u);
  EXPECT_DOUBLE_EQ(r.communities[0].exclusive_percent, 70.0);
  EXPECT_DOUBLE_EQ(r.communities[1].exclusive_percent, 76.0);
  EXPECT_DOUBLE_EQ(r.communities[2].exclusive_percent, 54.0);
  EXPECT_EQ(r.global_unique, 250u);
}

TEST(Audience, ParseFollowerSets) {
  std::istringstream in("# community,follower\nA,x\nA,y\nB\tx\n\nA,x\n");
  auto sets = parse_follower_sets(in);
  EXPECT_EQ(sets["A"], (std::set<std::string>{"x", "y"}));
  EXPECT_EQ(sets["B"], (std::set<std::string>{"x"}));
  std::istringstream bad("A,x,y\n");
  EXPECT_THROW(parse_follower_sets(bad), ParseError);
}
