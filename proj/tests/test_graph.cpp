#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "graph_oracles.hpp"
#include "npnce/graph.hpp"
#include "npnce/graph_io.hpp"

using namespace npnce;
using npnce::testing::as_set;
using npnce::testing::brute_force_cpdag;
using npnce::testing::brute_force_extensions;
using npnce::testing::EdgeSet;
using npnce::testing::random_test_dag;

namespace {

// Zero-based version of the four-node diamond 1->2, 1->3, 2->4, 3->4.
Dag diamond() { return Dag(4, {{0, 1}, {0, 2}, {1, 3}, {2, 3}}); }

std::set<EdgeSet> extension_sets(const std::vector<Dag>& dags) {
  std::set<EdgeSet> out;
  for (const auto& d : dags) out.insert(as_set(d.edges()));
  return out;
}

}  // namespace

TEST(Dag, RejectsInvalidEdgeSets) {
  EXPECT_THROW(Dag(3, {{0, 1}, {1, 2}, {2, 0}}), InputError);
  EXPECT_THROW(Dag(3, {{1, 1}}), InputError);
  EXPECT_THROW(Dag(3, {{0, 1}, {0, 1}}), InputError);
  EXPECT_THROW(Dag(3, {{0, 1}, {1, 0}}), InputError);
  EXPECT_THROW(Dag(3, {{0, 3}}), InputError);
  EXPECT_NO_THROW(Dag(3, {{2, 0}, {2, 1}}));
}

TEST(Dag, ParentsOfDiamond) {
  const Dag g = diamond();
  EXPECT_EQ(parents(g, 3), (std::set<Node>{1, 2}));
  EXPECT_TRUE(parents(g, 0).empty());
  EXPECT_EQ(parents(g, 1), (std::set<Node>{0}));
  EXPECT_THROW(parents(g, 4), InputError);
}

TEST(Dag, TopologicalOrderPutsParentsFirst) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const Dag g = random_test_dag(7, 0.4, seed);
    const auto order = g.topological_order();
    ASSERT_EQ(order.size(), 7u);
    std::vector<std::size_t> pos(7);
    for (std::size_t k = 0; k < order.size(); ++k) pos[order[k]] = k;
    for (const auto& [a, b] : g.edges()) EXPECT_LT(pos[a], pos[b]);
  }
}

TEST(CpdagOf, ColliderStaysDirected) {
  const Dag g(3, {{0, 2}, {1, 2}});
  const Cpdag c = cpdag_of(g);
  EXPECT_EQ(c.undirected_count(), 0u);
  EXPECT_TRUE(c.has_directed(0, 2));
  EXPECT_TRUE(c.has_directed(1, 2));
  EXPECT_EQ(enumerate_extensions(c).size(), 1u);
}

TEST(CpdagOf, ChainIsFullyUndirected) {
  const Cpdag c = cpdag_of(Dag(3, {{0, 1}, {1, 2}}));
  EXPECT_EQ(c.undirected_count(), 2u);
  EXPECT_TRUE(c.directed_edges().empty());
  const auto brute = brute_force_extensions(c);
  EXPECT_EQ(brute.size(), 3u);
  EXPECT_EQ(extension_sets(enumerate_extensions(c)), brute);
}

TEST(CpdagOf, DiamondExtensionsMatchBruteForce) {
  const Cpdag c = cpdag_of(diamond());
  EXPECT_TRUE(c.has_directed(1, 3));
  EXPECT_TRUE(c.has_directed(2, 3));
  EXPECT_EQ(extension_sets(enumerate_extensions(c)), brute_force_extensions(c));
  EXPECT_EQ(brute_force_cpdag(diamond()).class_size, enumerate_extensions(c).size());
}

TEST(CpdagOf, MatchesExhaustiveEquivalenceClass) {
  int checked = 0;
  for (std::uint64_t seed = 0; checked < 150; ++seed) {
    const Dag g = random_test_dag(3 + seed % 5, 0.5, 1000 + seed);
    if (g.edges().size() > 12) continue;
    ++checked;
    const auto brute = brute_force_cpdag(g);
    const Cpdag c = cpdag_of(g);
    EXPECT_EQ(as_set(c.directed_edges()), brute.directed) << seed;
    EXPECT_EQ(as_set(c.undirected_edges()), brute.undirected) << seed;
    EXPECT_EQ(enumerate_extensions(c).size(), brute.class_size) << seed;
  }
}

TEST(EnumerateExtensions, FullyDirectedGivesItself) {
  const Dag g(4, {{0, 1}, {2, 1}, {1, 3}});
  const auto ext = enumerate_extensions(Cpdag::from_dag(g));
  ASSERT_EQ(ext.size(), 1u);
  EXPECT_EQ(ext[0], g);
}

TEST(EnumerateExtensions, StarWithThreeSpokes) {
  const Cpdag star(4, {}, {{0, 1}, {0, 2}, {0, 3}});
  const auto ext = enumerate_extensions(star);
  const auto brute = brute_force_extensions(star);
  EXPECT_EQ(brute.size(), 4u);
  EXPECT_EQ(extension_sets(ext), brute);
  for (const auto& d : ext) EXPECT_LE(d.parents(0).size(), 1u);
}

TEST(EnumerateExtensions, CapAndInconsistentInputs) {
  const Cpdag star(4, {}, {{0, 1}, {0, 2}, {0, 3}});
  EXPECT_THROW(enumerate_extensions(star, 3), ExtensionCapExceeded);
  EXPECT_EQ(enumerate_extensions(star, 4).size(), 4u);
  EXPECT_THROW(enumerate_extensions(star, 0), InputError);
  const Cpdag cycle(3, {{0, 1}, {1, 2}, {2, 0}});
  EXPECT_THROW(enumerate_extensions(cycle), EstimationError);
}

TEST(EnumerateExtensions, MatchesBruteForceOnRandomCpdags) {
  int checked = 0;
  for (std::uint64_t seed = 0; checked < 200; ++seed) {
    const Cpdag c = cpdag_of(random_test_dag(3 + seed % 6, 0.45, 7000 + seed));
    if (c.undirected_count() > 6) continue;
    ++checked;
    EXPECT_EQ(extension_sets(enumerate_extensions(c)), brute_force_extensions(c)) << seed;
  }
}

TEST(EnumerateExtensions, RoundTripThroughCpdagOf) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const Dag g = random_test_dag(2 + seed % 6, 0.5, 300 + seed);
    const Cpdag c = cpdag_of(g);
    const auto ext = enumerate_extensions(c);
    bool found = false;
    for (const auto& d : ext) {
      EXPECT_EQ(cpdag_of(d), c) << seed;
      found = found || d == g;
    }
    EXPECT_TRUE(found) << seed;
  }
}

TEST(MeekClose, RuleOne) {
  const Cpdag out = meek_close(Cpdag(3, {{0, 1}}, {{1, 2}}));
  EXPECT_TRUE(out.has_directed(1, 2));
}

TEST(MeekClose, RuleTwo) {
  const Cpdag out = meek_close(Cpdag(3, {{0, 2}, {2, 1}}, {{0, 1}}));
  EXPECT_TRUE(out.has_directed(0, 1));
}

TEST(MeekClose, RuleThree) {
  // x=0, c=1, d=2, y=3: 0 - 1 -> 3, 0 - 2 -> 3, 1 and 2 nonadjacent, 0 - 3.
  const Cpdag out = meek_close(Cpdag(4, {{1, 3}, {2, 3}}, {{0, 1}, {0, 2}, {0, 3}}));
  EXPECT_TRUE(out.has_directed(0, 3));
  EXPECT_TRUE(out.has_undirected(0, 1));
  EXPECT_TRUE(out.has_undirected(0, 2));
}

TEST(MeekClose, RuleFour) {
  // c=1 -> d=2 -> y=3, x=0 adjacent to all three, 1 and 3 nonadjacent.
  const Cpdag out = meek_close(Cpdag(4, {{1, 2}, {2, 3}}, {{0, 1}, {0, 2}, {0, 3}}));
  EXPECT_TRUE(out.has_directed(0, 3));
}

TEST(MeekClose, ClosedGraphUnchanged) {
  const Cpdag c = cpdag_of(diamond());
  EXPECT_EQ(meek_close(c), c);
}

TEST(MeekClose, ConflictRaisesOrIsReported) {
  const Cpdag g(4, {{0, 1}, {3, 2}}, {{1, 2}});
  EXPECT_THROW(meek_close(g), OrientationConflict);
  MeekReport report;
  const Cpdag kept = meek_close(g, ConflictPolicy::keep_undirected, &report);
  EXPECT_TRUE(kept.has_undirected(1, 2));
  ASSERT_EQ(report.conflicts.size(), 1u);
  EXPECT_EQ(report.conflicts[0], (Edge{1, 2}));
}

TEST(MeekClose, MonotoneAndIdempotent) {
  std::mt19937_64 rng(11);
  for (std::uint64_t seed = 0; seed < 150; ++seed) {
    const Dag g = random_test_dag(3 + seed % 5, 0.5, 5000 + seed);
    // Orient a random subset of the CPDAG's undirected edges as in g itself.
    Cpdag partial = cpdag_of(g);
    for (const auto& [a, b] : partial.undirected_edges())
      if (rng() % 2) g.has_edge(a, b) ? partial.orient(a, b) : partial.orient(b, a);
    const Cpdag once = meek_close(partial);
    for (const auto& e : partial.directed_edges()) EXPECT_TRUE(once.has_directed(e.first, e.second));
    EXPECT_EQ(meek_close(once), once);
    // Orientations forced by the rules agree with g.
    for (const auto& [a, b] : once.directed_edges()) EXPECT_TRUE(g.has_edge(a, b)) << seed;
  }
}

TEST(EdgeList, RoundTrip) {
  const Cpdag c = cpdag_of(diamond());
  std::stringstream s;
  write_edge_list(s, c);
  EXPECT_EQ(read_edge_list(s, 4), c);
  std::istringstream text("# comment\n0 -> 1\n\n2 -- 1\n");
  const Cpdag parsed = read_edge_list(text);
  EXPECT_EQ(parsed.p(), 3u);
  EXPECT_TRUE(parsed.has_directed(0, 1));
  EXPECT_TRUE(parsed.has_undirected(1, 2));
}

TEST(EdgeList, Errors) {
  std::istringstream bad("0 => 1\n");
  EXPECT_THROW(read_edge_list(bad), InputError);
  std::istringstream id("a -> 1\n");
  EXPECT_THROW(read_edge_list(id), InputError);
  std::istringstream range("0 -> 5\n");
  EXPECT_THROW(read_edge_list(range, 3), InputError);
  EXPECT_THROW(load_edge_list("/nonexistent/graph.txt"), InputError);
}
