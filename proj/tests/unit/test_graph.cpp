#include <algorithm>
#include <cmath>
#include <optional>
#include <set>

#include <gtest/gtest.h>

#include "sqw/graph.hpp"
#include "support.hpp"

using namespace sqw;

TEST(Graph, CycleCounts) {
  const auto g = Digraph::build(GraphSpec::cycle(8));
  EXPECT_EQ(g.vertex_count(), 8);
  EXPECT_EQ(g.edge_count(), 16);
  EXPECT_EQ(g.max_degree(), 2);
}

TEST(Graph, PathEndpointsHaveDegreeOne) {
  const auto g = Digraph::build(GraphSpec::path(5));
  EXPECT_EQ(g.vertex_count(), 5);
  EXPECT_EQ(g.edge_count(), 8);
  EXPECT_EQ(g.degree(0), 1);
  EXPECT_EQ(g.degree(4), 1);
  EXPECT_EQ(g.degree(2), 2);
}

TEST(Graph, TorusCounts) {
  const auto g = Digraph::build(GraphSpec::torus_grid(3, 3));
  EXPECT_EQ(g.vertex_count(), 9);
  EXPECT_EQ(g.edge_count(), 36);
  EXPECT_EQ(g.max_degree(), 4);
}

TEST(Graph, EdgeIndexIsLexicographicBijection) {
  const auto g = Digraph::build(GraphSpec::torus_grid(3, 4));
  for (int i = 0; i < g.edge_count(); ++i) {
    const auto& d = g.edge(i);
    EXPECT_EQ(g.edge_index(d.from, d.to), i);
    EXPECT_EQ(g.edge(g.reversed(i)).from, d.to);
    EXPECT_EQ(g.edge(g.reversed(i)).to, d.from);
    if (i > 0) EXPECT_LT(g.edge(i - 1), d);
  }
}

TEST(Graph, NeighborListsAscendingAndSlotsAgree) {
  const auto g = Digraph::build(GraphSpec::tree(3, 2));
  for (Vertex x = 0; x < g.vertex_count(); ++x) {
    const auto nb = g.neighbors(x);
    EXPECT_TRUE(std::is_sorted(nb.begin(), nb.end()));
    for (std::size_t j = 0; j < nb.size(); ++j) {
      EXPECT_EQ(g.edge(g.incoming(x)[j]).from, nb[j]);
      EXPECT_EQ(g.edge(g.outgoing(x)[j]).to, nb[j]);
      EXPECT_EQ(g.neighbor_slot(x, nb[j]), static_cast<int>(j));
    }
  }
}

TEST(Graph, Distances) {
  EXPECT_EQ(graph_distance(Digraph::build(GraphSpec::cycle(8)), 0, 5), 3);
  EXPECT_EQ(graph_distance(Digraph::build(GraphSpec::path(5)), 0, 4), 4);
  const auto g = Digraph::build(GraphSpec::torus_grid(4, 5));
  for (Vertex x = 0; x < g.vertex_count(); ++x) EXPECT_EQ(graph_distance(g, x, x), 0);
}

TEST(Graph, EdgeDistanceFollowsDefinitionVerbatim) {
  const auto g = Digraph::build(GraphSpec::path(6));
  // |1 0> is the edge 0 -> 1 and |5 4> the edge 4 -> 5.
  EXPECT_EQ(edge_distance(g, g.edge_index(0, 1), g.edge_index(4, 5)), 5);
  const int e = g.edge_index(2, 3);
  EXPECT_EQ(edge_distance(g, e, g.reversed(e)), 1);
  EXPECT_EQ(edge_distance(g, e, e), 1);
}

TEST(Graph, BallsAndSpheres) {
  const auto g = Digraph::build(GraphSpec::cycle(8));
  auto ball = ball_vertices(g, {0, 2});
  std::sort(ball.begin(), ball.end());
  EXPECT_EQ(ball, (std::vector<Vertex>{0, 1, 2, 6, 7}));
  EXPECT_EQ(ball_vertices(g, {3, 0}), std::vector<Vertex>{3});
  EXPECT_EQ(sphere_vertices(g, {3, 0}), std::vector<Vertex>{3});
}

TEST(Graph, TreeSphereBound) {
  const auto g = Digraph::build(GraphSpec::tree(2, 4));
  const int d = g.max_degree();
  for (int n = 1; n <= 4; ++n) {
    const auto s = sphere_vertices(g, {0, n});
    EXPECT_LE(static_cast<double>(s.size()), d * std::pow(d - 1, n - 1));
  }
  EXPECT_EQ(sphere_vertices(g, {0, 3}).size(), 8u);
}

TEST(Graph, EdgeBallExamples) {
  const auto p5 = Digraph::build(GraphSpec::path(5));
  EXPECT_EQ(edge_ball(p5, 2, 1).size(), 4);
  EXPECT_EQ(edge_ball(p5, 2, p5.diameter()).size(), p5.edge_count());
  const auto c8 = Digraph::build(GraphSpec::cycle(8));
  EXPECT_EQ(edge_ball(c8, 0, 2).size(), 8);
}

TEST(Graph, MalformedSpecsAreRejected) {
  EXPECT_THROW(Digraph::build(GraphSpec::cycle(2)), std::invalid_argument);
  EXPECT_THROW(Digraph::build(GraphSpec::path(1)), std::invalid_argument);
  EXPECT_THROW(Digraph::build(GraphSpec::torus_grid(2, 3)), std::invalid_argument);
  EXPECT_THROW(Digraph::build(GraphSpec::explicit_edges(3, {{0, 0}, {1, 2}})), std::invalid_argument);
  EXPECT_THROW(Digraph::build(GraphSpec::explicit_edges(3, {{0, 1}, {1, 0}, {1, 2}})), std::invalid_argument);
  EXPECT_THROW(Digraph::build(GraphSpec::explicit_edges(4, {{0, 1}, {2, 3}})), std::invalid_argument);
  EXPECT_NO_THROW(Digraph::build(GraphSpec::explicit_edges(4, {{0, 1}, {2, 3}}, true)));
}

TEST(Graph, DisconnectedDistanceIsSentinel) {
  const auto g = Digraph::build(GraphSpec::explicit_edges(4, {{0, 1}, {2, 3}}, true));
  EXPECT_FALSE(g.connected());
  EXPECT_EQ(graph_distance(g, 0, 3), kInfiniteDistance);
}

TEST(Graph, InvalidIdsThrow) {
  const auto g = Digraph::build(GraphSpec::cycle(5));
  EXPECT_THROW(graph_distance(g, 0, 9), std::out_of_range);
  EXPECT_THROW(g.edge(99), std::out_of_range);
  EXPECT_THROW(g.edge_index(0, 2), std::invalid_argument);
  EXPECT_THROW(ball_vertices(g, {0, -1}), std::invalid_argument);
}

TEST(ConsistentSubsetTest, RejectsNonReversalClosed) {
  const auto g = Digraph::build(GraphSpec::cycle(4));
  std::vector<char> flags(static_cast<std::size_t>(g.edge_count()), 0);
  flags[0] = 1;
  EXPECT_THROW(ConsistentSubset(g, flags), std::invalid_argument);
}

TEST(GraphProperties, RandomGraphsSatisfyInvariants) {
  Rng rng = make_stream(2024, 0);
  for (int trial = 0; trial < 40; ++trial) {
    const auto g = Digraph::build(fixtures::random_graph(rng, 200));
    for (int i = 0; i < g.edge_count(); ++i) EXPECT_EQ(g.reversed(g.reversed(i)), i);
    int dmax = 0;
    for (Vertex x = 0; x < g.vertex_count(); ++x) {
      EXPECT_GE(g.degree(x), 1);
      dmax = std::max(dmax, g.degree(x));
      const auto nb = g.neighbors(x);
      EXPECT_EQ(std::set<Vertex>(nb.begin(), nb.end()).size(), nb.size());
      EXPECT_EQ(std::count(nb.begin(), nb.end(), x), 0);
    }
    EXPECT_EQ(dmax, g.max_degree());

    const int n = g.vertex_count();
    for (int t = 0; t < 30; ++t) {
      const Vertex a = fixtures::uniform_int(rng, 0, n - 1);
      const Vertex b = fixtures::uniform_int(rng, 0, n - 1);
      const Vertex c = fixtures::uniform_int(rng, 0, n - 1);
      EXPECT_EQ(g.distance(a, b), g.distance(b, a));
      EXPECT_LE(g.distance(a, c), g.distance(a, b) + g.distance(b, c));
    }

    const Vertex root = fixtures::uniform_int(rng, 0, n - 1);
    const int d = g.max_degree();
    for (int r = 1; r <= g.eccentricity(root); ++r)
      EXPECT_LE(static_cast<double>(sphere_vertices(g, {root, r}).size()),
                d * std::pow(std::max(d - 1, 1), r - 1));

    std::optional<ConsistentSubset> prev;
    for (int L = 0; L <= g.eccentricity(root) + 1; ++L) {
      const auto ball = edge_ball(g, root, L);
      const auto comp = ball.complement();
      EXPECT_EQ(ball.size() + comp.size(), g.edge_count());
      for (int e : ball.indices()) {
        EXPECT_TRUE(ball.contains(g.reversed(e)));
        EXPECT_FALSE(comp.contains(e));
      }
      for (int e : comp.indices()) EXPECT_TRUE(comp.contains(g.reversed(e)));
      if (prev) EXPECT_TRUE(prev->subset_of(ball));
      prev = ball;
    }
    EXPECT_EQ(prev->size(), g.edge_count());
  }
}
