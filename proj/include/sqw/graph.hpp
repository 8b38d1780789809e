#pragma once

#include <compare>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace sqw {

using Vertex = int;

// Sentinel returned by distance queries between disconnected vertices.
inline constexpr int kInfiniteDistance = std::numeric_limits<int>::max();

// Directed edge y -> x. The ket |x y> of the walk corresponds to
// DirectedEdge{.from = y, .to = x}.
struct DirectedEdge {
  Vertex from = 0;
  Vertex to = 0;

  auto operator<=>(const DirectedEdge&) const = default;
};

struct GraphSpec {
  enum class Kind { Path, Cycle, TorusGrid, Complete, Tree, Explicit };

  Kind kind = Kind::Cycle;
  int size = 0;        // path, cycle, complete
  int rows = 0;        // torus grid
  int cols = 0;        // torus grid
  int branching = 0;   // tree
  int depth = 0;       // tree
  int vertex_count = 0;                       // explicit
  std::vector<std::pair<int, int>> edges;     // explicit, unordered pairs
  bool allow_disconnected = false;            // explicit only

  static GraphSpec path(int k);
  static GraphSpec cycle(int k);
  static GraphSpec torus_grid(int a, int b);
  static GraphSpec complete(int k);
  static GraphSpec tree(int branching, int depth);
  static GraphSpec explicit_edges(int vertex_count, std::vector<std::pair<int, int>> edges,
                                  bool allow_disconnected = false);

  std::string describe() const;
};

/// Graph with every undirected edge doubled into two directed edges.
///
/// Neighbor lists are ascending by vertex id and that order indexes the
/// rows/columns of scattering matrices. Directed edges are numbered in
/// (from, to) lexicographic order. Immutable after construction.
class Digraph {
 public:
  static Digraph build(const GraphSpec& spec);

  int vertex_count() const { return static_cast<int>(neighbors_.size()); }
  int edge_count() const { return static_cast<int>(edges_.size()); }
  int max_degree() const { return max_degree_; }
  int degree(Vertex x) const;
  bool connected() const { return connected_; }

  std::span<const Vertex> neighbors(Vertex x) const;
  // Position of y in neighbors(x), or -1 when y is not adjacent to x.
  int neighbor_slot(Vertex x, Vertex y) const;
  bool adjacent(Vertex x, Vertex y) const { return neighbor_slot(x, y) >= 0; }

  const DirectedEdge& edge(int index) const;
  // Index of the directed edge from -> to; throws when absent.
  int edge_index(Vertex from, Vertex to) const;
  int reversed(int index) const;

  // Edge indices y -> x for y in neighbors(x), in neighbor order.
  std::span<const int> incoming(Vertex x) const;
  // Edge indices x -> z for z in neighbors(x), in neighbor order.
  std::span<const int> outgoing(Vertex x) const;

  int distance(Vertex x, Vertex y) const;
  std::span<const int> distances_from(Vertex x) const;
  int eccentricity(Vertex x) const;
  int diameter() const;

  const GraphSpec& spec() const { return spec_; }

 private:
  Digraph() = default;
  void check_vertex(Vertex x) const;

  GraphSpec spec_;
  std::vector<std::vector<Vertex>> neighbors_;
  std::vector<DirectedEdge> edges_;
  std::vector<int> reversed_;
  std::vector<std::vector<int>> incoming_;
  std::vector<std::vector<int>> outgoing_;
  std::vector<int> distance_;  // row-major vertex_count x vertex_count
  int max_degree_ = 0;
  bool connected_ = true;
};

/// Reversal-closed set of directed edges.
class ConsistentSubset {
 public:
  ConsistentSubset(const Digraph& g, std::vector<char> member);
  static ConsistentSubset from_edges(const Digraph& g, std::span<const int> edges);
  static ConsistentSubset full(const Digraph& g);

  bool contains(int edge) const { return member_[static_cast<std::size_t>(edge)] != 0; }
  int size() const { return static_cast<int>(indices_.size()); }
  int universe_size() const { return static_cast<int>(member_.size()); }
  bool empty() const { return indices_.empty(); }
  // Member edge indices in ascending (global basis) order.
  std::span<const int> indices() const { return indices_; }
  ConsistentSubset complement() const;
  bool subset_of(const ConsistentSubset& other) const;

  bool operator==(const ConsistentSubset& other) const { return member_ == other.member_; }

 private:
  ConsistentSubset(std::vector<char> member, std::vector<int> indices);

  std::vector<char> member_;
  std::vector<int> indices_;
};

struct BallSpec {
  Vertex root = 0;
  int radius = 0;
};

int graph_distance(const Digraph& g, Vertex x, Vertex y);

// Maximum graph distance over the four endpoint pairs. Gives 1 for e == f.
int edge_distance(const Digraph& g, int e, int f);

std::vector<Vertex> ball_vertices(const Digraph& g, const BallSpec& b);
std::vector<Vertex> sphere_vertices(const Digraph& g, const BallSpec& b);

// E_L = { (uv) : d(x,u) <= L and d(x,v) <= L }.
ConsistentSubset edge_ball(const Digraph& g, Vertex center, int radius);

}  // namespace sqw
