#include "sqw/graph.hpp"

#include <algorithm>
#include <deque>
#include <set>
#include <sstream>
#include <stdexcept>

namespace sqw {

GraphSpec GraphSpec::path(int k) {
  GraphSpec s;
  s.kind = Kind::Path;
  s.size = k;
  return s;
}

GraphSpec GraphSpec::cycle(int k) {
  GraphSpec s;
  s.kind = Kind::Cycle;
  s.size = k;
  return s;
}

GraphSpec GraphSpec::torus_grid(int a, int b) {
  GraphSpec s;
  s.kind = Kind::TorusGrid;
  s.rows = a;
  s.cols = b;
  return s;
}

GraphSpec GraphSpec::complete(int k) {
  GraphSpec s;
  s.kind = Kind::Complete;
  s.size = k;
  return s;
}

GraphSpec GraphSpec::tree(int branching, int depth) {
  GraphSpec s;
  s.kind = Kind::Tree;
  s.branching = branching;
  s.depth = depth;
  return s;
}

GraphSpec GraphSpec::explicit_edges(int vertex_count, std::vector<std::pair<int, int>> edges,
                                    bool allow_disconnected) {
  GraphSpec s;
  s.kind = Kind::Explicit;
  s.vertex_count = vertex_count;
  s.edges = std::move(edges);
  s.allow_disconnected = allow_disconnected;
  return s;
}

std::string GraphSpec::describe() const {
  std::ostringstream os;
  switch (kind) {
    case Kind::Path: os << "path(" << size << ")"; break;
    case Kind::Cycle: os << "cycle(" << size << ")"; break;
    case Kind::TorusGrid: os << "torus_grid(" << rows << "," << cols << ")"; break;
    case Kind::Complete: os << "complete(" << size << ")"; break;
    case Kind::Tree: os << "tree(" << branching << "," << depth << ")"; break;
    case Kind::Explicit: os << "explicit(" << vertex_count << "," << edges.size() << ")"; break;
  }
  return os.str();
}

namespace {

std::vector<std::pair<int, int>> generate_edges(const GraphSpec& spec, int& n) {
  using Kind = GraphSpec::Kind;
  std::vector<std::pair<int, int>> out;
  switch (spec.kind) {
    case Kind::Path:
      if (spec.size < 2) throw std::invalid_argument("path needs k >= 2");
      n = spec.size;
      for (int i = 0; i + 1 < n; ++i) out.emplace_back(i, i + 1);
      break;
    case Kind::Cycle:
      if (spec.size < 3) throw std::invalid_argument("cycle needs k >= 3");
      n = spec.size;
      for (int i = 0; i < n; ++i) out.emplace_back(i, (i + 1) % n);
      break;
    case Kind::TorusGrid: {
      if (spec.rows < 3 || spec.cols < 3) throw std::invalid_argument("torus_grid needs a, b >= 3");
      n = spec.rows * spec.cols;
      auto id = [&](int r, int c) { return r * spec.cols + c; };
      for (int r = 0; r < spec.rows; ++r) {
        for (int c = 0; c < spec.cols; ++c) {
          out.emplace_back(id(r, c), id(r, (c + 1) % spec.cols));
          out.emplace_back(id(r, c), id((r + 1) % spec.rows, c));
        }
      }
      break;
    }
    case Kind::Complete:
      if (spec.size < 2) throw std::invalid_argument("complete needs k >= 2");
      n = spec.size;
      for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) out.emplace_back(i, j);
      break;
    case Kind::Tree: {
      if (spec.branching < 1 || spec.depth < 1)
        throw std::invalid_argument("tree needs branching >= 1 and depth >= 1");
      // Breadth-first numbering: root 0, children of v are consecutive.
      std::vector<int> level{0};
      n = 1;
      for (int h = 0; h < spec.depth; ++h) {
        std::vector<int> next;
        for (int parent : level) {
          for (int b = 0; b < spec.branching; ++b) {
            out.emplace_back(parent, n);
            next.push_back(n++);
          }
        }
        level = std::move(next);
      }
      break;
    }
    case Kind::Explicit:
      if (spec.vertex_count < 2) throw std::invalid_argument("explicit graph needs >= 2 vertices");
      n = spec.vertex_count;
      out = spec.edges;
      break;
  }
  return out;
}

}  // namespace

Digraph Digraph::build(const GraphSpec& spec) {
  Digraph g;
  g.spec_ = spec;
  int n = 0;
  const auto undirected = generate_edges(spec, n);

  g.neighbors_.assign(static_cast<std::size_t>(n), {});
  std::set<std::pair<int, int>> seen;
  for (auto [a, b] : undirected) {
    if (a < 0 || b < 0 || a >= n || b >= n)
      throw std::invalid_argument("edge (" + std::to_string(a) + "," + std::to_string(b) +
                                  ") references a vertex outside [0," + std::to_string(n) + ")");
    if (a == b) throw std::invalid_argument("self-loop at vertex " + std::to_string(a));
    auto key = std::minmax(a, b);
    if (!seen.insert(key).second)
      throw std::invalid_argument("duplicate edge (" + std::to_string(key.first) + "," +
                                  std::to_string(key.second) + ")");
    g.neighbors_[static_cast<std::size_t>(a)].push_back(b);
    g.neighbors_[static_cast<std::size_t>(b)].push_back(a);
  }
  for (auto& nb : g.neighbors_) std::sort(nb.begin(), nb.end());

  for (int x = 0; x < n; ++x) {
    const int d = static_cast<int>(g.neighbors_[static_cast<std::size_t>(x)].size());
    if (d == 0) throw std::invalid_argument("vertex " + std::to_string(x) + " is isolated");
    g.max_degree_ = std::max(g.max_degree_, d);
  }

  for (int x = 0; x < n; ++x)
    for (int y : g.neighbors_[static_cast<std::size_t>(x)]) g.edges_.push_back({x, y});
  // Already sorted by (from, to) since vertices and neighbor lists are ascending.

  auto lookup = [&](Vertex from, Vertex to) {
    auto it = std::lower_bound(g.edges_.begin(), g.edges_.end(), DirectedEdge{from, to});
    return static_cast<int>(it - g.edges_.begin());
  };
  g.reversed_.resize(g.edges_.size());
  for (std::size_t i = 0; i < g.edges_.size(); ++i)
    g.reversed_[i] = lookup(g.edges_[i].to, g.edges_[i].from);

  g.incoming_.assign(static_cast<std::size_t>(n), {});
  g.outgoing_.assign(static_cast<std::size_t>(n), {});
  for (int x = 0; x < n; ++x) {
    for (int y : g.neighbors_[static_cast<std::size_t>(x)]) {
      g.incoming_[static_cast<std::size_t>(x)].push_back(lookup(y, x));
      g.outgoing_[static_cast<std::size_t>(x)].push_back(lookup(x, y));
    }
  }

  // All-pairs BFS.
  g.distance_.assign(static_cast<std::size_t>(n) * static_cast<std::size_t>(n), kInfiniteDistance);
  for (int src = 0; src < n; ++src) {
    int* row = g.distance_.data() + static_cast<std::size_t>(src) * static_cast<std::size_t>(n);
    std::deque<int> queue{src};
    row[src] = 0;
    while (!queue.empty()) {
      int v = queue.front();
      queue.pop_front();
      for (int w : g.neighbors_[static_cast<std::size_t>(v)]) {
        if (row[w] == kInfiniteDistance) {
          row[w] = row[v] + 1;
          queue.push_back(w);
        }
      }
    }
  }
  g.connected_ = std::none_of(g.distance_.begin(), g.distance_.begin() + n,
                              [](int d) { return d == kInfiniteDistance; });
  if (!g.connected_ && !(spec.kind == GraphSpec::Kind::Explicit && spec.allow_disconnected))
    throw std::invalid_argument("graph " + spec.describe() +
                                " is disconnected (set allow_disconnected to accept)");
  return g;
}

void Digraph::check_vertex(Vertex x) const {
  if (x < 0 || x >= vertex_count())
    throw std::out_of_range("vertex " + std::to_string(x) + " out of range");
}

int Digraph::degree(Vertex x) const {
  check_vertex(x);
  return static_cast<int>(neighbors_[static_cast<std::size_t>(x)].size());
}

std::span<const Vertex> Digraph::neighbors(Vertex x) const {
  check_vertex(x);
  return neighbors_[static_cast<std::size_t>(x)];
}

int Digraph::neighbor_slot(Vertex x, Vertex y) const {
  const auto nb = neighbors(x);
  auto it = std::lower_bound(nb.begin(), nb.end(), y);
  if (it == nb.end() || *it != y) return -1;
  return static_cast<int>(it - nb.begin());
}

const DirectedEdge& Digraph::edge(int index) const {
  if (index < 0 || index >= edge_count())
    throw std::out_of_range("edge index " + std::to_string(index) + " out of range");
  return edges_[static_cast<std::size_t>(index)];
}

int Digraph::edge_index(Vertex from, Vertex to) const {
  const int slot = neighbor_slot(from, to);
  if (slot < 0)
    throw std::invalid_argument("no edge " + std::to_string(from) + "->" + std::to_string(to));
  return outgoing_[static_cast<std::size_t>(from)][static_cast<std::size_t>(slot)];
}

int Digraph::reversed(int index) const {
  edge(index);
  return reversed_[static_cast<std::size_t>(index)];
}

std::span<const int> Digraph::incoming(Vertex x) const {
  check_vertex(x);
  return incoming_[static_cast<std::size_t>(x)];
}

std::span<const int> Digraph::outgoing(Vertex x) const {
  check_vertex(x);
  return outgoing_[static_cast<std::size_t>(x)];
}

int Digraph::distance(Vertex x, Vertex y) const {
  check_vertex(x);
  check_vertex(y);
  return distance_[static_cast<std::size_t>(x) * static_cast<std::size_t>(vertex_count()) +
                   static_cast<std::size_t>(y)];
}

std::span<const int> Digraph::distances_from(Vertex x) const {
  check_vertex(x);
  const auto n = static_cast<std::size_t>(vertex_count());
  return {distance_.data() + static_cast<std::size_t>(x) * n, n};
}

int Digraph::eccentricity(Vertex x) const {
  int ecc = 0;
  for (int d : distances_from(x))
    if (d != kInfiniteDistance) ecc = std::max(ecc, d);
  return ecc;
}

int Digraph::diameter() const {
  int diam = 0;
  for (int x = 0; x < vertex_count(); ++x) diam = std::max(diam, eccentricity(x));
  return diam;
}

ConsistentSubset::ConsistentSubset(std::vector<char> member, std::vector<int> indices)
    : member_(std::move(member)), indices_(std::move(indices)) {}

ConsistentSubset::ConsistentSubset(const Digraph& g, std::vector<char> member)
    : member_(std::move(member)) {
  if (static_cast<int>(member_.size()) != g.edge_count())
    throw std::invalid_argument("membership flags do not match the edge count");
  for (int e = 0; e < g.edge_count(); ++e) {
    if (member_[static_cast<std::size_t>(e)] != member_[static_cast<std::size_t>(g.reversed(e))]) {
      const auto& de = g.edge(e);
      throw std::invalid_argument("edge subset is not reversal-closed at " +
                                  std::to_string(de.from) + "->" + std::to_string(de.to));
    }
    if (member_[static_cast<std::size_t>(e)]) indices_.push_back(e);
  }
}

ConsistentSubset ConsistentSubset::from_edges(const Digraph& g, std::span<const int> edges) {
  std::vector<char> member(static_cast<std::size_t>(g.edge_count()), 0);
  for (int e : edges) {
    g.edge(e);
    member[static_cast<std::size_t>(e)] = 1;
  }
  return ConsistentSubset(g, std::move(member));
}

ConsistentSubset ConsistentSubset::full(const Digraph& g) {
  return ConsistentSubset(g, std::vector<char>(static_cast<std::size_t>(g.edge_count()), 1));
}

ConsistentSubset ConsistentSubset::complement() const {
  std::vector<char> member(member_.size());
  std::vector<int> indices;
  for (std::size_t e = 0; e < member_.size(); ++e) {
    member[e] = member_[e] ? 0 : 1;
    if (member[e]) indices.push_back(static_cast<int>(e));
  }
  return ConsistentSubset(std::move(member), std::move(indices));
}

bool ConsistentSubset::subset_of(const ConsistentSubset& other) const {
  if (other.member_.size() != member_.size()) return false;
  for (int e : indices_)
    if (!other.contains(e)) return false;
  return true;
}

int graph_distance(const Digraph& g, Vertex x, Vertex y) { return g.distance(x, y); }

int edge_distance(const Digraph& g, int e, int f) {
  const auto& a = g.edge(e);
  const auto& b = g.edge(f);
  int d = 0;
  for (Vertex u : {a.from, a.to})
    for (Vertex v : {b.from, b.to}) d = std::max(d, g.distance(u, v));
  return d;
}

namespace {

void check_ball(const Digraph& g, const BallSpec& b) {
  if (b.radius < 0) throw std::invalid_argument("ball radius must be >= 0");
  if (b.root < 0 || b.root >= g.vertex_count())
    throw std::out_of_range("ball root " + std::to_string(b.root) + " out of range");
}

}  // namespace

std::vector<Vertex> ball_vertices(const Digraph& g, const BallSpec& b) {
  check_ball(g, b);
  std::vector<Vertex> out;
  const auto dist = g.distances_from(b.root);
  for (int v = 0; v < g.vertex_count(); ++v)
    if (dist[static_cast<std::size_t>(v)] <= b.radius) out.push_back(v);
  return out;
}

std::vector<Vertex> sphere_vertices(const Digraph& g, const BallSpec& b) {
  check_ball(g, b);
  std::vector<Vertex> out;
  const auto dist = g.distances_from(b.root);
  for (int v = 0; v < g.vertex_count(); ++v)
    if (dist[static_cast<std::size_t>(v)] == b.radius) out.push_back(v);
  return out;
}

ConsistentSubset edge_ball(const Digraph& g, Vertex center, int radius) {
  check_ball(g, {center, radius});
  const auto dist = g.distances_from(center);
  std::vector<char> member(static_cast<std::size_t>(g.edge_count()), 0);
  for (int e = 0; e < g.edge_count(); ++e) {
    const auto& de = g.edge(e);
    member[static_cast<std::size_t>(e)] = dist[static_cast<std::size_t>(de.from)] <= radius &&
                                          dist[static_cast<std::size_t>(de.to)] <= radius;
  }
  return ConsistentSubset(g, std::move(member));
}

}  // namespace sqw
