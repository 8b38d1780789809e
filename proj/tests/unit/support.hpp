#pragma once

#include <cstdint>
#include <vector>

#include "sqw/graph.hpp"
#include "sqw/random.hpp"
#include "sqw/walk.hpp"

namespace sqw::fixtures {

struct Instance {
  GraphSpec graph;
  FamilySpec family;
  std::uint64_t disorder_seed = 0;
};

inline int uniform_int(Rng& rng, int lo, int hi) {
  return lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
}

inline GraphSpec random_graph(Rng& rng, int max_edges) {
  for (;;) {
    GraphSpec spec;
    switch (uniform_int(rng, 0, 4)) {
      case 0: spec = GraphSpec::cycle(uniform_int(rng, 3, 20)); break;
      case 1: spec = GraphSpec::path(uniform_int(rng, 2, 21)); break;
      case 2: spec = GraphSpec::torus_grid(uniform_int(rng, 3, 5), uniform_int(rng, 3, 5)); break;
      case 3: spec = GraphSpec::tree(uniform_int(rng, 1, 3), uniform_int(rng, 1, 3)); break;
      default: spec = GraphSpec::complete(uniform_int(rng, 2, 6)); break;
    }
    if (Digraph::build(spec).edge_count() <= max_edges) return spec;
  }
}

inline FamilySpec random_family(Rng& rng) {
  const std::uint64_t seed = rng();
  switch (uniform_int(rng, 0, 4)) {
    case 0: return FamilySpec::identity();
    case 1: return FamilySpec::near_identity(0.05 + 0.5 * uniform01(rng), seed);
    case 2: return FamilySpec::haar(seed);
    case 3: return FamilySpec::grover();
    default: return FamilySpec::dft();
  }
}

inline Instance random_instance(Rng& rng, int max_edges) {
  Instance inst;
  inst.graph = random_graph(rng, max_edges);
  inst.family = random_family(rng);
  inst.disorder_seed = rng();
  return inst;
}

inline std::vector<Instance> instances(std::uint64_t seed, int count, int max_edges) {
  Rng rng = make_stream(seed, 0);
  std::vector<Instance> out;
  for (int i = 0; i < count; ++i) out.push_back(random_instance(rng, max_edges));
  return out;
}

}  // namespace sqw::fixtures
