#include "sqw/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <openssl/evp.h>
#include <yaml-cpp/yaml.h>

namespace sqw {
namespace {

struct NamedEstimator {
  Estimator id;
  const char* name;
};

constexpr NamedEstimator kEstimatorNames[] = {
    {Estimator::Build, "build"},       {Estimator::Spectrum, "spectrum"},
    {Estimator::Ec, "ec"},             {Estimator::FracMom, "fracmom"},
    {Estimator::SpecAvg, "specavg"},   {Estimator::GapProb, "gapprob"},
    {Estimator::Decay, "decay"},       {Estimator::DynLoc, "dynloc"},
    {Estimator::Identities, "check-identities"},
    {Estimator::Fmec, "check-fmec"},   {Estimator::Smallness, "smallness"},
    {Estimator::WeakConv, "weakconv"},
};

const char* family_kind_name(FamilySpec::Kind k) {
  switch (k) {
    case FamilySpec::Kind::Identity: return "identity";
    case FamilySpec::Kind::NearIdentity: return "near_identity";
    case FamilySpec::Kind::Haar: return "haar";
    case FamilySpec::Kind::Grover: return "grover";
    case FamilySpec::Kind::Dft: return "dft";
  }
  return "?";
}

const char* graph_kind_name(GraphSpec::Kind k) {
  switch (k) {
    case GraphSpec::Kind::Path: return "path";
    case GraphSpec::Kind::Cycle: return "cycle";
    case GraphSpec::Kind::TorusGrid: return "torus_grid";
    case GraphSpec::Kind::Complete: return "complete";
    case GraphSpec::Kind::Tree: return "tree";
    case GraphSpec::Kind::Explicit: return "explicit";
  }
  return "?";
}

// Walks a YAML tree, recording violations instead of throwing so that one
// pass reports every problem.
class Reader {
 public:
  std::vector<std::string> violations;

  void fail(const std::string& key, const std::string& what) {
    violations.push_back(fmt::format("{}: {}", key, what));
  }

  bool check_map(const YAML::Node& node, const std::string& path,
                 std::initializer_list<const char*> allowed) {
    if (!node.IsMap()) {
      fail(path, "expected a mapping");
      return false;
    }
    for (const auto& kv : node) {
      const auto key = kv.first.as<std::string>();
      if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
        fail(path.empty() ? key : path + "." + key, "unknown key");
    }
    return true;
  }

  template <class T>
  void get(const YAML::Node& node, const char* key, const std::string& path, T& out) {
    const YAML::Node v = node[key];
    if (!v) return;
    try {
      out = v.as<T>();
    } catch (const YAML::Exception&) {
      fail(join(path, key), "wrong value type");
    }
  }

  template <class T>
  void get_list(const YAML::Node& node, const char* key, const std::string& path,
                std::vector<T>& out) {
    const YAML::Node v = node[key];
    if (!v) return;
    if (!v.IsSequence()) {
      fail(join(path, key), "expected a list");
      return;
    }
    try {
      out = v.as<std::vector<T>>();
    } catch (const YAML::Exception&) {
      fail(join(path, key), "wrong element type");
    }
  }

  static std::string join(const std::string& path, const char* key) {
    return path.empty() ? std::string(key) : path + "." + key;
  }
};

void read_graph(Reader& r, const YAML::Node& node, GraphSpec& out) {
  if (!r.check_map(node, "graph",
                   {"kind", "size", "rows", "cols", "branching", "depth", "vertices", "edges",
                    "allow_disconnected"}))
    return;
  std::string kind = "cycle";
  r.get(node, "kind", "graph", kind);
  int size = 0, rows = 0, cols = 0, branching = 0, depth = 0, vertices = 0;
  bool allow = false;
  std::vector<std::vector<int>> edges;
  r.get(node, "size", "graph", size);
  r.get(node, "rows", "graph", rows);
  r.get(node, "cols", "graph", cols);
  r.get(node, "branching", "graph", branching);
  r.get(node, "depth", "graph", depth);
  r.get(node, "vertices", "graph", vertices);
  r.get(node, "allow_disconnected", "graph", allow);
  r.get_list(node, "edges", "graph", edges);
  if (kind == "path") out = GraphSpec::path(size);
  else if (kind == "cycle") out = GraphSpec::cycle(size);
  else if (kind == "torus_grid") out = GraphSpec::torus_grid(rows, cols);
  else if (kind == "complete") out = GraphSpec::complete(size);
  else if (kind == "tree") out = GraphSpec::tree(branching, depth);
  else if (kind == "explicit") {
    std::vector<std::pair<int, int>> pairs;
    for (const auto& e : edges) {
      if (e.size() != 2) {
        r.fail("graph.edges", "each edge must be a pair of vertices");
        continue;
      }
      pairs.emplace_back(e[0], e[1]);
    }
    out = GraphSpec::explicit_edges(vertices, std::move(pairs), allow);
  } else {
    r.fail("graph.kind", fmt::format("unknown graph kind '{}'", kind));
  }
}

void read_family(Reader& r, const YAML::Node& node, FamilyConfig& out) {
  if (!r.check_map(node, "family", {"kind", "strength", "strengths", "seed"})) return;
  std::string kind = "identity";
  r.get(node, "kind", "family", kind);
  if (kind == "identity") out.kind = FamilySpec::Kind::Identity;
  else if (kind == "near_identity") out.kind = FamilySpec::Kind::NearIdentity;
  else if (kind == "haar") out.kind = FamilySpec::Kind::Haar;
  else if (kind == "grover") out.kind = FamilySpec::Kind::Grover;
  else if (kind == "dft") out.kind = FamilySpec::Kind::Dft;
  else r.fail("family.kind", fmt::format("unknown family kind '{}'", kind));
  if (node["strength"] && node["strengths"]) r.fail("family", "give either strength or strengths");
  if (node["strength"]) {
    double phi = 0.0;
    r.get(node, "strength", "family", phi);
    out.strengths = {phi};
  }
  r.get_list(node, "strengths", "family", out.strengths);
  r.get(node, "seed", "family", out.seed);
}

void read_disorder(Reader& r, const YAML::Node& node, ExperimentConfig& cfg) {
  if (!r.check_map(node, "disorder", {"kind", "table", "theta"})) return;
  std::string kind = "uniform";
  r.get(node, "kind", "disorder", kind);
  try {
    if (kind == "uniform") {
      cfg.disorder = DisorderSpec::uniform();
      cfg.disorder_text = "uniform";
    } else if (kind == "density") {
      std::vector<double> table;
      r.get_list(node, "table", "disorder", table);
      cfg.disorder = DisorderSpec::density(table);
      cfg.disorder_text = "density";
    } else if (kind == "point_mass") {
      double theta = 0.0;
      r.get(node, "theta", "disorder", theta);
      cfg.disorder = DisorderSpec::point_mass(theta);
      cfg.disorder_text = "point_mass";
    } else {
      r.fail("disorder.kind", fmt::format("unknown disorder kind '{}'", kind));
    }
  } catch (const std::exception& ex) {
    r.fail("disorder", ex.what());
  }
}

std::optional<KetSpec> read_ket(Reader& r, const YAML::Node& node, const char* key) {
  std::vector<int> pair;
  r.get_list(node, key, "params", pair);
  if (!node[key]) return std::nullopt;
  if (pair.size() != 2) {
    r.fail(Reader::join("params", key), "expected [x, y] for the ket |x y>");
    return std::nullopt;
  }
  return KetSpec{pair[0], pair[1]};
}

void read_arcs(Reader& r, const YAML::Node& node, Params& p) {
  const YAML::Node v = node["arcs"];
  if (!v) return;
  try {
    if (v.IsScalar()) {
      const auto name = v.as<std::string>();
      if (name == "full") p.arcs = ArcSet::full_circle();
      else if (name == "upper_half") p.arcs = ArcSet::upper_half();
      else if (name == "empty") p.arcs = ArcSet();
      else {
        r.fail("params.arcs", fmt::format("unknown arc set '{}'", name));
        return;
      }
      p.arcs_text = name;
      return;
    }
    const auto pairs = v.as<std::vector<std::vector<double>>>();
    std::vector<std::pair<double, double>> bounds;
    for (const auto& b : pairs) {
      if (b.size() != 2) {
        r.fail("params.arcs", "each arc must be [theta_lo, theta_hi]");
        return;
      }
      bounds.emplace_back(b[0], b[1]);
    }
    p.arcs = ArcSet::from_bounds(bounds);
    p.arcs_text = p.arcs.describe();
  } catch (const YAML::Exception&) {
    r.fail("params.arcs", "expected full, upper_half, empty or a list of [lo, hi]");
  } catch (const std::exception& ex) {
    r.fail("params.arcs", ex.what());
  }
}

void read_params(Reader& r, const YAML::Node& node, Params& p) {
  if (!r.check_map(node, "params",
                   {"s", "beta", "arcs", "z_grid", "z_points", "etas", "ball", "n_samples",
                    "horizon", "e", "f", "quadrature_nodes", "n_outer", "slack_sigma", "deltas",
                    "theta_cells", "cw_realizations", "reference", "targets_per_distance",
                    "fit_min_distance", "fit_max_distance", "noise_floor", "min_r2", "p",
                    "degree", "test_eigenvalues"}))
    return;
  const std::string path = "params";
  r.get(node, "s", path, p.s);
  if (node["beta"]) {
    double b = 0.0;
    r.get(node, "beta", path, b);
    p.beta = b;
  }
  read_arcs(r, node, p);
  if (const YAML::Node zg = node["z_grid"]) {
    if (r.check_map(zg, "params.z_grid", {"radii", "angles"})) {
      r.get_list(zg, "radii", "params.z_grid", p.z_grid.radii);
      r.get(zg, "angles", "params.z_grid", p.z_grid.angles);
    }
  }
  std::vector<std::vector<double>> zp;
  r.get_list(node, "z_points", path, zp);
  for (const auto& z : zp) {
    if (z.size() != 2) {
      r.fail("params.z_points", "each point must be [re, im]");
      continue;
    }
    p.z_points.emplace_back(z[0], z[1]);
  }
  r.get_list(node, "etas", path, p.etas);
  if (const YAML::Node b = node["ball"]) {
    if (r.check_map(b, "params.ball", {"root", "radius"})) {
      r.get(b, "root", "params.ball", p.ball.root);
      r.get(b, "radius", "params.ball", p.ball.radius);
    }
  }
  r.get(node, "n_samples", path, p.n_samples);
  r.get(node, "horizon", path, p.horizon);
  p.e = read_ket(r, node, "e");
  p.f = read_ket(r, node, "f");
  r.get(node, "quadrature_nodes", path, p.quadrature_nodes);
  r.get(node, "n_outer", path, p.n_outer);
  r.get(node, "slack_sigma", path, p.slack_sigma);
  r.get_list(node, "deltas", path, p.deltas);
  r.get(node, "theta_cells", path, p.theta_cells);
  r.get(node, "cw_realizations", path, p.cw_realizations);
  r.get(node, "reference", path, p.reference);
  r.get(node, "targets_per_distance", path, p.targets_per_distance);
  r.get(node, "fit_min_distance", path, p.fit_min_distance);
  r.get(node, "fit_max_distance", path, p.fit_max_distance);
  if (node["noise_floor"]) {
    double nf = 0.0;
    r.get(node, "noise_floor", path, nf);
    p.noise_floor = nf;
  }
  r.get(node, "min_r2", path, p.min_r2);
  r.get(node, "p", path, p.p);
  r.get(node, "degree", path, p.degree);
  r.get_list(node, "test_eigenvalues", path, p.test_eigenvalues);
}

ExperimentConfig from_yaml(const YAML::Node& root) {
  Reader r;
  ExperimentConfig cfg;
  if (!root || root.IsNull()) throw ConfigError({"config is empty"});
  if (!r.check_map(root, "", {"schema", "seed", "output", "graph", "family", "disorder",
                              "estimators", "params"}))
    throw ConfigError(r.violations);
  if (!root["schema"]) r.fail("schema", "missing; this build reads schema 1");
  r.get(root, "schema", "", cfg.schema);
  if (root["schema"] && cfg.schema != kConfigSchema)
    r.fail("schema", fmt::format("unsupported schema {}; this build reads schema {}", cfg.schema,
                                 kConfigSchema));
  r.get(root, "seed", "", cfg.seed);
  r.get(root, "output", "", cfg.output);
  if (root["graph"]) read_graph(r, root["graph"], cfg.graph);
  if (root["family"]) read_family(r, root["family"], cfg.family);
  if (root["disorder"]) read_disorder(r, root["disorder"], cfg);
  std::vector<std::string> names;
  r.get_list(root, "estimators", "", names);
  for (const auto& n : names) {
    if (auto e = parse_estimator(n)) cfg.estimators.push_back(*e);
    else r.fail("estimators", fmt::format("unknown estimator '{}'", n));
  }
  if (root["params"]) read_params(r, root["params"], cfg.params);
  if (!r.violations.empty()) throw ConfigError(r.violations);
  return cfg;
}

bool in_unit_interval(double v) { return v > 0.0 && v < 1.0; }

}  // namespace

std::string estimator_name(Estimator e) {
  for (const auto& n : kEstimatorNames)
    if (n.id == e) return n.name;
  return "?";
}

std::optional<Estimator> parse_estimator(const std::string& name) {
  for (const auto& n : kEstimatorNames)
    if (name == n.name) return n.id;
  if (name == "identities") return Estimator::Identities;
  if (name == "fmec") return Estimator::Fmec;
  return std::nullopt;
}

const std::vector<Estimator>& all_estimators() {
  static const std::vector<Estimator> all = [] {
    std::vector<Estimator> v;
    for (const auto& n : kEstimatorNames) v.push_back(n.id);
    return v;
  }();
  return all;
}

std::vector<FamilySpec> FamilyConfig::ladder() const {
  std::vector<FamilySpec> out;
  switch (kind) {
    case FamilySpec::Kind::NearIdentity:
      for (double phi : strengths) out.push_back(FamilySpec::near_identity(phi, seed));
      break;
    case FamilySpec::Kind::Haar: out.push_back(FamilySpec::haar(seed)); break;
    case FamilySpec::Kind::Grover: out.push_back(FamilySpec::grover()); break;
    case FamilySpec::Kind::Dft: out.push_back(FamilySpec::dft()); break;
    case FamilySpec::Kind::Identity: out.push_back(FamilySpec::identity()); break;
  }
  return out;
}

bool ExperimentConfig::selects(Estimator e) const {
  return std::find(estimators.begin(), estimators.end(), e) != estimators.end();
}

ConfigError::ConfigError(std::vector<std::string> violations)
    : std::runtime_error([&] {
        std::string msg = "invalid config";
        for (const auto& v : violations) msg += "\n  " + v;
        return msg;
      }()),
      violations_(std::move(violations)) {}

ExperimentConfig parse_config_text(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& ex) {
    throw ConfigError({fmt::format("malformed config: {}", ex.what())});
  }
  return from_yaml(root);
}

ExperimentConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({fmt::format("cannot open config file '{}'", path)});
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

int ket_index(const Digraph& g, const KetSpec& k) { return g.edge_index(k.y, k.x); }

void validate(const ExperimentConfig& cfg) {
  std::vector<std::string> bad;
  auto fail = [&](const std::string& key, const std::string& what) {
    bad.push_back(fmt::format("{}: {}", key, what));
  };
  const Params& p = cfg.params;

  if (cfg.estimators.empty()) fail("estimators", "no estimator selected");

  std::optional<Digraph> g;
  try {
    g = Digraph::build(cfg.graph);
  } catch (const std::exception& ex) {
    fail("graph", ex.what());
  }
  if (g && g->edge_count() > kMaxBasisDim)
    fail("graph", fmt::format("edge basis dimension {} exceeds the dense cap {}", g->edge_count(),
                              kMaxBasisDim));
  if (!g || g->edge_count() > kMaxBasisDim) throw ConfigError(bad);

  if (cfg.family.strengths.empty()) fail("family.strengths", "empty ladder");
  for (double phi : cfg.family.strengths)
    if (!(phi >= 0.0) || !std::isfinite(phi))
      fail("family.strengths", fmt::format("strength must be >= 0, got {}", phi));

  if (p.n_samples < 2) fail("params.n_samples", "need at least 2 samples");
  if (!(p.slack_sigma >= 0.0)) fail("params.slack_sigma", "must be >= 0");
  if (p.ball.root < 0 || p.ball.root >= g->vertex_count())
    fail("params.ball.root", fmt::format("vertex {} not in the graph", p.ball.root));
  if (p.ball.radius < 0) fail("params.ball.radius", "must be >= 0");
  if (p.reference < 0 || p.reference >= g->vertex_count())
    fail("params.reference", fmt::format("vertex {} not in the graph", p.reference));
  for (const auto& [key, ket] : {std::pair{"params.e", p.e}, std::pair{"params.f", p.f}}) {
    if (!ket) continue;
    try {
      ket_index(*g, *ket);
    } catch (const std::exception&) {
      fail(key, fmt::format("|{} {}> is not an edge of the graph", ket->x, ket->y));
    }
  }
  try {
    if (p.z_points.empty()) p.z_grid.validate();
    for (cplx z : p.z_points) check_guard_band(z);
  } catch (const std::exception& ex) {
    fail(p.z_points.empty() ? "params.z_grid" : "params.z_points", ex.what());
  }
  for (double theta : p.test_eigenvalues)
    if (p.arcs.endpoint_distance(theta) < 1e-6)
      fail("params.arcs", fmt::format("an endpoint lies within 1e-6 of the test eigenvalue angle {}",
                                      theta));
  if (!bad.empty()) throw ConfigError(bad);

  const bool near_identity = cfg.family.kind == FamilySpec::Kind::NearIdentity;
  const bool ball_fits =
      p.ball.root >= 0 && p.ball.root < g->vertex_count() && p.ball.radius >= 0;

  for (Estimator est : cfg.estimators) {
    const std::string name = estimator_name(est);
    switch (est) {
      case Estimator::FracMom:
        if (!in_unit_interval(p.s)) fail("params.s", "s must lie in (0, 1)");
        break;
      case Estimator::SpecAvg:
        if (p.quadrature_nodes < 64) fail("params.quadrature_nodes", "specavg needs at least 64 nodes");
        if (p.n_outer < 2) fail("params.n_outer", "need at least 2 outer samples");
        for (cplx z : p.z_points)
          if (std::abs(z) >= 1.0) fail("params.z_points", "specavg needs |z| < 1");
        break;
      case Estimator::GapProb:
        if (cfg.family.kind != FamilySpec::Kind::Identity)
          fail("family.kind", "gapprob requires the identity family (fully localized walk)");
        if (p.etas.empty()) fail("params.etas", "empty eta grid");
        for (double eta : p.etas)
          if (!(eta > 0.0)) fail("params.etas", fmt::format("eta must be > 0, got {}", eta));
        break;
      case Estimator::Decay:
        if (!(p.s > 0.0)) fail("params.s", "s must be > 0");
        if (!(p.s < 1.0 / 3.0)) fail("params.s", "s must be < 1/3");
        if (!near_identity) fail("family.kind", "decay requires the near_identity family");
        if (p.z_points.size() > 1) fail("params.z_points", "decay takes a single z");
        break;
      case Estimator::DynLoc:
        if (!near_identity) fail("family.kind", "dynloc requires the near_identity family");
        if (p.horizon < 0) fail("params.horizon", "must be >= 0");
        break;
      case Estimator::Fmec: {
        const double beta = p.beta_value();
        if (!in_unit_interval(p.s)) fail("params.s", "s must lie in (0, 1)");
        if (!(beta > 0.0 && beta < p.s)) fail("params.beta", "beta must lie in (0, s)");
        if (beta > 1.0 - beta / p.s) fail("params.beta", "beta must satisfy beta <= 1 - beta/s");
        if (!p.e || !p.f) {
          fail("params.e", "check-fmec needs both e and f");
          break;
        }
        if (!ball_fits) break;
        const ConsistentSubset B = edge_ball(*g, p.ball.root, p.ball.radius);
        try {
          const int e = ket_index(*g, *p.e);
          const int f = ket_index(*g, *p.f);
          if (!B.contains(f)) fail("params.f", "f must lie in the ball B");
          if (B.contains(e)) fail("params.e", "e must lie outside the ball B");
          const Vertex x = g->edge(e).from;
          for (int b : B.indices())
            if (g->edge(b).from == x || g->edge(b).to == x) {
              fail("params.e", "the source vertex of e must not touch the ball B");
              break;
            }
        } catch (const std::exception&) {
        }
        break;
      }
      case Estimator::Identities:
        if (ball_fits && g->eccentricity(p.ball.root) <= p.ball.radius + 1)
          fail("params.ball.radius",
               fmt::format("radii {} and {} must fit around vertex {} (eccentricity {})",
                           p.ball.radius, p.ball.radius + 1, p.ball.root,
                           g->eccentricity(p.ball.root)));
        break;
      case Estimator::Smallness: {
        if (!in_unit_interval(p.s)) fail("params.s", "s must lie in (0, 1)");
        if (!(p.p > 1.0 / (1.0 - p.s))) fail("params.p", "p must exceed 1/(1-s)");
        if (!p.e || !p.f) fail("params.e", "smallness needs both e and f");
        if (!ball_fits) break;
        const double nb = static_cast<double>(ball_vertices(*g, p.ball).size());
        const double bound = std::pow(nb, -2.0) *
                             std::pow(g->max_degree(), -(1.0 + 2.0 * p.p * p.s) / (p.s * p.p));
        for (const FamilySpec& spec : cfg.family.ladder()) {
          const double dist = scattering_distance(make_family(*g, spec),
                                                  ScatteringFamily::identity(*g));
          if (!(dist < bound))
            fail("family.strengths", fmt::format("||S - I|| = {:.3g} violates the smallness "
                                                 "hypothesis bound {:.3g}", dist, bound));
        }
        break;
      }
      case Estimator::WeakConv:
        if (p.degree < 0) fail("params.degree", "must be >= 0");
        break;
      case Estimator::Build:
      case Estimator::Spectrum:
      case Estimator::Ec:
        break;
    }
  }
  // Deduplicate messages from estimators that share a constraint.
  std::vector<std::string> unique;
  std::set<std::string> seen;
  for (auto& m : bad)
    if (seen.insert(m).second) unique.push_back(m);
  if (!unique.empty()) throw ConfigError(unique);
}

nlohmann::json to_json(const ExperimentConfig& cfg) {
  using nlohmann::json;
  const Params& p = cfg.params;
  json graph{{"kind", graph_kind_name(cfg.graph.kind)}};
  switch (cfg.graph.kind) {
    case GraphSpec::Kind::Path:
    case GraphSpec::Kind::Cycle:
    case GraphSpec::Kind::Complete: graph["size"] = cfg.graph.size; break;
    case GraphSpec::Kind::TorusGrid:
      graph["rows"] = cfg.graph.rows;
      graph["cols"] = cfg.graph.cols;
      break;
    case GraphSpec::Kind::Tree:
      graph["branching"] = cfg.graph.branching;
      graph["depth"] = cfg.graph.depth;
      break;
    case GraphSpec::Kind::Explicit: {
      graph["vertices"] = cfg.graph.vertex_count;
      json edges = json::array();
      for (const auto& [a, b] : cfg.graph.edges) edges.push_back({a, b});
      graph["edges"] = edges;
      graph["allow_disconnected"] = cfg.graph.allow_disconnected;
      break;
    }
  }
  json disorder{{"kind", cfg.disorder_text}};
  if (cfg.disorder.kind() == DisorderSpec::Kind::Density) disorder["table"] = cfg.disorder.table();
  if (cfg.disorder.kind() == DisorderSpec::Kind::PointMass) disorder["theta"] = cfg.disorder.theta0();
  json estimators = json::array();
  for (Estimator e : cfg.estimators) estimators.push_back(estimator_name(e));

  json arcs;
  if (p.arcs.is_full()) arcs = "full";
  else if (p.arcs.is_empty()) arcs = "empty";
  else {
    arcs = json::array();
    for (const auto& a : p.arcs.arcs()) arcs.push_back({a.lo, a.lo + a.length});
  }
  json zs = json::array();
  for (cplx z : p.z_points) zs.push_back({z.real(), z.imag()});
  auto ket = [](const std::optional<KetSpec>& k) -> json {
    return k ? json{k->x, k->y} : json(nullptr);
  };
  json params{
      {"s", p.s},
      {"beta", p.beta_value()},
      {"arcs", arcs},
      {"z_grid", {{"radii", p.z_grid.radii}, {"angles", p.z_grid.angles}}},
      {"z_points", zs},
      {"etas", p.etas},
      {"ball", {{"root", p.ball.root}, {"radius", p.ball.radius}}},
      {"n_samples", p.n_samples},
      {"horizon", p.horizon},
      {"e", ket(p.e)},
      {"f", ket(p.f)},
      {"quadrature_nodes", p.quadrature_nodes},
      {"n_outer", p.n_outer},
      {"slack_sigma", p.slack_sigma},
      {"deltas", p.deltas},
      {"theta_cells", p.theta_cells},
      {"cw_realizations", p.cw_realizations},
      {"reference", p.reference},
      {"targets_per_distance", p.targets_per_distance},
      {"fit_min_distance", p.fit_min_distance},
      {"fit_max_distance", p.fit_max_distance},
      {"noise_floor", p.noise_floor ? json(*p.noise_floor) : json(nullptr)},
      {"min_r2", p.min_r2},
      {"p", p.p},
      {"degree", p.degree},
      {"test_eigenvalues", p.test_eigenvalues},
  };
  return json{
      {"schema", cfg.schema},
      {"seed", cfg.seed},
      {"graph", graph},
      {"family",
       {{"kind", family_kind_name(cfg.family.kind)},
        {"strengths", cfg.family.strengths},
        {"seed", cfg.family.seed}}},
      {"disorder", disorder},
      {"estimators", estimators},
      {"params", params},
  };
}

std::string sha256_hex(const std::string& data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("SHA-256 digest failed");
  std::string hex;
  hex.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
  return hex;
}

std::string config_hash(const ExperimentConfig& cfg) { return sha256_hex(to_json(cfg).dump()); }

}  // namespace sqw
