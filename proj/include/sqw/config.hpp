#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "sqw/estimators.hpp"
#include "sqw/graph.hpp"
#include "sqw/spectral.hpp"
#include "sqw/walk.hpp"

namespace sqw {

inline constexpr int kConfigSchema = 1;

// Estimator names accepted under `estimators:` and as CLI subcommands.
enum class Estimator {
  Build,
  Spectrum,
  Ec,
  FracMom,
  SpecAvg,
  GapProb,
  Decay,
  DynLoc,
  Identities,
  Fmec,
  Smallness,
  WeakConv,
};

std::string estimator_name(Estimator e);
std::optional<Estimator> parse_estimator(const std::string& name);
const std::vector<Estimator>& all_estimators();

/// A directed edge written as the ket |x y>, i.e. the edge y -> x.
struct KetSpec {
  Vertex x = 0;
  Vertex y = 0;
};

struct FamilyConfig {
  FamilySpec::Kind kind = FamilySpec::Kind::Identity;
  std::vector<double> strengths{0.0};
  std::uint64_t seed = 1;

  // One family spec per ladder entry.
  std::vector<FamilySpec> ladder() const;
};

struct Params {
  double s = 0.2;
  std::optional<double> beta;  // default s/(1+s) - 1e-3
  ArcSet arcs = ArcSet::full_circle();
  std::string arcs_text = "full";
  ZGrid z_grid = ZGrid::defaults();
  std::vector<cplx> z_points;  // overrides z_grid when non-empty
  std::vector<double> etas{0.003, 0.01, 0.03};
  BallSpec ball{0, 3};
  int n_samples = 1000;
  int horizon = 1000;
  std::optional<KetSpec> e;
  std::optional<KetSpec> f;
  int quadrature_nodes = 128;
  int n_outer = 100;
  double slack_sigma = 3.0;
  std::vector<double> deltas{0.9, 0.99, 0.999};
  int theta_cells = 16;
  int cw_realizations = 16;
  Vertex reference = 0;
  int targets_per_distance = 0;  // 0 selects the estimator default
  int fit_min_distance = 1;
  int fit_max_distance = kInfiniteDistance;
  std::optional<double> noise_floor;
  double min_r2 = 0.9;
  double p = 2.0;          // smallness exponent
  int degree = 4;          // weak-convergence monomial degree
  std::vector<double> test_eigenvalues;  // angles that arc endpoints must avoid

  double beta_value() const { return beta ? *beta : s / (1.0 + s) - 1e-3; }
  std::vector<cplx> zs() const { return z_points.empty() ? z_grid.points() : z_points; }
};

struct ExperimentConfig {
  int schema = kConfigSchema;
  std::uint64_t seed = 0;
  std::string output = "sqw_out";
  GraphSpec graph = GraphSpec::cycle(16);
  FamilyConfig family;
  DisorderSpec disorder = DisorderSpec::uniform();
  std::string disorder_text = "uniform";
  std::vector<Estimator> estimators;
  Params params;

  bool selects(Estimator e) const;
};

/// Every violation found while parsing or validating, one message each.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> violations);
  const std::vector<std::string>& violations() const { return violations_; }

 private:
  std::vector<std::string> violations_;
};

ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig parse_config(const std::string& path);

/// Constraint checks for the selected estimators. Throws ConfigError.
void validate(const ExperimentConfig& cfg);

/// Canonical JSON form; output directory excluded.
nlohmann::json to_json(const ExperimentConfig& cfg);
/// SHA-256 hex digest of the canonical JSON.
std::string config_hash(const ExperimentConfig& cfg);
std::string sha256_hex(const std::string& data);

/// Edge index of a ket on g; throws when the vertices are not adjacent.
int ket_index(const Digraph& g, const KetSpec& k);

}  // namespace sqw
