#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sqw/graph.hpp"
#include "sqw/parallel.hpp"
#include "sqw/spectral.hpp"
#include "sqw/types.hpp"
#include "sqw/walk.hpp"

namespace sqw {

struct MCEstimate {
  double mean = 0.0;
  double std_error = 0.0;  // sample standard deviation / sqrt(n)
  int n_samples = 0;
  std::uint64_t seed = 0;
};

/// Mean and standard error with a fixed-order reduction; needs n >= 2.
MCEstimate summarize(std::span<const double> samples, std::uint64_t seed);

struct ZGrid {
  std::vector<double> radii{0.5, 0.9, 0.99, 0.999, 1.001, 1.01, 1.1, 1.5};
  int angles = 64;

  static ZGrid defaults() { return {}; }
  void validate() const;
  std::vector<cplx> points() const;
  // Points with |z| < 1 only.
  std::vector<cplx> inner_points() const;
};

struct ZEstimate {
  cplx z;
  MCEstimate estimate;
};

struct FractionalMomentResult {
  std::vector<ZEstimate> rows;
  double grid_sup = 0.0;  // lower bound of the true supremum over z
  cplx grid_argsup;
};

/// E|<e|(U_omega - z)^{-1} f>|^s for every z.
FractionalMomentResult mc_fractional_moment(const Digraph& g, const ScatteringFamily& S,
                                            const DisorderSpec& mu, int e, int f, double s,
                                            const std::vector<cplx>& zs, int n_samples,
                                            std::uint64_t seed, const Executor& exec);

/// Average of <e|Re((U+z)(U-z)^{-1})|e> over the phase at the source vertex of
/// e, other phases held at omega. Uses the tau-weighted trapezoid rule.
std::vector<double> single_phase_average(const Digraph& g, const ScatteringFamily& S,
                                         const Disorder& omega, const DisorderSpec& mu, int e,
                                         const std::vector<cplx>& zs, int nodes,
                                         double* min_integrand = nullptr);

/// Same average for uniform phases in closed form: the integrand is the real
/// part of a function analytic in exp(-i omega_x) on the closed disk, so the
/// average is its value at the origin.
std::vector<double> single_phase_average_uniform(const Digraph& g, const ScatteringFamily& S,
                                                 const Disorder& omega, int e,
                                                 const std::vector<cplx>& zs);

struct SpectralAverageResult {
  std::vector<ZEstimate> rows;
  double min_integrand = 0.0;  // smallest quadrature evaluation seen
  double grid_sup = 0.0;
};

SpectralAverageResult mc_spectral_average(const Digraph& g, const ScatteringFamily& S,
                                          const DisorderSpec& mu, int e,
                                          const std::vector<cplx>& zs, int nodes, int n_outer,
                                          std::uint64_t seed, const Executor& exec);

struct GapRow {
  cplx z;
  double eta = 0.0;
  MCEstimate estimate;
  double bound = 0.0;          // 4 pi^2 ||tau||_inf^2 d |B_n| eta
  bool bound_applies = false;  // eta < 1
  bool pass = true;            // estimate <= bound + 3 sigma, or bound not applicable
};

/// dist(e^{i(w_u+w_v)/2} blocks) from z for the identity-family walk on H_n.
double fully_localized_gap(const Digraph& g, const Disorder& omega, const BallSpec& ball, cplx z);

std::vector<GapRow> gap_probability(const Digraph& g, const DisorderSpec& mu, const BallSpec& ball,
                                    const std::vector<cplx>& zs, const std::vector<double>& etas,
                                    int n_samples, std::uint64_t seed, const Executor& exec);

struct GeometricResidual {
  double identity_residual = 0.0;  // Frobenius norm of the two-step identity defect
  double identity_scale = 0.0;     // Frobenius norm of R
  double cross_block_max = 0.0;    // max |<a|R^(n)|b>|, a in H_n, b in H_n^perp
  double screened_max = 0.0;       // max |<a|R^(n) T^(n) R^(n+1)|b>|, b in H_{n+3}^perp
  int screened_columns = 0;        // |H_{n+3}^perp|; zero means the check is vacuous
};

GeometricResidual check_geometric_resolvent(const Digraph& g, const ScatteringFamily& S,
                                            const Disorder& omega, cplx z, const BallSpec& ball);

// Absolute allowance for round-off in the correlator side of the inequality.
inline constexpr double kFmecRoundoff = 1e-12;

struct FmecParams {
  double s = 0.3;
  double beta = 0.2;
  ArcSet arcs = ArcSet::full_circle();
  std::vector<double> deltas{0.9, 0.99, 0.999};
  int theta_cells = 16;   // midpoint cells per arc
  int n_samples = 500;
  int cw_realizations = 16;
  int cw_nodes = 128;     // quadrature nodes for non-uniform disorder
  ZGrid cw_grid = ZGrid::defaults();

  void validate() const;
};

struct FmecTerm {
  int f_prime = 0;
  double t_beta_sum = 0.0;  // sum_e' t_{f'e'}^beta
  double moment = 0.0;      // max over delta of the theta-integrated fractional moment
  double moment_std_error = 0.0;
  double best_delta = 0.0;
};

struct FmecReport {
  MCEstimate lhs;
  double rhs = 0.0;
  double rhs_std_error = 0.0;
  double c_w = 0.0;  // proxy: grid-sup of the single-phase average
  std::vector<FmecTerm> terms;
  Eigen::MatrixXd t_table;  // |<a|T b>| on the full edge basis
  bool violation = false;
  double slack() const { return rhs - lhs.mean; }
};

/// Both sides of the EC versus fractional-moment inequality with E = D.
FmecReport check_fmec_bound(const Digraph& g, const ScatteringFamily& S, const DisorderSpec& mu,
                            const ConsistentSubset& B, int e, int f, const FmecParams& params,
                            std::uint64_t seed, const Executor& exec);

struct DecayFit {
  double c = 0.0;
  double g = 0.0;
  double g_std_error = 0.0;
  double r_squared = 0.0;
  int min_distance = 0;
  int max_distance = 0;
  int points = 0;
};

/// Unweighted least squares of log(mean) = log c - g d. Points with
/// mean < 5 std_error, mean <= noise_floor or outside [lo, hi] are dropped.
DecayFit fit_decay(std::span<const int> distances, std::span<const double> means,
                   std::span<const double> std_errors, double noise_floor = 0.0, int lo = 0,
                   int hi = kInfiniteDistance);

struct DistanceEstimate {
  int distance = 0;
  int targets = 0;
  MCEstimate estimate;
};

struct DecayConfig {
  GraphSpec graph = GraphSpec::cycle(60);
  std::vector<double> strengths{0.2, 0.1, 0.05};
  std::uint64_t family_seed = 1;
  DisorderSpec disorder = DisorderSpec::uniform();
  double s = 0.2;
  cplx z{1.01, 0.0};
  int n_samples = 2000;
  Vertex reference = 0;
  int fit_min_distance = 1;
  int fit_max_distance = kInfiniteDistance;
  double noise_floor = 0.0;
};

struct DecayCurve {
  double strength = 0.0;
  std::vector<DistanceEstimate> rows;
  DecayFit fit;
};

/// Reference edge |x y> with x = reference and y its first neighbor.
int reference_edge(const Digraph& g, Vertex reference);
/// Edges |x'y'> grouped by d(reference, x').
std::vector<std::vector<int>> edges_by_distance(const Digraph& g, Vertex reference,
                                                int per_distance = 0);

std::vector<DecayCurve> decay_experiment(const DecayConfig& config, std::uint64_t seed,
                                         const Executor& exec);

struct DynlocConfig {
  GraphSpec graph = GraphSpec::cycle(60);
  std::vector<double> strengths{0.2, 0.1, 0.05};
  std::uint64_t family_seed = 1;
  DisorderSpec disorder = DisorderSpec::uniform();
  ArcSet arcs = ArcSet::full_circle();
  int horizon = 1000;
  int n_samples = 1000;
  Vertex reference = 0;
  int targets_per_distance = 2;
  int fit_min_distance = 1;
  int fit_max_distance = kInfiniteDistance;
  double noise_floor = 1e-12;
};

struct DynlocCurve {
  double strength = 0.0;
  std::vector<DistanceEstimate> probe;
  std::vector<DistanceEstimate> ec;
  double max_excess = 0.0;  // max over samples of probe - EC
  DecayFit fit;
};

std::vector<DynlocCurve> dynloc_experiment(const DynlocConfig& config, std::uint64_t seed,
                                           const Executor& exec);

struct SmallnessReport {
  int radius = 0;
  int ball_size = 0;
  double distance_to_identity = 0.0;  // ||S - I||
  double hypothesis_bound = 0.0;      // |B_n|^-2 d^{-(1+2ps)/(sp)}
  double scale = 0.0;                 // (||S - I|| |B_n|^2)^{s/(1+2sp)}
  MCEstimate estimate;
};

/// E|<e|R^{B_n}(z) f>|^s for non-equivalent e, f inside H_n.
SmallnessReport resolvent_smallness_check(const Digraph& g, const ScatteringFamily& S,
                                          const DisorderSpec& mu, const BallSpec& ball, int e,
                                          int f, cplx z, double s, double p, int n_samples,
                                          std::uint64_t seed, const Executor& exec);

}  // namespace sqw
