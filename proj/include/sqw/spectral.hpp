#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "sqw/graph.hpp"
#include "sqw/types.hpp"
#include "sqw/walk.hpp"

namespace sqw {

inline constexpr double kClusterTol = 1e-8;
inline constexpr double kArcEndpointTol = 1e-12;

/// Finite union of disjoint open arcs of the unit circle.
class ArcSet {
 public:
  struct Arc {
    double lo = 0.0;      // start angle in [0, 2pi)
    double length = 0.0;  // counterclockwise extent in (0, 2pi)
  };

  ArcSet() = default;  // empty set
  static ArcSet full_circle();
  // Arcs given as (theta_lo, theta_hi) pairs; the arc runs counterclockwise
  // from theta_lo to theta_hi and may wrap past 0.
  static ArcSet from_bounds(const std::vector<std::pair<double, double>>& bounds);
  static ArcSet upper_half();

  bool is_full() const { return full_; }
  bool is_empty() const { return !full_ && arcs_.empty(); }
  const std::vector<Arc>& arcs() const { return arcs_; }
  double measure() const;

  bool contains_angle(double theta) const;
  bool contains(cplx lambda) const;
  // Angular distance from theta to the nearest arc endpoint (inf if none).
  double endpoint_distance(double theta) const;
  // Midpoints of an m-cell partition of each arc, with the cell width.
  std::vector<std::pair<double, double>> midpoint_grid(int cells_per_arc) const;

  std::string describe() const;

 private:
  bool full_ = false;
  std::vector<Arc> arcs_;
};

/// Unit-circle spectral decomposition with eigenvalue clusters.
struct EigenSystem {
  std::vector<cplx> eigenvalues;         // one per eigenvector column
  Matrix vectors;                        // orthonormal columns
  std::vector<std::vector<int>> clusters;
  std::vector<cplx> cluster_values;      // unit-modulus representative per cluster

  int dim() const { return static_cast<int>(vectors.rows()); }
  int cluster_count() const { return static_cast<int>(clusters.size()); }
  // <e|P_alpha f> for every cluster.
  std::vector<cplx> basis_weights(int e, int f) const;
};

EigenSystem eigendecompose(const Matrix& u, double eps_cluster = kClusterTol);
inline EigenSystem eigendecompose(const WalkOperator& u, double eps_cluster = kClusterTol) {
  return eigendecompose(u.matrix, eps_cluster);
}

struct SpectralAtom {
  cplx lambda;
  cplx weight;         // <psi|P_alpha phi>
  double diag_weight;  // <psi|P_alpha psi>
};

struct SpectralMeasure {
  std::vector<SpectralAtom> atoms;
};

SpectralMeasure spectral_measure(const EigenSystem& eig, const Vector& psi, const Vector& phi);
SpectralMeasure spectral_measure(const EigenSystem& eig, int e, int f);

double ec(const SpectralMeasure& mu, const ArcSet& arcs);
double interpolated_ec(const SpectralMeasure& mu, const ArcSet& arcs, double beta);
double ec(const EigenSystem& eig, const Vector& psi, const Vector& phi, const ArcSet& arcs);
double ec(const EigenSystem& eig, int e, int f, const ArcSet& arcs);
double interpolated_ec(const EigenSystem& eig, const Vector& psi, const Vector& phi,
                       const ArcSet& arcs, double beta);
double interpolated_ec(const EigenSystem& eig, int e, int f, const ArcSet& arcs, double beta);

/// CSV with columns lambda_re,lambda_im,weight_abs,diag_weight.
void write_spectral_csv(std::ostream& os, const SpectralMeasure& mu);

void check_guard_band(cplx z);
cplx resolvent_element(const Matrix& u, cplx z, int e, int f);
Vector resolvent_column(const Matrix& u, cplx z, int f);
Vector resolvent_row(const Matrix& u, cplx z, int e);
Matrix resolvent(const Matrix& u, cplx z);
// Resolvent assembled from the spectral decomposition.
Matrix resolvent_from_spectrum(const EigenSystem& eig, cplx z);

/// <e|Re((U+z)(U-z)^{-1})|e>.
double cayley_real_diag(const Matrix& u, cplx z, int e);
/// Same quantity through (1-|z|^2) * ||(U-z)^{-1} e||^2.
double cayley_real_diag_from_norm(const Matrix& u, cplx z, int e);

/// sup_{|n|<=N} |sum_{alpha in I} lambda_alpha^n <e|P_alpha f>|.
double dynamical_probe(const EigenSystem& eig, int e, int f, const ArcSet& arcs, int horizon);
/// Probe for one source edge e against many targets.
std::vector<double> dynamical_probe_many(const EigenSystem& eig, int e,
                                         const std::vector<int>& targets, const ArcSet& arcs,
                                         int horizon);

struct WeakConvergenceRow {
  int step = 0;  // position in the restriction sequence
  int k = 0;
  double error = 0.0;  // |<e|(U^F)^k f> - <e|U^k f>|
};

/// Monomial moments of restricted walks against the full walk. The
/// restrictions must have nested bases containing e and f.
std::vector<WeakConvergenceRow> weak_convergence_scan(const WalkOperator& full,
                                                      const std::vector<WalkOperator>& sequence,
                                                      int e, int f, int degree);

}  // namespace sqw
