#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "sqw/graph.hpp"
#include "sqw/random.hpp"
#include "sqw/types.hpp"

namespace sqw {

// Tolerance for the unitarity of each S(x).
inline constexpr double kFamilyUnitarityTol = 1e-12;

struct FamilySpec {
  enum class Kind { Identity, NearIdentity, Haar, Grover, Dft };

  Kind kind = Kind::Identity;
  double strength = 0.0;  // near-identity: Hilbert-Schmidt deviation bound phi
  std::uint64_t seed = 0;

  static FamilySpec identity() { return {}; }
  static FamilySpec near_identity(double strength, std::uint64_t seed) {
    return {Kind::NearIdentity, strength, seed};
  }
  static FamilySpec haar(std::uint64_t seed) { return {Kind::Haar, 0.0, seed}; }
  static FamilySpec grover() { return {Kind::Grover, 0.0, 0}; }
  static FamilySpec dft() { return {Kind::Dft, 0.0, 0}; }

  std::string describe() const;
};

/// One unitary S(x) per vertex; rows index the outgoing neighbor z, columns
/// the incoming neighbor y, both in the graph's neighbor order.
class ScatteringFamily {
 public:
  ScatteringFamily(const Digraph& g, std::vector<Matrix> matrices);
  static ScatteringFamily identity(const Digraph& g);

  int vertex_count() const { return static_cast<int>(matrices_.size()); }
  const Matrix& at(Vertex x) const { return matrices_.at(static_cast<std::size_t>(x)); }

 private:
  std::vector<Matrix> matrices_;
};

ScatteringFamily make_family(const Digraph& g, const FamilySpec& spec);

/// sup_x ||S(x) - S'(x)||_HS.
double scattering_distance(const ScatteringFamily& a, const ScatteringFamily& b);

/// Single-site phase distribution on [0, 2pi).
class DisorderSpec {
 public:
  enum class Kind { Uniform, Density, PointMass };

  static DisorderSpec uniform();
  // Piecewise-constant density on equal bins of [0, 2pi); must integrate to 1.
  static DisorderSpec density(std::vector<double> table);
  static DisorderSpec point_mass(double theta0);

  Kind kind() const { return kind_; }
  const std::vector<double>& table() const { return table_; }
  double theta0() const { return theta0_; }

  // ||tau||_inf; +inf for a point mass.
  double sup_norm() const;
  double density_at(double theta) const;
  double sample(Rng& rng) const;

  // Nodes and tau-weighted periodic trapezoid weights on [0, 2pi). A point
  // mass collapses to its single atom.
  std::vector<std::pair<double, double>> quadrature(int nodes) const;

  std::string describe() const;

 private:
  Kind kind_ = Kind::Uniform;
  std::vector<double> table_;
  std::vector<double> cdf_;
  double theta0_ = 0.0;
};

struct Disorder {
  std::vector<double> phases;  // omega_x per vertex, in [0, 2pi)
  std::uint64_t seed = 0;
  std::uint64_t index = 0;
};

Disorder sample_disorder(const Digraph& g, const DisorderSpec& mu, std::uint64_t seed,
                         std::uint64_t index);
Disorder zero_disorder(const Digraph& g);

/// Dense walk unitary on the edge basis or on a sub-basis. `basis[i]` is the
/// global edge index carried by row/column i.
struct WalkOperator {
  Matrix matrix;
  std::vector<int> basis;
  bool full = true;

  Eigen::Index dim() const { return matrix.rows(); }
  // Local position of a global edge index, or -1.
  int local_index(int edge) const;
};

/// U_omega = D_omega U_S on l^2(D).
WalkOperator build_unitary(const Digraph& g, const ScatteringFamily& S, const Disorder& omega);

/// Walk on l^2(F) with identity scattering on the boundary vertices of F.
WalkOperator restricted_unitary(const Digraph& g, const ScatteringFamily& S,
                                const Disorder& omega, const ConsistentSubset& F);

struct Decoupling {
  WalkOperator inside;   // on l^2(F)
  WalkOperator outside;  // on l^2(F^c)
};

Decoupling restrict(const Digraph& g, const ScatteringFamily& S, const Disorder& omega,
                    const ConsistentSubset& F);

/// Reflecting walk U^(n) with S(x) replaced by the identity on the sphere
/// S_n(root), split along H_n = span{edges inside B_n}.
struct BallDecoupling {
  WalkOperator decoupled;  // U^(n) on the full edge basis
  WalkOperator inside;     // U^{B_n} on H_n
  WalkOperator outside;    // U^{B_n^c} on H_n^perp
  ConsistentSubset subspace;
};

BallDecoupling ball_restrict(const Digraph& g, const ScatteringFamily& S, const Disorder& omega,
                             const BallSpec& ball);

/// Embed U^F (+) U^{F^c} into the full edge basis.
Matrix direct_sum(const Decoupling& parts, int edge_count);

/// T = U - U^F (+) U^{F^c}.
Matrix boundary_operator(const WalkOperator& full, const Decoupling& parts);

/// Sparse column form used for repeated application. Each output entry is
/// accumulated over columns in ascending basis order, skipping exact zeros,
/// so a restriction reproduces the full walk bit-for-bit wherever their
/// columns agree.
class SparseWalk {
 public:
  explicit SparseWalk(const WalkOperator& op);

  Vector apply(const Vector& v) const;
  Vector apply_adjoint(const Vector& v) const;
  Eigen::Index dim() const { return static_cast<Eigen::Index>(columns_.size()); }

 private:
  struct Entry {
    int row;
    cplx value;
  };
  static Vector multiply(const std::vector<std::vector<Entry>>& cols, const Vector& v);

  std::vector<std::vector<Entry>> columns_;
  std::vector<std::vector<Entry>> adjoint_columns_;
};

/// One line per nonzero entry: "row_edge col_edge re im" (global edge ids).
void write_matrix_text(std::ostream& os, const WalkOperator& op, double zero_tol = 0.0);

}  // namespace sqw
