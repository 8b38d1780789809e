#include "sqw/walk.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <iomanip>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <stdexcept>

namespace sqw {
namespace {

double wrap_angle(double theta) {
  double t = std::fmod(theta, kTwoPi);
  if (t < 0.0) t += kTwoPi;
  if (t >= kTwoPi) t = 0.0;
  return t;
}

void check_dimension(Eigen::Index dim) {
  if (dim > kMaxBasisDim)
    throw std::length_error(
        fmt::format("edge basis dimension {} exceeds the cap of {}", dim, kMaxBasisDim));
}

void check_phases(const Digraph& g, const Disorder& omega) {
  if (static_cast<int>(omega.phases.size()) != g.vertex_count())
    throw std::invalid_argument(fmt::format("disorder has {} phases for {} vertices",
                                            omega.phases.size(), g.vertex_count()));
}

cplx complex_normal(Rng& rng, std::normal_distribution<double>& normal) {
  const double re = normal(rng);
  const double im = normal(rng);
  return {re * std::sqrt(0.5), im * std::sqrt(0.5)};
}

Matrix near_identity_block(int d, double strength, Rng& rng) {
  std::normal_distribution<double> normal;
  Matrix a(d, d);
  for (int j = 0; j < d; ++j)
    for (int i = 0; i < d; ++i) a(i, j) = complex_normal(rng, normal);
  Matrix h = 0.5 * (a + a.adjoint());
  const double hs = h.norm();
  if (hs == 0.0) h = Matrix::Identity(d, d) / std::sqrt(static_cast<double>(d));
  else h /= hs;
  Eigen::SelfAdjointEigenSolver<Matrix> es(h);
  Vector phases(d);
  for (int k = 0; k < d; ++k) phases(k) = std::polar(1.0, strength * es.eigenvalues()(k));
  return es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
}

Matrix haar_block(int d, Rng& rng) {
  std::normal_distribution<double> normal;
  Matrix z(d, d);
  for (int j = 0; j < d; ++j)
    for (int i = 0; i < d; ++i) z(i, j) = complex_normal(rng, normal);
  Eigen::HouseholderQR<Matrix> qr(z);
  Matrix q = qr.householderQ() * Matrix::Identity(d, d);
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int k = 0; k < d; ++k) {
    const cplx rk = r(k, k);
    const double mag = std::abs(rk);
    q.col(k) *= mag > 0.0 ? rk / mag : cplx{1.0, 0.0};
  }
  return q;
}

Matrix grover_block(int d) {
  return Matrix::Constant(d, d, cplx{2.0 / d, 0.0}) - Matrix::Identity(d, d);
}

Matrix dft_block(int d) {
  Matrix f(d, d);
  const double norm = 1.0 / std::sqrt(static_cast<double>(d));
  for (int j = 0; j < d; ++j)
    for (int k = 0; k < d; ++k)
      f(j, k) = std::polar(norm, kTwoPi * static_cast<double>((j * k) % d) / d);
  return f;
}

// Writes e^{i omega_x} S(x) into the columns of edges entering x. When
// `reflect` is set the block is the identity on the member slots.
void place_vertex(Matrix& m, const Digraph& g, Vertex x, const Matrix& s, double phase,
                  const std::vector<int>& local, bool reflect) {
  const auto in = g.incoming(x);
  const auto out = g.outgoing(x);
  const cplx ph = std::polar(1.0, phase);
  const auto d = static_cast<int>(in.size());
  for (int j = 0; j < d; ++j) {
    const int col = local[static_cast<std::size_t>(in[static_cast<std::size_t>(j)])];
    if (col < 0) continue;
    if (reflect) {
      m(local[static_cast<std::size_t>(out[static_cast<std::size_t>(j)])], col) = ph;
      continue;
    }
    for (int i = 0; i < d; ++i) {
      const cplx v = s(i, j);
      if (v != cplx{}) m(local[static_cast<std::size_t>(out[static_cast<std::size_t>(i)])], col) = ph * v;
    }
  }
}

WalkOperator extract_block(const WalkOperator& op, std::span<const int> indices) {
  WalkOperator block;
  block.basis.assign(indices.begin(), indices.end());
  block.full = block.basis.size() == op.basis.size();
  const auto n = static_cast<Eigen::Index>(indices.size());
  block.matrix.resize(n, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i)
      block.matrix(i, j) = op.matrix(indices[static_cast<std::size_t>(i)],
                                     indices[static_cast<std::size_t>(j)]);
  return block;
}

}  // namespace

std::string FamilySpec::describe() const {
  switch (kind) {
    case Kind::Identity: return "identity";
    case Kind::NearIdentity: return fmt::format("near-identity(phi={}, seed={})", strength, seed);
    case Kind::Haar: return fmt::format("haar(seed={})", seed);
    case Kind::Grover: return "grover";
    case Kind::Dft: return "dft";
  }
  return "unknown";
}

ScatteringFamily::ScatteringFamily(const Digraph& g, std::vector<Matrix> matrices)
    : matrices_(std::move(matrices)) {
  if (static_cast<int>(matrices_.size()) != g.vertex_count())
    throw std::invalid_argument(fmt::format("scattering family has {} matrices for {} vertices",
                                            matrices_.size(), g.vertex_count()));
  for (int x = 0; x < g.vertex_count(); ++x) {
    const Matrix& s = matrices_[static_cast<std::size_t>(x)];
    const int d = g.degree(x);
    if (s.rows() != d || s.cols() != d)
      throw std::invalid_argument(fmt::format("S({}) is {}x{} but the degree is {}", x, s.rows(),
                                              s.cols(), d));
    const double err = (s.adjoint() * s - Matrix::Identity(d, d)).norm();
    if (!(err < kFamilyUnitarityTol))
      throw std::invalid_argument(fmt::format("S({}) is not unitary (residual {:.3e})", x, err));
  }
}

ScatteringFamily ScatteringFamily::identity(const Digraph& g) {
  std::vector<Matrix> ms;
  ms.reserve(static_cast<std::size_t>(g.vertex_count()));
  for (int x = 0; x < g.vertex_count(); ++x) ms.push_back(Matrix::Identity(g.degree(x), g.degree(x)));
  return ScatteringFamily(g, std::move(ms));
}

ScatteringFamily make_family(const Digraph& g, const FamilySpec& spec) {
  if (spec.kind == FamilySpec::Kind::NearIdentity && !(spec.strength >= 0.0))
    throw std::invalid_argument(
        fmt::format("near-identity strength must be >= 0, got {}", spec.strength));
  std::vector<Matrix> ms;
  ms.reserve(static_cast<std::size_t>(g.vertex_count()));
  Rng rng = make_stream(derive_seed(spec.seed, StreamTag::Family),
                        static_cast<std::uint64_t>(spec.kind));
  for (int x = 0; x < g.vertex_count(); ++x) {
    const int d = g.degree(x);
    if (d < 1) throw std::invalid_argument(fmt::format("vertex {} has degree 0", x));
    switch (spec.kind) {
      case FamilySpec::Kind::Identity: ms.push_back(Matrix::Identity(d, d)); break;
      case FamilySpec::Kind::NearIdentity: ms.push_back(near_identity_block(d, spec.strength, rng)); break;
      case FamilySpec::Kind::Haar: ms.push_back(haar_block(d, rng)); break;
      case FamilySpec::Kind::Grover: ms.push_back(grover_block(d)); break;
      case FamilySpec::Kind::Dft: ms.push_back(dft_block(d)); break;
    }
  }
  return ScatteringFamily(g, std::move(ms));
}

double scattering_distance(const ScatteringFamily& a, const ScatteringFamily& b) {
  if (a.vertex_count() != b.vertex_count())
    throw std::invalid_argument("scattering families belong to different graphs");
  double sup = 0.0;
  for (int x = 0; x < a.vertex_count(); ++x) {
    if (a.at(x).rows() != b.at(x).rows())
      throw std::invalid_argument(
          fmt::format("scattering families disagree on the degree of vertex {}", x));
    sup = std::max(sup, (a.at(x) - b.at(x)).norm());
  }
  return sup;
}

DisorderSpec DisorderSpec::uniform() { return DisorderSpec{}; }

DisorderSpec DisorderSpec::density(std::vector<double> table) {
  if (table.empty()) throw std::invalid_argument("density table is empty");
  const double width = kTwoPi / static_cast<double>(table.size());
  DisorderSpec spec;
  spec.kind_ = Kind::Density;
  spec.cdf_.reserve(table.size());
  double acc = 0.0;
  for (std::size_t k = 0; k < table.size(); ++k) {
    if (!(table[k] >= 0.0) || !std::isfinite(table[k]))
      throw std::invalid_argument(fmt::format("density table entry {} is not a nonnegative number", k));
    acc += table[k] * width;
    spec.cdf_.push_back(acc);
  }
  if (std::abs(acc - 1.0) > 1e-9)
    throw std::invalid_argument(fmt::format("density table integrates to {} instead of 1", acc));
  spec.table_ = std::move(table);
  return spec;
}

DisorderSpec DisorderSpec::point_mass(double theta0) {
  if (!std::isfinite(theta0)) throw std::invalid_argument("point mass location is not finite");
  DisorderSpec spec;
  spec.kind_ = Kind::PointMass;
  spec.theta0_ = wrap_angle(theta0);
  return spec;
}

double DisorderSpec::sup_norm() const {
  switch (kind_) {
    case Kind::Uniform: return 1.0 / kTwoPi;
    case Kind::Density: return *std::max_element(table_.begin(), table_.end());
    case Kind::PointMass: return std::numeric_limits<double>::infinity();
  }
  return 0.0;
}

double DisorderSpec::density_at(double theta) const {
  switch (kind_) {
    case Kind::Uniform: return 1.0 / kTwoPi;
    case Kind::Density: {
      const auto k = std::min(table_.size() - 1,
                              static_cast<std::size_t>(wrap_angle(theta) / kTwoPi *
                                                       static_cast<double>(table_.size())));
      return table_[k];
    }
    case Kind::PointMass: return wrap_angle(theta) == theta0_ ? std::numeric_limits<double>::infinity() : 0.0;
  }
  return 0.0;
}

double DisorderSpec::sample(Rng& rng) const {
  switch (kind_) {
    case Kind::Uniform: return kTwoPi * uniform01(rng);
    case Kind::Density: {
      const double u = uniform01(rng) * cdf_.back();
      auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
      auto k = static_cast<std::size_t>(it - cdf_.begin());
      while (k < table_.size() && table_[k] == 0.0) ++k;
      k = std::min(k, table_.size() - 1);
      const double lo = k == 0 ? 0.0 : cdf_[k - 1];
      const double width = kTwoPi / static_cast<double>(table_.size());
      const double frac = std::clamp((u - lo) / (table_[k] * width), 0.0, 1.0);
      return wrap_angle((static_cast<double>(k) + frac) * width);
    }
    case Kind::PointMass: return theta0_;
  }
  return 0.0;
}

std::vector<std::pair<double, double>> DisorderSpec::quadrature(int nodes) const {
  if (kind_ == Kind::PointMass) return {{theta0_, 1.0}};
  if (nodes < 1) throw std::invalid_argument("quadrature needs at least one node");
  std::vector<std::pair<double, double>> rule;
  rule.reserve(static_cast<std::size_t>(nodes));
  const double h = kTwoPi / nodes;
  double total = 0.0;
  for (int j = 0; j < nodes; ++j) {
    const double theta = h * j;
    const double w = density_at(theta) * h;
    rule.emplace_back(theta, w);
    total += w;
  }
  if (!(total > 0.0)) throw std::invalid_argument("quadrature nodes miss the support of the density");
  for (auto& node : rule) node.second /= total;
  return rule;
}

std::string DisorderSpec::describe() const {
  switch (kind_) {
    case Kind::Uniform: return "uniform";
    case Kind::Density: return fmt::format("density({} bins)", table_.size());
    case Kind::PointMass: return fmt::format("point-mass({})", theta0_);
  }
  return "unknown";
}

Disorder sample_disorder(const Digraph& g, const DisorderSpec& mu, std::uint64_t seed,
                         std::uint64_t index) {
  Disorder omega;
  omega.seed = seed;
  omega.index = index;
  omega.phases.resize(static_cast<std::size_t>(g.vertex_count()));
  Rng rng = make_stream(seed, index);
  for (auto& p : omega.phases) p = mu.sample(rng);
  return omega;
}

Disorder zero_disorder(const Digraph& g) {
  Disorder omega;
  omega.phases.assign(static_cast<std::size_t>(g.vertex_count()), 0.0);
  return omega;
}

int WalkOperator::local_index(int edge) const {
  if (full) return edge >= 0 && edge < static_cast<int>(basis.size()) ? edge : -1;
  auto it = std::lower_bound(basis.begin(), basis.end(), edge);
  return it != basis.end() && *it == edge ? static_cast<int>(it - basis.begin()) : -1;
}

WalkOperator build_unitary(const Digraph& g, const ScatteringFamily& S, const Disorder& omega) {
  if (S.vertex_count() != g.vertex_count())
    throw std::invalid_argument("scattering family does not match the graph");
  check_phases(g, omega);
  check_dimension(g.edge_count());
  WalkOperator op;
  op.basis.resize(static_cast<std::size_t>(g.edge_count()));
  std::iota(op.basis.begin(), op.basis.end(), 0);
  op.matrix = Matrix::Zero(g.edge_count(), g.edge_count());
  for (Vertex x = 0; x < g.vertex_count(); ++x)
    place_vertex(op.matrix, g, x, S.at(x), omega.phases[static_cast<std::size_t>(x)], op.basis, false);
  return op;
}

WalkOperator restricted_unitary(const Digraph& g, const ScatteringFamily& S,
                                const Disorder& omega, const ConsistentSubset& F) {
  if (S.vertex_count() != g.vertex_count())
    throw std::invalid_argument("scattering family does not match the graph");
  if (F.universe_size() != g.edge_count())
    throw std::invalid_argument("edge subset does not belong to the graph");
  check_phases(g, omega);
  check_dimension(F.size());
  WalkOperator op;
  op.basis.assign(F.indices().begin(), F.indices().end());
  op.full = F.size() == g.edge_count();
  std::vector<int> local(static_cast<std::size_t>(g.edge_count()), -1);
  for (std::size_t i = 0; i < op.basis.size(); ++i) local[static_cast<std::size_t>(op.basis[i])] = static_cast<int>(i);
  op.matrix = Matrix::Zero(F.size(), F.size());
  for (Vertex x = 0; x < g.vertex_count(); ++x) {
    int members = 0;
    for (int e : g.incoming(x)) members += F.contains(e) ? 1 : 0;
    if (members == 0) continue;
    place_vertex(op.matrix, g, x, S.at(x), omega.phases[static_cast<std::size_t>(x)], local,
                 members < g.degree(x));
  }
  return op;
}

Decoupling restrict(const Digraph& g, const ScatteringFamily& S, const Disorder& omega,
                    const ConsistentSubset& F) {
  return {restricted_unitary(g, S, omega, F), restricted_unitary(g, S, omega, F.complement())};
}

BallDecoupling ball_restrict(const Digraph& g, const ScatteringFamily& S, const Disorder& omega,
                             const BallSpec& ball) {
  std::vector<Matrix> ms;
  ms.reserve(static_cast<std::size_t>(g.vertex_count()));
  for (int x = 0; x < g.vertex_count(); ++x) ms.push_back(S.at(x));
  for (Vertex x : sphere_vertices(g, ball))
    ms[static_cast<std::size_t>(x)] = Matrix::Identity(g.degree(x), g.degree(x));
  const ScatteringFamily reflected(g, std::move(ms));
  WalkOperator decoupled = build_unitary(g, reflected, omega);
  ConsistentSubset h = edge_ball(g, ball.root, ball.radius);
  WalkOperator inside = extract_block(decoupled, h.indices());
  const ConsistentSubset hc = h.complement();
  WalkOperator outside = extract_block(decoupled, hc.indices());
  return {std::move(decoupled), std::move(inside), std::move(outside), std::move(h)};
}

Matrix direct_sum(const Decoupling& parts, int edge_count) {
  if (static_cast<int>(parts.inside.basis.size() + parts.outside.basis.size()) != edge_count)
    throw std::invalid_argument("decoupled blocks do not partition the edge basis");
  Matrix m = Matrix::Zero(edge_count, edge_count);
  for (const WalkOperator* block : {&parts.inside, &parts.outside}) {
    const auto& b = block->basis;
    for (std::size_t j = 0; j < b.size(); ++j)
      for (std::size_t i = 0; i < b.size(); ++i)
        m(b[i], b[j]) = block->matrix(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }
  return m;
}

Matrix boundary_operator(const WalkOperator& full, const Decoupling& parts) {
  if (!full.full) throw std::invalid_argument("boundary operator needs the full walk");
  return full.matrix - direct_sum(parts, static_cast<int>(full.dim()));
}

SparseWalk::SparseWalk(const WalkOperator& op) {
  const Eigen::Index n = op.dim();
  columns_.resize(static_cast<std::size_t>(n));
  adjoint_columns_.resize(static_cast<std::size_t>(n));
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i) {
      const cplx v = op.matrix(i, j);
      if (v == cplx{}) continue;
      columns_[static_cast<std::size_t>(j)].push_back({static_cast<int>(i), v});
    }
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i) {
      const cplx v = op.matrix(j, i);
      if (v == cplx{}) continue;
      adjoint_columns_[static_cast<std::size_t>(j)].push_back({static_cast<int>(i), std::conj(v)});
    }
}

Vector SparseWalk::multiply(const std::vector<std::vector<Entry>>& cols, const Vector& v) {
  if (v.size() != static_cast<Eigen::Index>(cols.size()))
    throw std::invalid_argument("vector size does not match the walk");
  Vector out = Vector::Zero(v.size());
  for (std::size_t j = 0; j < cols.size(); ++j) {
    const cplx vj = v(static_cast<Eigen::Index>(j));
    if (vj == cplx{}) continue;
    for (const Entry& e : cols[j]) out(e.row) += e.value * vj;
  }
  return out;
}

Vector SparseWalk::apply(const Vector& v) const { return multiply(columns_, v); }

Vector SparseWalk::apply_adjoint(const Vector& v) const { return multiply(adjoint_columns_, v); }

void write_matrix_text(std::ostream& os, const WalkOperator& op, double zero_tol) {
  const auto old = os.precision(17);
  for (Eigen::Index j = 0; j < op.dim(); ++j)
    for (Eigen::Index i = 0; i < op.dim(); ++i) {
      const cplx v = op.matrix(i, j);
      if (std::abs(v) <= zero_tol) continue;
      os << op.basis[static_cast<std::size_t>(i)] << ' ' << op.basis[static_cast<std::size_t>(j)]
         << ' ' << v.real() << ' ' << v.imag() << '\n';
    }
  os.precision(old);
}

}  // namespace sqw
