#include "sqw/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include <fmt/format.h>
#include <lapacke.h>

namespace sqw {
namespace {

double wrap(double theta) {
  double t = std::fmod(theta, kTwoPi);
  if (t < 0.0) t += kTwoPi;
  if (t >= kTwoPi) t = 0.0;
  return t;
}

double circular_gap(double a, double b) {
  const double d = wrap(a - b);
  return std::min(d, kTwoPi - d);
}

void check_unit(const Vector& v, const char* name) {
  if (std::abs(v.norm() - 1.0) > 1e-10)
    throw std::invalid_argument(fmt::format("{} is not normalized (norm {})", name, v.norm()));
}

void check_edge(const EigenSystem& eig, int e) {
  if (e < 0 || e >= eig.dim())
    throw std::out_of_range(fmt::format("basis index {} outside [0, {})", e, eig.dim()));
}

Eigen::PartialPivLU<Matrix> shifted_lu(const Matrix& u, cplx z) {
  check_guard_band(z);
  if (u.rows() != u.cols()) throw std::invalid_argument("resolvent of a non-square matrix");
  Matrix a = u;
  a.diagonal().array() -= z;
  return Eigen::PartialPivLU<Matrix>(a);
}

}  // namespace

ArcSet ArcSet::full_circle() {
  ArcSet s;
  s.full_ = true;
  return s;
}

ArcSet ArcSet::upper_half() { return from_bounds({{0.0, kPi}}); }

ArcSet ArcSet::from_bounds(const std::vector<std::pair<double, double>>& bounds) {
  ArcSet s;
  for (const auto& [lo, hi] : bounds) {
    if (!std::isfinite(lo) || !std::isfinite(hi))
      throw std::invalid_argument("arc endpoints must be finite");
    const double length = wrap(hi - lo);
    if (length <= 0.0)
      throw std::invalid_argument(
          fmt::format("arc ({}, {}) is degenerate; use the full circle explicitly", lo, hi));
    s.arcs_.push_back({wrap(lo), length});
  }
  for (std::size_t i = 0; i < s.arcs_.size(); ++i)
    for (std::size_t j = i + 1; j < s.arcs_.size(); ++j) {
      const Arc& a = s.arcs_[i];
      const Arc& b = s.arcs_[j];
      if (wrap(b.lo - a.lo) < a.length || wrap(a.lo - b.lo) < b.length)
        throw std::invalid_argument(fmt::format("arcs {} and {} overlap", i, j));
    }
  std::sort(s.arcs_.begin(), s.arcs_.end(), [](const Arc& a, const Arc& b) { return a.lo < b.lo; });
  return s;
}

double ArcSet::measure() const {
  if (full_) return kTwoPi;
  double m = 0.0;
  for (const Arc& a : arcs_) m += a.length;
  return m;
}

bool ArcSet::contains_angle(double theta) const {
  if (full_) return true;
  for (const Arc& a : arcs_) {
    const double t = wrap(theta - a.lo);
    if (t > kArcEndpointTol && t < a.length - kArcEndpointTol) return true;
  }
  return false;
}

bool ArcSet::contains(cplx lambda) const { return contains_angle(std::arg(lambda)); }

double ArcSet::endpoint_distance(double theta) const {
  double best = std::numeric_limits<double>::infinity();
  for (const Arc& a : arcs_)
    best = std::min({best, circular_gap(theta, a.lo), circular_gap(theta, a.lo + a.length)});
  return best;
}

std::vector<std::pair<double, double>> ArcSet::midpoint_grid(int cells_per_arc) const {
  if (cells_per_arc < 1) throw std::invalid_argument("arc grid needs at least one cell");
  std::vector<std::pair<double, double>> grid;
  const auto fill = [&](double lo, double length) {
    const double w = length / cells_per_arc;
    for (int j = 0; j < cells_per_arc; ++j) grid.emplace_back(wrap(lo + (j + 0.5) * w), w);
  };
  if (full_) fill(0.0, kTwoPi);
  for (const Arc& a : arcs_) fill(a.lo, a.length);
  return grid;
}

std::string ArcSet::describe() const {
  if (full_) return "S1";
  if (arcs_.empty()) return "empty";
  std::string out;
  for (const Arc& a : arcs_) {
    if (!out.empty()) out += " u ";
    out += fmt::format("({:.6g},{:.6g})", a.lo, wrap(a.lo + a.length));
  }
  return out;
}

std::vector<cplx> EigenSystem::basis_weights(int e, int f) const {
  check_edge(*this, e);
  check_edge(*this, f);
  std::vector<cplx> w(clusters.size());
  for (std::size_t a = 0; a < clusters.size(); ++a) {
    cplx acc{};
    for (int k : clusters[a]) acc += vectors(e, k) * std::conj(vectors(f, k));
    w[a] = acc;
  }
  return w;
}

EigenSystem eigendecompose(const Matrix& u, double eps_cluster) {
  if (!(eps_cluster > 0.0)) throw std::invalid_argument("cluster tolerance must be positive");
  if (u.rows() != u.cols()) throw std::invalid_argument("eigendecompose needs a square matrix");
  const Eigen::Index n = u.rows();
  EigenSystem eig;
  if (n == 0) {
    eig.vectors.resize(0, 0);
    return eig;
  }
  const double residual = (u.adjoint() * u - Matrix::Identity(n, n)).norm();
  if (!(residual < 1e-8))
    throw std::invalid_argument(fmt::format("matrix is not unitary (residual {:.3e})", residual));

  // Complex Schur form; T is diagonal up to round-off because U is normal.
  Matrix t = u;
  eig.vectors.resize(n, n);
  eig.eigenvalues.resize(static_cast<std::size_t>(n));
  lapack_int sdim = 0;
  const auto ld = static_cast<lapack_int>(n);
  const lapack_int info = LAPACKE_zgees(
      LAPACK_COL_MAJOR, 'V', 'N', nullptr, ld, reinterpret_cast<lapack_complex_double*>(t.data()), ld,
      &sdim, reinterpret_cast<lapack_complex_double*>(eig.eigenvalues.data()),
      reinterpret_cast<lapack_complex_double*>(eig.vectors.data()), ld);
  if (info != 0) throw std::runtime_error(fmt::format("Schur decomposition failed (info {})", info));

  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> angle(static_cast<std::size_t>(n));
  for (std::size_t k = 0; k < angle.size(); ++k) angle[k] = wrap(std::arg(eig.eigenvalues[k]));
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return angle[static_cast<std::size_t>(a)] < angle[static_cast<std::size_t>(b)]; });

  const auto lam = [&](int k) { return eig.eigenvalues[static_cast<std::size_t>(k)]; };
  std::vector<std::vector<int>> clusters{{order.front()}};
  for (std::size_t i = 1; i < order.size(); ++i) {
    if (std::abs(lam(order[i]) - lam(order[i - 1])) < eps_cluster) clusters.back().push_back(order[i]);
    else clusters.push_back({order[i]});
  }
  if (clusters.size() > 1 && std::abs(lam(order.back()) - lam(order.front())) < eps_cluster) {
    auto& first = clusters.front();
    first.insert(first.begin(), clusters.back().begin(), clusters.back().end());
    clusters.pop_back();
  }

  for (auto& c : clusters) {
    std::sort(c.begin(), c.end());
    cplx mean{};
    for (int k : c) mean += lam(k);
    eig.cluster_values.push_back(mean / std::abs(mean));
    if (c.size() < 2) continue;
    const auto m = static_cast<Eigen::Index>(c.size());
    Matrix block(n, m);
    for (Eigen::Index j = 0; j < m; ++j) block.col(j) = eig.vectors.col(c[static_cast<std::size_t>(j)]);
    Eigen::HouseholderQR<Matrix> qr(block);
    const Matrix q = qr.householderQ() * Matrix::Identity(n, m);
    for (Eigen::Index j = 0; j < m; ++j) eig.vectors.col(c[static_cast<std::size_t>(j)]) = q.col(j);
  }
  eig.clusters = std::move(clusters);
  return eig;
}

SpectralMeasure spectral_measure(const EigenSystem& eig, const Vector& psi, const Vector& phi) {
  if (psi.size() != eig.dim() || phi.size() != eig.dim())
    throw std::invalid_argument("vector size does not match the eigensystem");
  check_unit(psi, "psi");
  check_unit(phi, "phi");
  const Vector a = eig.vectors.adjoint() * psi;
  const Vector b = eig.vectors.adjoint() * phi;
  SpectralMeasure mu;
  mu.atoms.reserve(eig.clusters.size());
  for (std::size_t c = 0; c < eig.clusters.size(); ++c) {
    cplx w{};
    double d = 0.0;
    for (int k : eig.clusters[c]) {
      w += std::conj(a(k)) * b(k);
      d += std::norm(a(k));
    }
    mu.atoms.push_back({eig.cluster_values[c], w, d});
  }
  return mu;
}

SpectralMeasure spectral_measure(const EigenSystem& eig, int e, int f) {
  const auto w = eig.basis_weights(e, f);
  const auto d = eig.basis_weights(e, e);
  SpectralMeasure mu;
  mu.atoms.reserve(w.size());
  for (std::size_t c = 0; c < w.size(); ++c) mu.atoms.push_back({eig.cluster_values[c], w[c], d[c].real()});
  return mu;
}

double ec(const SpectralMeasure& mu, const ArcSet& arcs) {
  double q = 0.0;
  for (const auto& atom : mu.atoms)
    if (arcs.contains(atom.lambda)) q += std::abs(atom.weight);
  return q;
}

double interpolated_ec(const SpectralMeasure& mu, const ArcSet& arcs, double beta) {
  if (!(beta >= 0.0 && beta <= 1.0))
    throw std::invalid_argument(fmt::format("beta must lie in [0, 1], got {}", beta));
  double q = 0.0;
  for (const auto& atom : mu.atoms) {
    if (!arcs.contains(atom.lambda) || !(atom.diag_weight > 0.0)) continue;
    q += std::pow(atom.diag_weight, 1.0 - beta) * std::pow(std::abs(atom.weight), beta);
  }
  return q;
}

double ec(const EigenSystem& eig, const Vector& psi, const Vector& phi, const ArcSet& arcs) {
  return ec(spectral_measure(eig, psi, phi), arcs);
}

double ec(const EigenSystem& eig, int e, int f, const ArcSet& arcs) {
  return ec(spectral_measure(eig, e, f), arcs);
}

double interpolated_ec(const EigenSystem& eig, const Vector& psi, const Vector& phi,
                       const ArcSet& arcs, double beta) {
  return interpolated_ec(spectral_measure(eig, psi, phi), arcs, beta);
}

double interpolated_ec(const EigenSystem& eig, int e, int f, const ArcSet& arcs, double beta) {
  return interpolated_ec(spectral_measure(eig, e, f), arcs, beta);
}

void write_spectral_csv(std::ostream& os, const SpectralMeasure& mu) {
  os << "lambda_re,lambda_im,weight_abs,diag_weight\n";
  for (const auto& atom : mu.atoms)
    os << fmt::format("{:.17g},{:.17g},{:.17g},{:.17g}\n", atom.lambda.real(), atom.lambda.imag(),
                      std::abs(atom.weight), atom.diag_weight);
}

void check_guard_band(cplx z) {
  if (!std::isfinite(z.real()) || !std::isfinite(z.imag()))
    throw std::domain_error("spectral parameter is not finite");
  if (std::abs(std::abs(z) - 1.0) <= kGuardBand)
    throw std::domain_error(fmt::format("|z| = {:.9g} lies inside the guard band around the unit circle",
                                        std::abs(z)));
}

Vector resolvent_column(const Matrix& u, cplx z, int f) {
  if (f < 0 || f >= u.rows()) throw std::out_of_range(fmt::format("basis index {} out of range", f));
  const auto lu = shifted_lu(u, z);
  return lu.solve(Vector::Unit(u.rows(), f));
}

Vector resolvent_row(const Matrix& u, cplx z, int e) {
  if (e < 0 || e >= u.rows()) throw std::out_of_range(fmt::format("basis index {} out of range", e));
  const auto lu = shifted_lu(u.transpose(), z);
  return lu.solve(Vector::Unit(u.rows(), e));
}

cplx resolvent_element(const Matrix& u, cplx z, int e, int f) {
  if (e < 0 || e >= u.rows()) throw std::out_of_range(fmt::format("basis index {} out of range", e));
  return resolvent_column(u, z, f)(e);
}

Matrix resolvent(const Matrix& u, cplx z) { return shifted_lu(u, z).inverse(); }

Matrix resolvent_from_spectrum(const EigenSystem& eig, cplx z) {
  check_guard_band(z);
  Vector d(eig.dim());
  for (int k = 0; k < eig.dim(); ++k) d(k) = 1.0 / (eig.eigenvalues[static_cast<std::size_t>(k)] - z);
  return eig.vectors * d.asDiagonal() * eig.vectors.adjoint();
}

double cayley_real_diag(const Matrix& u, cplx z, int e) {
  const Vector col = resolvent_column(u, z, e);
  const cplx c = (u.row(e) * col)(0) + z * col(e);
  return c.real();
}

double cayley_real_diag_from_norm(const Matrix& u, cplx z, int e) {
  const Vector col = resolvent_column(u, z, e);
  return (1.0 - std::norm(z)) * col.squaredNorm();
}

double dynamical_probe(const EigenSystem& eig, int e, int f, const ArcSet& arcs, int horizon) {
  return dynamical_probe_many(eig, e, {f}, arcs, horizon).front();
}

std::vector<double> dynamical_probe_many(const EigenSystem& eig, int e,
                                         const std::vector<int>& targets, const ArcSet& arcs,
                                         int horizon) {
  if (horizon < 0) throw std::invalid_argument("probe horizon must be >= 0");
  check_edge(eig, e);
  for (int f : targets) check_edge(eig, f);
  std::vector<int> active;
  for (int c = 0; c < eig.cluster_count(); ++c)
    if (arcs.contains(eig.cluster_values[static_cast<std::size_t>(c)])) active.push_back(c);
  std::vector<double> out(targets.size(), 0.0);
  if (active.empty() || targets.empty()) return out;

  const auto a = static_cast<Eigen::Index>(active.size());
  const auto t = static_cast<Eigen::Index>(targets.size());
  Matrix w = Matrix::Zero(a, t);
  for (Eigen::Index i = 0; i < a; ++i)
    for (int k : eig.clusters[static_cast<std::size_t>(active[static_cast<std::size_t>(i)])]) {
      const cplx ve = eig.vectors(e, k);
      for (Eigen::Index j = 0; j < t; ++j)
        w(i, j) += ve * std::conj(eig.vectors(targets[static_cast<std::size_t>(j)], k));
    }

  const Eigen::Index steps = 2 * static_cast<Eigen::Index>(horizon) + 1;
  Matrix phase(steps, a);
  for (Eigen::Index i = 0; i < a; ++i) {
    const double theta = std::arg(eig.cluster_values[static_cast<std::size_t>(active[static_cast<std::size_t>(i)])]);
    for (Eigen::Index r = 0; r < steps; ++r)
      phase(r, i) = std::polar(1.0, static_cast<double>(r - horizon) * theta);
  }
  const Matrix amp = phase * w;
  for (Eigen::Index j = 0; j < t; ++j) out[static_cast<std::size_t>(j)] = amp.col(j).cwiseAbs().maxCoeff();
  return out;
}

std::vector<WeakConvergenceRow> weak_convergence_scan(const WalkOperator& full,
                                                      const std::vector<WalkOperator>& sequence,
                                                      int e, int f, int degree) {
  if (degree < 0) throw std::invalid_argument("trigonometric degree must be >= 0");
  if (!full.full) throw std::invalid_argument("reference walk must act on the full edge basis");
  for (std::size_t i = 0; i < sequence.size(); ++i) {
    const auto& b = sequence[i].basis;
    if (sequence[i].local_index(e) < 0 || sequence[i].local_index(f) < 0)
      throw std::invalid_argument(fmt::format("restriction {} does not contain both edges", i));
    if (i + 1 < sequence.size() &&
        !std::includes(sequence[i + 1].basis.begin(), sequence[i + 1].basis.end(), b.begin(), b.end()))
      throw std::invalid_argument(fmt::format("restriction {} is not contained in restriction {}", i, i + 1));
  }

  const auto moments = [&](const WalkOperator& op) {
    const SparseWalk walk(op);
    const int le = op.local_index(e);
    const Vector start = Vector::Unit(op.dim(), op.local_index(f));
    std::vector<cplx> m(static_cast<std::size_t>(2 * degree + 1));
    m[static_cast<std::size_t>(degree)] = start(le);
    Vector fwd = start;
    Vector back = start;
    for (int k = 1; k <= degree; ++k) {
      fwd = walk.apply(fwd);
      back = walk.apply_adjoint(back);
      m[static_cast<std::size_t>(degree + k)] = fwd(le);
      m[static_cast<std::size_t>(degree - k)] = back(le);
    }
    return m;
  };

  const auto reference = moments(full);
  std::vector<WeakConvergenceRow> rows;
  rows.reserve(sequence.size() * reference.size());
  for (std::size_t i = 0; i < sequence.size(); ++i) {
    const auto m = moments(sequence[i]);
    for (int k = -degree; k <= degree; ++k) {
      const auto idx = static_cast<std::size_t>(k + degree);
      rows.push_back({static_cast<int>(i), k, std::abs(m[idx] - reference[idx])});
    }
  }
  return rows;
}

}  // namespace sqw
