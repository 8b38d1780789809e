#include "sqw/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <fmt/format.h>

namespace sqw {
namespace {

void check_samples(int n) {
  if (n < 2) throw std::invalid_argument(fmt::format("need at least 2 samples, got {}", n));
}

void check_fraction(double s, const char* name) {
  if (!(s > 0.0 && s < 1.0))
    throw std::invalid_argument(fmt::format("{} must lie in (0, 1), got {}", name, s));
}

void check_edge_index(const Digraph& g, int e) {
  if (e < 0 || e >= g.edge_count())
    throw std::out_of_range(fmt::format("edge index {} outside [0, {})", e, g.edge_count()));
}

Matrix shifted(const Matrix& u, cplx z) {
  Matrix a = u;
  a.diagonal().array() -= z;
  return a;
}

// Column-wise summaries of a samples-by-keys table.
std::vector<MCEstimate> summarize_columns(const std::vector<std::vector<double>>& table,
                                          std::size_t keys, std::uint64_t seed) {
  std::vector<MCEstimate> out;
  out.reserve(keys);
  std::vector<double> column(table.size());
  for (std::size_t k = 0; k < keys; ++k) {
    for (std::size_t i = 0; i < table.size(); ++i) column[i] = table[i][k];
    out.push_back(summarize(column, seed));
  }
  return out;
}

ScatteringFamily identity_like(const Digraph& g) { return ScatteringFamily::identity(g); }

}  // namespace

MCEstimate summarize(std::span<const double> samples, std::uint64_t seed) {
  check_samples(static_cast<int>(samples.size()));
  const double n = static_cast<double>(samples.size());
  const double mean = pairwise_sum(samples) / n;
  std::vector<double> sq(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) sq[i] = (samples[i] - mean) * (samples[i] - mean);
  const double var = pairwise_sum(sq) / (n - 1.0);
  return {mean, std::sqrt(var / n), static_cast<int>(samples.size()), seed};
}

void ZGrid::validate() const {
  if (angles < 1) throw std::invalid_argument("z grid needs at least one angle");
  if (radii.empty()) throw std::invalid_argument("z grid needs at least one radius");
  for (double r : radii) {
    if (!(r > 0.0 && r < 2.0))
      throw std::invalid_argument(fmt::format("z grid radius {} outside (0, 2)", r));
    if (std::abs(r - 1.0) <= kGuardBand)
      throw std::invalid_argument(fmt::format("z grid radius {} inside the guard band", r));
  }
}

std::vector<cplx> ZGrid::points() const {
  validate();
  std::vector<cplx> pts;
  for (double r : radii)
    for (int a = 0; a < angles; ++a) pts.push_back(std::polar(r, kTwoPi * a / angles));
  return pts;
}

std::vector<cplx> ZGrid::inner_points() const {
  std::vector<cplx> pts;
  for (cplx z : points())
    if (std::abs(z) < 1.0) pts.push_back(z);
  return pts;
}

FractionalMomentResult mc_fractional_moment(const Digraph& g, const ScatteringFamily& S,
                                            const DisorderSpec& mu, int e, int f, double s,
                                            const std::vector<cplx>& zs, int n_samples,
                                            std::uint64_t seed, const Executor& exec) {
  check_fraction(s, "s");
  check_samples(n_samples);
  check_edge_index(g, e);
  check_edge_index(g, f);
  for (cplx z : zs) check_guard_band(z);
  const std::uint64_t stream = derive_seed(seed, StreamTag::FractionalMoment);
  const auto table = exec.map<std::vector<double>>(
      static_cast<std::size_t>(n_samples), [&](std::size_t i) {
        const WalkOperator u = build_unitary(g, S, sample_disorder(g, mu, stream, i));
        std::vector<double> row;
        row.reserve(zs.size());
        for (cplx z : zs) {
          const Eigen::PartialPivLU<Matrix> lu(shifted(u.matrix, z));
          const Vector col = lu.solve(Vector::Unit(u.dim(), f));
          row.push_back(std::pow(std::abs(col(e)), s));
        }
        return row;
      });
  FractionalMomentResult out;
  const auto est = summarize_columns(table, zs.size(), seed);
  for (std::size_t k = 0; k < zs.size(); ++k) {
    out.rows.push_back({zs[k], est[k]});
    if (k == 0 || est[k].mean > out.grid_sup) {
      out.grid_sup = est[k].mean;
      out.grid_argsup = zs[k];
    }
  }
  return out;
}

std::vector<double> single_phase_average(const Digraph& g, const ScatteringFamily& S,
                                         const Disorder& omega, const DisorderSpec& mu, int e,
                                         const std::vector<cplx>& zs, int nodes,
                                         double* min_integrand) {
  check_edge_index(g, e);
  for (cplx z : zs) {
    check_guard_band(z);
    if (std::abs(z) >= 1.0) throw std::invalid_argument("spectral averaging needs |z| < 1");
  }
  const Vertex x = g.edge(e).from;
  std::vector<double> avg(zs.size(), 0.0);
  double lowest = std::numeric_limits<double>::infinity();
  Disorder local = omega;
  for (const auto& [theta, weight] : mu.quadrature(nodes)) {
    local.phases[static_cast<std::size_t>(x)] = theta;
    const EigenSystem eig = eigendecompose(build_unitary(g, S, local));
    for (std::size_t k = 0; k < zs.size(); ++k) {
      const cplx z = zs[k];
      const double num = 1.0 - std::norm(z);
      double val = 0.0;
      for (int j = 0; j < eig.dim(); ++j)
        val += std::norm(eig.vectors(e, j)) * num / std::norm(eig.eigenvalues[static_cast<std::size_t>(j)] - z);
      lowest = std::min(lowest, val);
      avg[k] += weight * val;
    }
  }
  if (min_integrand != nullptr) *min_integrand = lowest;
  return avg;
}

std::vector<double> single_phase_average_uniform(const Digraph& g, const ScatteringFamily& S,
                                                 const Disorder& omega, int e,
                                                 const std::vector<cplx>& zs) {
  check_edge_index(g, e);
  const Vertex x = g.edge(e).from;
  Disorder local = omega;
  local.phases[static_cast<std::size_t>(x)] = 0.0;
  Matrix g0 = build_unitary(g, S, local).matrix.adjoint();
  for (int out : g.outgoing(x)) g0.col(out).setZero();
  std::vector<double> avg;
  avg.reserve(zs.size());
  for (cplx z : zs) {
    check_guard_band(z);
    if (std::abs(z) >= 1.0) throw std::invalid_argument("spectral averaging needs |z| < 1");
    Matrix a = -z * g0;
    a.diagonal().array() += 1.0;
    const Vector y = Eigen::PartialPivLU<Matrix>(a).solve(Vector::Unit(g0.rows(), e));
    avg.push_back((y(e) + z * (g0.row(e) * y)(0)).real());
  }
  return avg;
}

SpectralAverageResult mc_spectral_average(const Digraph& g, const ScatteringFamily& S,
                                          const DisorderSpec& mu, int e,
                                          const std::vector<cplx>& zs, int nodes, int n_outer,
                                          std::uint64_t seed, const Executor& exec) {
  check_samples(n_outer);
  if (nodes < 64) throw std::invalid_argument("spectral averaging needs at least 64 quadrature nodes");
  struct Sample {
    std::vector<double> values;
    double lowest = 0.0;
  };
  const std::uint64_t stream = derive_seed(seed, StreamTag::SpectralAverage);
  const auto samples = exec.map<Sample>(static_cast<std::size_t>(n_outer), [&](std::size_t i) {
    Sample out;
    out.values = single_phase_average(g, S, sample_disorder(g, mu, stream, i), mu, e, zs, nodes,
                                      &out.lowest);
    return out;
  });
  std::vector<std::vector<double>> table;
  table.reserve(samples.size());
  SpectralAverageResult res;
  res.min_integrand = std::numeric_limits<double>::infinity();
  for (const auto& smp : samples) {
    table.push_back(smp.values);
    res.min_integrand = std::min(res.min_integrand, smp.lowest);
  }
  const auto est = summarize_columns(table, zs.size(), seed);
  for (std::size_t k = 0; k < zs.size(); ++k) {
    res.rows.push_back({zs[k], est[k]});
    res.grid_sup = k == 0 ? est[k].mean : std::max(res.grid_sup, est[k].mean);
  }
  return res;
}

double fully_localized_gap(const Digraph& g, const Disorder& omega, const BallSpec& ball, cplx z) {
  const auto verts = ball_vertices(g, ball);
  std::vector<char> inside(static_cast<std::size_t>(g.vertex_count()), 0);
  for (Vertex v : verts) inside[static_cast<std::size_t>(v)] = 1;
  double best = std::numeric_limits<double>::infinity();
  for (Vertex u : verts)
    for (Vertex v : g.neighbors(u)) {
      if (v <= u || !inside[static_cast<std::size_t>(v)]) continue;
      const cplx lam = std::polar(1.0, 0.5 * (omega.phases[static_cast<std::size_t>(u)] +
                                              omega.phases[static_cast<std::size_t>(v)]));
      best = std::min({best, std::abs(z - lam), std::abs(z + lam)});
    }
  return best;
}

std::vector<GapRow> gap_probability(const Digraph& g, const DisorderSpec& mu, const BallSpec& ball,
                                    const std::vector<cplx>& zs, const std::vector<double>& etas,
                                    int n_samples, std::uint64_t seed, const Executor& exec) {
  check_samples(n_samples);
  for (double eta : etas)
    if (!(eta > 0.0) || !std::isfinite(eta))
      throw std::invalid_argument(fmt::format("eta must be positive, got {}", eta));
  for (cplx z : zs)
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag()))
      throw std::invalid_argument("z must be finite");
  const std::uint64_t stream = derive_seed(seed, StreamTag::GapProbability);
  const auto gaps = exec.map<std::vector<double>>(static_cast<std::size_t>(n_samples), [&](std::size_t i) {
    const Disorder omega = sample_disorder(g, mu, stream, i);
    std::vector<double> row;
    row.reserve(zs.size());
    for (cplx z : zs) row.push_back(fully_localized_gap(g, omega, ball, z));
    return row;
  });
  const double tau = mu.sup_norm();
  const double ball_size = static_cast<double>(ball_vertices(g, ball).size());
  std::vector<GapRow> rows;
  std::vector<double> hits(gaps.size());
  for (std::size_t k = 0; k < zs.size(); ++k)
    for (double eta : etas) {
      for (std::size_t i = 0; i < gaps.size(); ++i) hits[i] = gaps[i][k] <= eta ? 1.0 : 0.0;
      GapRow row;
      row.z = zs[k];
      row.eta = eta;
      row.estimate = summarize(hits, seed);
      row.bound = 4.0 * kPi * kPi * tau * tau * g.max_degree() * ball_size * eta;
      row.bound_applies = eta < 1.0;
      row.pass = !row.bound_applies || row.estimate.mean <= row.bound + 3.0 * row.estimate.std_error;
      rows.push_back(row);
    }
  return rows;
}

GeometricResidual check_geometric_resolvent(const Digraph& g, const ScatteringFamily& S,
                                            const Disorder& omega, cplx z, const BallSpec& ball) {
  check_guard_band(z);
  if (ball.radius < 0 || g.eccentricity(ball.root) <= ball.radius + 1)
    throw std::out_of_range(fmt::format("radii {} and {} do not fit around vertex {}", ball.radius,
                                        ball.radius + 1, ball.root));
  const WalkOperator u = build_unitary(g, S, omega);
  const BallDecoupling dn = ball_restrict(g, S, omega, ball);
  const BallDecoupling dn1 = ball_restrict(g, S, omega, {ball.root, ball.radius + 1});
  const Matrix r = resolvent(u.matrix, z);
  const Matrix rn = resolvent(dn.decoupled.matrix, z);
  const Matrix rn1 = resolvent(dn1.decoupled.matrix, z);
  const Matrix tn = u.matrix - dn.decoupled.matrix;
  const Matrix tn1 = u.matrix - dn1.decoupled.matrix;

  const Matrix screened = rn * tn * rn1;
  const Matrix rebuilt = rn - screened + rn * tn * r * tn1 * rn1;
  GeometricResidual out;
  out.identity_residual = (r - rebuilt).norm();
  out.identity_scale = r.norm();

  const ConsistentSubset& h = dn.subspace;
  for (int a = 0; a < g.edge_count(); ++a)
    for (int b = 0; b < g.edge_count(); ++b)
      if (h.contains(a) != h.contains(b)) out.cross_block_max = std::max(out.cross_block_max, std::abs(rn(a, b)));

  const ConsistentSubset far = edge_ball(g, ball.root, ball.radius + 3).complement();
  out.screened_columns = far.size();
  for (int b : far.indices())
    out.screened_max = std::max(out.screened_max, screened.col(b).cwiseAbs().maxCoeff());
  return out;
}

void FmecParams::validate() const {
  check_fraction(s, "s");
  if (!(beta > 0.0 && beta < s))
    throw std::invalid_argument(fmt::format("beta must lie in (0, s) = (0, {}), got {}", s, beta));
  if (beta > 1.0 - beta / s)
    throw std::invalid_argument(fmt::format("beta = {} violates beta <= 1 - beta/s", beta));
  if (deltas.empty()) throw std::invalid_argument("delta grid is empty");
  for (double d : deltas)
    if (!(d > 0.0 && d < 1.0)) throw std::invalid_argument(fmt::format("delta {} outside (0, 1)", d));
  if (theta_cells < 1) throw std::invalid_argument("theta grid needs at least one cell per arc");
  check_samples(n_samples);
  if (cw_realizations < 1) throw std::invalid_argument("C_W proxy needs at least one realization");
  if (cw_nodes < 64) throw std::invalid_argument("C_W proxy needs at least 64 quadrature nodes");
  cw_grid.validate();
}

FmecReport check_fmec_bound(const Digraph& g, const ScatteringFamily& S, const DisorderSpec& mu,
                            const ConsistentSubset& B, int e, int f, const FmecParams& params,
                            std::uint64_t seed, const Executor& exec) {
  params.validate();
  check_edge_index(g, e);
  check_edge_index(g, f);
  if (B.universe_size() != g.edge_count()) throw std::invalid_argument("B does not belong to the graph");
  if (B.size() == g.edge_count()) throw std::invalid_argument("B must be a proper subset of the edges");
  if (!B.contains(f)) throw std::invalid_argument("f must lie in B");
  if (B.contains(e)) throw std::invalid_argument("e must lie outside B");
  const Vertex x = g.edge(e).from;
  for (int b : B.indices())
    if (g.edge(b).from == x || g.edge(b).to == x)
      throw std::invalid_argument(
          fmt::format("the source vertex {} of e is incident to B; its phase is not independent of B", x));

  const std::uint64_t stream = derive_seed(seed, StreamTag::Fmec);
  FmecReport rep;

  {
    const Disorder omega = sample_disorder(g, mu, stream, 0);
    const WalkOperator u = build_unitary(g, S, omega);
    const Matrix t = boundary_operator(u, restrict(g, S, omega, B));
    rep.t_table = t.cwiseAbs();
  }

  const WalkOperator probe_basis = restricted_unitary(g, S, zero_disorder(g), B);
  const int lf = probe_basis.local_index(f);
  std::vector<int> active;  // global f' with a nonzero row in T
  for (int fp : B.indices()) {
    double acc = 0.0;
    for (int ep = 0; ep < g.edge_count(); ++ep) {
      const double t = rep.t_table(fp, ep);
      if (t > 0.0) acc += std::pow(t, params.beta);
    }
    if (acc > 0.0) rep.terms.push_back({fp, acc, 0.0, 0.0, 0.0});
    if (acc > 0.0) active.push_back(probe_basis.local_index(fp));
  }

  const auto grid = params.arcs.is_empty() ? std::vector<std::pair<double, double>>{}
                                            : params.arcs.midpoint_grid(params.theta_cells);
  const std::size_t nd = params.deltas.size();
  struct Sample {
    double lhs = 0.0;
    std::vector<double> moments;  // [delta][active]
  };
  const auto samples = exec.map<Sample>(static_cast<std::size_t>(params.n_samples), [&](std::size_t i) {
    const Disorder omega = sample_disorder(g, mu, stream, i);
    Sample out;
    const EigenSystem eig = eigendecompose(build_unitary(g, S, omega));
    out.lhs = interpolated_ec(eig, e, f, params.arcs, params.beta);
    out.moments.assign(nd * active.size(), 0.0);
    if (active.empty() || grid.empty()) return out;
    const Matrix ubt = restricted_unitary(g, S, omega, B).matrix.transpose();
    const Vector unit = Vector::Unit(ubt.rows(), lf);
    for (std::size_t d = 0; d < nd; ++d)
      for (const auto& [theta, width] : grid) {
        const Eigen::PartialPivLU<Matrix> lu(shifted(ubt, std::polar(params.deltas[d], theta)));
        const Vector row = lu.solve(unit);
        for (std::size_t a = 0; a < active.size(); ++a)
          out.moments[d * active.size() + a] +=
              width / kTwoPi * std::pow(std::abs(row(active[a])), params.s);
      }
    return out;
  });

  std::vector<double> column(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) column[i] = samples[i].lhs;
  rep.lhs = summarize(column, seed);

  for (std::size_t a = 0; a < active.size(); ++a) {
    FmecTerm& term = rep.terms[a];
    for (std::size_t d = 0; d < nd; ++d) {
      for (std::size_t i = 0; i < samples.size(); ++i) column[i] = samples[i].moments[d * active.size() + a];
      const MCEstimate est = summarize(column, seed);
      if (d == 0 || est.mean > term.moment) {
        term.moment = est.mean;
        term.moment_std_error = est.std_error;
        term.best_delta = params.deltas[d];
      }
    }
  }

  const auto inner = params.cw_grid.inner_points();
  const bool uniform = mu.kind() == DisorderSpec::Kind::Uniform;
  const auto cw = exec.map<double>(static_cast<std::size_t>(params.cw_realizations), [&](std::size_t i) {
    const Disorder omega = sample_disorder(g, mu, stream, i);
    const auto vals = uniform ? single_phase_average_uniform(g, S, omega, e, inner)
                              : single_phase_average(g, S, omega, mu, e, inner, params.cw_nodes);
    return vals.empty() ? 0.0 : *std::max_element(vals.begin(), vals.end());
  });
  rep.c_w = *std::max_element(cw.begin(), cw.end());

  const double q = params.beta / params.s;
  const double cw_q = std::pow(rep.c_w, q);
  for (const FmecTerm& term : rep.terms) {
    if (!(term.moment > 0.0)) continue;
    rep.rhs += cw_q * term.t_beta_sum * std::pow(term.moment, q);
    rep.rhs_std_error += cw_q * term.t_beta_sum * q * std::pow(term.moment, q - 1.0) * term.moment_std_error;
  }
  const double sigma = std::hypot(rep.lhs.std_error, rep.rhs_std_error);
  rep.violation = rep.lhs.mean > rep.rhs + 3.0 * sigma + kFmecRoundoff;
  return rep;
}

DecayFit fit_decay(std::span<const int> distances, std::span<const double> means,
                   std::span<const double> std_errors, double noise_floor, int lo, int hi) {
  if (distances.size() != means.size() || means.size() != std_errors.size())
    throw std::invalid_argument("decay fit inputs have different lengths");
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < means.size(); ++i) {
    const double m = means[i];
    if (distances[i] < lo || distances[i] > hi) continue;
    if (!(m > 0.0) || !std::isfinite(m) || m <= noise_floor || m < 5.0 * std_errors[i]) continue;
    xs.push_back(distances[i]);
    ys.push_back(std::log(m));
  }
  std::vector<double> distinct = xs;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() < 4)
    throw std::invalid_argument(
        fmt::format("insufficient distinct distances ({} < 4) for fitting", distinct.size()));

  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  const double slope = sxy / sxx;
  const double intercept = my - slope * mx;
  double ssr = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double r = ys[i] - (intercept + slope * xs[i]);
    ssr += r * r;
  }
  DecayFit fit;
  fit.c = std::exp(intercept);
  fit.g = -slope;
  fit.g_std_error = xs.size() > 2 ? std::sqrt(ssr / (n - 2.0) / sxx) : 0.0;
  fit.r_squared = syy > 0.0 ? 1.0 - ssr / syy : 1.0;
  fit.min_distance = static_cast<int>(distinct.front());
  fit.max_distance = static_cast<int>(distinct.back());
  fit.points = static_cast<int>(xs.size());
  return fit;
}

int reference_edge(const Digraph& g, Vertex reference) {
  const auto nb = g.neighbors(reference);
  if (nb.empty()) throw std::invalid_argument(fmt::format("vertex {} has no neighbors", reference));
  return g.edge_index(nb.front(), reference);
}

std::vector<std::vector<int>> edges_by_distance(const Digraph& g, Vertex reference, int per_distance) {
  const auto dist = g.distances_from(reference);
  std::vector<std::vector<int>> groups;
  for (int f = 0; f < g.edge_count(); ++f) {
    const int d = dist[static_cast<std::size_t>(g.edge(f).to)];
    if (d == kInfiniteDistance) continue;
    if (static_cast<int>(groups.size()) <= d) groups.resize(static_cast<std::size_t>(d) + 1);
    auto& grp = groups[static_cast<std::size_t>(d)];
    if (per_distance <= 0 || static_cast<int>(grp.size()) < per_distance) grp.push_back(f);
  }
  return groups;
}

namespace {

DecayFit fit_rows(const std::vector<DistanceEstimate>& rows, double floor, int lo, int hi) {
  std::vector<int> d;
  std::vector<double> m, se;
  for (const auto& r : rows) {
    d.push_back(r.distance);
    m.push_back(r.estimate.mean);
    se.push_back(r.estimate.std_error);
  }
  return fit_decay(d, m, se, floor, lo, hi);
}

std::vector<DistanceEstimate> distance_rows(const std::vector<std::vector<double>>& table,
                                            const std::vector<std::vector<int>>& groups,
                                            std::uint64_t seed) {
  const auto est = summarize_columns(table, groups.size(), seed);
  std::vector<DistanceEstimate> rows;
  for (std::size_t d = 0; d < groups.size(); ++d)
    rows.push_back({static_cast<int>(d), static_cast<int>(groups[d].size()), est[d]});
  return rows;
}

}  // namespace

std::vector<DecayCurve> decay_experiment(const DecayConfig& config, std::uint64_t seed,
                                         const Executor& exec) {
  if (!(config.s > 0.0 && config.s < 1.0 / 3.0))
    throw std::invalid_argument(fmt::format("s must be < 1/3 (and > 0), got {}", config.s));
  check_guard_band(config.z);
  check_samples(config.n_samples);
  const Digraph g = Digraph::build(config.graph);
  const int e = reference_edge(g, config.reference);
  const auto groups = edges_by_distance(g, config.reference);
  if (groups.size() < 4)
    throw std::invalid_argument(
        fmt::format("insufficient distinct distances ({} < 4) for fitting", groups.size()));
  const std::uint64_t stream = derive_seed(seed, StreamTag::Decay);

  std::vector<DecayCurve> curves;
  for (double phi : config.strengths) {
    const ScatteringFamily S = make_family(g, FamilySpec::near_identity(phi, config.family_seed));
    const auto table = exec.map<std::vector<double>>(
        static_cast<std::size_t>(config.n_samples), [&](std::size_t i) {
          const WalkOperator u = build_unitary(g, S, sample_disorder(g, config.disorder, stream, i));
          const Vector row = resolvent_row(u.matrix, config.z, e);
          std::vector<double> out;
          out.reserve(groups.size());
          for (const auto& grp : groups) {
            double acc = 0.0;
            for (int f : grp) acc += std::pow(std::abs(row(f)), config.s);
            out.push_back(acc / static_cast<double>(grp.size()));
          }
          return out;
        });
    DecayCurve curve;
    curve.strength = phi;
    curve.rows = distance_rows(table, groups, seed);
    curve.fit = fit_rows(curve.rows, config.noise_floor, config.fit_min_distance, config.fit_max_distance);
    curves.push_back(std::move(curve));
  }
  return curves;
}

std::vector<DynlocCurve> dynloc_experiment(const DynlocConfig& config, std::uint64_t seed,
                                           const Executor& exec) {
  if (config.horizon < 0) throw std::invalid_argument("probe horizon must be >= 0");
  check_samples(config.n_samples);
  const Digraph g = Digraph::build(config.graph);
  const int e = reference_edge(g, config.reference);
  const auto groups = edges_by_distance(g, config.reference, config.targets_per_distance);
  if (groups.size() < 4)
    throw std::invalid_argument(
        fmt::format("insufficient distinct distances ({} < 4) for fitting", groups.size()));
  std::vector<int> targets;
  for (const auto& grp : groups) targets.insert(targets.end(), grp.begin(), grp.end());
  const std::uint64_t stream = derive_seed(seed, StreamTag::DynLoc);

  struct Sample {
    std::vector<double> probe;
    std::vector<double> ec;
    double excess = 0.0;
  };
  std::vector<DynlocCurve> curves;
  for (double phi : config.strengths) {
    const ScatteringFamily S = make_family(g, FamilySpec::near_identity(phi, config.family_seed));
    const auto samples = exec.map<Sample>(static_cast<std::size_t>(config.n_samples), [&](std::size_t i) {
      const EigenSystem eig =
          eigendecompose(build_unitary(g, S, sample_disorder(g, config.disorder, stream, i)));
      const auto probe = dynamical_probe_many(eig, e, targets, config.arcs, config.horizon);
      Sample out;
      out.excess = -std::numeric_limits<double>::infinity();
      std::size_t t = 0;
      for (const auto& grp : groups) {
        double p = 0.0, q = 0.0;
        for (int f : grp) {
          const double ecv = ec(eig, e, f, config.arcs);
          out.excess = std::max(out.excess, probe[t] - ecv);
          p += probe[t++];
          q += ecv;
        }
        out.probe.push_back(p / static_cast<double>(grp.size()));
        out.ec.push_back(q / static_cast<double>(grp.size()));
      }
      return out;
    });
    std::vector<std::vector<double>> probes, ecs;
    DynlocCurve curve;
    curve.strength = phi;
    curve.max_excess = -std::numeric_limits<double>::infinity();
    for (const auto& smp : samples) {
      probes.push_back(smp.probe);
      ecs.push_back(smp.ec);
      curve.max_excess = std::max(curve.max_excess, smp.excess);
    }
    curve.probe = distance_rows(probes, groups, seed);
    curve.ec = distance_rows(ecs, groups, seed);
    curve.fit = fit_rows(curve.probe, config.noise_floor, config.fit_min_distance, config.fit_max_distance);
    curves.push_back(std::move(curve));
  }
  return curves;
}

SmallnessReport resolvent_smallness_check(const Digraph& g, const ScatteringFamily& S,
                                          const DisorderSpec& mu, const BallSpec& ball, int e,
                                          int f, cplx z, double s, double p, int n_samples,
                                          std::uint64_t seed, const Executor& exec) {
  check_fraction(s, "s");
  check_samples(n_samples);
  check_guard_band(z);
  check_edge_index(g, e);
  check_edge_index(g, f);
  if (!(p > 1.0 / (1.0 - s)))
    throw std::invalid_argument(fmt::format("p must exceed 1/(1-s) = {}, got {}", 1.0 / (1.0 - s), p));
  if (e == f || e == g.reversed(f))
    throw std::invalid_argument("edges e and f are equivalent (same edge pair); pick non-equivalent edges");
  const ConsistentSubset h = edge_ball(g, ball.root, ball.radius);
  if (!h.contains(e) || !h.contains(f)) throw std::invalid_argument("both edges must lie in H_n");

  SmallnessReport rep;
  rep.radius = ball.radius;
  rep.ball_size = static_cast<int>(ball_vertices(g, ball).size());
  rep.distance_to_identity = scattering_distance(S, identity_like(g));
  const double b2 = static_cast<double>(rep.ball_size) * rep.ball_size;
  rep.hypothesis_bound = std::pow(b2, -1.0) * std::pow(g.max_degree(), -(1.0 + 2.0 * p * s) / (s * p));
  if (!(rep.distance_to_identity < rep.hypothesis_bound))
    throw std::invalid_argument(fmt::format("||S - I|| = {:.3e} violates the smallness hypothesis < {:.3e}",
                                            rep.distance_to_identity, rep.hypothesis_bound));
  rep.scale = std::pow(rep.distance_to_identity * b2, s / (1.0 + 2.0 * s * p));

  const std::uint64_t stream = derive_seed(seed, StreamTag::Smallness);
  const auto vals = exec.map<double>(static_cast<std::size_t>(n_samples), [&](std::size_t i) {
    const BallDecoupling dec = ball_restrict(g, S, sample_disorder(g, mu, stream, i), ball);
    const int le = dec.inside.local_index(e);
    const int lf = dec.inside.local_index(f);
    return std::pow(std::abs(resolvent_element(dec.inside.matrix, z, le, lf)), s);
  });
  rep.estimate = summarize(vals, seed);
  return rep;
}

}  // namespace sqw
