#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "sqw/estimators.hpp"
#include "support.hpp"

using namespace sqw;

namespace {

const Executor& serial() {
  static const Executor exec(1);
  return exec;
}

// Periodic trapezoid for a smooth integrand; plenty for |z|^2 away from 1.
double fm_oracle(double s, cplx z, int nodes = 20000) {
  double acc = 0.0;
  for (int k = 0; k < nodes; ++k) {
    const double a = kTwoPi * (k + 0.5) / nodes;
    acc += std::pow(std::abs(z * z - std::polar(1.0, a)), -s);
  }
  return acc / nodes;
}

}  // namespace

TEST(Summary, MeanAndStandardError) {
  const std::vector<double> v{1.0, 2.0, 3.0, 4.0};
  const auto est = summarize(v, 9);
  EXPECT_DOUBLE_EQ(est.mean, 2.5);
  EXPECT_NEAR(est.std_error, std::sqrt(5.0 / 3.0) / 2.0, 1e-15);
  EXPECT_EQ(est.n_samples, 4);
  EXPECT_EQ(est.seed, 9u);
  EXPECT_THROW(summarize(std::vector<double>{1.0}, 0), std::invalid_argument);
}

TEST(ZGridTest, DefaultsAndGuardBand) {
  const auto g = ZGrid::defaults();
  EXPECT_EQ(g.points().size(), 8u * 64u);
  EXPECT_EQ(g.inner_points().size(), 4u * 64u);
  for (cplx z : g.points()) EXPECT_GT(std::abs(std::abs(z) - 1.0), kGuardBand);
  ZGrid bad;
  bad.radii = {1.0 + 1e-7};
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  bad.radii = {2.5};
  EXPECT_THROW(bad.validate(), std::invalid_argument);
}

TEST(FractionalMoment, TwoVertexOracle) {
  const auto g = Digraph::build(GraphSpec::path(2));
  const auto S = ScatteringFamily::identity(g);
  for (double s : {0.2, 0.5}) {
    const auto r = mc_fractional_moment(g, S, DisorderSpec::uniform(), 0, 1, s,
                                        {cplx(0.5, 0.0), cplx(1.1, 0.0)}, 20000, 5, serial());
    for (const auto& row : r.rows) {
      const double oracle = fm_oracle(s, row.z);
      EXPECT_LE(std::abs(row.estimate.mean - oracle), 4.0 * row.estimate.std_error)
          << "s=" << s << " z=" << row.z;
    }
  }
}

TEST(FractionalMoment, BoundsAndLimits) {
  const auto g = Digraph::build(GraphSpec::cycle(8));
  const auto S = make_family(g, FamilySpec::haar(3));
  const auto far = mc_fractional_moment(g, S, DisorderSpec::uniform(), 0, 5, 0.5,
                                        {cplx(2.0, 0.0), cplx(0.0, -2.0)}, 200, 1, serial());
  for (const auto& row : far.rows) EXPECT_LE(row.estimate.mean, 1.0 + 1e-12);
  const auto tiny = mc_fractional_moment(g, S, DisorderSpec::uniform(), 0, 5, 1e-6,
                                         {cplx(0.5, 0.0)}, 200, 1, serial());
  EXPECT_NEAR(tiny.rows[0].estimate.mean, 1.0, 1e-3);
  EXPECT_THROW(mc_fractional_moment(g, S, DisorderSpec::uniform(), 0, 5, 1.0, {cplx(0.5, 0.0)},
                                    10, 1, serial()),
               std::invalid_argument);
  EXPECT_THROW(mc_fractional_moment(g, S, DisorderSpec::uniform(), 0, 5, 0.5, {cplx(1.0, 0.0)},
                                    10, 1, serial()),
               std::domain_error);
}

TEST(SpectralAverage, OriginIsOneAndIntegrandNonnegative) {
  const auto g = Digraph::build(GraphSpec::torus_grid(3, 3));
  const auto S = make_family(g, FamilySpec::near_identity(0.3, 2));
  const auto r = mc_spectral_average(g, S, DisorderSpec::density({0.5 / kTwoPi, 1.5 / kTwoPi}), 3,
                                     {cplx(0.0, 0.0), cplx(0.9, 0.1)}, 64, 8, 4, serial());
  EXPECT_NEAR(r.rows[0].estimate.mean, 1.0, 1e-12);
  EXPECT_GE(r.min_integrand, -1e-12);
  EXPECT_THROW(mc_spectral_average(g, S, DisorderSpec::uniform(), 3, {cplx(1.5, 0.0)}, 64, 8, 4,
                                   serial()),
               std::invalid_argument);
}

TEST(SpectralAverage, TwoVertexIndependentOfOtherPhase) {
  const auto g = Digraph::build(GraphSpec::path(2));
  const auto S = ScatteringFamily::identity(g);
  const int e = g.edge_index(1, 0);  // source vertex 1 is averaged
  const std::vector<cplx> zs{cplx(0.5, 0.0), cplx(0.0, 0.9)};
  Disorder w = zero_disorder(g);
  const auto base = single_phase_average(g, S, w, DisorderSpec::uniform(), e, zs, 128);
  for (int k = 1; k <= 10; ++k) {
    w.phases[0] = 0.6 * k;
    const auto v = single_phase_average(g, S, w, DisorderSpec::uniform(), e, zs, 128);
    for (std::size_t i = 0; i < zs.size(); ++i) EXPECT_NEAR(v[i], base[i], 1e-10);
  }
}

TEST(SpectralAverage, UniformClosedFormMatchesQuadrature) {
  const auto g = Digraph::build(GraphSpec::cycle(6));
  const auto S = make_family(g, FamilySpec::haar(8));
  const auto w = sample_disorder(g, DisorderSpec::uniform(), 4, 0);
  const std::vector<cplx> zs{cplx(0.3, 0.2), cplx(-0.5, 0.5)};
  const auto quad = single_phase_average(g, S, w, DisorderSpec::uniform(), 2, zs, 512);
  const auto exact = single_phase_average_uniform(g, S, w, 2, zs);
  for (std::size_t i = 0; i < zs.size(); ++i) EXPECT_NEAR(quad[i], exact[i], 1e-9);
}

TEST(GapProbability, UniformBoundArithmetic) {
  const auto g = Digraph::build(GraphSpec::cycle(16));
  const auto rows = gap_probability(g, DisorderSpec::uniform(), {0, 4}, {cplx(1.01, 0.0)}, {0.01},
                                    2000, 3, serial());
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_NEAR(rows[0].bound, 2.0 * 9.0 * 0.01, 1e-14);
  EXPECT_TRUE(rows[0].bound_applies);
  EXPECT_TRUE(rows[0].pass);
  EXPECT_LE(rows[0].estimate.mean, rows[0].bound + 3.0 * rows[0].estimate.std_error);
}

TEST(GapProbability, LargeEtaIsCertain) {
  const auto g = Digraph::build(GraphSpec::tree(2, 3));
  const auto rows = gap_probability(g, DisorderSpec::uniform(), {0, 2},
                                    {cplx(0.5, 0.0), cplx(0.0, -0.99)}, {2.0, 2.5}, 50, 1, serial());
  for (const auto& r : rows) {
    EXPECT_EQ(r.estimate.mean, 1.0);
    EXPECT_FALSE(r.bound_applies);
  }
  EXPECT_THROW(gap_probability(g, DisorderSpec::uniform(), {0, 2}, {cplx(0.5, 0.0)}, {0.0}, 50, 1,
                               serial()),
               std::invalid_argument);
}

TEST(GeometricResolvent, IdentityFamilyIsExact) {
  const auto g = Digraph::build(GraphSpec::cycle(24));
  const auto w = sample_disorder(g, DisorderSpec::uniform(), 6, 0);
  const auto r = check_geometric_resolvent(g, ScatteringFamily::identity(g), w, cplx(0.9, 0.0), {0, 5});
  EXPECT_EQ(r.identity_residual, 0.0);
  EXPECT_EQ(r.cross_block_max, 0.0);
  EXPECT_EQ(r.screened_max, 0.0);
}

TEST(GeometricResolvent, NearIdentityResidual) {
  const auto g = Digraph::build(GraphSpec::cycle(24));
  const auto S = make_family(g, FamilySpec::near_identity(0.1, 3));
  for (std::uint64_t i = 0; i < 5; ++i) {
    const auto w = sample_disorder(g, DisorderSpec::uniform(), 7, i);
    const auto r = check_geometric_resolvent(g, S, w, cplx(0.9, 0.0), {0, 5});
    EXPECT_LT(r.identity_residual, 1e-9);
    EXPECT_LT(r.cross_block_max, 1e-12);
    EXPECT_LT(r.screened_max, 1e-12);
    EXPECT_GT(r.screened_columns, 0);
  }
  EXPECT_THROW(check_geometric_resolvent(g, S, zero_disorder(g), cplx(0.9, 0.0), {0, 12}),
               std::out_of_range);
}

TEST(Fmec, TrivialCasesAreZero) {
  const auto g = Digraph::build(GraphSpec::cycle(10));
  const auto B = edge_ball(g, 0, 2);
  const int f = g.edge_index(1, 0);
  const int e = g.edge_index(5, 6);
  FmecParams p;
  p.n_samples = 20;
  p.cw_realizations = 2;
  p.arcs = ArcSet();
  const auto haar = make_family(g, FamilySpec::haar(1));
  const auto empty = check_fmec_bound(g, haar, DisorderSpec::uniform(), B, e, f, p, 3, serial());
  EXPECT_EQ(empty.lhs.mean, 0.0);
  EXPECT_EQ(empty.rhs, 0.0);
  p.arcs = ArcSet::upper_half();
  const auto id = check_fmec_bound(g, ScatteringFamily::identity(g), DisorderSpec::uniform(), B, e,
                                   f, p, 3, serial());
  EXPECT_EQ(id.lhs.mean, 0.0);
  EXPECT_EQ(id.rhs, 0.0);
  EXPECT_EQ(id.t_table.maxCoeff(), 0.0);
  EXPECT_FALSE(id.violation);
}

TEST(Fmec, CycleExampleHasNoViolation) {
  const auto g = Digraph::build(GraphSpec::cycle(16));
  const auto S = make_family(g, FamilySpec::near_identity(0.2, 5));
  const int f = g.edge_index(1, 0);
  const auto B = edge_ball(g, 0, 3);
  const int e = g.edge_index(8, 9);
  FmecParams p;
  p.arcs = ArcSet::upper_half();
  p.n_samples = 200;
  p.cw_realizations = 4;
  const auto r = check_fmec_bound(g, S, DisorderSpec::uniform(), B, e, f, p, 11, serial());
  EXPECT_FALSE(r.violation);
  EXPECT_GE(r.slack(), 0.0);
  EXPECT_GT(r.c_w, 0.0);
}

TEST(Fmec, RejectsBadParameters) {
  FmecParams p;
  p.beta = 0.3;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p.beta = 0.2;
  p.s = 0.22;  // beta <= 1 - beta/s fails
  EXPECT_THROW(p.validate(), std::invalid_argument);
}

TEST(DecayFitTest, RecoversExactExponential) {
  const std::vector<int> d{1, 2, 3, 4, 5, 6};
  std::vector<double> m, se(d.size(), 0.0);
  for (int x : d) m.push_back(2.5 * std::exp(-0.7 * x));
  const auto fit = fit_decay(d, m, se);
  EXPECT_NEAR(fit.c, 2.5, 1e-10);
  EXPECT_NEAR(fit.g, 0.7, 1e-10);
  EXPECT_NEAR(fit.r_squared, 1.0, 1e-12);
  EXPECT_EQ(fit.points, 6);
}

TEST(DecayFitTest, ConstantGivesZeroRate) {
  const std::vector<int> d{0, 1, 2, 3, 4};
  const std::vector<double> m(5, 0.3), se(5, 0.0);
  EXPECT_NEAR(fit_decay(d, m, se).g, 0.0, 1e-14);
}

TEST(DecayFitTest, NeedsFourDistances) {
  const std::vector<int> d{1, 2, 3, 4, 5};
  const std::vector<double> m{1.0, 0.5, 0.25, 0.125, 0.0625};
  const std::vector<double> noisy{0.0, 0.0, 0.0, 0.1, 0.0};
  EXPECT_THROW(fit_decay(std::span(d).first(3), std::span(m).first(3), std::span(noisy).first(3)),
               std::invalid_argument);
  // The fourth point is noise-dominated and dropped.
  EXPECT_THROW(fit_decay(std::span(d).first(4), std::span(m).first(4), std::span(noisy).first(4)),
               std::invalid_argument);
  EXPECT_NO_THROW(fit_decay(d, m, std::vector<double>(5, 0.0)));
}

TEST(Decay, SmallCycleDecays) {
  DecayConfig c;
  c.graph = GraphSpec::cycle(20);
  c.strengths = {0.05};
  c.n_samples = 100;
  const auto curves = decay_experiment(c, 4, serial());
  ASSERT_EQ(curves.size(), 1u);
  EXPECT_GT(curves[0].fit.g, 0.0);
  EXPECT_GT(curves[0].fit.r_squared, 0.9);
  c.s = 0.4;
  EXPECT_THROW(decay_experiment(c, 4, serial()), std::invalid_argument);
}

TEST(Dynloc, IdentityFamilyProbeVanishesAcrossBlocks) {
  const auto g = Digraph::build(GraphSpec::cycle(12));
  const auto w = sample_disorder(g, DisorderSpec::uniform(), 2, 0);
  const auto eig = eigendecompose(build_unitary(g, ScatteringFamily::identity(g), w));
  const int e = reference_edge(g, 0);
  for (const auto& group : edges_by_distance(g, 0))
    for (int f : group)
      if (edge_distance(g, e, f) >= 2 && f != g.reversed(e)) {
        EXPECT_LT(dynamical_probe(eig, e, f, ArcSet::full_circle(), 200), 1e-14);
      }

  DynlocConfig c;
  c.graph = GraphSpec::cycle(12);
  c.strengths = {0.0};
  c.n_samples = 10;
  c.horizon = 50;
  // Every probe beyond the reference block is zero, leaving nothing to fit.
  EXPECT_THROW(dynloc_experiment(c, 2, serial()), std::invalid_argument);
}

TEST(Dynloc, ProbeStaysBelowCorrelator) {
  DynlocConfig c;
  c.graph = GraphSpec::cycle(20);
  c.strengths = {0.3};
  c.n_samples = 60;
  c.horizon = 200;
  const auto curves = dynloc_experiment(c, 2, serial());
  ASSERT_EQ(curves.size(), 1u);
  EXPECT_LE(curves[0].max_excess, 1e-10);
  EXPECT_GT(curves[0].fit.g, 0.0);
  for (std::size_t i = 0; i < curves[0].probe.size(); ++i)
    EXPECT_LE(curves[0].probe[i].estimate.mean, curves[0].ec[i].estimate.mean + 1e-10);
}

TEST(Smallness, IdentityOffBlockIsZero) {
  const auto g = Digraph::build(GraphSpec::cycle(24));
  const int e = g.edge_index(1, 0);
  const int f = g.edge_index(3, 2);
  const auto r = resolvent_smallness_check(g, ScatteringFamily::identity(g), DisorderSpec::uniform(),
                                           {0, 5}, e, f, cplx(0.9, 0.0), 0.2, 2.0, 20, 1, serial());
  EXPECT_EQ(r.estimate.mean, 0.0);
  EXPECT_EQ(r.distance_to_identity, 0.0);
  EXPECT_EQ(r.ball_size, 11);
  EXPECT_THROW(resolvent_smallness_check(g, ScatteringFamily::identity(g), DisorderSpec::uniform(),
                                         {0, 5}, e, g.reversed(e), cplx(0.9, 0.0), 0.2, 2.0, 20, 1,
                                         serial()),
               std::invalid_argument);
}
