// Serial reference against the OpenMP executor on the Monte Carlo kernels.

#include <benchmark/benchmark.h>

#include "sqw/estimators.hpp"

namespace {

using namespace sqw;

struct Instance {
  Digraph graph = Digraph::build(GraphSpec::cycle(40));
  ScatteringFamily family = make_family(graph, FamilySpec::near_identity(0.1, 1));
};

const Instance& instance() {
  static const Instance inst;
  return inst;
}

// Per-realization resolvent columns through serial_map or Executor::map.
void BM_ResolventColumns(benchmark::State& state) {
  const auto& inst = instance();
  const int threads = static_cast<int>(state.range(0));
  const std::size_t n = 64;
  for (auto _ : state) {
    const auto work = [&](std::size_t i) {
      const Disorder w = sample_disorder(inst.graph, DisorderSpec::uniform(), 7, i);
      const WalkOperator u = build_unitary(inst.graph, inst.family, w);
      return std::abs(resolvent_column(u.matrix, cplx(1.01, 0.0), 0)(5));
    };
    const auto out = threads == 0 ? serial_map<double>(n, work) : Executor(threads).map<double>(n, work);
    benchmark::DoNotOptimize(pairwise_sum(out));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(n));
}
BENCHMARK(BM_ResolventColumns)->Arg(0)->Arg(1)->Arg(2)->Arg(4)->ArgName("threads")->UseRealTime()->Unit(benchmark::kMillisecond);

void BM_FractionalMoment(benchmark::State& state) {
  const auto& inst = instance();
  const Executor exec(static_cast<int>(state.range(0)));
  const std::vector<cplx> zs{cplx(0.5, 0.0), cplx(1.01, 0.0)};
  for (auto _ : state) {
    const auto r = mc_fractional_moment(inst.graph, inst.family, DisorderSpec::uniform(), 0, 20, 0.2, zs, 64, 3,
                                        exec);
    benchmark::DoNotOptimize(r.grid_sup);
  }
}
BENCHMARK(BM_FractionalMoment)->Arg(1)->Arg(2)->Arg(4)->ArgName("threads")->UseRealTime()->Unit(benchmark::kMillisecond);

void BM_Eigendecompose(benchmark::State& state) {
  const auto& inst = instance();
  const WalkOperator u =
      build_unitary(inst.graph, inst.family, sample_disorder(inst.graph, DisorderSpec::uniform(), 1, 0));
  for (auto _ : state) benchmark::DoNotOptimize(eigendecompose(u).cluster_count());
}
BENCHMARK(BM_Eigendecompose)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
