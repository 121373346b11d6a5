#include "setid/fixtures.hpp"
#include "setid/kalman.hpp"
#include "setid/model_core.hpp"
#include "setid/moments.hpp"
#include "setid/pipeline.hpp"
#include "setid/setid_mcmc.hpp"
#include "setid/spec_test.hpp"
#include "setid/wedge_qp.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace setid;

static void BM_SolveRE(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const RandomModel rm = random_stable_model(n, 2, 3);
  for (auto _ : state) benchmark::DoNotOptimize(solve_re(rm.mats).P_star.data());
}
BENCHMARK(BM_SolveRE)->Arg(1)->Arg(4)->Arg(16)->Arg(40);

static void BM_Filter(benchmark::State& state) {
  const RandomModel rm = random_stable_model(4, 4, 5);
  const StateSpace ss = assemble_state_space(solve_re(rm.mats));
  const SimulatedPath path = simulate_state_space(ss, static_cast<int>(state.range(0)), 1);
  for (auto _ : state) benchmark::DoNotOptimize(filter(ss, path.y).loglik);
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Filter)->Arg(500)->Arg(5000);

static void BM_WeightsQP(benchmark::State& state) {
  const int T = static_cast<int>(state.range(0));
  std::mt19937_64 rng(9);
  std::normal_distribution<double> nrm;
  Matrix q(T, 3);
  for (int t = 0; t < T; ++t)
    for (int j = 0; j < 3; ++j) q(t, j) = nrm(rng) + (j == 2 ? -0.8 : 0.0);
  for (auto _ : state) benchmark::DoNotOptimize(solve_weights_qp(q, 1).M.data());
}
BENCHMARK(BM_WeightsQP)->Arg(200)->Arg(2000);

static void BM_Criterion(benchmark::State& state) {
  const LiquiditySample s = simulate_liquidity_economy(LiquidityEconomy{}, static_cast<int>(state.range(0)), 2);
  MomentSetup setup;
  setup.spec = liquidity_model_spec();
  setup.data = s.c;
  setup.instruments.constant = false;
  setup.instruments.transform = InstrumentTransform::PositivePart;
  const CriterionFn crit = criterion_from_factory(make_moment_factory(setup));
  const Vector mu = Vector::Constant(1, 0.6);
  for (auto _ : state) benchmark::DoNotOptimize(crit(mu));
}
BENCHMARK(BM_Criterion)->Arg(500)->Arg(5000);

static void BM_Bootstrap(benchmark::State& state) {
  const EnvelopeFixture f = make_envelope_fixture(800, -0.45, 4);
  BootstrapOptions opt;
  opt.B = static_cast<int>(state.range(0));
  opt.block_length = 1;
  for (auto _ : state) benchmark::DoNotOptimize(wedge_specification_test(f.p_series, f.set_series, opt).statistic);
}
BENCHMARK(BM_Bootstrap)->Arg(200)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
