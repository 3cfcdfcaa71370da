#include <benchmark/benchmark.h>

#include <numbers>

#include "ctap/dataset.hpp"
#include "ctap/env.hpp"
#include "ctap/forest.hpp"
#include "ctap/policy.hpp"
#include "ctap/pulses.hpp"
#include "ctap/quantum.hpp"
#include "ctap/rng.hpp"

using namespace ctap;

namespace {

constexpr double kPi = std::numbers::pi;

void step_with(benchmark::State& state, quantum::Propagator method, int n_dots) {
  const auto model = quantum::MasterEquationModel::ideal(n_dots);
  const auto sched = n_dots == 5 ? pulses::gaussian_sctap(21 * kPi, 50) : pulses::gaussian_ctap_pair(12 * kPi, 50);
  quantum::StepOptions o;
  o.method = method;
  // state actually reached before interval 20
  quantum::StepOptions ex;
  ex.method = quantum::Propagator::expm;
  const auto traj = quantum::evolve(model, sched, quantum::initial_state(model), ex);
  const auto& rho = traj.states[20];
  const auto c = sched.controls_at(20);
  for (auto _ : state) benchmark::DoNotOptimize(quantum::step(model, rho, c, sched.dt(), o));
}

void BM_StepRk4(benchmark::State& s) { step_with(s, quantum::Propagator::rk4, static_cast<int>(s.range(0))); }
void BM_StepExpm(benchmark::State& s) { step_with(s, quantum::Propagator::expm, static_cast<int>(s.range(0))); }
BENCHMARK(BM_StepRk4)->Arg(3)->Arg(5);
BENCHMARK(BM_StepExpm)->Arg(3)->Arg(5);

void BM_BaselineEpisode(benchmark::State& state) {
  env::ScenarioConfig cfg;
  cfg.t_max_pi_units = 12;
  const auto sched = env::baseline_schedule(cfg);
  for (auto _ : state) {
    env::CtapEnv e(cfg);
    e.reset();
    for (std::size_t k = 0; k < sched.n_steps(); ++k) benchmark::DoNotOptimize(e.step(sched.controls_at(k)));
  }
}
BENCHMARK(BM_BaselineEpisode)->Unit(benchmark::kMillisecond);

void BM_PolicyForward(benchmark::State& state) {
  Rng rng(1);
  const auto p = agent::GaussianPolicy::initialized(4, {16}, 2, std::log(0.3), rng);
  const std::vector<double> obs{0.1, 0.2, 0.5, 0.4};
  for (auto _ : state) benchmark::DoNotOptimize(p.forward(obs));
}
BENCHMARK(BM_PolicyForward);

void BM_ForestImportance(benchmark::State& state) {
  Rng rng(2);
  const auto n = static_cast<std::size_t>(state.range(0));
  std::vector<std::vector<double>> x(8, std::vector<double>(n));
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (auto& col : x) col[i] = rng.normal();
    y[i] = x[0][i] + 0.5 * x[1][i] * x[2][i] + 0.1 * rng.normal();
  }
  const std::vector<std::string> names{"a", "b", "c", "d", "e", "f", "g", "h"};
  analysis::ForestConfig cfg;
  cfg.n_threads = 1;
  for (auto _ : state) benchmark::DoNotOptimize(analysis::feature_importance(x, names, y, cfg));
}
BENCHMARK(BM_ForestImportance)->Arg(10000)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
