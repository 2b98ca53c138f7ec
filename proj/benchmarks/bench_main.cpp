#include <benchmark/benchmark.h>

#include <vector>

#include "mfaimd/config_io.hpp"
#include "mfaimd/equilibrium.hpp"
#include "mfaimd/mckean.hpp"
#include "mfaimd/particle_sim.hpp"

namespace {

mfaimd::ModelConfig config(const char* name) {
  return mfaimd::load_config(std::string(MFAIMD_CONFIG_DIR) + "/" + name);
}

void BM_ExactIndependent(benchmark::State& state) {
  const auto cfg = config("aimd_constant.json");
  mfaimd::particle::SimulationOptions o;
  o.horizon = 10.0;
  o.samples = 10;
  o.workers = 1;
  const std::vector<std::size_t> n{static_cast<std::size_t>(state.range(0))};
  for (auto _ : state)
    benchmark::DoNotOptimize(
        mfaimd::particle::simulate_exact(cfg, n, mfaimd::InitialCondition::from_model(), o));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ExactIndependent)->Arg(100)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);

void BM_ExactLoadCoupled(benchmark::State& state) {
  const auto cfg = config("load_coupled.json");
  mfaimd::particle::SimulationOptions o;
  o.horizon = 5.0;
  o.samples = 10;
  o.scaled = true;
  o.workers = 1;
  const std::vector<std::size_t> n{static_cast<std::size_t>(state.range(0))};
  for (auto _ : state)
    benchmark::DoNotOptimize(
        mfaimd::particle::simulate_exact(cfg, n, mfaimd::InitialCondition::from_model(), o));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ExactLoadCoupled)->Arg(50)->Arg(200)->Arg(800)->Unit(benchmark::kMillisecond);

void BM_Euler(benchmark::State& state) {
  const auto cfg = config("aimd_constant.json");
  mfaimd::particle::SimulationOptions o;
  o.horizon = 10.0;
  o.samples = 10;
  o.workers = 1;
  const std::vector<std::size_t> n{static_cast<std::size_t>(state.range(0))};
  for (auto _ : state)
    benchmark::DoNotOptimize(mfaimd::particle::simulate_euler(
        cfg, n, mfaimd::InitialCondition::from_model(), 0.01, o));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Euler)->Arg(100)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_HazardFunctional(benchmark::State& state) {
  const auto cfg = config("linear_service.json");
  mfaimd::equilibrium::HazardOptions o;
  o.replicas = static_cast<std::size_t>(state.range(0));
  o.workers = 1;
  const std::vector<double> u{0.0};
  const std::vector<mfaimd::equilibrium::Polynomial> fs{mfaimd::equilibrium::Polynomial::one(),
                                                        mfaimd::equilibrium::Polynomial::identity()};
  for (auto _ : state)
    benchmark::DoNotOptimize(mfaimd::equilibrium::hazard_functional(cfg, 0, u, fs, o));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_HazardFunctional)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);

void BM_PicardMap(benchmark::State& state) {
  const auto cfg = config("load_coupled.json");
  const std::vector<mfaimd::mckean::SingleUserInit> init{mfaimd::mckean::SingleUserInit::mixed(1.0)};
  const mfaimd::mckean::LoadTrajectory u(5.0, 50, 1);
  for (auto _ : state)
    benchmark::DoNotOptimize(mfaimd::mckean::picard_map(
        cfg, init, u, static_cast<std::size_t>(state.range(0)), 0, 1));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_PicardMap)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
