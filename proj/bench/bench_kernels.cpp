// Serial reference against the OpenMP kernels. Run with OMP_NUM_THREADS set to compare.

#include <benchmark/benchmark.h>

#include "vaxopt/analysis.hpp"
#include "vaxopt/integrator.hpp"
#include "vaxopt/kernels.hpp"

using namespace vaxopt;

namespace {

const std::vector<Objective> kObjectives{{ObjectiveKind::deceased}, {ObjectiveKind::infected},
                                         {ObjectiveKind::hospitalized}};

Execution mode(const benchmark::State& state) { return state.range(0) ? Execution::parallel : Execution::serial; }

void BM_BatchCosts(benchmark::State& state) {
    const Instance inst = italy_instance();
    std::vector<std::vector<double>> tables;
    for (auto kind : {InitialGuessKind::homogeneous, InitialGuessKind::ig1, InitialGuessKind::ig2,
                      InitialGuessKind::ig3})
        for (int copy = 0; copy < 4; ++copy) tables.push_back(build_initial_guess(kind, inst.policy, inst.params).u1);
    for (auto _ : state) benchmark::DoNotOptimize(batch_costs(inst, tables, kObjectives, mode(state)));
    state.SetItemsProcessed(state.iterations() * static_cast<long>(tables.size()));
}

void BM_GridSearch(benchmark::State& state) {
    const Instance inst = two_age_instance();
    for (auto _ : state) benchmark::DoNotOptimize(grid_search(inst, kObjectives, 4, mode(state)));
}

void BM_SensitivityScan(benchmark::State& state) {
    const Instance inst = italy_instance();
    Instance dosed = inst;
    dosed.policy = build_initial_guess(InitialGuessKind::ig1, inst.policy, inst.params);
    const Trajectory traj = integrate_forward(dosed.x0, dosed.params, dosed.policy, dosed.grid);
    const auto checkpoints = weekly_checkpoints(traj);
    for (auto _ : state)
        benchmark::DoNotOptimize(sensitivity_scan(inst.params, checkpoints, ScanAxis::sigma, 41, mode(state)));
}

void BM_RecoveryStudy(benchmark::State& state) {
    RecoveryStudyConfig cfg;
    cfg.replicates = 4;
    cfg.chain_length = 5'000;
    for (auto _ : state) benchmark::DoNotOptimize(recovery_study(cfg, mode(state)));
}

}  // namespace

BENCHMARK(BM_BatchCosts)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GridSearch)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SensitivityScan)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RecoveryStudy)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->Iterations(1);

BENCHMARK_MAIN();
