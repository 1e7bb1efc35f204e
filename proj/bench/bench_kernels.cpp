#include "coassign/assignment.hpp"
#include "coassign/netsim.hpp"
#include "coassign/security.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace coassign;

namespace {

ReferenceTrajectory long_trajectory(int T)
{
    std::vector<Point2> wps;
    for (int t = 1; t <= T; ++t)
        wps.push_back({0.2 * t, 4.0 + std::sin(0.05 * t)});
    return ReferenceTrajectory(wps, 1.0);
}

ForbiddenSet scattered_regions()
{
    ForbiddenSet F;
    for (int k = 0; k < 12; ++k) {
        const double x = 2.0 + 3.0 * k;
        const double y = k % 2 ? 6.0 : 2.0;
        F.regions.emplace_back(std::vector<Point2>{{x, y}, {x + 0.8, y}, {x + 0.8, y + 0.8}, {x, y + 0.8}});
    }
    return F;
}

void lookup_table(benchmark::State& state, Exec exec)
{
    const auto traj = long_trajectory(200);
    const auto F = scattered_regions();
    for (auto _ : state)
        benchmark::DoNotOptimize(build_lookup_table(traj, F, 0.5, exec));
}

std::vector<AdmmInstance> batch(int count, std::size_t n)
{
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 8.0);
    AdmmConfig cfg = AdmmConfig::for_workspace(8.0 * std::sqrt(2.0));
    std::vector<AdmmInstance> out;
    for (int i = 0; i < count; ++i) {
        std::vector<Point2> agents;
        for (std::size_t k = 0; k < n; ++k)
            agents.push_back({u(rng), u(rng)});
        TaskSet tasks;
        tasks.trajectory = {u(rng), u(rng)};
        for (std::size_t k = 0; k + 1 < n; ++k)
            tasks.online.push_back({static_cast<int>(k), {u(rng), u(rng)}});
        out.push_back({build_weights(agents, tasks, cfg), CommGraph::complete(n)});
    }
    return out;
}

void admm_batch(benchmark::State& state, Exec exec)
{
    const auto instances = batch(64, 5);
    const AdmmConfig cfg = AdmmConfig::for_workspace(8.0 * std::sqrt(2.0));
    for (auto _ : state)
        benchmark::DoNotOptimize(admm_solve_batch(instances, cfg, exec));
}

void netsim(benchmark::State& state, Exec exec)
{
    const auto instances = batch(1, 24);
    const AdmmConfig cfg = AdmmConfig::for_workspace(8.0 * std::sqrt(2.0));
    for (auto _ : state)
        benchmark::DoNotOptimize(run_distributed_admm(instances[0].graph, instances[0].weights, cfg, nullptr, exec));
}

}  // namespace

BENCHMARK_CAPTURE(lookup_table, serial, Exec::Serial)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(lookup_table, parallel, Exec::Parallel)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(admm_batch, serial, Exec::Serial)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(admm_batch, parallel, Exec::Parallel)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(netsim, serial, Exec::Serial)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(netsim, parallel, Exec::Parallel)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
