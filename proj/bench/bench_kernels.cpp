// Serial reference vs OpenMP kernels.  Results are bitwise identical, so only
// wall time differs.

#include <benchmark/benchmark.h>

#include <cstdint>
#include <vector>

#include "bq/analytic_pricing.hpp"
#include "bq/bayes_engine.hpp"
#include "bq/consistency_lab.hpp"

using namespace bq;

namespace {

Exec exec_of(const benchmark::State& state) { return state.range(0) ? Exec::parallel : Exec::serial; }

void BM_oracle(benchmark::State& state) {
    const OptionSpec call{OptionKind::call, 100.0, 0.25};
    for (auto _ : state) {
        benchmark::DoNotOptimize(
            mc_oracle_price(call, 100.0, 0.002, 0.158, {4.0, 0.0025, 0.0}, 1 << 20, 1, exec_of(state)));
    }
    state.SetItemsProcessed(state.iterations() * (1 << 20));
}

void BM_mixture(benchmark::State& state) {
    const auto post = MertonPosterior::from_statistics(8, 2.0, 0.0, 0.0025, ThetaPrior::noninformative());
    const auto thetas = post.sample(20000, 5);
    const OptionSpec call{OptionKind::call, 100.0, 0.25};
    for (auto _ : state) {
        benchmark::DoNotOptimize(evaluate_merton_mixture(thetas, call, 100.0, 0.002, 0.158, 1e-10, exec_of(state)));
    }
    state.SetItemsProcessed(state.iterations() * 20000);
}

void BM_bs_convergence(benchmark::State& state) {
    std::vector<std::uint64_t> seeds;
    for (std::uint64_t s = 1; s <= 16; ++s) seeds.push_back(s);
    const std::size_t ns[] = {5, 20, 150, 1000};
    for (auto _ : state) {
        benchmark::DoNotOptimize(bs_convergence_experiment(BsExperiment{}, ns, seeds, exec_of(state)));
    }
}

}  // namespace

BENCHMARK(BM_oracle)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_mixture)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_bs_convergence)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
