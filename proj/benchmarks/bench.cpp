#include <benchmark/benchmark.h>

#include "morsdp/augment.hpp"
#include "morsdp/bandit.hpp"
#include "morsdp/bellman.hpp"
#include "morsdp/pomdp.hpp"

namespace {

using namespace morsdp;

PomdpModel fixture_pomdp() {
    PomdpModel p;
    p.hidden = {"s0", "s1"};
    p.observations = {"y0", "y1"};
    p.actions = {"a0", "a1"};
    p.kernel = {{{0.7, 0.3}, {0.4, 0.6}}, {{0.2, 0.8}, {0.9, 0.1}}};
    p.signal = {{0.6, 0.4}, {0.25, 0.75}};
    p.stage_cost = {{0.5, 1.25}, {0.75, 0.25}};
    p.terms = {{1.0, 0.5}, {0.5, -1.0}};
    return p;
}

// One minimizing backward-induction step over the deepest bandit layer.
void bench_backup_min(benchmark::State& state) {
    BanditInstance inst = make_bandit(1.0, 9);
    LayerGraph g(inst.model, DiscountSpec::none(), inst.start, {});
    const int depth = 8;
    g.extend_to(depth, 100'000'000);

    const Layer& last = g.layer(depth);
    ValueTable terminal;
    terminal.layer = depth;
    terminal.stage = 0;
    terminal.values.reserve(last.size());
    for (std::size_t j = 0; j < last.size(); ++j)
        terminal.values.push_back(inst.utility.evaluate(last.d[j]));

    for (auto _ : state) {
        auto stepped = backup_min(g, terminal);
        benchmark::DoNotOptimize(stepped.first.values.data());
    }
    state.SetItemsProcessed(static_cast<int64_t>(state.iterations()) *
                            static_cast<int64_t>(last.size()));
}
BENCHMARK(bench_backup_min);

// Full bandit solve, the artifact's end-to-end hot path.
void bench_bandit_solve(benchmark::State& state) {
    BanditInstance inst = make_bandit(1.0, 5);
    const int horizon = static_cast<int>(state.range(0));
    for (auto _ : state) {
        FiniteSolveResult r =
            solve_finite(inst.model, inst.utility, DiscountSpec::none(), inst.start, horizon);
        benchmark::DoNotOptimize(r.value);
    }
}
BENCHMARK(bench_bandit_solve)->Arg(3)->Arg(5)->Arg(7);

// One tilted filter update on the two-state fixture.
void bench_bayes_step(benchmark::State& state) {
    PomdpModel p = fixture_pomdp();
    ExpMatrixSet mats = build_matrices(p);
    Vec theta{0.35, 0.65};
    for (auto _ : state) {
        BayesStep step = bayes_step(p, mats, theta, 0, 1, 0);
        benchmark::DoNotOptimize(step.gcost);
        benchmark::DoNotOptimize(step.next_theta.data());
    }
}
BENCHMARK(bench_bayes_step);

}  // namespace

BENCHMARK_MAIN();
