// Serial reference kernels against the OpenMP kernels.
#include <benchmark/benchmark.h>

#include "deepbasket/mc_engine.hpp"
#include "deepbasket/neural_net.hpp"
#include "deepbasket/param_sampler.hpp"

namespace {

using namespace deepbasket;

BasketSpec bench_spec() { return sample_spec(SamplingPlan{}, 7); }

void BM_McReference(benchmark::State& state) {
    const BasketSpec spec = bench_spec();
    McConfig cfg;
    cfg.num_paths = static_cast<std::uint64_t>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(price_reference(spec, cfg).value);
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_McParallel(benchmark::State& state) {
    const BasketSpec spec = bench_spec();
    McConfig cfg;
    cfg.num_paths = static_cast<std::uint64_t>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(price(spec, cfg).value);
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

struct NetFixture {
    Mlp model;
    InputBatch batch;

    explicit NetFixture(Eigen::Index rows)
        : model(initialize(make_layer_dims(input_width(6), 300, 6), Activation::ReLU, 3)),
          batch(rows, input_width(6)) {
        for (Eigen::Index i = 0; i < rows; ++i) {
            const auto in = sample_spec(SamplingPlan{}, static_cast<std::uint64_t>(i)).to_inputs();
            for (Eigen::Index c = 0; c < batch.cols(); ++c) batch(i, c) = in[static_cast<std::size_t>(c)];
        }
    }
};

void BM_ForwardReference(benchmark::State& state) {
    NetFixture f(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(forward_reference(f.model, f.batch).data());
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_ForwardParallel(benchmark::State& state) {
    NetFixture f(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(predict(f.model, f.batch).data());
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_ForwardF32(benchmark::State& state) {
    NetFixture f(state.range(0));
    const MlpF32 fast(f.model);
    const InputBatchF input = f.batch.cast<float>();
    for (auto _ : state) benchmark::DoNotOptimize(fast.predict(input).data());
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK(BM_McReference)->Arg(10'000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_McParallel)->Arg(10'000)->Arg(100'000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ForwardReference)->Arg(1'000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ForwardParallel)->Arg(1'000)->Arg(20'000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ForwardF32)->Arg(1'000)->Arg(20'000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
