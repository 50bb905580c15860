// SPDX-License-Identifier: Apache-2.0
//
// Microbenchmarks of the per-slot hot paths and one training epoch.

#include <benchmark/benchmark.h>

#include "dcbf/baselines.hpp"
#include "dcbf/bayes_filter.hpp"
#include "dcbf/channel_sim.hpp"
#include "dcbf/conformal.hpp"
#include "dcbf/harness.hpp"
#include "dcbf/quantile_predictor.hpp"

using namespace dcbf;

namespace {

PredictorShape default_shape(Architecture arch) {
    PredictorShape s;
    s.arch = arch;
    s.hidden = arch == Architecture::mlp ? 64 : 128;
    return s;
}

Calibration flat_calibration(const PredictorShape& shape) {
    Calibration c;
    c.levels = QuantileLevels::deciles();
    c.offsets.gamma = Matrix::Zero(shape.links, shape.levels);
    c.bounds = LinkBounds{Vector::Constant(shape.links, -3.0), Vector::Constant(shape.links, 3.0)};
    return c;
}

void BM_GenerateTrace(benchmark::State& state) {
    const SystemConfig config;
    for (auto _ : state) {
        benchmark::DoNotOptimize(generate_trace(config, static_cast<std::size_t>(state.range(0)), 1));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_GenerateTrace)->Arg(1000)->Arg(10000);

void BM_Forward(benchmark::State& state) {
    const PredictorShape shape = default_shape(static_cast<Architecture>(state.range(0)));
    const PredictorParams params = init_params(shape, 1);
    const Matrix x = Matrix::Random(shape.input_width(), state.range(1));
    for (auto _ : state) {
        benchmark::DoNotOptimize(forward_batch(params, x));
    }
    state.SetItemsProcessed(state.iterations() * state.range(1));
}
BENCHMARK(BM_Forward)->ArgsProduct({{0, 1}, {1, 64}});

void BM_Backward(benchmark::State& state) {
    const PredictorShape shape = default_shape(static_cast<Architecture>(state.range(0)));
    const PredictorParams params = init_params(shape, 1);
    const Batch batch{Matrix::Random(shape.input_width(), 64), Matrix::Random(shape.links, 64)};
    const QuantileLevels levels = QuantileLevels::deciles();
    for (auto _ : state) {
        benchmark::DoNotOptimize(backward(params, levels, batch));
    }
}
BENCHMARK(BM_Backward)->Arg(0)->Arg(1);

void BM_PosteriorMean(benchmark::State& state) {
    Matrix phi(1, 11);
    phi << -3.0, -1.2, -0.8, -0.5, -0.2, 0.0, 0.2, 0.5, 0.8, 1.2, 3.0;
    const PiecewiseUniformPrior prior = build_prior(CalibratedQuantiles{phi}, QuantileLevels::deciles());
    std::uint64_t seed = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(posterior_mean(prior, 0, 0.3, 1.0, 0.05, static_cast<std::size_t>(state.range(0)), ++seed));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_PosteriorMean)->Arg(1000)->Arg(100000);

void BM_DcbfSlot(benchmark::State& state) {
    // One full recursion step per iteration: predict, calibrate, sample, weight.
    const PredictorShape shape = default_shape(static_cast<Architecture>(state.range(0)));
    const PredictorParams params = init_params(shape, 1);
    const Calibration cal = flat_calibration(shape);
    const ChannelTrace trace = generate_trace(SystemConfig{}, 203, 2);
    const ObservationSequence seq = observe_slots(trace, 0, trace.length(), 10.0, 3);
    for (auto _ : state) {
        benchmark::DoNotOptimize(dcbf_filter(params, cal, seq, FilterConfig{1000, 4}));
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(prediction_count(seq, shape.history)));
}
BENCHMARK(BM_DcbfSlot)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_KalmanPredict(benchmark::State& state) {
    const ChannelTrace trace = generate_trace(SystemConfig{}, 4000, 5);
    const auto models = fit_ar(trace, 0, 3000, 3);
    const ObservationSequence seq = observe_slots(trace, 3000, trace.length(), 10.0, 6);
    for (auto _ : state) {
        benchmark::DoNotOptimize(kalman_predict(models, seq, 3));
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(prediction_count(seq, 3)));
}
BENCHMARK(BM_KalmanPredict)->Unit(benchmark::kMillisecond);

void BM_EmpiricalQuantile(benchmark::State& state) {
    const Matrix scores = Matrix::Random(1, state.range(0));
    const std::vector<double> v(scores.data(), scores.data() + scores.size());
    for (auto _ : state) {
        benchmark::DoNotOptimize(empirical_quantile(v, 0.9));
    }
}
BENCHMARK(BM_EmpiricalQuantile)->Arg(1000)->Arg(100000);

} // namespace

BENCHMARK_MAIN();
