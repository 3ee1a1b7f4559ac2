#include "fan/pipeline.hpp"
#include "fan/spectral.hpp"
#include "fan/training.hpp"

#include <benchmark/benchmark.h>

namespace {

using namespace fan;

Matrix random_batch(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
	SplitMix64 rng(seed);
	Matrix m(rows, cols);
	for (Eigen::Index i = 0; i < m.size(); ++i) {
		m(i) = rng.normal();
	}
	return m;
}

void BM_Rdft(benchmark::State& state) {
	const auto n = static_cast<Eigen::Index>(state.range(0));
	const Matrix x = random_batch(n, 1, 1);
	for (auto _ : state) {
		benchmark::DoNotOptimize(spectral::rdft(column_span(x, 0)));
	}
	state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_Rdft)->Arg(96)->Arg(97)->Arg(336)->Arg(720);

void BM_RoundTrip(benchmark::State& state) {
	const auto n = static_cast<std::size_t>(state.range(0));
	const Matrix x = random_batch(static_cast<Eigen::Index>(n), 1, 2);
	for (auto _ : state) {
		benchmark::DoNotOptimize(spectral::irdft(spectral::rdft(column_span(x, 0)), n));
	}
}
BENCHMARK(BM_RoundTrip)->Arg(96)->Arg(720);

void BM_FrlDecompose(benchmark::State& state) {
	// One training batch: 32 windows of 7 channels.
	const Matrix x = random_batch(96, 32 * 7, 3);
	const auto k = static_cast<std::size_t>(state.range(0));
	for (auto _ : state) {
		benchmark::DoNotOptimize(spectral::frl_decompose(x, k));
	}
	state.SetItemsProcessed(state.iterations() * x.cols());
}
BENCHMARK(BM_FrlDecompose)->Arg(1)->Arg(3)->Arg(8);

void BM_TrainStep(benchmark::State& state) {
	training::PipelineConfig config;
	config.normalizer = state.range(0) == 1 ? normalizers::NormalizerKind::Fan : normalizers::NormalizerKind::Revin;
	config.horizon = state.range(1);
	config.k = 3;
	training::Pipeline pipeline(config);
	const Matrix x = random_batch(96, 32 * 7, 4);
	const Matrix y = random_batch(config.horizon, 32 * 7, 5);
	auto params = pipeline.parameters();
	training::AdamState adam;
	for (auto _ : state) {
		pipeline.zero_grad();
		benchmark::DoNotOptimize(pipeline.accumulate_gradients(x, y));
		training::adam_step(params, adam, 3e-4);
	}
}
BENCHMARK(BM_TrainStep)->ArgNames({"fan", "H"})->Args({1, 96})->Args({1, 720})->Args({0, 96})->Args({0, 720});

} // namespace

BENCHMARK_MAIN();
