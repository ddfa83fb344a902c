#include <benchmark/benchmark.h>

#include <vector>

#include "strokewave/dwt.hpp"
#include "strokewave/features.hpp"
#include "strokewave/image.hpp"
#include "strokewave/mlp.hpp"
#include "strokewave/synth.hpp"

namespace {

using namespace strokewave;

Matrix random_matrix(std::size_t n, std::uint64_t seed) {
  RngStream rng(seed);
  Matrix m(n, n);
  for (double& v : m.values()) v = rng.uniform();
  return m;
}

void BM_Decompose(benchmark::State& state, const char* wavelet, std::size_t levels) {
  const WaveletFilter f = build_filter(wavelet);
  const Matrix m = random_matrix(256, 1);
  for (auto _ : state) benchmark::DoNotOptimize(decompose2d(m, f, levels));
}
BENCHMARK_CAPTURE(BM_Decompose, haar_L2, "haar", 2);
BENCHMARK_CAPTURE(BM_Decompose, db4_L3, "db4", 3);

void BM_Reconstruct(benchmark::State& state, const char* wavelet, std::size_t levels) {
  const WaveletFilter f = build_filter(wavelet);
  const SubbandPyramid p = decompose2d(random_matrix(256, 2), f, levels);
  for (auto _ : state) benchmark::DoNotOptimize(reconstruct2d(p, f));
}
BENCHMARK_CAPTURE(BM_Reconstruct, haar_L2, "haar", 2);
BENCHMARK_CAPTURE(BM_Reconstruct, db4_L3, "db4", 3);

void BM_ExtractFeatures(benchmark::State& state, const char* wavelet, std::size_t levels) {
  const FeatureConfig cfg = default_config(wavelet, levels);
  RngStream rng(3);
  const Image img = gen_phantom(0, rng);
  for (auto _ : state) benchmark::DoNotOptimize(extract_features(img, cfg));
}
BENCHMARK_CAPTURE(BM_ExtractFeatures, haar_L2, "haar", 2);
BENCHMARK_CAPTURE(BM_ExtractFeatures, db4_L3, "db4", 3);

void BM_Augment(benchmark::State& state) {
  RngStream rng(4);
  const Image img = gen_phantom(1, rng);
  const AugmentConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(augment(img, cfg, rng));
}
BENCHMARK(BM_Augment);

void BM_TrainStep(benchmark::State& state) {
  const auto batch = static_cast<std::size_t>(state.range(0));
  MlpModel model = init_model(5);
  RngStream rng(6);
  Matrix x(batch, kFeatureDim);
  for (double& v : x.values()) v = rng.normal();
  std::vector<std::size_t> labels(batch);
  for (auto& l : labels) l = rng.below(kNumClasses);
  AdamState adam = AdamState::for_model(model);
  const TrainConfig cfg;
  std::uint64_t t = 0;
  for (auto _ : state) {
    const ForwardCache c = forward_train(model, x, cfg.dropout, cfg.bn_momentum, rng);
    adam_step(model, backward(model, c, labels), adam, ++t, cfg);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(batch));
}
BENCHMARK(BM_TrainStep)->Arg(8)->Arg(32)->Arg(128);

void BM_PredictBatch(benchmark::State& state) {
  const MlpModel model = init_model(7);
  RngStream rng(8);
  std::vector<FeatureVector> rows(static_cast<std::size_t>(state.range(0)));
  for (auto& r : rows)
    for (double& v : r) v = rng.normal();
  for (auto _ : state) benchmark::DoNotOptimize(predict_batch(model, rows));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_PredictBatch)->Arg(1)->Arg(90);

}  // namespace

BENCHMARK_MAIN();
