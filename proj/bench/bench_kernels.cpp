// Serial reference vs OpenMP kernels on a synthetic firn workload.
//   ./bench_kernels --benchmark_counters_tabular=true
// Set OMP_NUM_THREADS to vary the parallel side.

#include <benchmark/benchmark.h>

#include <vector>

#include "firntda/binarize.hpp"
#include "firntda/curves.hpp"
#include "firntda/experiments.hpp"
#include "firntda/forest.hpp"

namespace {

using namespace firntda;

BinaryImage mask_of_size(int size) { return binarize(synth_firn(default_synth_params(15, 1, size))); }

void BM_DistanceTransformSerial(benchmark::State& state) {
  const auto bin = mask_of_size(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(distance_transform_serial(bin));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(bin.mask.size()));
}

void BM_DistanceTransformParallel(benchmark::State& state) {
  const auto bin = mask_of_size(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(distance_transform(bin));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(bin.mask.size()));
}

BENCHMARK(BM_DistanceTransformSerial)->Arg(128)->Arg(512)->Arg(2048)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_DistanceTransformParallel)->Arg(128)->Arg(512)->Arg(2048)->Unit(benchmark::kMillisecond);

std::vector<GrayImage> batch(int n) {
  std::vector<GrayImage> out;
  for (int i = 0; i < n; ++i) {
    out.push_back(synth_firn(default_synth_params(kDepthsMetres[static_cast<std::size_t>(i) % 10],
                                                  static_cast<std::uint64_t>(i))));
  }
  return out;
}

void BM_FeaturizeBatchSerial(benchmark::State& state) {
  const auto images = batch(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(featurize_batch_serial(images, kFeatureKinds));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_FeaturizeBatchParallel(benchmark::State& state) {
  const auto images = batch(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(featurize_batch(images, kFeatureKinds));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

BENCHMARK(BM_FeaturizeBatchSerial)->Arg(16)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_FeaturizeBatchParallel)->Arg(16)->Unit(benchmark::kMillisecond);

// 150 whole images x 512 SS-Betti entries, the size of one training set in
// the scenario grid.
const Dataset& training_set() {
  static const Dataset data = [] {
    const Corpus corpus = synth_corpus(15, 128, 3);
    Dataset d;
    d.n_features = feature_length(FeatureKind::ss_betti);
    std::vector<GrayImage> images;
    for (const auto& item : corpus) images.push_back(item.image);
    const FeatureKind kind[1] = {FeatureKind::ss_betti};
    const auto feats = featurize_batch(images, kind);
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      d.add(feats[i].features[0].values, depth_class(corpus[i].depth), corpus[i].id);
    }
    return d;
  }();
  return data;
}

void BM_FitSerial(benchmark::State& state) {
  const auto& data = training_set();
  const auto cfg = ForestConfig::defaults(static_cast<Task>(state.range(0)), 7);
  for (auto _ : state) benchmark::DoNotOptimize(fit_serial(data, cfg));
}

void BM_FitParallel(benchmark::State& state) {
  const auto& data = training_set();
  const auto cfg = ForestConfig::defaults(static_cast<Task>(state.range(0)), 7);
  for (auto _ : state) benchmark::DoNotOptimize(fit(data, cfg));
}

// Arg 0 = regression (all features per node), 1 = classification (sqrt).
BENCHMARK(BM_FitSerial)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_FitParallel)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
