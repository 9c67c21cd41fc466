#include <benchmark/benchmark.h>

#include "amfir/amfir.hpp"

namespace {

using namespace amfir;

const MultimodalDataset& dataset() {
  static const auto d = generate_synthetic(SyntheticSpec{});
  return d;
}

EpisodeBatch batch(int k_shot) {
  Rng rng(0, streams::kEval);
  return gather_batch(dataset(), sample_episode(dataset(), {5, k_shot, 5}, rng));
}

ModelBundle model() {
  Rng rng(0, streams::kInit);
  return init_heads(64, 64, Hyperparameters{}, rng);
}

void BM_Posterior(benchmark::State& state) {
  const auto n = state.range(0);
  Matrix d = Matrix::Random(25, n).cwiseAbs() * 50.0;
  for (auto _ : state) benchmark::DoNotOptimize(posteriors(d));
  state.SetItemsProcessed(state.iterations() * 25);
}
BENCHMARK(BM_Posterior)->Arg(5)->Arg(20);

void BM_GradTotalLoss(benchmark::State& state) {
  const auto b = batch(static_cast<int>(state.range(0)));
  const auto m = model();
  for (auto _ : state) benchmark::DoNotOptimize(evaluate_step(b, m));
}
BENCHMARK(BM_GradTotalLoss)->Arg(1)->Arg(5);

void BM_TrainStep(benchmark::State& state) {
  const auto b = batch(1);
  auto m = model();
  for (auto _ : state) sgd_step(m, evaluate_step(b, m).gradients, 1e-3);
}
BENCHMARK(BM_TrainStep);

void BM_EvaluateEpisode(benchmark::State& state) {
  const auto b = batch(1);
  const auto m = model();
  for (auto _ : state) benchmark::DoNotOptimize(evaluate_episode(b, m, FusionMode::kAdaptive));
}
BENCHMARK(BM_EvaluateEpisode);

}  // namespace

BENCHMARK_MAIN();
