#include <benchmark/benchmark.h>

#include <cstdint>
#include <vector>

#include "defrag/graph.hpp"
#include "defrag/losses.hpp"
#include "defrag/rng.hpp"
#include "defrag/tensor.hpp"

namespace {

struct LossFixture {
  defrag::Tensor features;
  std::vector<std::int32_t> labels;
  defrag::CenterBank bank;

  LossFixture(std::int64_t m, std::int64_t d, std::int64_t k)
      : features(defrag::Tensor::zeros({m, d})), bank(k, d, 0.5) {
    defrag::Rng rng(21);
    for (auto& v : features.data()) v = rng.normal();
    labels.resize(static_cast<std::size_t>(m));
    for (std::size_t i = 0; i < labels.size(); ++i)
      labels[i] = static_cast<std::int32_t>(i % static_cast<std::size_t>(k));
    bank.seed_uninitialized(features, labels);
    features.set_requires_grad(true);
  }
};

void BM_SilhouetteLoss(benchmark::State& state) {
  LossFixture fx(state.range(0), 8, 10);
  const double delta = 1e-6;
  for (auto _ : state) {
    defrag::Graph g;
    auto loss = defrag::silhouette_loss(g, fx.features, fx.labels, fx.bank, delta);
    g.backward(loss);
    benchmark::DoNotOptimize(fx.features.grad().data());
    fx.features.zero_grad();
  }
}
BENCHMARK(BM_SilhouetteLoss)->Arg(64)->Arg(256);

void BM_ContrastiveCenterLoss(benchmark::State& state) {
  LossFixture fx(state.range(0), 8, 10);
  const double delta = 1e-6;
  for (auto _ : state) {
    defrag::Graph g;
    auto loss = defrag::contrastive_center_loss(g, fx.features, fx.labels, fx.bank, delta);
    g.backward(loss);
    benchmark::DoNotOptimize(fx.features.grad().data());
    fx.features.zero_grad();
  }
}
BENCHMARK(BM_ContrastiveCenterLoss)->Arg(64)->Arg(256);

void BM_CenterUpdate(benchmark::State& state) {
  LossFixture fx(256, 8, 10);
  for (auto _ : state) {
    fx.bank.update(fx.features, fx.labels);
    benchmark::DoNotOptimize(fx.bank.centers().data().data());
  }
}
BENCHMARK(BM_CenterUpdate);

}  // namespace
