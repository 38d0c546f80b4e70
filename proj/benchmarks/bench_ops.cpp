#include <benchmark/benchmark.h>

#include "defrag/graph.hpp"
#include "defrag/ops.hpp"
#include "defrag/rng.hpp"
#include "defrag/tensor.hpp"

namespace {

defrag::Tensor random_tensor(defrag::Shape shape, std::uint64_t seed) {
  defrag::Rng rng(seed);
  auto t = defrag::Tensor::zeros(std::move(shape));
  for (auto& v : t.data()) v = rng.uniform(-1.0, 1.0);
  return t;
}

void BM_Matmul(benchmark::State& state) {
  const auto n = state.range(0);
  auto a = random_tensor({n, n}, 1);
  auto b = random_tensor({n, n}, 2);
  defrag::Graph g;
  defrag::NoGradGuard guard(g);
  for (auto _ : state) {
    auto c = defrag::matmul(g, a, b);
    benchmark::DoNotOptimize(c.data().data());
  }
  state.SetItemsProcessed(state.iterations() * 2 * n * n * n);
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(256)->Arg(1024);

void BM_Conv2dForward(benchmark::State& state) {
  const auto batch = state.range(0);
  auto x = random_tensor({batch, 32, 12, 12}, 3);
  auto k = random_tensor({256, 32, 5, 5}, 4);
  auto b = random_tensor({256}, 5);
  defrag::Graph g;
  defrag::NoGradGuard guard(g);
  for (auto _ : state) {
    auto y = defrag::conv2d(g, x, k, b);
    benchmark::DoNotOptimize(y.data().data());
  }
}
BENCHMARK(BM_Conv2dForward)->Arg(1)->Arg(64);

void BM_Conv2dTrainStep(benchmark::State& state) {
  const auto batch = state.range(0);
  auto x = random_tensor({batch, 32, 12, 12}, 6);
  auto k = random_tensor({256, 32, 5, 5}, 7).set_requires_grad(true);
  auto b = random_tensor({256}, 8).set_requires_grad(true);
  for (auto _ : state) {
    defrag::Graph g;
    auto y = defrag::conv2d(g, x, k, b);
    auto s = defrag::sum(g, y);
    g.backward(s);
    benchmark::DoNotOptimize(k.grad().data());
    k.zero_grad();
    b.zero_grad();
  }
}
BENCHMARK(BM_Conv2dTrainStep)->Arg(64);

}  // namespace

BENCHMARK_MAIN();
