#include <benchmark/benchmark.h>

#include "defrag/grassmann.hpp"
#include "defrag/rng.hpp"
#include "defrag/tensor.hpp"

namespace {

defrag::Tensor random_matrix(std::int64_t rows, std::int64_t cols, std::uint64_t seed) {
  defrag::Rng rng(seed);
  auto t = defrag::Tensor::zeros({rows, cols});
  for (auto& v : t.data()) v = rng.normal();
  return t;
}

void BM_SvdThin(benchmark::State& state) {
  auto m = random_matrix(256, state.range(0), 11);
  for (auto _ : state) {
    auto svd = defrag::svd_thin(m);
    benchmark::DoNotOptimize(svd.s.data());
  }
}
BENCHMARK(BM_SvdThin)->Arg(2)->Arg(8)->Arg(64);

void BM_Retract(benchmark::State& state) {
  auto m = random_matrix(256, state.range(0), 12);
  for (auto _ : state) {
    auto r = defrag::retract(m);
    benchmark::DoNotOptimize(r.data().data());
  }
}
BENCHMARK(BM_Retract)->Arg(2)->Arg(8)->Arg(64);

}  // namespace
