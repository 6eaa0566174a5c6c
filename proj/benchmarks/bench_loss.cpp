#include <benchmark/benchmark.h>

#include <random>

#include <hsr/loss.hpp>
#include <hsr/tensor.hpp>

namespace {

hsr::Tensor random_tensor(std::mt19937& rng, std::vector<int> shape,
                          bool requires_grad = false) {
  hsr::Tensor t = hsr::Tensor::zeros(std::move(shape), requires_grad);
  std::uniform_real_distribution<float> dist(0.05f, 1.0f);
  for (std::int64_t i = 0; i < t.size(); ++i) t.data()[i] = dist(rng);
  return t;
}

void loss_fast_forward(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  std::mt19937 rng(1);
  hsr::Tensor a = random_tensor(rng, {31, side, side});
  hsr::Tensor b = random_tensor(rng, {31, side, side});
  hsr::LossConfig cfg;
  for (auto _ : state) {
    benchmark::DoNotOptimize(hsr::loss_fast(a, b, cfg).item());
  }
  state.SetItemsProcessed(state.iterations() * a.size());
}
BENCHMARK(loss_fast_forward)->Arg(32)->Arg(128)->Unit(benchmark::kMillisecond);

void loss_reference_forward(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  std::mt19937 rng(1);
  hsr::Tensor a = random_tensor(rng, {31, side, side});
  hsr::Tensor b = random_tensor(rng, {31, side, side});
  hsr::LossConfig cfg;
  for (auto _ : state) {
    benchmark::DoNotOptimize(hsr::loss_reference(a, b, cfg));
  }
  state.SetItemsProcessed(state.iterations() * a.size());
}
BENCHMARK(loss_reference_forward)->Arg(32)->Arg(128)->Unit(benchmark::kMillisecond);

void loss_fast_backward(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  std::mt19937 rng(1);
  hsr::LossConfig cfg;
  for (auto _ : state) {
    state.PauseTiming();
    hsr::Tensor a = random_tensor(rng, {31, side, side}, /*requires_grad=*/true);
    hsr::Tensor b = random_tensor(rng, {31, side, side});
    state.ResumeTiming();
    hsr::Tensor l = hsr::loss_fast(a, b, cfg);
    l.backward();
    benchmark::DoNotOptimize(a.grad().data());
  }
}
BENCHMARK(loss_fast_backward)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
