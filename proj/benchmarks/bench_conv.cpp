#include <benchmark/benchmark.h>

#include <random>

#include <hsr/data.hpp>
#include <hsr/ops.hpp>
#include <hsr/spectral.hpp>
#include <hsr/tensor.hpp>

namespace {

hsr::Tensor random_tensor(std::mt19937& rng, std::vector<int> shape,
                          bool requires_grad = false) {
  hsr::Tensor t = hsr::Tensor::zeros(std::move(shape), requires_grad);
  std::uniform_real_distribution<float> dist(-0.5f, 0.5f);
  for (std::int64_t i = 0; i < t.size(); ++i) t.data()[i] = dist(rng);
  return t;
}

void conv3x3_forward(benchmark::State& state) {
  const int features = static_cast<int>(state.range(0));
  std::mt19937 rng(2);
  hsr::Tensor x = random_tensor(rng, {features, 64, 64});
  hsr::Tensor k = random_tensor(rng, {features, features, 3, 3});
  hsr::Tensor b = random_tensor(rng, {features});
  for (auto _ : state) {
    benchmark::DoNotOptimize(hsr::conv2d(x, k, b).data());
  }
  state.SetItemsProcessed(state.iterations() * x.size());
}
BENCHMARK(conv3x3_forward)->Arg(8)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void conv3x3_train_step(benchmark::State& state) {
  const int features = static_cast<int>(state.range(0));
  std::mt19937 rng(2);
  for (auto _ : state) {
    state.PauseTiming();
    hsr::Tensor x = random_tensor(rng, {features, 64, 64});
    hsr::Tensor k = random_tensor(rng, {features, features, 3, 3}, /*requires_grad=*/true);
    hsr::Tensor b = random_tensor(rng, {features}, /*requires_grad=*/true);
    state.ResumeTiming();
    hsr::Tensor loss = hsr::sum(hsr::conv2d(x, k, b));
    loss.backward();
    benchmark::DoNotOptimize(k.grad().data());
  }
}
BENCHMARK(conv3x3_train_step)->Arg(8)->Arg(32)->Unit(benchmark::kMillisecond);

void degradation_forward(benchmark::State& state) {
  std::mt19937 rng(3);
  hsr::SpectralCube x = hsr::SpectralCube::zeros(128, 128, 31);
  std::uniform_real_distribution<float> dist(0.0f, 1.0f);
  for (float& v : x.data) v = dist(rng);
  for (int i = 0; i < 31; ++i) {
    x.wavelengths_nm.push_back(400.0f + 10.0f * static_cast<float>(i));
  }
  hsr::DegradationOperator phi =
      hsr::build_phi(hsr::synth_srf(3), x.wavelengths_nm);
  for (auto _ : state) {
    benchmark::DoNotOptimize(hsr::apply_degradation(phi, x).data.data());
  }
  state.SetItemsProcessed(state.iterations() * x.size());
}
BENCHMARK(degradation_forward)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
