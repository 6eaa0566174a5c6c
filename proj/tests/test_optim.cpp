#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include <hsr/errors.hpp>
#include <hsr/hsrnet.hpp>
#include <hsr/ops.hpp>
#include <hsr/optim.hpp>
#include <hsr/tensor.hpp>

using namespace hsr;

namespace {

// Runs one backward that deposits `g` as the gradient of every element of
// every parameter: loss = sum over params of sum(p * g_plane).
void deposit_gradient(ParamStore& store, const std::vector<float>& per_param) {
  size_t idx = 0;
  Tensor acc;
  for (const auto& [name, t] : store) {
    Tensor weighted = scale(sum(t), per_param[idx++]);
    acc = acc.defined() ? add(acc, weighted) : weighted;
  }
  acc.backward();
}

}  // namespace

TEST_CASE("adam matches a scalar double-precision recurrence for three steps") {
  ParamStore store;
  store.insert("w", Tensor::from_values({2}, {1.0f, -2.0f}, true));
  AdamState state;
  AdamConfig cfg;
  cfg.learning_rate = 0.05;

  // Reference trace in double.
  double w[2] = {1.0, -2.0};
  double m[2] = {0.0, 0.0}, v[2] = {0.0, 0.0};
  const double grads[3][2] = {{0.5, -1.0}, {0.25, 0.75}, {-0.4, 0.1}};

  for (int step = 0; step < 3; ++step) {
    store.at("w").zero_grad();
    Tensor g = Tensor::from_values(
        {2}, {static_cast<float>(grads[step][0]), static_cast<float>(grads[step][1])});
    sum(mul(store.at("w"), g)).backward();

    adam_step(store, state, cfg);

    for (int i = 0; i < 2; ++i) {
      const double gi = grads[step][i];
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
      const double m_hat = m[i] / (1.0 - std::pow(cfg.beta1, step + 1));
      const double v_hat = v[i] / (1.0 - std::pow(cfg.beta2, step + 1));
      w[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
      CHECK(store.at("w").data()[i] == doctest::Approx(w[i]).epsilon(1e-6));
    }
  }
  CHECK(state.step == 3);
}

TEST_CASE("the first step moves every element by about the learning rate") {
  // Bias correction makes m_hat/sqrt(v_hat) = sign(g) on step one, so the
  // update magnitude is lr regardless of the gradient's scale.
  ParamStore store;
  store.insert("a", Tensor::from_values({3}, {1.0f, 1.0f, 1.0f}, true));
  Tensor g = Tensor::from_values({3}, {1e-4f, 3.0f, -2000.0f});
  sum(mul(store.at("a"), g)).backward();

  AdamState state;
  AdamConfig cfg;
  cfg.learning_rate = 0.01;
  adam_step(store, state, cfg);
  CHECK(store.at("a").data()[0] == doctest::Approx(1.0 - 0.01).epsilon(1e-4));
  CHECK(store.at("a").data()[1] == doctest::Approx(1.0 - 0.01).epsilon(1e-4));
  CHECK(store.at("a").data()[2] == doctest::Approx(1.0 + 0.01).epsilon(1e-4));
}

TEST_CASE("moment buffers persist per parameter name") {
  ParamStore store;
  store.insert("a", Tensor::from_values({1}, {0.0f}, true));
  store.insert("b", Tensor::from_values({1}, {0.0f}, true));
  AdamState state;
  AdamConfig cfg;
  deposit_gradient(store, {1.0f, -1.0f});
  adam_step(store, state, cfg);
  CHECK(state.m.at("a").size() == 1);
  CHECK(state.v.at("b").size() == 1);
  CHECK(state.m.at("a")[0] == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(state.m.at("b")[0] == doctest::Approx(-0.1).epsilon(1e-12));
}

TEST_CASE("a parameter without a gradient is a contract violation") {
  ParamStore store;
  store.insert("w", Tensor::from_values({2}, {1.0f, 2.0f}, true));
  AdamState state;
  AdamConfig cfg;
  // zero_grad alone does not allocate a gradient buffer; only a backward
  // sweep does.
  store.zero_grad();
  CHECK_THROWS_AS(adam_step(store, state, cfg), ContractError);
}

TEST_CASE("non-positive learning rates are rejected") {
  ParamStore store;
  store.insert("w", Tensor::from_values({1}, {1.0f}, true));
  AdamState state;
  AdamConfig cfg;
  cfg.learning_rate = 0.0;
  CHECK_THROWS_AS(adam_step(store, state, cfg), ConfigError);
  cfg.learning_rate = -0.1;
  CHECK_THROWS_AS(adam_step(store, state, cfg), ConfigError);
}
