#include "hsr/optim.hpp"

#include <cmath>

#include "hsr/errors.hpp"

namespace hsr {

void adam_step(ParamStore& params, AdamState& state, const AdamConfig& cfg) {
  if (cfg.learning_rate <= 0.0) throw ConfigError("learning rate must be positive");
  state.step += 1;
  const double b1 = cfg.beta1;
  const double b2 = cfg.beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.step));

  for (const auto& name : params.names()) {
    Tensor& t = params.at(name);
    if (!t.has_grad()) {
      throw ContractError("adam_step: parameter " + name + " has no gradient");
    }
    auto& m = state.m[name];
    auto& v = state.v[name];
    if (m.empty()) m.assign(static_cast<size_t>(t.size()), 0.0);
    if (v.empty()) v.assign(static_cast<size_t>(t.size()), 0.0);

    float* data = t.data();
    const auto grad = t.grad();
    for (size_t i = 0; i < grad.size(); ++i) {
      const double g = grad[i];
      m[i] = b1 * m[i] + (1.0 - b1) * g;
      v[i] = b2 * v[i] + (1.0 - b2) * g * g;
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      data[i] = static_cast<float>(
          data[i] - cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon));
    }
  }
}

}  // namespace hsr
