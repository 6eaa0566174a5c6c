#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "hsr/hsrnet.hpp"

namespace hsr {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// First/second moment estimates per parameter, kept in double.
struct AdamState {
  std::int64_t step = 0;
  std::map<std::string, std::vector<double>> m;
  std::map<std::string, std::vector<double>> v;
};

// One bias-corrected Adam update over every parameter in the store. Every
// parameter must carry a gradient (zero_grad before backward counts).
void adam_step(ParamStore& params, AdamState& state, const AdamConfig& cfg);

}  // namespace hsr
