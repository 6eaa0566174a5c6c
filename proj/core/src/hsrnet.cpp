#include "hsr/hsrnet.hpp"

#include <cmath>
#include <random>

#include "hsr/errors.hpp"
#include "hsr/ops.hpp"

namespace hsr {

namespace {

std::string stage_prefix(int k) { return "stage" + std::to_string(k); }

Tensor xavier_kernel(std::mt19937& rng, int f_out, int f_in, int k) {
  const double fan_in = static_cast<double>(f_in) * k * k;
  const double fan_out = static_cast<double>(f_out) * k * k;
  const float a = static_cast<float>(std::sqrt(6.0 / (fan_in + fan_out)));
  std::uniform_real_distribution<float> dist(-a, a);
  std::vector<float> data(static_cast<size_t>(f_out) * f_in * k * k);
  for (float& v : data) v = dist(rng);
  return Tensor::from_values({f_out, f_in, k, k}, std::move(data), true);
}

void add_conv(ParamStore& store, std::mt19937& rng, const std::string& prefix,
              int f_out, int f_in, int k) {
  store.insert(prefix + ".kernel", xavier_kernel(rng, f_out, f_in, k));
  store.insert(prefix + ".bias", Tensor::zeros({f_out}, true));
}

}  // namespace

int HsrnetConfig::cam_hidden() const {
  return (hs_channels + cam_reduction - 1) / cam_reduction;
}

void HsrnetConfig::validate() const {
  if (stages < 1) throw ConfigError("stage count must be at least 1");
  if (ms_channels < 2) throw ConfigError("the MS input needs at least 2 bands");
  if (hs_channels < ms_channels) {
    throw ConfigError("HS band count must be at least the MS band count");
  }
  if (irn_features < 1 || ssn_features_wide < 1 || ssn_features_narrow < 1) {
    throw ConfigError("feature widths must be positive");
  }
  if (cam_reduction < 1) throw ConfigError("attention reduction must be positive");
  if (use_srf_grouping) {
    grouping.validate(hs_channels);
  }
  if (!hs_wavelengths_nm.empty() &&
      static_cast<int>(hs_wavelengths_nm.size()) != hs_channels) {
    throw ConfigError("wavelength grid length must match the HS band count");
  }
}

void ParamStore::insert(const std::string& name, Tensor t) {
  auto [it, fresh] = params_.emplace(name, std::move(t));
  if (!fresh) throw ContractError("duplicate parameter name: " + name);
}

bool ParamStore::contains(const std::string& name) const {
  return params_.count(name) != 0;
}

const Tensor& ParamStore::at(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw ContractError("unknown parameter: " + name);
  return it->second;
}

Tensor& ParamStore::at(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw ContractError("unknown parameter: " + name);
  return it->second;
}

std::vector<std::string> ParamStore::names() const {
  std::vector<std::string> out;
  out.reserve(params_.size());
  for (const auto& [name, t] : params_) out.push_back(name);
  return out;
}

void ParamStore::zero_grad() {
  for (auto& [name, t] : params_) t.zero_grad();
}

std::int64_t ParamStore::total_elements() const {
  std::int64_t n = 0;
  for (const auto& [name, t] : params_) n += t.size();
  return n;
}

ParamStore ParamStore::clone() const {
  ParamStore out;
  for (const auto& [name, t] : params_) {
    out.insert(name, Tensor::from_values(t.shape(),
                                         {t.values().begin(), t.values().end()},
                                         t.requires_grad()));
  }
  return out;
}

ParamStore init_params(const HsrnetConfig& cfg) {
  cfg.validate();
  std::mt19937 rng(cfg.seed);
  ParamStore store;

  const int C = cfg.hs_channels;
  const int c = cfg.ms_channels;
  const int F = cfg.irn_features;

  add_conv(store, rng, "irn.conv1", F, 2 * c - 1, 3);
  if (cfg.use_srf_grouping) {
    for (size_t g = 0; g < cfg.grouping.groups.size(); ++g) {
      const int width = static_cast<int>(cfg.grouping.groups[g].hs_band_indices.size());
      add_conv(store, rng, "irn.group" + std::to_string(g), width, F, 3);
    }
  } else {
    add_conv(store, rng, "irn.conv2", C, F, 3);
  }

  for (int k = 1; k <= cfg.stages; ++k) {
    const std::string p = stage_prefix(k);

    // Transformation kernel starts near the identity map.
    std::uniform_real_distribution<float> noise(-1e-3f, 1e-3f);
    std::vector<float> tk(static_cast<size_t>(C) * C * 9);
    for (float& v : tk) v = noise(rng);
    for (int ch = 0; ch < C; ++ch) {
      tk[((static_cast<size_t>(ch) * C + ch) * 3 + 1) * 3 + 1] += 1.0f;
    }
    store.insert(p + ".T.kernel", Tensor::from_values({C, C, 3, 3}, std::move(tk), true));
    store.insert(p + ".T.bias", Tensor::zeros({C}, true));

    add_conv(store, rng, p + ".ssn.conv1", cfg.ssn_features_wide, C, 3);
    add_conv(store, rng, p + ".ssn.conv2", cfg.ssn_features_narrow,
             cfg.ssn_features_wide, 3);
    add_conv(store, rng, p + ".ssn.conv3", C, cfg.ssn_features_narrow, 1);

    if (cfg.use_cam) {
      const int hidden = cfg.cam_hidden();
      add_conv(store, rng, p + ".cam_eps.conv1", hidden, C, 1);
      add_conv(store, rng, p + ".cam_eps.conv2", C, hidden, 1);
      add_conv(store, rng, p + ".cam_epsmu.conv1", hidden, C, 1);
      add_conv(store, rng, p + ".cam_epsmu.conv2", C, hidden, 1);
    } else {
      store.insert(p + ".w_eps", Tensor::full({1}, 0.5f, true));
      store.insert(p + ".w_epsmu", Tensor::full({1}, 0.5f, true));
    }
  }
  return store;
}

Tensor irn_forward(const SpectralCube& y, const HsrnetConfig& cfg,
                   const ParamStore& params) {
  if (y.channels != cfg.ms_channels) {
    throw InvalidShapeError("IRN expects " + std::to_string(cfg.ms_channels) +
                            " MS bands, input has " + std::to_string(y.channels));
  }
  Tensor g = tensor_from_cube(spectral_gradient_cube(y));
  Tensor t = relu(conv2d(g, params.at("irn.conv1.kernel"), params.at("irn.conv1.bias")));

  if (!cfg.use_srf_grouping) {
    return conv2d(t, params.at("irn.conv2.kernel"), params.at("irn.conv2.bias"));
  }

  // Each group head emits its bands contiguously; the permutation scatters
  // them back to spectral order.
  std::vector<Tensor> parts;
  std::vector<int> flat;
  for (size_t g_i = 0; g_i < cfg.grouping.groups.size(); ++g_i) {
    const auto& group = cfg.grouping.groups[g_i];
    const std::string p = "irn.group" + std::to_string(g_i);
    parts.push_back(conv2d(t, params.at(p + ".kernel"), params.at(p + ".bias")));
    flat.insert(flat.end(), group.hs_band_indices.begin(), group.hs_band_indices.end());
  }
  Tensor cat = concat_channels(parts);
  std::vector<int> order(flat.size());
  for (size_t j = 0; j < flat.size(); ++j) {
    order[static_cast<size_t>(flat[j])] = static_cast<int>(j);
  }
  return permute_channels(cat, order);
}

Tensor ssn_forward(const Tensor& x, const ParamStore& params,
                   const std::string& prefix) {
  Tensor t = relu(conv2d(x, params.at(prefix + ".conv1.kernel"),
                         params.at(prefix + ".conv1.bias")));
  t = relu(conv2d(t, params.at(prefix + ".conv2.kernel"),
                  params.at(prefix + ".conv2.bias")));
  t = conv2d(t, params.at(prefix + ".conv3.kernel"), params.at(prefix + ".conv3.bias"));
  return add(x, t);
}

Tensor cam_forward(const Tensor& x, const ParamStore& params,
                   const std::string& prefix) {
  const Tensor& k1 = params.at(prefix + ".conv1.kernel");
  const Tensor& b1 = params.at(prefix + ".conv1.bias");
  const Tensor& k2 = params.at(prefix + ".conv2.kernel");
  const Tensor& b2 = params.at(prefix + ".conv2.bias");
  auto transform = [&](Tensor pooled) {
    return conv2d(relu(conv2d(pooled, k1, b1)), k2, b2);
  };
  Tensor s = sigmoid(add(transform(global_pool(x, PoolMode::kMax)),
                         transform(global_pool(x, PoolMode::kMean))));
  return reshape(s, {x.dim(0)});
}

Tensor stage_forward(const Tensor& x_k, const Tensor& x0, const HsrnetConfig& cfg,
                     const ParamStore& params, int stage_index) {
  if (x_k.shape() != x0.shape()) {
    throw InvalidShapeError("stage input and initial restoration must share a shape");
  }
  const std::string p = stage_prefix(stage_index);
  Tensor t = conv2d(x_k, params.at(p + ".T.kernel"), params.at(p + ".T.bias"));
  Tensor h = ssn_forward(x_k, params, p + ".ssn");
  Tensor eps_term, epsmu_term;
  if (cfg.use_cam) {
    eps_term = channel_scale(x0, cam_forward(x0, params, p + ".cam_eps"));
    epsmu_term = channel_scale(h, cam_forward(h, params, p + ".cam_epsmu"));
  } else {
    eps_term = scalar_scale(x0, params.at(p + ".w_eps"));
    epsmu_term = scalar_scale(h, params.at(p + ".w_epsmu"));
  }
  return add(add(t, eps_term), epsmu_term);
}

Tensor hsrnet_apply(const SpectralCube& y, const HsrnetConfig& cfg,
                    const ParamStore& params) {
  cfg.validate();
  Tensor x0 = irn_forward(y, cfg, params);
  Tensor x = x0;
  for (int k = 1; k <= cfg.stages; ++k) {
    x = stage_forward(x, x0, cfg, params, k);
  }
  return x;
}

SpectralCube hsrnet_forward(const SpectralCube& y, const HsrnetConfig& cfg,
                            const ParamStore& params) {
  NoGradGuard guard;
  Tensor out = hsrnet_apply(y, cfg, params);
  return cube_from_tensor(out, cfg.hs_wavelengths_nm);
}

}  // namespace hsr
