#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>

#include "gngode/errors.hpp"
#include "gngode/numeric/tape.hpp"

namespace gngode {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::map<std::string, Array> m;
  std::map<std::string, Array> v;
  std::uint64_t step = 0;
};

/// One bias-corrected Adam update over every parameter that has a gradient.
/// No weight decay is applied here; regularisation lives in the loss.
inline void adam_step(ParameterSet& params, const GradientMap& grads, AdamState& state,
                      const AdamOptions& opt = {}) {
  if (opt.lr < 0.0) throw ConfigError("adam: learning rate must be non-negative");
  if (opt.beta1 < 0.0 || opt.beta1 >= 1.0 || opt.beta2 < 0.0 || opt.beta2 >= 1.0) {
    throw ConfigError("adam: betas must lie in [0, 1)");
  }
  if (params.empty()) return;

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(opt.beta1, t);
  const double bc2 = 1.0 - std::pow(opt.beta2, t);

  for (auto& [name, p] : params) {
    auto git = grads.find(name);
    if (git == grads.end()) continue;
    const Array& g = git->second;
    p.require_same_shape(g, ("adam gradient for " + name).c_str());

    auto [mit, m_new] = state.m.try_emplace(name, p.shape());
    auto [vit, v_new] = state.v.try_emplace(name, p.shape());
    Array& m = mit->second;
    Array& v = vit->second;
    p.require_same_shape(m, ("adam first moment for " + name).c_str());

    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = opt.beta1 * m[i] + (1.0 - opt.beta1) * g[i];
      v[i] = opt.beta2 * v[i] + (1.0 - opt.beta2) * g[i] * g[i];
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      p[i] -= opt.lr * m_hat / (std::sqrt(v_hat) + opt.eps);
    }
  }
}

}  // namespace gngode
