#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

#include "gsr/numcore/named_tensors.hpp"

namespace gsr {

class NonFiniteGradientError : public std::runtime_error {
 public:
  NonFiniteGradientError(const std::string& param, std::size_t entry)
      : std::runtime_error("non-finite gradient in parameter '" + param + "' at entry " + std::to_string(entry)),
        param_(param) {}
  const std::string& param() const { return param_; }

 private:
  std::string param_;
};

struct AdamConfig {
  double lr = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 0;  ///< global gradient-norm clip; 0 disables
};

template <class T>
struct OptimizerState {
  AdamConfig cfg;
  ParamSet<T> m, v;
  std::uint64_t step = 0;

  OptimizerState() = default;
  OptimizerState(const ParamSet<T>& params, AdamConfig c) : cfg(c), m(params.zeros_like()), v(params.zeros_like()) {}
};

/// Bias-corrected Adam update, in place. Throws before touching anything if a
/// gradient entry is not finite.
template <class T>
void adam_step(ParamSet<T>& params, const ParamSet<T>& grads, OptimizerState<T>& st) {
  double sq = 0;
  for (std::size_t i = 0; i < grads.size(); ++i) {
    const auto& [name, g] = grads.entry(i);
    if (!params.contains(name)) throw std::invalid_argument("adam_step: gradient for unknown parameter '" + name + "'");
    if (params.at(name).shape() != g.shape())
      throw DimensionError("adam_step: gradient shape mismatch for '" + name + "'");
    for (std::size_t e = 0; e < g.size(); ++e) {
      if (!std::isfinite(g[e])) throw NonFiniteGradientError(name, e);
      sq += double(g[e]) * double(g[e]);
    }
  }
  const double clip = st.cfg.clip_norm > 0 && std::sqrt(sq) > st.cfg.clip_norm ? st.cfg.clip_norm / std::sqrt(sq) : 1.0;

  ++st.step;
  const double b1 = st.cfg.beta1, b2 = st.cfg.beta2;
  const double c1 = 1 - std::pow(b1, double(st.step));
  const double c2 = 1 - std::pow(b2, double(st.step));
  for (std::size_t i = 0; i < grads.size(); ++i) {
    const auto& [name, g] = grads.entry(i);
    auto p = params.at(name).data();
    auto m = st.m.at(name).data();
    auto v = st.v.at(name).data();
    for (std::size_t e = 0; e < g.size(); ++e) {
      const double ge = double(g[e]) * clip;
      const double me = b1 * double(m[e]) + (1 - b1) * ge;
      const double ve = b2 * double(v[e]) + (1 - b2) * ge * ge;
      m[e] = T(me);
      v[e] = T(ve);
      p[e] = T(double(p[e]) - st.cfg.lr * (me / c1) / (std::sqrt(ve / c2) + st.cfg.eps));
    }
  }
}

}  // namespace gsr
