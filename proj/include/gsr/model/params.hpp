#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <type_traits>

#include "gsr/model/config.hpp"
#include "gsr/numcore/named_tensors.hpp"

namespace gsr {

// Canonical parameter names.
inline std::string rhn_name(std::size_t layer, char kind, const std::string& what) {
  return "rhn" + std::to_string(layer + 1) + "." + kind + "." + what;
}
inline std::string rhn_u(std::size_t layer, char kind, std::size_t step) {
  return rhn_name(layer, kind, "U" + std::to_string(step + 1));
}
inline std::string rhn_b(std::size_t layer, char kind, std::size_t step) {
  return rhn_name(layer, kind, "b" + std::to_string(step + 1));
}
inline std::string rhn_w(std::size_t layer, char kind) { return rhn_name(layer, kind, "W"); }

inline constexpr double kTransformGateBias = -1.0;

namespace detail {

inline Tensor<double> glorot(std::mt19937_64& rng, Shape shape, std::size_t fan_in, std::size_t fan_out) {
  const double limit = std::sqrt(6.0 / double(fan_in + fan_out));
  std::uniform_real_distribution<double> u(-limit, limit);
  Tensor<double> t(shape);
  for (auto& v : t.data()) v = u(rng);
  return t;
}

}  // namespace detail

/// Draws initial parameters: weights uniform in +-sqrt(6 / (fan_in + fan_out)),
/// biases zero except the transform gate bias (-1, favouring carry).
/// Values are drawn in double and cast, so float and double models built from
/// one seed agree up to rounding.
template <class T = float>
ParamSet<T> init_params(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  ParamSet<double> p;
  const std::size_t H = cfg.hidden;
  p.add("img.A", detail::glorot(rng, Shape{H, cfg.image_dim}, cfg.image_dim, H));
  p.add("img.b", Tensor<double>(Shape{H}));
  if (cfg.is_text()) {
    p.add("emb.E", detail::glorot(rng, Shape{cfg.vocab_size, cfg.embed_dim}, cfg.vocab_size, cfg.embed_dim));
  } else {
    const std::size_t s = cfg.conv_length, D = cfg.input_dim, d = cfg.conv_size;
    p.add("conv.K", detail::glorot(rng, Shape{s, D, d}, s * D, s * d));
    p.add("conv.b", Tensor<double>(Shape{d}));
  }
  for (std::size_t n = 0; n < cfg.rhn_layers; ++n) {
    const std::size_t in = n == 0 ? cfg.stack_input_dim() : H;
    for (char kind : {'H', 'T'}) {
      p.add(rhn_w(n, kind), detail::glorot(rng, Shape{H, in}, in, H));
      for (std::size_t l = 0; l < cfg.microsteps; ++l) {
        p.add(rhn_u(n, kind, l), detail::glorot(rng, Shape{H, H}, H, H));
        p.add(rhn_b(n, kind, l), Tensor<double>(Shape{H}, kind == 'T' ? kTransformGateBias : 0.0));
      }
    }
  }
  if (!cfg.is_text()) {
    p.add("attn.W", detail::glorot(rng, Shape{cfg.attn_hidden, H}, H, cfg.attn_hidden));
    p.add("attn.U", detail::glorot(rng, Shape{1, cfg.attn_hidden}, cfg.attn_hidden, 1));
  }
  if constexpr (std::is_same_v<T, double>) return p;
  else return p.template cast<T>();
}

/// Recovers the architecture from parameter shapes. Stride and the residual flag
/// are not encoded in shapes and must be supplied.
template <class T>
ModelConfig infer_config(const ParamSet<T>& p, std::size_t conv_stride, bool residual = true) {
  ModelConfig c;
  c.name = "checkpoint";
  c.residual = residual;
  c.hidden = p.at("img.A").dim(0);
  c.image_dim = p.at("img.A").dim(1);
  if (p.contains("emb.E")) {
    c.kind = ModelKind::Text;
    c.vocab_size = p.at("emb.E").dim(0);
    c.embed_dim = p.at("emb.E").dim(1);
  } else {
    const auto& k = p.at("conv.K");
    c.conv_length = k.dim(0), c.input_dim = k.dim(1), c.conv_size = k.dim(2);
    c.conv_stride = conv_stride;
    c.attn_hidden = p.at("attn.W").dim(0);
  }
  c.rhn_layers = 0;
  while (p.contains(rhn_w(c.rhn_layers, 'H'))) ++c.rhn_layers;
  c.microsteps = 0;
  while (p.contains(rhn_u(0, 'H', c.microsteps))) ++c.microsteps;
  c.validate();
  return c;
}

}  // namespace gsr
