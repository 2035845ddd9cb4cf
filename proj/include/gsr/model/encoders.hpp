#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "gsr/model/config.hpp"
#include "gsr/model/params.hpp"
#include "gsr/numcore/named_tensors.hpp"
#include "gsr/numcore/ops.hpp"

namespace gsr {

class VocabularyError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Bound weights of one stack layer. W_H/W_T feed the input into microstep 1 only.
template <class T>
struct RhnLayerWeights {
  Var<T> WH, WT;
  std::vector<Var<T>> UH, bH, UT, bT;

  std::size_t microsteps() const { return UH.size(); }
  std::size_t hidden() const { return WH.value().dim(0); }

  static RhnLayerWeights bind(const BoundParams<T>& p, std::size_t layer, std::size_t microsteps) {
    RhnLayerWeights w;
    w.WH = p[rhn_w(layer, 'H')];
    w.WT = p[rhn_w(layer, 'T')];
    for (std::size_t l = 0; l < microsteps; ++l) {
      w.UH.push_back(p[rhn_u(layer, 'H', l)]);
      w.bH.push_back(p[rhn_b(layer, 'H', l)]);
      w.UT.push_back(p[rhn_u(layer, 'T', l)]);
      w.bT.push_back(p[rhn_b(layer, 'T', l)]);
    }
    return w;
  }
};

/// One recurrence microstep (0-based `step`):
///   h = tanh([step == 0] W_H x + U_H s + b_H)
///   t = sigmoid([step == 0] W_T x + U_T s + b_T)
///   s' = h * t + s * (1 - t)
/// `x` is ignored for step > 0.
template <class T>
Var<T> rhn_microstep(std::optional<Var<T>> x, Var<T> s_prev, const RhnLayerWeights<T>& w, std::size_t step) {
  Var<T> h_pre = affine(s_prev, w.UH[step], w.bH[step]);
  Var<T> t_pre = affine(s_prev, w.UT[step], w.bT[step]);
  if (step == 0) {
    if (!x) throw std::invalid_argument("rhn_microstep: the first microstep needs an input");
    h_pre = add(matvec(w.WH, *x), h_pre);
    t_pre = add(matvec(w.WT, *x), t_pre);
  }
  return gate_mix(tanh(h_pre), sigmoid(t_pre), s_prev);
}

/// Runs L microsteps per timestep, carrying s_t^(L) into the next timestep.
/// Returns the state after the last microstep for every t.
template <class T>
std::vector<Var<T>> rhn_layer(const std::vector<Var<T>>& xs, Var<T> s0, const RhnLayerWeights<T>& w) {
  std::vector<Var<T>> out;
  out.reserve(xs.size());
  Var<T> s = s0;
  for (const auto& x : xs) {
    for (std::size_t l = 0; l < w.microsteps(); ++l)
      s = rhn_microstep<T>(l == 0 ? std::optional<Var<T>>(x) : std::nullopt, s, w, l);
    out.push_back(s);
  }
  return out;
}

/// Stacks `cfg.rhn_layers` RHN layers from zero initial states; residual layers
/// add their input to their output. Returns every layer's output sequence.
template <class T>
std::vector<std::vector<Var<T>>> rhn_stack(const std::vector<Var<T>>& xs, const BoundParams<T>& p,
                                           const ModelConfig& cfg) {
  if (xs.empty()) throw EmptySequenceError("rhn_stack: empty sequence");
  Graph<T>& g = *xs.front().graph;
  std::vector<std::vector<Var<T>>> layers;
  layers.reserve(cfg.rhn_layers);
  const std::vector<Var<T>>* input = &xs;
  for (std::size_t n = 0; n < cfg.rhn_layers; ++n) {
    const auto w = RhnLayerWeights<T>::bind(p, n, cfg.microsteps);
    const std::size_t in_width = input->front().size();
    if (w.WH.value().dim(1) != in_width)
      throw DimensionError("rhn_stack: layer " + std::to_string(n + 1) + " expects width " +
                           std::to_string(w.WH.value().dim(1)) + ", got " + std::to_string(in_width));
    auto states = rhn_layer(*input, g.constant(Tensor<T>(Shape{cfg.hidden})), w);
    if (cfg.layer_is_residual(n)) {
      if (in_width != cfg.hidden) throw DimensionError("rhn_stack: residual layer width mismatch");
      for (std::size_t t = 0; t < states.size(); ++t) states[t] = add(states[t], (*input)[t]);
    }
    layers.push_back(std::move(states));
    input = &layers.back();
  }
  return layers;
}

template <class T>
struct AttentionResult {
  Var<T> pooled;
  Var<T> weights;  ///< alpha over timesteps; masked steps are 0
};

/// alpha = masked softmax_t(U tanh(W h_t)); returns sum_t alpha_t h_t.
template <class T>
AttentionResult<T> attention_pool(const std::vector<Var<T>>& H, const std::vector<bool>& valid, Var<T> W, Var<T> U) {
  if (H.empty()) throw EmptySequenceError("attention_pool: empty sequence");
  std::vector<Var<T>> logits;
  logits.reserve(H.size());
  for (const auto& h : H) logits.push_back(matvec(U, tanh(matvec(W, h))));
  Var<T> alpha = masked_time_softmax(concat(logits), valid);
  return {weighted_sum(H, alpha), alpha};
}

/// unit(A i + b).
template <class T>
Var<T> encode_image(Var<T> image, const BoundParams<T>& p) {
  const auto A = p["img.A"];
  if (image.size() != A.value().dim(1))
    throw DimensionError("encode_image: image vector of length " + std::to_string(image.size()) +
                         ", expected " + std::to_string(A.value().dim(1)));
  return l2_normalize(affine(image, A, p["img.b"]));
}

template <class T>
struct UtteranceEncoding {
  Var<T> embedding;
  /// Post-residual outputs of each stack layer, valid timesteps only.
  std::vector<std::vector<Var<T>>> layers;
  Var<T> attention;
  std::size_t steps = 0;  ///< valid RHN timesteps
};

/// Number of valid RHN timesteps for `frames` valid input frames.
inline std::size_t encoder_steps(std::size_t frames, const ModelConfig& cfg) {
  return conv_output_length(frames, cfg.conv_length, cfg.conv_stride);
}

/// unit(Attn(RHN(Conv(X)))). Rows of X at or beyond `valid_frames` are padding:
/// they are zeroed before the convolution and every step they alone produce is
/// masked out of the attention.
template <class T>
UtteranceEncoding<T> encode_utterance(Graph<T>& g, const Tensor<T>& X, const BoundParams<T>& p,
                                      const ModelConfig& cfg, std::optional<std::size_t> valid_frames = {}) {
  const std::size_t frames = valid_frames.value_or(X.rows());
  if (X.rank() != 2 || X.rows() == 0 || frames == 0 || frames > X.rows())
    throw EmptySequenceError("encode_utterance: empty or malformed feature matrix " + X.shape().str());
  if (X.cols() != cfg.input_dim)
    throw DimensionError("encode_utterance: features have " + std::to_string(X.cols()) + " dims, expected " +
                         std::to_string(cfg.input_dim));
  Tensor<T> input = X;
  for (std::size_t t = frames; t < input.rows(); ++t)
    for (auto& v : input.row(t)) v = T(0);
  Var<T> conv = conv1d_full(g.constant(std::move(input)), p["conv.K"], p["conv.b"], cfg.conv_stride);

  const std::size_t total = conv.value().rows();
  const std::size_t steps = encoder_steps(frames, cfg);
  std::vector<Var<T>> xs;
  xs.reserve(total);
  for (std::size_t t = 0; t < total; ++t) xs.push_back(row(conv, t));
  auto layers = rhn_stack(xs, p, cfg);

  std::vector<bool> valid(total, false);
  std::fill(valid.begin(), valid.begin() + std::ptrdiff_t(steps), true);
  auto attn = attention_pool(layers.back(), valid, p["attn.W"], p["attn.U"]);

  UtteranceEncoding<T> out;
  out.embedding = l2_normalize(attn.pooled);
  out.attention = attn.weights;
  out.steps = steps;
  for (auto& l : layers) {
    l.resize(steps);
    out.layers.push_back(std::move(l));
  }
  return out;
}

/// Text variant: embedding lookup, RHN stack, final state of the top layer,
/// unit-normalized. No attention.
template <class T>
Var<T> encode_text(const std::vector<std::size_t>& tokens, const BoundParams<T>& p, const ModelConfig& cfg,
                   std::vector<std::vector<Var<T>>>* layers_out = nullptr) {
  if (tokens.empty()) throw EmptySequenceError("encode_text: empty token sequence");
  const auto E = p["emb.E"];
  std::vector<Var<T>> xs;
  for (auto id : tokens) {
    if (id >= E.value().dim(0))
      throw VocabularyError("encode_text: token id " + std::to_string(id) + " outside vocabulary of " +
                            std::to_string(E.value().dim(0)));
    xs.push_back(gather_row(E, id));
  }
  auto layers = rhn_stack(xs, p, cfg);
  Var<T> out = l2_normalize(layers.back().back());
  if (layers_out) *layers_out = std::move(layers);
  return out;
}

}  // namespace gsr
