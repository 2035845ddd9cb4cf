#pragma once

#include <span>
#include <vector>

#include "gsr/model/encoders.hpp"

// Gradient-free forward passes over plain tensors.

namespace gsr {

struct UtteranceActivations {
  std::vector<float> embedding;
  std::vector<Tensor<float>> layers;  ///< [steps x hidden] per stack layer
  std::vector<float> attention;       ///< alpha over valid steps
  std::size_t steps = 0;
};

namespace detail {
inline std::vector<float> to_vec(const Tensor<float>& t) { return t.storage(); }
inline constexpr std::size_t kInferenceChunk = 64;
}  // namespace detail

/// Encodes each utterance; parameters are bound once per chunk of utterances.
inline std::vector<UtteranceActivations> run_utterances(const ParamSet<float>& params, const ModelConfig& cfg,
                                                        std::span<const Tensor<float>> feats) {
  std::vector<UtteranceActivations> out;
  out.reserve(feats.size());
  for (std::size_t start = 0; start < feats.size(); start += detail::kInferenceChunk) {
    Graph<float> g;
    BoundParams<float> bound(g, params, false);
    const std::size_t stop = std::min(feats.size(), start + detail::kInferenceChunk);
    for (std::size_t i = start; i < stop; ++i) {
      auto enc = encode_utterance(g, feats[i], bound, cfg);
      UtteranceActivations a;
      a.embedding = detail::to_vec(enc.embedding.value());
      a.steps = enc.steps;
      const auto& alpha = enc.attention.value();
      a.attention.assign(alpha.data().begin(), alpha.data().begin() + std::ptrdiff_t(enc.steps));
      for (const auto& layer : enc.layers) {
        Tensor<float> m(Shape{enc.steps, cfg.hidden});
        for (std::size_t t = 0; t < enc.steps; ++t) {
          const auto& v = layer[t].value();
          std::copy(v.data().begin(), v.data().end(), m.row(t).begin());
        }
        a.layers.push_back(std::move(m));
      }
      out.push_back(std::move(a));
    }
  }
  return out;
}

inline std::vector<std::vector<float>> run_images(const ParamSet<float>& params,
                                                  std::span<const std::vector<float>> images) {
  Graph<float> g;
  BoundParams<float> bound(g, params, false);
  std::vector<std::vector<float>> out;
  out.reserve(images.size());
  for (const auto& img : images)
    out.push_back(detail::to_vec(
        encode_image(g.constant(Tensor<float>(Shape{img.size()}, img)), bound).value()));
  return out;
}

inline std::vector<std::vector<float>> run_texts(const ParamSet<float>& params, const ModelConfig& cfg,
                                                 std::span<const std::vector<std::size_t>> sentences) {
  std::vector<std::vector<float>> out;
  out.reserve(sentences.size());
  for (std::size_t start = 0; start < sentences.size(); start += detail::kInferenceChunk) {
    Graph<float> g;
    BoundParams<float> bound(g, params, false);
    const std::size_t stop = std::min(sentences.size(), start + detail::kInferenceChunk);
    for (std::size_t i = start; i < stop; ++i)
      out.push_back(detail::to_vec(encode_text(sentences[i], bound, cfg).value()));
  }
  return out;
}

}  // namespace gsr
