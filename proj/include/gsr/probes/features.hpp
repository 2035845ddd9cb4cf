#pragma once

#include <span>
#include <string>
#include <vector>

#include "gsr/model/inference.hpp"
#include "gsr/probes/stats.hpp"

namespace gsr {

/// Frozen-model features of one utterance.
struct ProbeFeatures {
  std::vector<float> avg_input;               ///< time-mean input frame
  std::vector<std::vector<float>> avg_layer;  ///< per stack layer: time-mean, unit norm
  std::vector<float> emb;                     ///< utterance embedding
  std::size_t steps = 0;                      ///< valid RHN timesteps

  bool operator==(const ProbeFeatures&) const = default;
};

/// A named column of the probe figures. Layer index 0 is the input average,
/// 1..k the stack layers, k+1 the embedding; -1 marks the timestep count.
struct FeatureSet {
  std::string name;
  int layer;
};

inline std::vector<FeatureSet> feature_sets(std::size_t layers, bool with_timesteps = false) {
  std::vector<FeatureSet> out{{"avg_input", 0}};
  for (std::size_t n = 1; n <= layers; ++n) out.push_back({"layer" + std::to_string(n), int(n)});
  out.push_back({"utt_emb", int(layers) + 1});
  if (with_timesteps) out.push_back({"timestep_count", -1});
  return out;
}

inline std::vector<double> select_features(const ProbeFeatures& f, const FeatureSet& set) {
  auto widen = [](const std::vector<float>& v) { return std::vector<double>(v.begin(), v.end()); };
  if (set.layer == -1) return {double(f.steps)};
  if (set.layer == 0) return widen(f.avg_input);
  if (std::size_t(set.layer) <= f.avg_layer.size()) return widen(f.avg_layer[std::size_t(set.layer) - 1]);
  return widen(f.emb);
}

inline RowSet select_rows(const std::vector<ProbeFeatures>& fs, const FeatureSet& set) {
  RowSet rows;
  rows.reserve(fs.size());
  for (const auto& f : fs) rows.push_back(select_features(f, set));
  return rows;
}

/// Runs the utterance encoder once per utterance and pools every layer over its
/// valid timesteps.
inline std::vector<ProbeFeatures> extract_probe_features(const ParamSet<float>& params, const ModelConfig& cfg,
                                                         std::span<const Tensor<float>> feats) {
  const auto acts = run_utterances(params, cfg, feats);
  std::vector<ProbeFeatures> out;
  out.reserve(acts.size());
  for (std::size_t u = 0; u < acts.size(); ++u) {
    ProbeFeatures f;
    const auto& X = feats[u];
    std::vector<double> mean(X.cols(), 0.0);
    for (std::size_t t = 0; t < X.rows(); ++t)
      for (std::size_t c = 0; c < X.cols(); ++c) mean[c] += X(t, c);
    for (double m : mean) f.avg_input.push_back(float(m / double(X.rows())));
    for (const auto& layer : acts[u].layers) {
      std::vector<double> avg(layer.cols(), 0.0);
      for (std::size_t t = 0; t < layer.rows(); ++t)
        for (std::size_t c = 0; c < layer.cols(); ++c) avg[c] += layer(t, c);
      for (double& v : avg) v /= double(layer.rows());
      avg = unit_normalized(std::move(avg));
      f.avg_layer.emplace_back(avg.begin(), avg.end());
    }
    f.emb = acts[u].embedding;
    f.steps = acts[u].steps;
    out.push_back(std::move(f));
  }
  return out;
}

}  // namespace gsr
