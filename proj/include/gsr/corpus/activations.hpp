#pragma once

#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gsr/numcore/container.hpp"
#include "gsr/probes/features.hpp"

namespace gsr {

/// Activation archive entries: "{id}.avg_input", "{id}.layer{n}" (n from 1),
/// "{id}.emb" and "{id}.nsteps".
inline NamedTensors<float> activation_archive(const std::vector<std::string>& ids,
                                              const std::vector<ProbeFeatures>& feats) {
  if (ids.size() != feats.size()) throw std::invalid_argument("activation_archive: id count mismatch");
  NamedTensors<float> a;
  auto vec = [](const std::vector<float>& v) { return Tensor<float>(Shape{v.size()}, v); };
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto& f = feats[i];
    a.add(ids[i] + ".avg_input", vec(f.avg_input));
    for (std::size_t n = 0; n < f.avg_layer.size(); ++n)
      a.add(ids[i] + ".layer" + std::to_string(n + 1), vec(f.avg_layer[n]));
    a.add(ids[i] + ".emb", vec(f.emb));
    a.add(ids[i] + ".nsteps", Tensor<float>::scalar(float(f.steps)));
  }
  return a;
}

struct ActivationSet {
  std::vector<std::string> ids;
  std::vector<ProbeFeatures> feats;

  std::size_t size() const { return ids.size(); }
  const ProbeFeatures& at(const std::string& id) const {
    for (std::size_t i = 0; i < ids.size(); ++i)
      if (ids[i] == id) return feats[i];
    throw std::out_of_range("no activations for '" + id + "'");
  }
};

inline ActivationSet parse_activation_archive(const NamedTensors<float>& a) {
  ActivationSet out;
  std::map<std::string, std::size_t> index;
  auto slot = [&](const std::string& id) -> ProbeFeatures& {
    auto it = index.find(id);
    if (it == index.end()) {
      it = index.emplace(id, out.ids.size()).first;
      out.ids.push_back(id);
      out.feats.emplace_back();
    }
    return out.feats[it->second];
  };
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto& [name, t] = a.entry(i);
    const auto dot = name.rfind('.');
    if (dot == std::string::npos) throw FormatError("activation archive: bad entry name '" + name + "'");
    const std::string id = name.substr(0, dot), kind = name.substr(dot + 1);
    auto& f = slot(id);
    if (kind == "avg_input") {
      f.avg_input = t.storage();
    } else if (kind == "emb") {
      f.emb = t.storage();
    } else if (kind == "nsteps") {
      f.steps = std::size_t(t[0]);
    } else if (kind.rfind("layer", 0) == 0) {
      const std::size_t n = std::stoul(kind.substr(5));
      if (n < 1) throw FormatError("activation archive: layer index must start at 1 in '" + name + "'");
      if (f.avg_layer.size() < n) f.avg_layer.resize(n);
      f.avg_layer[n - 1] = t.storage();
    } else {
      throw FormatError("activation archive: unknown entry kind '" + kind + "'");
    }
  }
  return out;
}

/// Encodes every utterance and writes its probe features to `path`.
inline ActivationSet dump_activations(const ParamSet<float>& params, const ModelConfig& cfg,
                                      const std::vector<std::string>& ids, std::span<const Tensor<float>> feats,
                                      const std::string& path) {
  ActivationSet s{ids, extract_probe_features(params, cfg, feats)};
  save_container(path, activation_archive(s.ids, s.feats));
  return s;
}

inline ActivationSet load_activations(const std::string& path) { return parse_activation_archive(load_container(path)); }

}  // namespace gsr
