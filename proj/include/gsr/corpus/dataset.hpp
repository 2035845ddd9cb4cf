#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gsr/audiofeat/mfcc.hpp"
#include "gsr/audiofeat/wav.hpp"
#include "gsr/corpus/manifest.hpp"
#include "gsr/model/vocabulary.hpp"
#include "gsr/training/fit.hpp"

namespace gsr {

/// Front-end settings matching a model's input width: 37 dims adds deltas.
inline FeaturizerConfig featurizer_for(const ModelConfig& cfg, double max_ms = 10000) {
  FeaturizerConfig f;
  f.max_ms = max_ms;
  f.deltas = cfg.input_dim == kDeltaDims;
  if (!cfg.is_text() && f.dims() != cfg.input_dim)
    throw ConfigError("no front end produces " + std::to_string(cfg.input_dim) + "-dim features");
  return f;
}

/// MFCC features of every record with audio, keyed by utt_id.
inline NamedTensors<float> featurize_manifest(const std::vector<ManifestRecord>& records,
                                              const std::filesystem::path& base, const FeaturizerConfig& fc) {
  NamedTensors<float> out;
  for (const auto& r : records) {
    if (r.audio == "-") continue;
    out.add(r.utt_id, featurize(read_wav((base / r.audio).string()), fc));
  }
  return out;
}

struct PairedSplit {
  PairedSet set;
  std::vector<std::string> ids;  ///< utt_id per query
  std::vector<std::string> image_ids;
};

/// Collects the records of one split. Images are deduplicated by image_id in
/// order of first appearance. Text models need `vocab`; speech models need
/// `features`.
inline PairedSplit build_split(const std::vector<ManifestRecord>& records, Split split, ImageStore& images,
                               const NamedTensors<float>* features, const Vocabulary* vocab) {
  PairedSplit out;
  std::map<std::string, std::size_t> image_index;
  for (const auto& r : records) {
    if (r.split != split) continue;
    auto it = image_index.find(r.image_id);
    if (it == image_index.end()) {
      it = image_index.emplace(r.image_id, out.set.images.size()).first;
      out.set.images.push_back(images.at(r.image_vec).storage());
      out.image_ids.push_back(r.image_id);
    }
    out.set.image_of.push_back(it->second);
    out.ids.push_back(r.utt_id);
    if (vocab) {
      out.set.text.push_back(vocab->encode(r.transcript));
    } else {
      if (!features || !features->contains(r.utt_id))
        throw MissingResourceError("no features for utterance '" + r.utt_id + "'");
      out.set.speech.push_back(features->at(r.utt_id));
    }
  }
  return out;
}

}  // namespace gsr
