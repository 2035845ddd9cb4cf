#pragma once

#include <random>
#include <vector>

#include "gsr/audiofeat/mfcc.hpp"
#include "gsr/corpus/synthetic.hpp"
#include "gsr/training/fit.hpp"

namespace gsr::fixture {

inline Tensor<double> random_tensor(std::mt19937_64& rng, Shape shape, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Tensor<double> t(shape);
  for (auto& v : t.data()) v = u(rng);
  return t;
}

inline std::vector<double> random_unit(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> g(0, 1);
  std::vector<double> v(n);
  double s = 0;
  for (auto& x : v) {
    x = g(rng);
    s += x * x;
  }
  for (auto& x : v) x /= std::sqrt(s);
  return v;
}

/// Queries of one split of a synthetic corpus with 13-dim MFCC features.
inline PairedSet paired(const SynthCorpus& c, Split split) {
  PairedSet s;
  FeaturizerConfig fc;
  for (std::size_t i = 0; i < c.records.size(); ++i) {
    if (c.records[i].split != split) continue;
    s.speech.push_back(featurize(c.audio[i], fc));
    s.image_of.push_back(s.images.size());
    s.images.push_back(c.images.at(c.records[i].image_id).storage());
  }
  return s;
}

}  // namespace gsr::fixture
