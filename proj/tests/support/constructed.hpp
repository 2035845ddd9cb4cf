#pragma once

#include <map>
#include <random>
#include <string>
#include <vector>

#include "gsr/probes/tasks.hpp"

// Synthetic probe tasks with known answers.
namespace gsr::constructed {

inline RowSet random_rows(std::mt19937_64& rng, std::size_t n, std::size_t p) {
  std::normal_distribution<double> g(0, 1);
  RowSet X(n, std::vector<double>(p));
  for (auto& r : X)
    for (auto& v : r) v = g(rng);
  return X;
}

inline std::vector<float> random_floats(std::mt19937_64& rng, std::size_t n, bool unit) {
  std::normal_distribution<double> g(0, 1);
  std::vector<double> v(n);
  for (auto& x : v) x = g(rng);
  if (unit) v = unit_normalized(v);
  return {v.begin(), v.end()};
}

inline const FeatureSet kEmb{"utt_emb", 2};

struct LengthTask {
  std::vector<ProbeFeatures> feats;
  std::vector<double> lengths;
};

// Timestep count is an exact linear function of the word count; every other
// feature set is noise.
inline LengthTask length_task(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  LengthTask t;
  for (std::size_t i = 0; i < n; ++i) {
    const double words = double(2 + rng() % 11);
    ProbeFeatures f;
    f.avg_input = random_floats(rng, 13, false);
    f.avg_layer = {random_floats(rng, 8, true)};
    f.emb = random_floats(rng, 8, true);
    f.steps = std::size_t(25 * words + 3);
    t.feats.push_back(std::move(f));
    t.lengths.push_back(words);
  }
  return t;
}

inline double metric_of(const ProbeReport& r, const std::string& set, const std::string& metric) {
  for (const auto& rec : r.records)
    if (rec.feature_set == set && rec.metric == metric) return rec.value;
  throw std::out_of_range("no record " + set + "/" + metric);
}

struct PresenceTask {
  std::vector<ProbeFeatures> feats;
  std::vector<std::vector<std::string>> transcripts;
  std::map<std::string, std::vector<float>> word_vectors;
};

// Each utterance holds one content word whose vector is copied verbatim into
// every feature set, followed by noise dimensions.
inline PresenceTask presence_task(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  PresenceTask t;
  std::vector<std::string> words;
  for (int w = 0; w < 12; ++w) {
    words.push_back("w" + std::to_string(w));
    t.word_vectors[words.back()] = random_floats(rng, 6, false);
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto& w = words[rng() % words.size()];
    auto block = [&] {
      auto v = t.word_vectors[w];
      const auto noise = random_floats(rng, 3, false);
      v.insert(v.end(), noise.begin(), noise.end());
      return v;
    };
    ProbeFeatures f;
    f.avg_input = block();
    f.avg_layer = {block()};
    f.emb = block();
    f.steps = 10;
    t.feats.push_back(std::move(f));
    t.transcripts.push_back({"the", w});
  }
  return t;
}

struct HomonymTask {
  std::vector<ProbeFeatures> feats;
  std::vector<std::vector<std::string>> transcripts;
};

inline HomonymTask homonym_task(std::size_t n_a, std::size_t n_b, double separation, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0, 1);
  HomonymTask t;
  auto vec = [&](int cls) {
    std::vector<float> v(6);
    for (auto& x : v) x = float(0.3 * g(rng));
    v[0] += float(cls ? separation : -separation);
    return v;
  };
  for (std::size_t i = 0; i < n_a + n_b; ++i) {
    const int cls = i >= n_a;
    ProbeFeatures f;
    f.avg_input = vec(cls);
    f.avg_layer = {vec(cls)};
    f.emb = vec(cls);
    t.feats.push_back(std::move(f));
    t.transcripts.push_back({"x", cls ? "sweet" : "suite"});
  }
  t.transcripts.push_back({"suite", "sweet"});
  t.feats.push_back(t.feats.front());
  return t;
}

inline const std::vector<std::pair<std::string, std::string>> kPair{{"suite", "sweet"}};

}  // namespace gsr::constructed
