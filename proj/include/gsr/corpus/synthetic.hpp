#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "gsr/audiofeat/wav.hpp"
#include "gsr/corpus/manifest.hpp"
#include "gsr/numcore/container.hpp"
#include "gsr/numcore/rng.hpp"

namespace gsr {

class SynthConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct SynthConfig {
  std::size_t n_utterances = 8;
  std::size_t vocab_size = 20;  ///< regular content words
  std::size_t homonym_pairs = 0;
  std::size_t homonym_count_a = 25;  ///< utterances containing the first spelling
  std::size_t homonym_count_b = 40;  ///< utterances containing the second spelling
  std::size_t min_words = 2;         ///< content words per utterance
  std::size_t max_words = 4;
  std::size_t image_dim = 64;
  double noise = 0;  ///< audio noise std is 0.02 * noise; image noise std is noise / sqrt(image_dim)
  double val_fraction = 0;
  double test_fraction = 0;
  std::size_t similarity_pairs = 50;  ///< capped at the number of distinct utterance pairs
  std::uint64_t seed = 7;

  void validate() const {
    if (n_utterances < 1) throw SynthConfigError("synth: n_utterances must be >= 1");
    if (vocab_size < 2) throw SynthConfigError("synth: vocab_size must be >= 2");
    if (min_words < 1 || max_words < min_words) throw SynthConfigError("synth: need 1 <= min_words <= max_words");
    if (max_words > vocab_size) throw SynthConfigError("synth: max_words exceeds vocab_size");
    if (image_dim < 1) throw SynthConfigError("synth: image_dim must be >= 1");
    if (noise < 0) throw SynthConfigError("synth: noise must be >= 0");
    if (val_fraction < 0 || test_fraction < 0 || val_fraction + test_fraction >= 1)
      throw SynthConfigError("synth: split fractions must be >= 0 and sum below 1");
    if (homonym_pairs > 0) {
      // Each pair needs two context pools of at least max_words - 1 words.
      if (vocab_size < 2 * std::max<std::size_t>(max_words - 1, 1))
        throw SynthConfigError("synth: vocab_size " + std::to_string(vocab_size) + " too small for " +
                               std::to_string(homonym_pairs) + " homonym pairs with up to " +
                               std::to_string(max_words) + " words per utterance");
      if (homonym_count_a < 1 || homonym_count_b < 1) throw SynthConfigError("synth: homonym counts must be >= 1");
      if (homonym_pairs * (homonym_count_a + homonym_count_b) > n_utterances)
        throw SynthConfigError("synth: " + std::to_string(n_utterances) + " utterances cannot hold " +
                               std::to_string(homonym_pairs) + " homonym pairs at counts " +
                               std::to_string(homonym_count_a) + "/" + std::to_string(homonym_count_b));
    }
  }
};

struct SimilarityPair {
  std::string a, b;
  double rating = 0;
};

struct SynthCorpus {
  std::vector<ManifestRecord> records;
  std::vector<AudioSignal> audio;  ///< aligned with records
  NamedTensors<float> images;      ///< keyed by image_id
  std::map<std::string, std::string> lexicon;  ///< spelling -> pronunciation
  std::map<std::string, std::size_t> counts;
  std::map<std::string, AudioSignal> word_audio;
  std::vector<SimilarityPair> similarity;
  std::vector<std::pair<std::string, std::string>> homonyms;
};

/// Function words inserted once per utterance; they carry no image content.
inline const std::vector<std::string>& synth_function_words() {
  static const std::vector<std::string> w = {"a", "the", "on", "in", "with", "of"};
  return w;
}

namespace detail {

struct WordTemplate {
  double f1, f2, duration_ms;
};

inline AudioSignal render_template(const WordTemplate& t, int rate = 16000) {
  const std::size_t n = std::size_t(std::lround(t.duration_ms * rate / 1000.0));
  AudioSignal s;
  s.sample_rate = rate;
  s.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double time = double(i) / rate;
    const double env = std::sin(std::numbers::pi * double(i) / double(n));
    s.samples[i] = 0.3 * env *
                   (0.6 * std::sin(2 * std::numbers::pi * t.f1 * time) + 0.4 * std::sin(2 * std::numbers::pi * t.f2 * time));
  }
  return s;
}

inline std::string pseudo_word(std::mt19937_64& rng) {
  static const std::string consonants = "bdfgklmnprstvz", vowels = "aeiou";
  std::uniform_int_distribution<std::size_t> syll(2, 3), c(0, consonants.size() - 1), v(0, vowels.size() - 1);
  std::string w;
  for (std::size_t k = syll(rng); k > 0; --k) {
    w += consonants[c(rng)];
    w += vowels[v(rng)];
  }
  return w;
}

}  // namespace detail

/// Deterministic corpus of word-template audio paired with bag-of-words image vectors.
inline SynthCorpus generate_synthetic(const SynthConfig& cfg) {
  cfg.validate();
  SynthCorpus c;
  std::mt19937_64 word_rng(substream_seed(cfg.seed, "words"));
  std::mt19937_64 tmpl_rng(substream_seed(cfg.seed, "templates"));
  std::mt19937_64 text_rng(substream_seed(cfg.seed, "transcripts"));
  std::mt19937_64 img_rng(substream_seed(cfg.seed, "images"));
  std::mt19937_64 noise_rng(substream_seed(cfg.seed, "noise"));
  std::mt19937_64 pair_rng(substream_seed(cfg.seed, "similarity"));

  // Spellings: regular words, then homonym bases with a variant spelling.
  std::set<std::string> taken(synth_function_words().begin(), synth_function_words().end());
  auto fresh = [&] {
    for (;;) {
      auto w = detail::pseudo_word(word_rng);
      if (taken.insert(w).second && taken.insert(w + "e").second) return w;
    }
  };
  std::vector<std::string> regular;
  for (std::size_t i = 0; i < cfg.vocab_size; ++i) regular.push_back(fresh());
  for (std::size_t i = 0; i < cfg.homonym_pairs; ++i) {
    const auto base = fresh();
    c.homonyms.emplace_back(base, base + "e");
  }

  // Pronunciations and their audio templates. Homonym spellings share one.
  std::map<std::string, detail::WordTemplate> templates;
  std::uniform_real_distribution<double> f1(250, 900), f2(1000, 3500), dur(200, 400);
  auto add_word = [&](const std::string& spelling, const std::string& pron) {
    c.lexicon[spelling] = pron;
    if (!templates.count(pron)) templates[pron] = {f1(tmpl_rng), f2(tmpl_rng), dur(tmpl_rng)};
  };
  for (const auto& w : synth_function_words()) add_word(w, w);
  for (const auto& w : regular) add_word(w, w);
  for (const auto& [a, b] : c.homonyms) {
    add_word(a, a);
    add_word(b, a);
  }
  for (const auto& [word, pron] : c.lexicon) c.word_audio[word] = detail::render_template(templates.at(pron));

  // Content vocabulary indexes image dimensions; homonym spellings are distinct meanings.
  std::vector<std::string> content = regular;
  for (const auto& [a, b] : c.homonyms) content.push_back(a), content.push_back(b);
  std::map<std::string, std::size_t> content_index;
  for (std::size_t i = 0; i < content.size(); ++i) content_index[content[i]] = i;

  // Transcripts: content-word bags, distinct where possible, plus one function word.
  std::uniform_int_distribution<std::size_t> nwords(cfg.min_words, cfg.max_words);
  std::set<std::vector<std::string>> bags;
  auto draw_bag = [&](const std::vector<std::string>& pool, std::size_t n, const std::string& fixed) {
    std::vector<std::string> bag;
    for (int attempt = 0; attempt < 1000; ++attempt) {
      std::vector<std::string> p = pool;
      std::shuffle(p.begin(), p.end(), text_rng);
      bag.assign(p.begin(), p.begin() + std::ptrdiff_t(std::min(n, p.size())));
      if (!fixed.empty()) bag.push_back(fixed);
      auto key = bag;
      std::sort(key.begin(), key.end());
      if (bags.insert(key).second) break;
    }
    std::shuffle(bag.begin(), bag.end(), text_rng);
    return bag;
  };
  std::vector<std::vector<std::string>> transcripts;
  for (const auto& [a, b] : c.homonyms) {
    std::vector<std::string> pool = regular;
    std::shuffle(pool.begin(), pool.end(), text_rng);
    const std::vector<std::string> ctx_a(pool.begin(), pool.begin() + std::ptrdiff_t(pool.size() / 2));
    const std::vector<std::string> ctx_b(pool.begin() + std::ptrdiff_t(pool.size() / 2), pool.end());
    for (std::size_t i = 0; i < cfg.homonym_count_a; ++i) transcripts.push_back(draw_bag(ctx_a, nwords(text_rng) - 1, a));
    for (std::size_t i = 0; i < cfg.homonym_count_b; ++i) transcripts.push_back(draw_bag(ctx_b, nwords(text_rng) - 1, b));
  }
  while (transcripts.size() < cfg.n_utterances) transcripts.push_back(draw_bag(regular, nwords(text_rng), ""));
  std::shuffle(transcripts.begin(), transcripts.end(), text_rng);
  std::uniform_int_distribution<std::size_t> fw(0, synth_function_words().size() - 1);
  for (auto& t : transcripts) {
    std::uniform_int_distribution<std::size_t> pos(0, t.size());
    t.insert(t.begin() + std::ptrdiff_t(pos(text_rng)), synth_function_words()[fw(text_rng)]);
  }

  // Image projection: one Gaussian column per content word.
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double col_scale = 1.0 / std::sqrt(double(cfg.image_dim));
  std::vector<std::vector<double>> proj(content.size(), std::vector<double>(cfg.image_dim));
  for (auto& col : proj)
    for (auto& v : col) v = gauss(img_rng) * col_scale;

  const std::size_t n = transcripts.size();
  const std::size_t n_test = std::size_t(std::floor(cfg.test_fraction * double(n)));
  const std::size_t n_val = std::size_t(std::floor(cfg.val_fraction * double(n)));
  const std::size_t n_train = n - n_val - n_test;
  const int rate = 16000;
  const std::size_t gap = std::size_t(0.05 * rate);
  for (std::size_t u = 0; u < n; ++u) {
    char id[32];
    std::snprintf(id, sizeof id, "utt%04zu", u + 1);
    char img[32];
    std::snprintf(img, sizeof img, "img%04zu", u + 1);
    ManifestRecord r;
    r.utt_id = id;
    r.audio = "audio/" + r.utt_id + ".wav";
    r.transcript = transcripts[u];
    r.image_id = img;
    r.image_vec = std::string("images.gsr#") + img;
    r.split = u < n_train ? Split::Train : u < n_train + n_val ? Split::Val : Split::Test;

    AudioSignal a;
    a.sample_rate = rate;
    a.samples.assign(gap, 0.0);
    for (const auto& w : r.transcript) {
      const auto& s = c.word_audio.at(w).samples;
      a.samples.insert(a.samples.end(), s.begin(), s.end());
      a.samples.insert(a.samples.end(), gap, 0.0);
    }
    if (cfg.noise > 0)
      for (auto& v : a.samples) v += 0.02 * cfg.noise * gauss(noise_rng);

    Tensor<float> vec(Shape{cfg.image_dim});
    std::vector<double> acc(cfg.image_dim, 0.0);
    for (const auto& w : r.transcript) {
      auto it = content_index.find(w);
      if (it == content_index.end()) continue;
      for (std::size_t d = 0; d < cfg.image_dim; ++d) acc[d] += proj[it->second][d];
    }
    for (std::size_t d = 0; d < cfg.image_dim; ++d)
      vec[d] = float(acc[d] + (cfg.noise > 0 ? cfg.noise * col_scale * gauss(noise_rng) : 0.0));

    for (const auto& w : r.transcript) ++c.counts[w];
    c.images.add(r.image_id, std::move(vec));
    c.audio.push_back(std::move(a));
    c.records.push_back(std::move(r));
  }

  // Sentence pairs rated by content-word overlap on a 1..5 scale.
  std::vector<std::pair<std::size_t, std::size_t>> all_pairs;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) all_pairs.emplace_back(i, j);
  std::shuffle(all_pairs.begin(), all_pairs.end(), pair_rng);
  all_pairs.resize(std::min(all_pairs.size(), cfg.similarity_pairs));
  for (auto [i, j] : all_pairs) {
    std::set<std::string> a, b, uni, inter;
    for (const auto& w : c.records[i].transcript)
      if (content_index.count(w)) a.insert(w);
    for (const auto& w : c.records[j].transcript)
      if (content_index.count(w)) b.insert(w);
    std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::inserter(uni, uni.end()));
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::inserter(inter, inter.end()));
    const double jac = uni.empty() ? 0.0 : double(inter.size()) / double(uni.size());
    c.similarity.push_back({c.records[i].utt_id, c.records[j].utt_id, 1.0 + 4.0 * jac});
  }
  return c;
}

// ---------------------------------------------------------------- side tables

inline void save_lexicon(const std::string& path, const std::map<std::string, std::string>& lex) {
  std::ofstream os(path);
  for (const auto& [w, p] : lex) os << w << '\t' << p << '\n';
  if (!os) throw std::runtime_error("cannot write '" + path + "'");
}

inline std::map<std::string, std::string> load_lexicon(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw MissingResourceError("cannot open lexicon '" + path + "'");
  std::map<std::string, std::string> lex;
  std::string line;
  for (std::size_t no = 1; std::getline(is, line); ++no) {
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw ManifestParseError(path, no, "expected word<TAB>pronunciation");
    lex[line.substr(0, tab)] = line.substr(tab + 1);
  }
  return lex;
}

inline void save_counts(const std::string& path, const std::map<std::string, std::size_t>& counts) {
  std::ofstream os(path);
  for (const auto& [w, n] : counts) os << w << '\t' << n << '\n';
  if (!os) throw std::runtime_error("cannot write '" + path + "'");
}

inline std::map<std::string, std::size_t> load_counts(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw MissingResourceError("cannot open counts '" + path + "'");
  std::map<std::string, std::size_t> counts;
  std::string line;
  for (std::size_t no = 1; std::getline(is, line); ++no) {
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw ManifestParseError(path, no, "expected word<TAB>count");
    try {
      counts[line.substr(0, tab)] = std::stoul(line.substr(tab + 1));
    } catch (const std::exception&) {
      throw ManifestParseError(path, no, "bad count '" + line.substr(tab + 1) + "'");
    }
  }
  return counts;
}

inline void save_similarity(const std::string& path, const std::vector<SimilarityPair>& pairs) {
  std::ofstream os(path);
  char buf[64];
  for (const auto& p : pairs) {
    std::snprintf(buf, sizeof buf, "%.17g", p.rating);
    os << p.a << '\t' << p.b << '\t' << buf << '\n';
  }
  if (!os) throw std::runtime_error("cannot write '" + path + "'");
}

inline std::vector<SimilarityPair> load_similarity(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw MissingResourceError("cannot open similarity pairs '" + path + "'");
  std::vector<SimilarityPair> out;
  std::string line;
  for (std::size_t no = 1; std::getline(is, line); ++no) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    SimilarityPair p;
    if (!(ls >> p.a >> p.b >> p.rating)) throw ManifestParseError(path, no, "expected utt_a<TAB>utt_b<TAB>rating");
    out.push_back(p);
  }
  return out;
}

/// Writes manifest.tsv, audio/, images.gsr, lexicon.tsv, counts.tsv, words/,
/// similarity.tsv and homonyms.tsv under `dir`.
inline void write_synthetic(const SynthCorpus& c, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "audio");
  fs::create_directories(dir / "words");
  for (std::size_t i = 0; i < c.records.size(); ++i) write_wav((dir / c.records[i].audio).string(), c.audio[i]);
  for (const auto& [w, a] : c.word_audio) write_wav((dir / "words" / (w + ".wav")).string(), a);
  save_container((dir / "images.gsr").string(), c.images);
  save_manifest((dir / "manifest.tsv").string(), c.records);
  save_lexicon((dir / "lexicon.tsv").string(), c.lexicon);
  save_counts((dir / "counts.tsv").string(), c.counts);
  save_similarity((dir / "similarity.tsv").string(), c.similarity);
  std::ofstream hs(dir / "homonyms.tsv");
  for (const auto& [a, b] : c.homonyms) hs << a << '\t' << b << '\n';
}

}  // namespace gsr
