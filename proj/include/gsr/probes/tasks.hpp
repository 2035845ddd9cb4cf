#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "gsr/numcore/rng.hpp"
#include "gsr/probes/features.hpp"
#include "gsr/probes/mlp.hpp"
#include "gsr/probes/stats.hpp"

namespace gsr {

// ---------------------------------------------------------------- reports

struct ProbeRecord {
  std::string task;
  std::string feature_set;
  int layer = 0;  ///< -1 when the feature set has no layer position
  std::string metric;
  double value = 0;
  std::optional<double> ci_low, ci_high;
};

struct ProbeReport {
  std::string task;
  std::vector<std::pair<std::string, std::string>> meta;
  std::vector<ProbeRecord> records;

  void add(const FeatureSet& set, std::string metric, double value, std::optional<double> lo = {},
           std::optional<double> hi = {}) {
    if (!std::isfinite(value)) throw std::runtime_error("probe " + task + ": non-finite " + metric + " for " + set.name);
    records.push_back({task, set.name, set.layer, std::move(metric), value, lo, hi});
  }
};

inline constexpr const char* kProbeHeader = "task\tfeature_set\tlayer\tmetric\tvalue\tci_low\tci_high";

/// Tab-separated records; metadata as leading "#" lines.
inline void write_probe_reports(std::ostream& os, const std::vector<ProbeReport>& reports) {
  auto num = [](std::optional<double> v) {
    if (!v) return std::string("-");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", *v);
    return std::string(buf);
  };
  for (const auto& r : reports)
    for (const auto& [k, v] : r.meta) os << "# " << r.task << '.' << k << " = " << v << '\n';
  os << kProbeHeader << '\n';
  for (const auto& r : reports)
    for (const auto& rec : r.records)
      os << rec.task << '\t' << rec.feature_set << '\t' << (rec.layer < 0 ? std::string("-") : std::to_string(rec.layer))
         << '\t' << rec.metric << '\t' << num(rec.value) << '\t' << num(rec.ci_low) << '\t' << num(rec.ci_high)
         << '\n';
}

/// "layer,value[,ci_low,ci_high]" for one metric, ordered by layer position.
inline void write_plot_data(std::ostream& os, const ProbeReport& r, const std::string& metric) {
  std::vector<const ProbeRecord*> rows;
  for (const auto& rec : r.records)
    if (rec.metric == metric && rec.layer >= 0) rows.push_back(&rec);
  std::stable_sort(rows.begin(), rows.end(), [](auto* a, auto* b) { return a->layer < b->layer; });
  os << "layer,value,ci_low,ci_high\n";
  char buf[160];
  for (const auto* rec : rows) {
    std::snprintf(buf, sizeof buf, "%d,%.6f,%.6f,%.6f", rec->layer, rec->value, rec->ci_low.value_or(rec->value),
                  rec->ci_high.value_or(rec->value));
    os << buf << '\n';
  }
}

// ---------------------------------------------------------------- stopwords

inline const std::set<std::string>& default_stopwords() {
  static const std::set<std::string> s = {
      "a",        "about",   "above",   "after",   "again",   "against", "all",     "am",      "an",
      "and",      "any",     "are",     "as",      "at",      "be",      "because", "been",    "before",
      "being",    "below",   "between", "both",    "but",     "by",      "can",     "could",   "did",
      "do",       "does",    "doing",   "down",    "during",  "each",    "few",     "for",     "from",
      "further",  "had",     "has",     "have",    "having",  "he",      "her",     "here",    "hers",
      "herself",  "him",     "himself", "his",     "how",     "i",       "if",      "in",      "into",
      "is",       "it",      "its",     "itself",  "just",    "me",      "more",    "most",    "my",
      "myself",   "no",      "nor",     "not",     "now",     "of",      "off",     "on",      "once",
      "only",     "or",      "other",   "our",     "ours",    "ourselves", "out",   "over",    "own",
      "same",     "she",     "should",  "so",      "some",    "such",    "than",    "that",    "the",
      "their",    "theirs",  "them",    "themselves", "then", "there",   "these",   "they",    "this",
      "those",    "through", "to",      "too",     "under",   "until",   "up",      "very",    "was",
      "we",       "were",    "what",    "when",    "where",   "which",   "while",   "who",     "whom",
      "why",      "will",    "with",    "would",   "you",     "your",    "yours",   "yourself", "yourselves",
      "also",     "among",   "another", "around",  "away",    "back",    "behind",  "beside",  "besides",
      "beyond",   "either",  "else",    "ever",    "every",   "may",     "might",   "must",    "near",
      "neither",  "next",    "onto",    "per",     "quite",   "rather",  "shall",   "since",   "still",
      "though",   "thus",    "toward",  "towards", "upon",    "us",      "via",     "whether", "within",
      "without",  "yet",     "one",     "two"};
  return s;
}

/// Known variant spellings with one meaning; excluded from homonym mining.
inline const std::set<std::pair<std::string, std::string>>& default_variant_spellings() {
  static const std::set<std::pair<std::string, std::string>> s = {
      {"theater", "theatre"}, {"color", "colour"},   {"grey", "gray"},       {"centre", "center"},
      {"donut", "doughnut"},  {"favor", "favour"},   {"jewelry", "jewellery"}, {"tire", "tyre"},
      {"kerb", "curb"},       {"pajamas", "pyjamas"}, {"aluminium", "aluminum"}, {"catalog", "catalogue"}};
  return s;
}

// ---------------------------------------------------------------- shared helpers

namespace detail {

inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t n, double train_fraction,
                                                                                   std::mt19937_64& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  const std::size_t n_train = std::size_t(std::lround(train_fraction * double(n)));
  return {{idx.begin(), idx.begin() + std::ptrdiff_t(n_train)}, {idx.begin() + std::ptrdiff_t(n_train), idx.end()}};
}

inline std::size_t layer_count(const std::vector<ProbeFeatures>& fs) {
  return fs.empty() ? 0 : fs.front().avg_layer.size();
}

}  // namespace detail

// ---------------------------------------------------------------- length

struct LengthProbeConfig {
  double alpha = 1.0;
  double train_fraction = 0.8;
  std::uint64_t seed = 1;
  bool permute_labels = false;  ///< control run: shuffle labels before fitting
};

/// Ridge regression of word count from each feature set; R^2 on the held-out 20%.
inline ProbeReport probe_length(const std::vector<ProbeFeatures>& feats, const std::vector<double>& lengths,
                                const LengthProbeConfig& cfg = {}) {
  if (feats.size() != lengths.size()) throw std::invalid_argument("probe_length: label count mismatch");
  if (feats.size() < 10) throw InsufficientDataError("probe_length: need at least 10 utterances");
  std::mt19937_64 rng(substream_seed(cfg.seed, "probe/length"));
  auto [train, test] = detail::split_indices(feats.size(), cfg.train_fraction, rng);
  std::vector<double> y = lengths;
  if (cfg.permute_labels) std::shuffle(y.begin(), y.end(), rng);

  ProbeReport rep;
  rep.task = "length";
  rep.meta = {{"n_train", std::to_string(train.size())}, {"n_test", std::to_string(test.size())},
              {"seed", std::to_string(cfg.seed)}, {"alpha", std::to_string(cfg.alpha)}};
  for (const auto& set : feature_sets(detail::layer_count(feats), true)) {
    RowSet Xtr, Xte;
    std::vector<double> ytr, yte;
    for (auto i : train) Xtr.push_back(select_features(feats[i], set)), ytr.push_back(y[i]);
    for (auto i : test) Xte.push_back(select_features(feats[i], set)), yte.push_back(y[i]);
    rep.add(set, "r2", r_squared(yte, ridge_fit_predict(Xtr, ytr, Xte, cfg.alpha)));
  }
  return rep;
}

// ---------------------------------------------------------------- word presence

struct WordPresenceConfig {
  MlpConfig mlp;
  double train_fraction = 0.8;
  std::uint64_t seed = 1;
  bool permute_labels = false;
  std::set<std::string> stopwords = default_stopwords();
};

struct PresenceInstance {
  std::size_t utt;
  std::string word;
  int label;
};

/// One positive (a non-stopword of the utterance) and one negative (another
/// utterance's positive that does not occur here) per utterance. Utterances
/// that cannot be given a negative are dropped.
inline std::vector<PresenceInstance> presence_instances(const std::vector<std::size_t>& utts,
                                                        const std::vector<std::vector<std::string>>& transcripts,
                                                        const std::map<std::string, std::vector<float>>& word_vectors,
                                                        const std::set<std::string>& stopwords, std::mt19937_64& rng) {
  std::vector<std::pair<std::size_t, std::string>> positives;
  for (auto u : utts) {
    std::vector<std::string> cand;
    for (const auto& w : transcripts[u])
      if (!stopwords.count(w) && word_vectors.count(w) && std::find(cand.begin(), cand.end(), w) == cand.end())
        cand.push_back(w);
    if (cand.empty()) continue;
    std::uniform_int_distribution<std::size_t> pick(0, cand.size() - 1);
    positives.emplace_back(u, cand[pick(rng)]);
  }
  std::vector<std::size_t> pool(positives.size());
  std::iota(pool.begin(), pool.end(), 0);
  std::shuffle(pool.begin(), pool.end(), rng);
  std::vector<bool> used(pool.size(), false);
  std::vector<PresenceInstance> out;
  std::size_t cursor = 0;
  for (const auto& [u, w] : positives) {
    const auto& t = transcripts[u];
    for (std::size_t k = 0; k < pool.size(); ++k) {
      const std::size_t slot = (cursor + k) % pool.size();
      if (used[slot]) continue;
      const auto& [owner, neg] = positives[pool[slot]];
      if (owner == u || std::find(t.begin(), t.end(), neg) != t.end()) continue;
      used[slot] = true;
      cursor = slot + 1;
      out.push_back({u, w, 1});
      out.push_back({u, neg, 0});
      break;
    }
  }
  return out;
}

/// MLP classification of [utterance features | word vector] -> word present.
inline ProbeReport probe_word_presence(const std::vector<ProbeFeatures>& feats,
                                       const std::vector<std::vector<std::string>>& transcripts,
                                       const std::map<std::string, std::vector<float>>& word_vectors,
                                       const WordPresenceConfig& cfg = {}) {
  if (feats.size() != transcripts.size()) throw std::invalid_argument("probe_word_presence: transcript count mismatch");
  std::set<std::string> vocab;
  for (const auto& t : transcripts)
    for (const auto& w : t)
      if (!cfg.stopwords.count(w) && word_vectors.count(w)) vocab.insert(w);
  if (vocab.size() < 2) throw InsufficientDataError("probe_word_presence: vocabulary too small to pair negatives");

  std::mt19937_64 rng(substream_seed(cfg.seed, "probe/wordpresence"));
  auto [train_u, test_u] = detail::split_indices(feats.size(), cfg.train_fraction, rng);
  auto train = presence_instances(train_u, transcripts, word_vectors, cfg.stopwords, rng);
  auto test = presence_instances(test_u, transcripts, word_vectors, cfg.stopwords, rng);
  if (train.size() < 4 || test.empty()) throw InsufficientDataError("probe_word_presence: too few instances");
  std::vector<int> ytr, yte;
  for (const auto& i : train) ytr.push_back(i.label);
  for (const auto& i : test) yte.push_back(i.label);
  if (cfg.permute_labels) {
    std::shuffle(ytr.begin(), ytr.end(), rng);
    std::shuffle(yte.begin(), yte.end(), rng);
  }

  ProbeReport rep;
  rep.task = "wordpresence";
  rep.meta = {{"n_train", std::to_string(train.size())}, {"n_test", std::to_string(test.size())},
              {"seed", std::to_string(cfg.seed)}, {"hidden", std::to_string(cfg.mlp.hidden)}};
  const std::uint64_t mlp_seed = rng();
  for (const auto& set : feature_sets(detail::layer_count(feats))) {
    auto rows = [&](const std::vector<PresenceInstance>& inst) {
      RowSet X;
      for (const auto& i : inst) {
        auto x = select_features(feats[i.utt], set);
        const auto& wv = word_vectors.at(i.word);
        x.insert(x.end(), wv.begin(), wv.end());
        X.push_back(std::move(x));
      }
      return X;
    };
    MlpClassifier mlp(cfg.mlp, mlp_seed);
    mlp.fit(rows(train), ytr);
    rep.add(set, "accuracy", mlp.accuracy(rows(test), yte));
  }
  return rep;
}

// ---------------------------------------------------------------- sentence similarity

struct SimilarityProbeConfig {
  std::size_t bootstrap = 10000;
  std::uint64_t seed = 1;
};

/// Pearson r between z-scored cosine similarities of each feature set and
/// (a) human ratings, (b) text-model cosines when given, (c) edit similarity
/// of the transcripts; each with a bootstrap interval.
inline ProbeReport probe_similarity(const std::vector<std::pair<std::size_t, std::size_t>>& pairs,
                                    const std::vector<double>& ratings, const std::vector<ProbeFeatures>& feats,
                                    const std::vector<std::string>& sentences,
                                    const std::vector<std::vector<float>>& text_embeddings,
                                    const SimilarityProbeConfig& cfg = {}) {
  if (pairs.size() != ratings.size()) throw std::invalid_argument("probe_similarity: rating count mismatch");
  if (pairs.size() < 3) throw InsufficientDataError("probe_similarity: need at least 3 pairs");
  std::vector<std::size_t> members;
  for (auto [a, b] : pairs) members.push_back(a), members.push_back(b);
  std::sort(members.begin(), members.end());
  members.erase(std::unique(members.begin(), members.end()), members.end());
  std::map<std::size_t, std::size_t> slot;
  for (std::size_t i = 0; i < members.size(); ++i) slot[members[i]] = i;

  auto pair_cosines = [&](const RowSet& rows) {
    const RowSet z = zscore(rows);
    std::vector<double> out;
    for (auto [a, b] : pairs) out.push_back(cosine_similarity(z[slot[a]], z[slot[b]]));
    return out;
  };
  std::vector<double> edit;
  for (auto [a, b] : pairs) edit.push_back(levenshtein_similarity(sentences.at(a), sentences.at(b)));
  std::optional<std::vector<double>> text;
  if (!text_embeddings.empty()) {
    RowSet rows;
    for (auto m : members) rows.emplace_back(text_embeddings.at(m).begin(), text_embeddings.at(m).end());
    text = pair_cosines(rows);
  }

  ProbeReport rep;
  rep.task = "similarity";
  rep.meta = {{"n_pairs", std::to_string(pairs.size())}, {"n_sentences", std::to_string(members.size())},
              {"bootstrap", std::to_string(cfg.bootstrap)}, {"seed", std::to_string(cfg.seed)}};
  std::uint64_t stream = 0;
  for (const auto& set : feature_sets(detail::layer_count(feats))) {
    RowSet rows;
    for (auto m : members) rows.push_back(select_features(feats.at(m), set));
    const auto sims = pair_cosines(rows);
    auto record = [&](const char* metric, const std::vector<double>& other) {
      const auto b = bootstrap_pearson(sims, other, cfg.bootstrap, substream_seed(cfg.seed, "probe/similarity/" + std::to_string(stream++)));
      rep.add(set, metric, b.point, b.ci_low, b.ci_high);
    };
    record("r_human", ratings);
    if (text) record("r_text", *text);
    record("r_edit", edit);
  }
  return rep;
}

// ---------------------------------------------------------------- homonyms

struct HomonymMiningConfig {
  std::size_t min_count = 20;  ///< both forms must occur more often than this
  double max_share = 0.95;     ///< the more frequent form must stay below this share
  std::set<std::string> stopwords = default_stopwords();
  std::set<std::pair<std::string, std::string>> exclusions = default_variant_spellings();
};

/// Spelling pairs that share a pronunciation, in lexicographic order.
inline std::vector<std::pair<std::string, std::string>> mine_homonyms(
    const std::map<std::string, std::string>& lexicon, const std::map<std::string, std::size_t>& counts,
    const HomonymMiningConfig& cfg = {}) {
  std::map<std::string, std::vector<std::string>> by_pron;
  for (const auto& [w, p] : lexicon) by_pron[p].push_back(w);
  auto count = [&](const std::string& w) {
    auto it = counts.find(w);
    return it == counts.end() ? std::size_t{0} : it->second;
  };
  std::vector<std::pair<std::string, std::string>> out;
  for (auto& [_, words] : by_pron) {
    std::sort(words.begin(), words.end());
    for (std::size_t i = 0; i < words.size(); ++i)
      for (std::size_t j = i + 1; j < words.size(); ++j) {
        const auto &a = words[i], &b = words[j];
        if (cfg.stopwords.count(a) || cfg.stopwords.count(b)) continue;
        if (cfg.exclusions.count({a, b}) || cfg.exclusions.count({b, a})) continue;
        const auto ca = count(a), cb = count(b);
        if (ca <= cfg.min_count || cb <= cfg.min_count) continue;
        if (double(std::max(ca, cb)) / double(ca + cb) >= cfg.max_share) continue;
        out.emplace_back(a, b);
      }
  }
  std::sort(out.begin(), out.end());
  return out;
}

struct HomonymProbeConfig {
  std::size_t folds = 10;
  double lambda = 1.0;
  std::uint64_t seed = 1;
};

struct CvOutcome {
  double err_model = 0, err_majority = 0;
  double rer() const { return err_majority == 0 ? 0.0 : (err_majority - err_model) / err_majority; }
};

/// Stratified k-fold logistic regression; the baseline predicts the majority
/// class of each training fold.
inline CvOutcome stratified_cv(const RowSet& X, const std::vector<int>& y, std::size_t folds, double lambda,
                               std::mt19937_64& rng) {
  std::vector<std::size_t> fold(y.size());
  for (int cls : {0, 1}) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < y.size(); ++i)
      if (y[i] == cls) members.push_back(i);
    if (members.size() < folds)
      throw InsufficientDataError("stratified_cv: class " + std::to_string(cls) + " has " +
                                  std::to_string(members.size()) + " items, fewer than " + std::to_string(folds) +
                                  " folds");
    std::shuffle(members.begin(), members.end(), rng);
    for (std::size_t k = 0; k < members.size(); ++k) fold[members[k]] = k % folds;
  }
  std::size_t wrong_model = 0, wrong_major = 0;
  for (std::size_t f = 0; f < folds; ++f) {
    RowSet Xtr;
    std::vector<int> ytr;
    std::size_t ones = 0;
    for (std::size_t i = 0; i < y.size(); ++i)
      if (fold[i] != f) Xtr.push_back(X[i]), ytr.push_back(y[i]), ones += std::size_t(y[i]);
    const int majority = 2 * ones > ytr.size() ? 1 : 0;
    const auto model = logistic_fit(Xtr, ytr, lambda);
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (fold[i] != f) continue;
      const double p = model.probability(X[i]);
      // An exactly uninformative model falls back to the baseline's choice.
      const int pred = std::abs(p - 0.5) < 1e-12 ? majority : (p > 0.5 ? 1 : 0);
      wrong_model += pred != y[i];
      wrong_major += majority != y[i];
    }
  }
  return {double(wrong_model) / double(y.size()), double(wrong_major) / double(y.size())};
}

/// Per pair and feature set: RER of predicting which spelling an utterance
/// contains. Utterances containing both spellings are skipped.
inline ProbeReport probe_homonyms(const std::vector<std::pair<std::string, std::string>>& pairs,
                                  const std::vector<std::vector<std::string>>& transcripts,
                                  const std::vector<ProbeFeatures>& feats, const HomonymProbeConfig& cfg = {}) {
  if (feats.size() != transcripts.size()) throw std::invalid_argument("probe_homonyms: transcript count mismatch");
  ProbeReport rep;
  rep.task = "homonym";
  rep.meta = {{"pairs", std::to_string(pairs.size())}, {"folds", std::to_string(cfg.folds)},
              {"seed", std::to_string(cfg.seed)}};
  const auto sets = feature_sets(detail::layer_count(feats));
  std::vector<double> sums(sets.size(), 0.0);
  for (const auto& [a, b] : pairs) {
    std::vector<std::size_t> utts;
    std::vector<int> y;
    for (std::size_t u = 0; u < transcripts.size(); ++u) {
      const auto& t = transcripts[u];
      const bool has_a = std::find(t.begin(), t.end(), a) != t.end();
      const bool has_b = std::find(t.begin(), t.end(), b) != t.end();
      if (has_a == has_b) continue;
      utts.push_back(u);
      y.push_back(has_b ? 1 : 0);
    }
    for (std::size_t s = 0; s < sets.size(); ++s) {
      RowSet X;
      for (auto u : utts) X.push_back(unit_normalized(select_features(feats[u], sets[s])));
      std::mt19937_64 rng(substream_seed(cfg.seed, "probe/homonym/" + a + "/" + b));
      const auto cv = stratified_cv(X, y, cfg.folds, cfg.lambda, rng);
      rep.add({sets[s].name, sets[s].layer}, "rer:" + a + "/" + b, cv.rer());
      sums[s] += cv.rer();
    }
  }
  if (!pairs.empty())
    for (std::size_t s = 0; s < sets.size(); ++s) rep.add(sets[s], "rer_mean", sums[s] / double(pairs.size()));
  return rep;
}

}  // namespace gsr
