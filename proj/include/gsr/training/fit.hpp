#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "gsr/evaluation/retrieval.hpp"
#include "gsr/model/inference.hpp"
#include "gsr/training/adam.hpp"
#include "gsr/training/loss.hpp"

namespace gsr {

struct TrainConfig {
  double lr = 2e-4;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 25;
  std::uint64_t seed = 1;
  double margin = 0.2;
  double clip_norm = 0;
  /// Keep the epoch with the best validation R@10 (earliest on ties). When off,
  /// the parameters after the last epoch are returned.
  bool early_stopping = true;

  void validate() const {
    if (!(lr > 0)) throw ConfigError("train config: lr must be > 0");
    if (batch_size < 2) throw ConfigError("train config: batch_size must be >= 2");
    LossConfig{margin}.validate();
  }
};

/// Default optimizer settings for a model kind: speech 2e-4, text 1e-3.
inline TrainConfig train_preset(const ModelConfig& model) {
  TrainConfig t;
  t.lr = model.is_text() ? 1e-3 : 2e-4;
  return t;
}

/// Queries paired with images. Exactly one of `speech` / `text` is populated.
/// Several queries may share one image.
struct PairedSet {
  std::vector<Tensor<float>> speech;
  std::vector<std::vector<std::size_t>> text;
  std::vector<std::vector<float>> images;
  std::vector<std::size_t> image_of;  ///< query -> index into images

  std::size_t size() const { return image_of.size(); }

  void validate(const char* split) const {
    const std::string s(split);
    if (image_of.empty()) throw ConfigError(s + " split is empty");
    if (speech.size() + text.size() != image_of.size() || (!speech.empty() && !text.empty()))
      throw ConfigError(s + " split: query count does not match image mapping");
    for (auto i : image_of)
      if (i >= images.size()) throw ConfigError(s + " split: image index out of range");
  }
};

struct EpochRecord {
  std::size_t epoch = 0;
  double loss = 0;  ///< mean batch loss over the epoch
  RetrievalResult val;
};

struct FitResult {
  ParamSet<float> best;
  std::size_t best_epoch = 0;  ///< 0 means the initialization
  ParamSet<float> last;
  std::vector<EpochRecord> log;
};

/// Embeds every query of `set` and every image, ranks, and summarizes.
inline RetrievalResult evaluate_retrieval(const ParamSet<float>& params, const ModelConfig& cfg, const PairedSet& set) {
  std::vector<std::vector<float>> queries;
  if (cfg.is_text()) {
    queries = run_texts(params, cfg, set.text);
  } else {
    for (auto& a : run_utterances(params, cfg, set.speech)) queries.push_back(std::move(a.embedding));
  }
  const auto imgs = run_images(params, set.images);
  return summarize(rank_images(queries, imgs, set.image_of));
}

namespace detail {

inline Var<float> batch_loss(Graph<float>& g, const BoundParams<float>& bound, const ModelConfig& cfg,
                             const PairedSet& set, std::span<const std::size_t> batch, const LossConfig& loss) {
  std::vector<Var<float>> U, I;
  for (auto q : batch) {
    U.push_back(cfg.is_text() ? encode_text(set.text[q], bound, cfg)
                              : encode_utterance(g, set.speech[q], bound, cfg).embedding);
    const auto& img = set.images[set.image_of[q]];
    I.push_back(encode_image(g.constant(Tensor<float>(Shape{img.size()}, img)), bound));
  }
  return contrastive_loss(U, I, loss);
}

}  // namespace detail

/// Contrastive loss of `params` over `set` in consecutive batches, averaged per batch.
/// A trailing batch of one pair is merged into its predecessor.
inline double evaluate_loss(const ParamSet<float>& params, const ModelConfig& cfg, const PairedSet& set,
                            const TrainConfig& tc) {
  std::vector<std::size_t> order(set.size());
  std::iota(order.begin(), order.end(), 0);
  double total = 0;
  std::size_t batches = 0;
  for (std::size_t start = 0; start < order.size();) {
    std::size_t stop = std::min(order.size(), start + tc.batch_size);
    if (order.size() - stop == 1) ++stop;
    Graph<float> g;
    BoundParams<float> bound(g, params, false);
    total += detail::batch_loss(g, bound, cfg, set, std::span(order).subspan(start, stop - start), {tc.margin})
                 .item();
    ++batches;
    start = stop;
  }
  return total / double(batches);
}

/// Adam over shuffled minibatches with per-epoch validation. Writes the log
/// (header plus one record per epoch) to `log` when given.
inline FitResult fit(const ModelConfig& cfg, ParamSet<float> params, const PairedSet& train, const PairedSet& val,
                     const TrainConfig& tc, std::ostream* log = nullptr) {
  cfg.validate();
  tc.validate();
  train.validate("train");
  val.validate("validation");
  if (train.size() < 2) throw ConfigError("train split needs at least 2 pairs");

  FitResult res;
  res.best = params;
  double best_r10 = -1;
  OptimizerState<float> opt(params, AdamConfig{tc.lr, 0.9, 0.999, 1e-8, tc.clip_norm});
  std::mt19937_64 rng(tc.seed);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  if (log) *log << kMetricsHeader << '\n';

  for (std::size_t epoch = 1; epoch <= tc.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size();) {
      std::size_t stop = std::min(order.size(), start + tc.batch_size);
      if (order.size() - stop == 1) ++stop;
      Graph<float> g;
      BoundParams<float> bound(g, params);
      auto loss = detail::batch_loss(g, bound, cfg, train, std::span(order).subspan(start, stop - start), {tc.margin});
      g.backward(loss);
      adam_step(params, bound.gradients(), opt);
      total += loss.item();
      ++batches;
      start = stop;
    }
    EpochRecord rec{epoch, total / double(batches), evaluate_retrieval(params, cfg, val)};
    if (log) *log << format_record(std::to_string(epoch), rec.loss, rec.val) << '\n' << std::flush;
    if (rec.val.recall(10) > best_r10) {
      best_r10 = rec.val.recall(10);
      res.best = params;
      res.best_epoch = epoch;
    }
    res.log.push_back(std::move(rec));
  }
  res.last = params;
  if (!tc.early_stopping) {
    res.best = params;
    res.best_epoch = tc.max_epochs;
  }
  return res;
}

}  // namespace gsr
