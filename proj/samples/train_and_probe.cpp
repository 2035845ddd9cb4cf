// Trains the micro model on a small synthetic corpus, reports retrieval and
// runs the utterance-length probe on every layer.
//
//   ./build/samples/train_and_probe [epochs]

#include <cstdio>
#include <cstdlib>
#include <iostream>

#include "gsr/corpus/dataset.hpp"
#include "gsr/corpus/synthetic.hpp"
#include "gsr/probes/features.hpp"
#include "gsr/probes/tasks.hpp"
#include "gsr/training/fit.hpp"

int main(int argc, char** argv) {
  using namespace gsr;
  const std::size_t epochs = argc > 1 ? std::strtoul(argv[1], nullptr, 10) : 60;

  SynthConfig sc;
  sc.n_utterances = 120;
  sc.noise = 0.5;
  sc.seed = 3;
  const auto corpus = generate_synthetic(sc);

  const auto cfg = model_preset("micro");
  const auto fc = featurizer_for(cfg);
  PairedSet set;
  for (std::size_t i = 0; i < corpus.records.size(); ++i) {
    set.speech.push_back(featurize(corpus.audio[i], fc));
    set.image_of.push_back(i);
    set.images.push_back(corpus.images.at(corpus.records[i].image_id).storage());
  }

  TrainConfig tc;
  tc.lr = 2e-3;
  tc.batch_size = 16;
  tc.max_epochs = epochs;
  tc.early_stopping = false;
  tc.seed = substream_seed(sc.seed, "train/shuffle");
  const auto untrained = init_params<float>(cfg, substream_seed(sc.seed, "train/init"));
  const auto before = evaluate_retrieval(untrained, cfg, set);
  const auto res = fit(cfg, untrained, set, set, tc);
  const auto after = evaluate_retrieval(res.best, cfg, set);
  std::printf("R@1 %.3f -> %.3f   R@10 %.3f -> %.3f   median rank %.1f -> %.1f\n", before.recall(1),
              after.recall(1), before.recall(10), after.recall(10), before.median_rank, after.median_rank);

  std::vector<double> lengths;
  for (const auto& r : corpus.records) lengths.push_back(double(r.transcript.size()));
  const auto feats = extract_probe_features(res.best, cfg, set.speech);
  write_probe_reports(std::cout, {probe_length(feats, lengths)});
}
