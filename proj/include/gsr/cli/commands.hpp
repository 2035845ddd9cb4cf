#pragma once

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "gsr/cli/run_config.hpp"
#include "gsr/corpus/activations.hpp"
#include "gsr/corpus/dataset.hpp"
#include "gsr/corpus/synthetic.hpp"
#include "gsr/evaluation/retrieval.hpp"
#include "gsr/model/checkpoint.hpp"
#include "gsr/numcore/rng.hpp"
#include "gsr/probes/tasks.hpp"
#include "gsr/training/fit.hpp"

namespace gsr::cli {

namespace fs = std::filesystem;

/// Output file names inside --out.
inline constexpr const char* kRunLog = "run.log";
inline constexpr const char* kFeatures = "features.gsr";
inline constexpr const char* kModel = "model.gsr";
inline constexpr const char* kTrainLog = "train_log.csv";
inline constexpr const char* kEvalReport = "eval.csv";
inline constexpr const char* kRanks = "ranks.csv";
inline constexpr const char* kActivations = "activations.gsr";
inline constexpr const char* kProbeReport = "probe_report.tsv";

class Run {
 public:
  Run(std::string command, RunConfig rc, std::ostream& out)
      : command_(std::move(command)), rc_(std::move(rc)), out_(out), dir_(rc_.required("out")) {
    fs::create_directories(dir_);
    log_.open(dir_ / kRunLog);
    if (!log_) throw std::runtime_error("cannot write " + (dir_ / kRunLog).string());
    log_ << "# command = " << command_ << '\n';
    rc_.write(log_);
    log_.flush();
  }

  const RunConfig& rc() const { return rc_; }
  fs::path path(const char* name) const { return dir_ / name; }

  /// Line to both the run log and stdout.
  void note(const std::string& line) {
    log_ << "# " << line << '\n';
    log_.flush();
    out_ << line << '\n';
  }

  void wrote(const fs::path& p) { note("wrote " + p.string()); }

 private:
  std::string command_;
  RunConfig rc_;
  std::ostream& out_;
  fs::path dir_;
  std::ofstream log_;
};

// ---------------------------------------------------------------- shared helpers

namespace detail {

inline std::uint64_t seed_of(const RunConfig& rc, const std::string& stream) {
  return substream_seed(rc.count("seed"), stream);
}

/// Records of one split, or of every split for "all".
inline std::vector<ManifestRecord> records_of(const std::vector<ManifestRecord>& all, const std::string& split) {
  if (split == "all") return all;
  Split s;
  if (!parse_split(split, s)) throw ConfigError("unknown split '" + split + "' (train, val, test or all)");
  std::vector<ManifestRecord> out;
  for (const auto& r : all)
    if (r.split == s) out.push_back(r);
  if (out.empty()) throw ConfigError("split '" + split + "' has no records");
  return out;
}

inline Split split_of(const std::string& name) {
  Split s;
  if (!parse_split(name, s)) throw ConfigError("unknown split '" + name + "' (train, val or test)");
  return s;
}

inline fs::path manifest_dir(const RunConfig& rc) { return fs::path(rc.required("manifest")).parent_path(); }

inline fs::path side_file(const RunConfig& rc, const std::string& key, const char* fallback) {
  const auto& v = rc.str(key);
  return v.empty() ? manifest_dir(rc) / fallback : fs::path(v);
}

inline TrainConfig train_config(const RunConfig& rc) {
  TrainConfig tc;
  tc.lr = rc.real("lr");
  tc.batch_size = rc.count("batch");
  tc.max_epochs = rc.count("epochs");
  tc.margin = rc.real("margin");
  tc.clip_norm = rc.real("clip_norm");
  tc.early_stopping = rc.flag("early_stopping");
  tc.seed = seed_of(rc, "train/shuffle");
  return tc;
}

inline PairedSplit split_for(const Checkpoint& ck, const std::vector<ManifestRecord>& records, Split split,
                             ImageStore& images, const NamedTensors<float>* feats) {
  return build_split(records, split, images, ck.cfg.is_text() ? nullptr : feats,
                     ck.vocab ? &*ck.vocab : nullptr);
}

inline std::vector<float> time_mean(const Tensor<float>& X) {
  std::vector<double> m(X.cols(), 0.0);
  for (std::size_t t = 0; t < X.rows(); ++t)
    for (std::size_t c = 0; c < X.cols(); ++c) m[c] += X(t, c);
  std::vector<float> out;
  for (double v : m) out.push_back(float(v / double(X.rows())));
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------- commands

inline void cmd_synth(Run& run) {
  const auto& rc = run.rc();
  SynthConfig sc;
  sc.n_utterances = rc.count("n_utterances");
  sc.vocab_size = rc.count("vocab_size");
  sc.homonym_pairs = rc.count("homonym_pairs");
  sc.homonym_count_a = rc.count("homonym_count_a");
  sc.homonym_count_b = rc.count("homonym_count_b");
  sc.min_words = rc.count("min_words");
  sc.max_words = rc.count("max_words");
  sc.image_dim = rc.count("image_dim");
  sc.noise = rc.real("noise");
  sc.val_fraction = rc.real("val_fraction");
  sc.test_fraction = rc.real("test_fraction");
  sc.similarity_pairs = rc.count("similarity_pairs");
  sc.seed = rc.count("seed");
  const auto c = generate_synthetic(sc);
  write_synthetic(c, rc.required("out"));
  run.note("synthesized " + std::to_string(c.records.size()) + " utterances, " + std::to_string(c.homonyms.size()) +
           " homonym pairs");
  run.wrote(fs::path(rc.str("out")) / "manifest.tsv");
}

inline void cmd_featurize(Run& run) {
  const auto& rc = run.rc();
  const auto records = load_manifest(rc.required("manifest"));
  const auto fc = featurizer_for(model_preset(rc.str("preset")), rc.real("max_ms"));
  const auto feats = featurize_manifest(records, detail::manifest_dir(rc), fc);
  save_container(run.path(kFeatures).string(), feats);
  run.note("featurized " + std::to_string(feats.size()) + " utterances at " + std::to_string(fc.dims()) + " dims");
  run.wrote(run.path(kFeatures));
}

inline void cmd_train(Run& run) {
  const auto& rc = run.rc();
  const auto records = load_manifest(rc.required("manifest"));
  ImageStore images(detail::manifest_dir(rc));
  Checkpoint ck;
  ck.cfg = model_preset(rc.str("preset"));
  NamedTensors<float> feats;
  if (ck.cfg.is_text()) {
    std::vector<std::vector<std::string>> ts;
    for (const auto& r : records)
      if (r.split == Split::Train) ts.push_back(r.transcript);
    ck.vocab = Vocabulary::build(ts);
    ck.cfg.vocab_size = ck.vocab->size();
  } else {
    feats = load_container(rc.required("features"));
  }
  const auto train = detail::split_for(ck, records, Split::Train, images, &feats);
  const auto val = detail::split_for(ck, records, detail::split_of(rc.str("val_split")), images, &feats);
  train.set.validate("train");
  // Image width comes from the data, not the preset.
  ck.cfg.image_dim = train.set.images.front().size();

  const auto tc = detail::train_config(rc);
  std::ofstream csv(run.path(kTrainLog));
  const auto res = fit(ck.cfg, init_params<float>(ck.cfg, detail::seed_of(rc, "train/init")), train.set, val.set,
                       tc, &csv);
  ck.params = res.best;
  save_checkpoint(run.path(kModel).string(), ck);
  run.note("trained " + std::to_string(res.log.size()) + " epochs on " + std::to_string(train.set.size()) +
           " pairs; kept epoch " + std::to_string(res.best_epoch));
  run.wrote(run.path(kTrainLog));
  run.wrote(run.path(kModel));
}

inline void cmd_evaluate(Run& run) {
  const auto& rc = run.rc();
  const auto ck = load_checkpoint(rc.required("checkpoint"));
  const auto records = load_manifest(rc.required("manifest"));
  ImageStore images(detail::manifest_dir(rc));
  NamedTensors<float> feats;
  if (!ck.cfg.is_text()) feats = load_container(rc.required("features"));
  const auto split = detail::split_for(ck, records, detail::split_of(rc.str("eval_split")), images, &feats);
  split.set.validate(rc.str("eval_split").c_str());
  const auto r = evaluate_retrieval(ck.params, ck.cfg, split.set);
  const double loss = split.set.size() >= 2 ? evaluate_loss(ck.params, ck.cfg, split.set, detail::train_config(rc)) : 0.0;
  std::ofstream rep(run.path(kEvalReport)), ranks(run.path(kRanks));
  write_report(rep, r, loss);
  write_rank_dump(ranks, split.ids, r);
  run.note(format_record("eval", loss, r));
  run.wrote(run.path(kEvalReport));
  run.wrote(run.path(kRanks));
}

inline void cmd_dump_activations(Run& run) {
  const auto& rc = run.rc();
  const auto ck = load_checkpoint(rc.required("checkpoint"));
  if (ck.cfg.is_text()) throw ConfigError("dump-activations needs a speech checkpoint");
  const auto records = detail::records_of(load_manifest(rc.required("manifest")), rc.str("probe_split"));
  const auto feats = load_container(rc.required("features"));
  std::vector<std::string> ids;
  std::vector<Tensor<float>> xs;
  for (const auto& r : records) {
    if (!feats.contains(r.utt_id)) throw MissingResourceError("no features for utterance '" + r.utt_id + "'");
    ids.push_back(r.utt_id);
    xs.push_back(feats.at(r.utt_id));
  }
  dump_activations(ck.params, ck.cfg, ids, xs, run.path(kActivations).string());
  run.note("dumped activations of " + std::to_string(ids.size()) + " utterances");
  run.wrote(run.path(kActivations));
}

// ---------------------------------------------------------------- probe

namespace detail {

struct ProbeInputs {
  std::vector<ManifestRecord> all;      ///< whole manifest
  std::vector<ManifestRecord> records;  ///< probe split
  std::vector<ProbeFeatures> feats;     ///< aligned with records
};

inline ProbeInputs probe_inputs(const RunConfig& rc) {
  ProbeInputs in;
  in.all = load_manifest(rc.required("manifest"));
  in.records = records_of(in.all, rc.str("probe_split"));
  ActivationSet acts;
  if (!rc.str("activations").empty()) {
    acts = load_activations(rc.str("activations"));
  } else {
    const auto ck = load_checkpoint(rc.required("checkpoint"));
    const auto feats = load_container(rc.required("features"));
    std::vector<Tensor<float>> xs;
    for (const auto& r : in.records) {
      if (!feats.contains(r.utt_id)) throw MissingResourceError("no features for utterance '" + r.utt_id + "'");
      acts.ids.push_back(r.utt_id);
      xs.push_back(feats.at(r.utt_id));
    }
    acts.feats = extract_probe_features(ck.params, ck.cfg, xs);
  }
  for (const auto& r : in.records) in.feats.push_back(acts.at(r.utt_id));
  return in;
}

inline ProbeReport run_length(const RunConfig& rc, const ProbeInputs& in) {
  LengthProbeConfig cfg;
  cfg.alpha = rc.real("ridge_alpha");
  cfg.seed = rc.count("seed");
  std::vector<double> lengths;
  for (const auto& r : in.records) lengths.push_back(double(r.transcript.size()));
  return probe_length(in.feats, lengths, cfg);
}

inline ProbeReport run_word_presence(const RunConfig& rc, const ProbeInputs& in) {
  WordPresenceConfig cfg;
  cfg.seed = rc.count("seed");
  cfg.mlp.hidden = rc.count("mlp_hidden");
  cfg.mlp.max_epochs = rc.count("mlp_epochs");
  const auto dir = side_file(rc, "words_dir", "words");
  FeaturizerConfig fc;
  fc.max_ms = rc.real("max_ms");
  fc.deltas = in.feats.front().avg_input.size() == kDeltaDims;
  std::map<std::string, std::vector<float>> vectors;
  std::vector<std::vector<std::string>> transcripts;
  for (const auto& r : in.records) {
    transcripts.push_back(r.transcript);
    for (const auto& w : r.transcript) {
      if (vectors.count(w) || cfg.stopwords.count(w)) continue;
      const auto wav = dir / (w + ".wav");
      if (fs::exists(wav)) vectors[w] = time_mean(featurize(read_wav(wav.string()), fc));
    }
  }
  return probe_word_presence(in.feats, transcripts, vectors, cfg);
}

inline ProbeReport run_similarity(const RunConfig& rc, const ProbeInputs& in) {
  SimilarityProbeConfig cfg;
  cfg.seed = rc.count("seed");
  cfg.bootstrap = rc.count("bootstrap");
  std::map<std::string, std::size_t> index;
  std::vector<std::string> sentences;
  for (std::size_t i = 0; i < in.records.size(); ++i) {
    index[in.records[i].utt_id] = i;
    sentences.push_back(join_words(in.records[i].transcript));
  }
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  std::vector<double> ratings;
  for (const auto& p : load_similarity(side_file(rc, "similarity", "similarity.tsv").string())) {
    auto a = index.find(p.a), b = index.find(p.b);
    if (a == index.end() || b == index.end()) continue;
    pairs.emplace_back(a->second, b->second);
    ratings.push_back(p.rating);
  }
  std::vector<std::vector<float>> text;
  if (!rc.str("text_checkpoint").empty()) {
    const auto ck = load_checkpoint(rc.str("text_checkpoint"));
    if (!ck.cfg.is_text()) throw ConfigError("text_checkpoint must hold a text model");
    std::vector<std::vector<std::size_t>> ids;
    for (const auto& r : in.records) ids.push_back(ck.vocab->encode(r.transcript));
    text = run_texts(ck.params, ck.cfg, ids);
  }
  return probe_similarity(pairs, ratings, in.feats, sentences, text, cfg);
}

inline ProbeReport run_homonyms(const RunConfig& rc, const ProbeInputs& in) {
  HomonymProbeConfig cfg;
  cfg.seed = rc.count("seed");
  cfg.folds = rc.count("folds");
  cfg.lambda = rc.real("logreg_lambda");
  std::map<std::string, std::size_t> counts;
  for (const auto& r : in.all)
    for (const auto& w : r.transcript) ++counts[w];
  std::vector<std::vector<std::string>> transcripts;
  for (const auto& r : in.records) transcripts.push_back(r.transcript);
  // Pairs are mined on the whole corpus, but cross-validation needs every
  // class present at least `folds` times within the probed split.
  std::vector<std::pair<std::string, std::string>> pairs;
  std::string skipped;
  for (const auto& [a, b] : mine_homonyms(load_lexicon(side_file(rc, "lexicon", "lexicon.tsv").string()), counts)) {
    std::size_t n_a = 0, n_b = 0;
    for (const auto& t : transcripts) {
      const bool has_a = std::find(t.begin(), t.end(), a) != t.end();
      const bool has_b = std::find(t.begin(), t.end(), b) != t.end();
      n_a += has_a && !has_b, n_b += has_b && !has_a;
    }
    if (std::min(n_a, n_b) >= cfg.folds) pairs.emplace_back(a, b);
    else skipped += (skipped.empty() ? "" : ",") + a + "/" + b;
  }
  auto rep = probe_homonyms(pairs, transcripts, in.feats, cfg);
  if (!skipped.empty()) rep.meta.emplace_back("skipped_below_folds", skipped);
  return rep;
}

}  // namespace detail

inline std::vector<std::string> probe_task_names() { return {"length", "wordpresence", "similarity", "homonym"}; }

inline void cmd_probe(Run& run) {
  const auto& rc = run.rc();
  const auto& task = rc.str("task");
  std::vector<std::string> tasks;
  if (task == "all") {
    tasks = probe_task_names();
  } else {
    const auto names = probe_task_names();
    if (std::find(names.begin(), names.end(), task) == names.end())
      throw ConfigError("unknown probe task '" + task + "' (length, wordpresence, similarity, homonym or all)");
    tasks = {task};
  }
  const auto in = detail::probe_inputs(rc);
  std::vector<ProbeReport> reports;
  for (const auto& t : tasks) {
    if (t == "length") reports.push_back(detail::run_length(rc, in));
    else if (t == "wordpresence") reports.push_back(detail::run_word_presence(rc, in));
    else if (t == "similarity") reports.push_back(detail::run_similarity(rc, in));
    else reports.push_back(detail::run_homonyms(rc, in));
    run.note("probe " + t + ": " + std::to_string(reports.back().records.size()) + " records");
  }
  std::ofstream os(run.path(kProbeReport));
  write_probe_reports(os, reports);
  run.wrote(run.path(kProbeReport));
  const std::map<std::string, std::vector<std::string>> plotted = {
      {"length", {"r2"}}, {"wordpresence", {"accuracy"}}, {"similarity", {"r_human", "r_text", "r_edit"}},
      {"homonym", {"rer_mean"}}};
  for (const auto& r : reports)
    for (const auto& metric : plotted.at(r.task)) {
      if (std::none_of(r.records.begin(), r.records.end(), [&](auto& x) { return x.metric == metric; })) continue;
      const auto p = run.path(("plot_" + r.task + "_" + metric + ".csv").c_str());
      std::ofstream ps(p);
      write_plot_data(ps, r, metric);
      run.wrote(p);
    }
}

// ---------------------------------------------------------------- entry point

inline std::vector<std::pair<std::string, std::string>> command_names() {
  return {
      {"synth", "write a synthetic corpus: audio, images, manifest, lexicon, word audio"},
      {"featurize", "compute MFCC or filterbank features for every manifest entry"},
      {"train", "fit a model with the contrastive loss and save the checkpoint"},
      {"evaluate", "image retrieval recall@N and median rank on a split"},
      {"dump-activations", "save pooled per-layer activations for probing"},
      {"probe", "run the length, word presence, similarity and homonym probes"},
  };
}

/// Parses `args` (without the program name) and runs one command. Returns the
/// process exit status: 0 on success, 2 on usage errors, 1 on runtime failures.
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Grounded speech representations: synthesis, training, evaluation and probing"};
  app.require_subcommand(1, 1);
  std::map<std::string, std::string> flags;
  std::string config_path;
  static const std::vector<std::pair<std::string, std::string>> kFlags = {
      {"preset", "model preset: flickr8k-speech, coco-speech, flickr8k-text, coco-text, micro"},
      {"seed", "master seed; every random stream derives from it"},
      {"manifest", "corpus manifest (TSV)"},
      {"features", "feature archive written by featurize"},
      {"checkpoint", "model checkpoint written by train"},
      {"out", "output directory"},
      {"task", "probe task: length, wordpresence, similarity, homonym, all"},
      {"margin", "contrastive margin"},
      {"lr", "Adam learning rate"},
      {"batch", "minibatch size"},
      {"epochs", "maximum epochs"},
  };
  std::map<std::string, std::string> raw;
  for (const auto& [name, description] : command_names()) {
    auto* sub = app.add_subcommand(name, description);
    sub->add_option("--config", config_path, "key = value config file");
    for (const auto& [flag, help] : kFlags) sub->add_option("--" + flag, raw[flag], help);
  }
  std::vector<const char*> argv{"gsr"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(int(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }
  const auto* sub = app.get_subcommands().front();
  for (const auto& [flag, _] : kFlags)
    if (sub->count("--" + flag)) flags[flag] = raw[flag];

  try {
    const auto file = config_path.empty() ? std::map<std::string, std::string>{} : RunConfig::parse_file(config_path);
    Run r(sub->get_name(), RunConfig::resolve(file, flags), out);
    const auto& name = sub->get_name();
    if (name == "synth") cmd_synth(r);
    else if (name == "featurize") cmd_featurize(r);
    else if (name == "train") cmd_train(r);
    else if (name == "evaluate") cmd_evaluate(r);
    else if (name == "dump-activations") cmd_dump_activations(r);
    else cmd_probe(r);
    return 0;
  } catch (const ConfigError& e) {
    err << "gsr " << sub->get_name() << ": " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "gsr " << sub->get_name() << ": " << e.what() << '\n';
    return 1;
  }
}

}  // namespace gsr::cli
