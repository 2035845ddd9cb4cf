#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "gsr/cli/commands.hpp"

namespace gsr::cli {
namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::path(testing::TempDir()) / ("gsr_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

struct Outcome {
  int status;
  std::string out, err;
};

Outcome gsr(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int status = run(args, out, err);
  return {status, out.str(), err.str()};
}

std::map<std::string, std::string> tree(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) files[fs::relative(e.path(), dir).string()] = slurp(e.path());
  return files;
}

// ---------------------------------------------------------------- configuration

TEST(RunConfig, PresetThenFileThenFlags) {
  const auto dir = scratch("precedence");
  std::ofstream(dir / "c.cfg") << "# comment\npreset = flickr8k-text\nbatch = 16\nepochs=7\n";
  const auto file = RunConfig::parse_file((dir / "c.cfg").string());
  const auto rc = RunConfig::resolve(file, {{"epochs", "9"}});
  EXPECT_EQ(rc.str("preset"), "flickr8k-text");
  EXPECT_EQ(rc.real("lr"), 1e-3);  // preset default for text models
  EXPECT_EQ(rc.count("batch"), 16u);
  EXPECT_EQ(rc.count("epochs"), 9u);
  EXPECT_EQ(RunConfig::resolve(file, {{"preset", "micro"}}).real("lr"), 2e-4);
  EXPECT_EQ(RunConfig::resolve({}, {}).str("preset"), "flickr8k-speech");
}

TEST(RunConfig, RejectsUnknownKeysAndBadValues) {
  const auto dir = scratch("reject");
  std::ofstream(dir / "c.cfg") << "learning_rate = 1\n";
  EXPECT_THROW(RunConfig::resolve(RunConfig::parse_file((dir / "c.cfg").string()), {}), ConfigError);
  std::ofstream(dir / "d.cfg") << "no equals sign\n";
  EXPECT_THROW(RunConfig::parse_file((dir / "d.cfg").string()), ConfigError);
  EXPECT_THROW(RunConfig::resolve({}, {{"preset", "vgg"}}), ConfigError);
  const auto rc = RunConfig::resolve({{"batch", "x"}, {"lr", "1e-3z"}, {"early_stopping", "maybe"}}, {});
  EXPECT_THROW(rc.count("batch"), ConfigError);
  EXPECT_THROW(rc.real("lr"), ConfigError);
  EXPECT_THROW(rc.flag("early_stopping"), ConfigError);
  EXPECT_THROW(rc.required("manifest"), ConfigError);
}

TEST(Cli, UsageErrorsExitNonzero) {
  EXPECT_EQ(gsr({}).status, 2);
  EXPECT_EQ(gsr({"launch"}).status, 2);
  EXPECT_EQ(gsr({"synth", "--bogus", "1"}).status, 2);
  const auto dir = scratch("usage");
  std::ofstream(dir / "c.cfg") << "colour = red\n";
  const auto o = gsr({"synth", "--config", (dir / "c.cfg").string(), "--out", (dir / "x").string()});
  EXPECT_EQ(o.status, 2);
  EXPECT_NE(o.err.find("colour"), std::string::npos);
  EXPECT_EQ(gsr({"train", "--preset", "micro", "--out", (dir / "y").string()}).status, 2);
}

TEST(Cli, RuntimeFailureExitsOne) {
  const auto dir = scratch("runtime");
  const auto o = gsr({"featurize", "--manifest", (dir / "absent.tsv").string(), "--out", (dir / "f").string()});
  EXPECT_EQ(o.status, 1);
  EXPECT_FALSE(o.err.empty());
}

// ---------------------------------------------------------------- commands

TEST(Cli, SynthTwiceGivesIdenticalDirectories) {
  const auto dir = scratch("synth");
  ASSERT_EQ(gsr({"synth", "--seed", "7", "--out", (dir / "a").string()}).status, 0);
  ASSERT_EQ(gsr({"synth", "--seed", "7", "--out", (dir / "b").string()}).status, 0);
  auto a = tree(dir / "a"), b = tree(dir / "b");
  // The run logs differ only in the echoed --out value.
  a.erase(kRunLog), b.erase(kRunLog);
  EXPECT_EQ(a, b);
  EXPECT_TRUE(a.count("manifest.tsv"));
  EXPECT_EQ(load_manifest((dir / "a" / "manifest.tsv").string()).size(), 8u);
}

TEST(Cli, TrainWritesCheckpointAndOneLogRowPerEpoch) {
  const auto dir = scratch("train");
  const auto corpus = (dir / "corpus").string(), feats = (dir / "feats").string(), out = (dir / "run").string();
  std::ofstream(dir / "c.cfg") << "preset = micro\nval_split = train\neval_split = train\n";
  const auto cfg = (dir / "c.cfg").string();
  ASSERT_EQ(gsr({"synth", "--out", corpus}).status, 0);
  ASSERT_EQ(gsr({"featurize", "--config", cfg, "--manifest", corpus + "/manifest.tsv", "--out", feats}).status, 0);
  const auto o = gsr({"train", "--config", cfg, "--manifest", corpus + "/manifest.tsv", "--features",
                      feats + "/features.gsr", "--epochs", "4", "--batch", "4", "--out", out});
  ASSERT_EQ(o.status, 0) << o.err;
  std::istringstream log(slurp(fs::path(out) / kTrainLog));
  std::vector<std::string> lines;
  for (std::string l; std::getline(log, l);) lines.push_back(l);
  ASSERT_EQ(lines.size(), 5u);
  EXPECT_EQ(lines[0], kMetricsHeader);
  EXPECT_EQ(lines[4].substr(0, 2), "4,");
  const auto ck = load_checkpoint((fs::path(out) / kModel).string());
  EXPECT_EQ(ck.cfg.hidden, 8u);
  EXPECT_EQ(ck.cfg.image_dim, 64u);
  const auto runlog = slurp(fs::path(out) / kRunLog);
  EXPECT_NE(runlog.find("batch = 4\n"), std::string::npos);
  EXPECT_NE(runlog.find("epochs = 4\n"), std::string::npos);
  EXPECT_NE(runlog.find("seed = 1\n"), std::string::npos);

  const auto ev = gsr({"evaluate", "--config", cfg, "--manifest", corpus + "/manifest.tsv", "--features",
                       feats + "/features.gsr", "--checkpoint", out + "/model.gsr", "--out", (dir / "eval").string()});
  ASSERT_EQ(ev.status, 0) << ev.err;
  EXPECT_EQ(slurp(dir / "eval" / kEvalReport).rfind(std::string(kMetricsHeader) + "\neval,", 0), 0u);
  EXPECT_EQ(slurp(dir / "eval" / kRanks).rfind("id,rank\nutt0001,", 0), 0u);
}

TEST(Cli, TextModelTrainsAndEvaluates) {
  const auto dir = scratch("text");
  const auto corpus = (dir / "corpus").string();
  std::ofstream(dir / "c.cfg") << "preset = coco-text\nval_split = train\neval_split = train\nepochs = 2\n";
  const auto cfg = (dir / "c.cfg").string();
  ASSERT_EQ(gsr({"synth", "--out", corpus}).status, 0);
  const auto o = gsr({"train", "--config", cfg, "--manifest", corpus + "/manifest.tsv", "--out", (dir / "run").string()});
  ASSERT_EQ(o.status, 0) << o.err;
  const auto ck = load_checkpoint((dir / "run" / kModel).string());
  EXPECT_TRUE(ck.cfg.is_text());
  EXPECT_EQ(ck.vocab->size(), ck.cfg.vocab_size);
  EXPECT_EQ(gsr({"evaluate", "--config", cfg, "--manifest", corpus + "/manifest.tsv", "--checkpoint",
                 (dir / "run" / kModel).string(), "--out", (dir / "eval").string()})
                .status,
            0);
}

TEST(Cli, ProbeFromArchiveMatchesLiveProbe) {
  const auto dir = scratch("probe");
  const auto corpus = (dir / "corpus").string(), feats = (dir / "feats").string();
  std::ofstream(dir / "c.cfg") << "preset = micro\nn_utterances = 120\nhomonym_pairs = 1\nval_fraction = 0.2\n"
                                  "probe_split = all\nbootstrap = 200\nmlp_hidden = 64\nmlp_epochs = 20\n";
  const auto cfg = (dir / "c.cfg").string(), manifest = corpus + "/manifest.tsv";
  ASSERT_EQ(gsr({"synth", "--config", cfg, "--out", corpus}).status, 0);
  ASSERT_EQ(gsr({"featurize", "--config", cfg, "--manifest", manifest, "--out", feats}).status, 0);
  ASSERT_EQ(gsr({"train", "--config", cfg, "--manifest", manifest, "--features", feats + "/features.gsr", "--epochs",
                 "1", "--out", (dir / "run").string()})
                .status,
            0);
  const auto ckpt = (dir / "run" / kModel).string();
  ASSERT_EQ(gsr({"dump-activations", "--config", cfg, "--manifest", manifest, "--features", feats + "/features.gsr",
                 "--checkpoint", ckpt, "--out", (dir / "acts").string()})
                .status,
            0);
  const auto live = gsr({"probe", "--config", cfg, "--manifest", manifest, "--features", feats + "/features.gsr",
                         "--checkpoint", ckpt, "--out", (dir / "live").string()});
  ASSERT_EQ(live.status, 0) << live.err;
  std::ofstream(dir / "a.cfg") << slurp(cfg) << "activations = " << (dir / "acts" / kActivations).string() << '\n';
  const auto archived =
      gsr({"probe", "--config", (dir / "a.cfg").string(), "--manifest", manifest, "--out", (dir / "arch").string()});
  ASSERT_EQ(archived.status, 0) << archived.err;
  const auto report = slurp(dir / "live" / kProbeReport);
  EXPECT_EQ(report, slurp(dir / "arch" / kProbeReport));
  for (const char* task : {"length", "wordpresence", "similarity", "homonym"})
    EXPECT_NE(report.find(std::string("\n") + task + "\t"), std::string::npos) << task;
  EXPECT_EQ(gsr({"probe", "--config", (dir / "a.cfg").string(), "--manifest", manifest, "--task", "syntax", "--out",
                 (dir / "bad").string()})
                .status,
            2);
}

TEST(Cli, HomonymPairsTooRareInTheSplitAreSkipped) {
  const auto dir = scratch("homonym_skip");
  const auto corpus = (dir / "corpus").string(), feats = (dir / "feats").string();
  std::ofstream(dir / "c.cfg") << "preset = micro\nn_utterances = 120\nhomonym_pairs = 1\nval_fraction = 0.2\n"
                                  "task = homonym\n";
  const auto cfg = (dir / "c.cfg").string(), manifest = corpus + "/manifest.tsv";
  ASSERT_EQ(gsr({"synth", "--config", cfg, "--out", corpus}).status, 0);
  ASSERT_EQ(gsr({"featurize", "--config", cfg, "--manifest", manifest, "--out", feats}).status, 0);
  ASSERT_EQ(gsr({"train", "--config", cfg, "--manifest", manifest, "--features", feats + "/features.gsr", "--epochs",
                 "1", "--out", (dir / "run").string()})
                .status,
            0);
  // 25 + 40 occurrences over 120 utterances leave fewer than 10 of one form in the 24-utterance split.
  const auto o = gsr({"probe", "--config", cfg, "--manifest", manifest, "--features", feats + "/features.gsr",
                      "--checkpoint", (dir / "run" / kModel).string(), "--out", (dir / "probe").string()});
  ASSERT_EQ(o.status, 0) << o.err;
  const auto report = slurp(dir / "probe" / kProbeReport);
  EXPECT_NE(report.find("# homonym.pairs = 0\n"), std::string::npos);
  EXPECT_NE(report.find("# homonym.skipped_below_folds = "), std::string::npos);
}

}  // namespace
}  // namespace gsr::cli
