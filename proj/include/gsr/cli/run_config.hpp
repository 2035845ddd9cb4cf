#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "gsr/model/config.hpp"

namespace gsr::cli {

/// Effective key/value settings of one run. Precedence, lowest first:
/// built-in defaults for the preset, config file, command-line flags.
class RunConfig {
 public:
  /// Every accepted key with its built-in default. "lr" depends on the preset.
  static std::map<std::string, std::string> defaults(const std::string& preset) {
    const auto model = model_preset(preset);
    return {
        {"preset", preset},
        {"seed", "1"},
        {"manifest", ""},
        {"features", ""},
        {"checkpoint", ""},
        {"out", ""},
        {"task", "all"},
        // training
        {"margin", "0.2"},
        {"lr", model.is_text() ? "0.001" : "0.0002"},
        {"batch", "32"},
        {"epochs", "25"},
        {"clip_norm", "0"},
        {"early_stopping", "true"},
        {"val_split", "val"},
        // evaluation, activations, probes
        {"eval_split", "test"},
        {"probe_split", "val"},
        {"max_ms", "10000"},
        {"activations", ""},
        {"text_checkpoint", ""},
        {"words_dir", ""},
        {"lexicon", ""},
        {"similarity", ""},
        {"bootstrap", "10000"},
        {"ridge_alpha", "1"},
        {"folds", "10"},
        {"logreg_lambda", "1"},
        {"mlp_hidden", "1024"},
        {"mlp_epochs", "200"},
        // synthetic corpus
        {"n_utterances", "8"},
        {"vocab_size", "20"},
        {"homonym_pairs", "0"},
        {"homonym_count_a", "25"},
        {"homonym_count_b", "40"},
        {"min_words", "2"},
        {"max_words", "4"},
        {"image_dim", "64"},
        {"noise", "0"},
        {"val_fraction", "0"},
        {"test_fraction", "0"},
        {"similarity_pairs", "50"},
    };
  }

  /// Parses "key = value" lines; "#" starts a comment line.
  static std::map<std::string, std::string> parse_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file '" + path + "'");
    std::map<std::string, std::string> out;
    std::string line;
    for (std::size_t no = 1; std::getline(is, line); ++no) {
      const auto first = line.find_first_not_of(" \t\r");
      if (first == std::string::npos || line[first] == '#') continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw ConfigError(path + ":" + std::to_string(no) + ": expected 'key = value'");
      auto key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
      if (key.empty()) throw ConfigError(path + ":" + std::to_string(no) + ": empty key");
      out[key] = value;
    }
    return out;
  }

  static RunConfig resolve(const std::map<std::string, std::string>& file,
                           const std::map<std::string, std::string>& flags) {
    std::string preset = "flickr8k-speech";
    if (auto it = file.find("preset"); it != file.end()) preset = it->second;
    if (auto it = flags.find("preset"); it != flags.end()) preset = it->second;
    RunConfig rc;
    rc.values_ = defaults(preset);
    for (const auto* layer : {&file, &flags})
      for (const auto& [k, v] : *layer) {
        if (!rc.values_.count(k)) throw ConfigError("unknown config key '" + k + "'");
        rc.values_[k] = v;
      }
    rc.values_["preset"] = preset;
    return rc;
  }

  const std::string& str(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
    return it->second;
  }

  const std::string& required(const std::string& key) const {
    const auto& v = str(key);
    if (v.empty()) throw ConfigError("'" + key + "' is required for this command");
    return v;
  }

  double real(const std::string& key) const {
    const auto& v = str(key);
    try {
      std::size_t used = 0;
      const double d = std::stod(v, &used);
      if (used == v.size()) return d;
    } catch (const std::exception&) {
    }
    throw ConfigError("'" + key + "' expects a number, got '" + v + "'");
  }

  std::uint64_t count(const std::string& key) const {
    const auto& v = str(key);
    if (!v.empty() && v.find_first_not_of("0123456789") == std::string::npos) return std::stoull(v);
    throw ConfigError("'" + key + "' expects a non-negative integer, got '" + v + "'");
  }

  bool flag(const std::string& key) const {
    const auto& v = str(key);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("'" + key + "' expects true or false, got '" + v + "'");
  }

  /// Echo of every effective value, one "key = value" line each.
  void write(std::ostream& os) const {
    for (const auto& [k, v] : values_) os << k << " = " << v << '\n';
  }

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  static std::string trim(std::string s) {
    s.erase(0, s.find_first_not_of(" \t\r"));
    s.erase(s.find_last_not_of(" \t\r") + 1);
    return s;
  }

  std::map<std::string, std::string> values_;
};

}  // namespace gsr::cli
