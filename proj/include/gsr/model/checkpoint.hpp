#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>

#include "gsr/model/params.hpp"
#include "gsr/model/vocabulary.hpp"
#include "gsr/numcore/container.hpp"

namespace gsr {

struct Checkpoint {
  ModelConfig cfg;
  ParamSet<float> params;
  std::optional<Vocabulary> vocab;  ///< text models only
};

/// Parameters go to `path`; shapes fix the architecture. The "<path>.cfg"
/// sidecar holds what shapes cannot: preset name, conv stride and the residual
/// flag. Text models add "<path>.vocab".
inline void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  save_container(path, ck.params);
  std::ofstream os(path + ".cfg");
  if (!os) throw std::runtime_error("cannot write '" + path + ".cfg'");
  os << "name = " << ck.cfg.name << "\nconv_stride = " << ck.cfg.conv_stride
     << "\nresidual = " << (ck.cfg.residual ? "true" : "false") << '\n';
  if (ck.cfg.is_text()) {
    if (!ck.vocab) throw ConfigError("text checkpoint needs a vocabulary");
    ck.vocab->save(path + ".vocab");
  }
}

inline Checkpoint load_checkpoint(const std::string& path) {
  if (!std::filesystem::exists(path)) throw std::runtime_error("checkpoint '" + path + "' not found");
  Checkpoint ck;
  ck.params = load_container(path);
  std::string name = "checkpoint";
  std::size_t stride = 1;
  bool residual = true;
  std::ifstream is(path + ".cfg");
  if (!is) throw std::runtime_error("checkpoint sidecar '" + path + ".cfg' not found");
  for (std::string line; std::getline(is, line);) {
    const auto eq = line.find('=');
    if (line.empty() || eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      s.erase(0, s.find_first_not_of(" \t"));
      s.erase(s.find_last_not_of(" \t") + 1);
      return s;
    };
    const auto key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    if (key == "name") name = value;
    else if (key == "conv_stride") stride = std::stoul(value);
    else if (key == "residual") residual = value == "true";
    else throw FormatError("checkpoint sidecar: unknown key '" + key + "'");
  }
  ck.cfg = infer_config(ck.params, stride, residual);
  ck.cfg.name = name;
  if (ck.cfg.is_text()) {
    ck.vocab = Vocabulary::load(path + ".vocab");
    if (ck.vocab->size() != ck.cfg.vocab_size)
      throw FormatError("checkpoint vocabulary has " + std::to_string(ck.vocab->size()) + " words, embedding has " +
                        std::to_string(ck.cfg.vocab_size) + " rows");
  }
  return ck;
}

}  // namespace gsr
