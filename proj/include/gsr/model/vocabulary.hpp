#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace gsr {

/// Word <-> id mapping for the text encoder. Id 0 is reserved for unknown words.
class Vocabulary {
 public:
  static constexpr std::size_t kUnknown = 0;
  static constexpr const char* kUnknownToken = "<unk>";

  Vocabulary() { words_.push_back(kUnknownToken); }

  /// Every distinct word of the transcripts, in order of first appearance.
  static Vocabulary build(const std::vector<std::vector<std::string>>& transcripts) {
    Vocabulary v;
    for (const auto& t : transcripts)
      for (const auto& w : t) v.add(w);
    return v;
  }

  std::size_t add(const std::string& word) {
    auto it = ids_.find(word);
    if (it != ids_.end()) return it->second;
    ids_.emplace(word, words_.size());
    words_.push_back(word);
    return words_.size() - 1;
  }

  std::size_t id(const std::string& word) const {
    auto it = ids_.find(word);
    return it == ids_.end() ? kUnknown : it->second;
  }

  std::vector<std::size_t> encode(const std::vector<std::string>& words) const {
    std::vector<std::size_t> out;
    out.reserve(words.size());
    for (const auto& w : words) out.push_back(id(w));
    return out;
  }

  const std::string& word(std::size_t id) const { return words_.at(id); }
  std::size_t size() const { return words_.size(); }

  void save(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write vocabulary '" + path + "'");
    for (std::size_t i = 1; i < words_.size(); ++i) os << words_[i] << '\n';
  }

  static Vocabulary load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot read vocabulary '" + path + "'");
    Vocabulary v;
    std::string line;
    while (std::getline(is, line))
      if (!line.empty()) v.add(line);
    return v;
  }

 private:
  std::vector<std::string> words_;
  std::map<std::string, std::size_t> ids_;
};

}  // namespace gsr
