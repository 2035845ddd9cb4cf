#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "gsr/numcore/container.hpp"

namespace gsr {

class ManifestParseError : public std::runtime_error {
 public:
  ManifestParseError(const std::string& path, std::size_t line, const std::string& what)
      : std::runtime_error(path + ":" + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class MissingResourceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Split { Train, Val, Test };

inline const char* split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "?";
}

inline bool parse_split(const std::string& s, Split& out) {
  if (s == "train") out = Split::Train;
  else if (s == "val") out = Split::Val;
  else if (s == "test") out = Split::Test;
  else return false;
  return true;
}

/// One utterance-image pairing. `audio` is a WAV path relative to the manifest
/// directory or "-" when features come from elsewhere. `image_vec` is
/// "<container path>#<entry name>", also relative.
struct ManifestRecord {
  std::string utt_id;
  std::string audio;
  std::vector<std::string> transcript;
  std::string image_id;
  std::string image_vec;
  Split split = Split::Train;

  bool operator==(const ManifestRecord&) const = default;
};

inline std::vector<std::string> split_words(const std::string& s) {
  std::istringstream is(s);
  std::vector<std::string> out;
  for (std::string w; is >> w;) out.push_back(w);
  return out;
}

inline std::string join_words(const std::vector<std::string>& words) {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

struct ImageRef {
  std::filesystem::path file;
  std::string entry;
};

inline ImageRef parse_image_ref(const std::string& ref, const std::filesystem::path& base) {
  const auto hash = ref.rfind('#');
  if (hash == std::string::npos || hash == 0 || hash + 1 == ref.size())
    throw std::invalid_argument("image reference '" + ref + "' is not of the form file#entry");
  return {base / ref.substr(0, hash), ref.substr(hash + 1)};
}

/// Caches image containers so each file is read once.
class ImageStore {
 public:
  explicit ImageStore(std::filesystem::path base) : base_(std::move(base)) {}

  const Tensor<float>* find(const std::string& ref) {
    const auto r = parse_image_ref(ref, base_);
    const auto key = r.file.string();
    auto it = files_.find(key);
    if (it == files_.end()) {
      if (!std::filesystem::exists(r.file)) return nullptr;
      it = files_.emplace(key, load_container(key)).first;
    }
    return it->second.contains(r.entry) ? &it->second.at(r.entry) : nullptr;
  }

  const Tensor<float>& at(const std::string& ref) {
    const auto* t = find(ref);
    if (!t) throw MissingResourceError("image vector '" + ref + "' not found under " + base_.string());
    return *t;
  }

 private:
  std::filesystem::path base_;
  std::map<std::string, NamedTensors<float>> files_;
};

inline constexpr const char* kManifestHeader = "# utt_id\taudio\ttranscript\timage_id\timage_vec\tsplit";

inline void save_manifest(const std::string& path, const std::vector<ManifestRecord>& records) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write manifest '" + path + "'");
  os << kManifestHeader << '\n';
  for (const auto& r : records)
    os << r.utt_id << '\t' << r.audio << '\t' << join_words(r.transcript) << '\t' << r.image_id << '\t'
       << r.image_vec << '\t' << split_name(r.split) << '\n';
}

/// Parses a tab-separated manifest. With `check_resources`, every audio file and
/// image vector must exist.
inline std::vector<ManifestRecord> load_manifest(const std::string& path, bool check_resources = true) {
  std::ifstream is(path);
  if (!is) throw MissingResourceError("cannot open manifest '" + path + "'");
  const auto base = std::filesystem::path(path).parent_path();
  ImageStore images(base);
  std::vector<ManifestRecord> out;
  std::set<std::string> seen;
  std::string line;
  for (std::size_t no = 1; std::getline(is, line); ++no) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    std::vector<std::string> f;
    std::size_t start = 0;
    for (std::size_t tab; (tab = line.find('\t', start)) != std::string::npos; start = tab + 1)
      f.push_back(line.substr(start, tab - start));
    f.push_back(line.substr(start));
    if (f.size() != 6) throw ManifestParseError(path, no, "expected 6 tab-separated fields, got " + std::to_string(f.size()));
    ManifestRecord r;
    r.utt_id = f[0], r.audio = f[1], r.transcript = split_words(f[2]), r.image_id = f[3], r.image_vec = f[4];
    if (r.utt_id.empty()) throw ManifestParseError(path, no, "empty utt_id");
    if (!parse_split(f[5], r.split)) throw ManifestParseError(path, no, "invalid split '" + f[5] + "'");
    if (!seen.insert(r.utt_id).second) throw ManifestParseError(path, no, "duplicate utt_id '" + r.utt_id + "'");
    if (check_resources) {
      if (r.audio != "-" && !std::filesystem::exists(base / r.audio))
        throw MissingResourceError(path + ":" + std::to_string(no) + ": audio '" + r.audio + "' not found");
      try {
        if (!images.find(r.image_vec))
          throw MissingResourceError(path + ":" + std::to_string(no) + ": image vector '" + r.image_vec + "' not found");
      } catch (const std::invalid_argument& e) {
        throw ManifestParseError(path, no, e.what());
      }
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace gsr
