#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace gsr {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class ModelKind { Speech, Text };

/// Architecture hyperparameters for either encoder variant.
struct ModelConfig {
  std::string name = "custom";
  ModelKind kind = ModelKind::Speech;
  std::size_t input_dim = 13;     ///< acoustic feature dims (speech)
  std::size_t conv_length = 6;    ///< s
  std::size_t conv_size = 64;     ///< d
  std::size_t conv_stride = 2;    ///< z
  std::size_t rhn_layers = 4;     ///< k
  std::size_t microsteps = 2;     ///< L
  std::size_t hidden = 1024;
  std::size_t attn_hidden = 128;
  std::size_t embed_dim = 300;    ///< text
  std::size_t vocab_size = 0;     ///< text; id 0 is the unknown word
  std::size_t image_dim = 4096;
  bool residual = true;

  bool is_text() const { return kind == ModelKind::Text; }

  /// Width of the sequence entering the first RHN layer.
  std::size_t stack_input_dim() const { return is_text() ? embed_dim : conv_size; }

  /// Residual connections only join layers of equal width.
  bool layer_is_residual(std::size_t layer) const {
    const std::size_t in = layer == 0 ? stack_input_dim() : hidden;
    return residual && in == hidden;
  }

  void validate() const {
    auto positive = [](std::size_t v, const char* what) {
      if (v < 1) throw ConfigError(std::string("model config: ") + what + " must be >= 1");
    };
    positive(rhn_layers, "rhn_layers");
    positive(microsteps, "microsteps");
    positive(hidden, "hidden");
    positive(image_dim, "image_dim");
    if (is_text()) {
      positive(embed_dim, "embed_dim");
      positive(vocab_size, "vocab_size");
    } else {
      positive(input_dim, "input_dim");
      positive(conv_length, "conv_length");
      positive(conv_size, "conv_size");
      positive(conv_stride, "conv_stride");
      positive(attn_hidden, "attn_hidden");
    }
  }
};

inline std::vector<std::string> model_preset_names() {
  return {"flickr8k-speech", "coco-speech", "flickr8k-text", "coco-text", "micro"};
}

/// Published settings of the four reference models, plus a desk-sized "micro"
/// speech configuration used for gradient checks and overfit runs.
inline ModelConfig model_preset(const std::string& name) {
  ModelConfig c;
  c.name = name;
  if (name == "flickr8k-speech") {
    c.input_dim = 37;
    c.conv_length = 6, c.conv_size = 64, c.conv_stride = 2;
    c.rhn_layers = 4, c.microsteps = 2, c.hidden = 1024, c.attn_hidden = 128;
  } else if (name == "coco-speech") {
    c.input_dim = 13;
    c.conv_length = 6, c.conv_size = 64, c.conv_stride = 3;
    c.rhn_layers = 5, c.microsteps = 2, c.hidden = 512, c.attn_hidden = 512;
  } else if (name == "flickr8k-text" || name == "coco-text") {
    c.kind = ModelKind::Text;
    c.embed_dim = 300, c.rhn_layers = 1, c.microsteps = 1, c.hidden = 1024;
  } else if (name == "micro") {
    c.input_dim = 13;
    c.conv_length = 2, c.conv_size = 4, c.conv_stride = 1;
    c.rhn_layers = 2, c.microsteps = 2, c.hidden = 8, c.attn_hidden = 8;
    c.image_dim = 64;
  } else {
    throw ConfigError("unknown preset '" + name + "'");
  }
  return c;
}

}  // namespace gsr
