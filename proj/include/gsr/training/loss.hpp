#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "gsr/numcore/ops.hpp"

namespace gsr {

class NoNegativesError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct LossConfig {
  double margin = 0.2;

  void validate() const {
    if (!(margin > 0)) throw std::invalid_argument("loss config: margin must be > 0");
  }
};

/// Sum over matched pairs (u_j, i_j) of
///   sum_{k != j} max(0, m + d(u_j, i_j) - d(u_k, i_j)) + max(0, m + d(u_j, i_j) - d(u_j, i_k))
/// with d = 1 - dot. Inputs must be unit norm; row j of U matches row j of I.
template <class T>
Var<T> contrastive_loss(const std::vector<Var<T>>& U, const std::vector<Var<T>>& I, const LossConfig& cfg = {}) {
  cfg.validate();
  if (U.size() != I.size())
    throw DimensionError("contrastive_loss: " + std::to_string(U.size()) + " utterances but " +
                         std::to_string(I.size()) + " images");
  if (U.size() < 2) throw NoNegativesError("contrastive_loss: a batch needs at least 2 pairs");
  return contrastive_hinge(matmul_abt(stack_rows(U), stack_rows(I)), T(cfg.margin));
}

}  // namespace gsr
