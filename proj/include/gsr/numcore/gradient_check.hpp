#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "gsr/numcore/graph.hpp"
#include "gsr/numcore/named_tensors.hpp"

namespace gsr {

class NumericFault : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_entry = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t entries_checked = 0;
  bool passed = false;
};

struct GradCheckOptions {
  double step = 1e-3;
  double tolerance = 1e-4;
  /// Denominator floor: |a - n| / max(|a|, |n|, scale_floor). Entries whose true
  /// gradient is below the floor are held to an absolute tolerance of tol * floor.
  double scale_floor = 1e-2;
};

/// Compares reverse-mode gradients with central differences
/// (f(theta + h) - f(theta - h)) / 2h for every entry of every parameter.
/// `f(graph, bound)` must build a scalar from the bound parameters deterministically.
template <class F>
GradCheckReport gradient_check(F&& f, ParamSet<double>& params, GradCheckOptions opt = {}) {
  auto evaluate = [&](bool with_grad, ParamSet<double>* grads) {
    Graph<double> g;
    BoundParams<double> bound(g, params, with_grad);
    Var<double> out = f(g, bound);
    if (out.size() != 1) throw std::invalid_argument("gradient_check: objective must be scalar");
    const double v = out.item();
    if (with_grad) {
      g.backward(out);
      *grads = bound.gradients();
    }
    return v;
  };

  ParamSet<double> analytic;
  const double base = evaluate(true, &analytic);
  if (!std::isfinite(base)) throw NumericFault("gradient_check: objective is not finite at the base point");

  GradCheckReport report;
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto& [name, tensor] = params.entry(p);
    const auto& ga = analytic.at(name);
    for (std::size_t e = 0; e < tensor.size(); ++e) {
      const double saved = tensor[e];
      tensor[e] = saved + opt.step;
      const double up = evaluate(false, nullptr);
      tensor[e] = saved - opt.step;
      const double down = evaluate(false, nullptr);
      tensor[e] = saved;
      if (!std::isfinite(up) || !std::isfinite(down) || !std::isfinite(ga[e]))
        throw NumericFault("gradient_check: non-finite value at " + name + "[" + std::to_string(e) + "]");
      const double numeric = (up - down) / (2.0 * opt.step);
      const double denom = std::max({std::abs(ga[e]), std::abs(numeric), opt.scale_floor});
      const double rel = std::abs(ga[e] - numeric) / denom;
      ++report.entries_checked;
      if (rel >= report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst_param = name;
        report.worst_entry = e;
        report.worst_analytic = ga[e];
        report.worst_numeric = numeric;
      }
    }
  }
  report.passed = report.max_rel_error <= opt.tolerance;
  return report;
}

}  // namespace gsr
