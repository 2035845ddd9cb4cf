#pragma once

#include <cstddef>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "gsr/numcore/graph.hpp"
#include "gsr/numcore/tensor.hpp"

namespace gsr {

/// Insertion-ordered collection of named tensors. Used for model parameters,
/// their gradients, feature archives and activation archives.
template <class T>
class NamedTensors {
 public:
  using Entry = std::pair<std::string, Tensor<T>>;

  Tensor<T>& add(const std::string& name, Tensor<T> value) {
    if (index_.count(name)) throw std::invalid_argument("duplicate tensor name: " + name);
    index_.emplace(name, entries_.size());
    entries_.emplace_back(name, std::move(value));
    return entries_.back().second;
  }

  /// Adds or overwrites.
  Tensor<T>& set(const std::string& name, Tensor<T> value) {
    auto it = index_.find(name);
    if (it == index_.end()) return add(name, std::move(value));
    return entries_[it->second].second = std::move(value);
  }

  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  Tensor<T>& at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("no tensor named '" + name + "'");
    return entries_[it->second].second;
  }
  const Tensor<T>& at(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("no tensor named '" + name + "'");
    return entries_[it->second].second;
  }

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }
  Entry& entry(std::size_t i) { return entries_[i]; }
  const Entry& entry(std::size_t i) const { return entries_[i]; }

  std::size_t numel() const {
    std::size_t n = 0;
    for (const auto& [_, t] : entries_) n += t.size();
    return n;
  }

  template <class U>
  NamedTensors<U> cast() const {
    NamedTensors<U> out;
    for (const auto& [name, t] : entries_) out.add(name, t.template cast<U>());
    return out;
  }

  /// Same names in the same order, every value zero.
  NamedTensors zeros_like() const {
    NamedTensors out;
    for (const auto& [name, t] : entries_) out.add(name, Tensor<T>(t.shape()));
    return out;
  }

  friend bool operator==(const NamedTensors& a, const NamedTensors& b) { return a.entries_ == b.entries_; }

 private:
  std::vector<Entry> entries_;
  std::map<std::string, std::size_t> index_;
};

template <class T>
using ParamSet = NamedTensors<T>;

/// Registers every parameter as a leaf of `graph` for one forward/backward pass.
template <class T>
class BoundParams {
 public:
  BoundParams(Graph<T>& graph, const ParamSet<T>& params, bool requires_grad = true) : params_(&params) {
    vars_.reserve(params.size());
    for (const auto& [name, t] : params) {
      index_.emplace(name, vars_.size());
      vars_.push_back(requires_grad ? graph.variable(t) : graph.constant(t));
    }
  }

  Var<T> operator[](const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("parameter '" + name + "' is not bound");
    return vars_[it->second];
  }
  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  /// Gradients after Graph::backward, in parameter order.
  ParamSet<T> gradients() const {
    ParamSet<T> out;
    std::size_t i = 0;
    for (const auto& [name, _] : *params_) out.add(name, vars_[i++].grad());
    return out;
  }

  const std::vector<Var<T>>& vars() const { return vars_; }

 private:
  const ParamSet<T>* params_;
  std::vector<Var<T>> vars_;
  std::map<std::string, std::size_t> index_;
};

}  // namespace gsr
