#pragma once

#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "latdiff/core/autodiff.hpp"

namespace latdiff {

// Ordered, named tensor collection. Order is insertion order and is part of
// a model's contract: optimizers, checkpoints, and finite-difference loops
// all walk it identically.
template <typename Scalar>
struct ParamSetT {
  std::vector<std::pair<std::string, Tensor<Scalar>>> items;
  std::unordered_map<std::string, std::size_t> index;

  Tensor<Scalar>& add(const std::string& name, Tensor<Scalar> t) {
    if (index.count(name))
      fail(ErrorKind::UnknownKey, "parameter added twice: " + name);
    index.emplace(name, items.size());
    items.emplace_back(name, std::move(t));
    return items.back().second;
  }

  bool has(const std::string& name) const { return index.count(name) != 0; }

  Tensor<Scalar>& at(const std::string& name) {
    auto it = index.find(name);
    if (it == index.end())
      fail(ErrorKind::UnknownKey, "unknown parameter: " + name);
    return items[it->second].second;
  }
  const Tensor<Scalar>& at(const std::string& name) const {
    auto it = index.find(name);
    if (it == index.end())
      fail(ErrorKind::UnknownKey, "unknown parameter: " + name);
    return items[it->second].second;
  }

  std::size_t size() const { return items.size(); }

  std::size_t value_count() const {
    std::size_t n = 0;
    for (const auto& [k, v] : items) n += static_cast<std::size_t>(v.size());
    return n;
  }

  bool all_finite() const {
    for (const auto& [k, v] : items)
      if (!v.all_finite()) return false;
    return true;
  }

  ParamSetT zeros_like() const {
    ParamSetT z;
    for (const auto& [k, v] : items) z.add(k, Tensor<Scalar>::zeros(v.dims));
    return z;
  }

  void require_same_names(const ParamSetT& other, const char* what) const {
    if (items.size() != other.items.size())
      fail(ErrorKind::ShapeMismatch, std::string(what) + ": parameter count");
    for (std::size_t i = 0; i < items.size(); ++i) {
      if (items[i].first != other.items[i].first)
        fail(ErrorKind::ShapeMismatch,
             std::string(what) + ": parameter order differs at " +
                 items[i].first);
      require_same_shape(items[i].second, other.items[i].second, what);
    }
  }
};

using ParamSet = ParamSetT<Real>;

// Parameters lifted onto the tape for one forward/backward pass.
template <typename Scalar>
struct VarSetT {
  std::vector<std::pair<std::string, Var<Scalar>>> items;
  std::unordered_map<std::string, std::size_t> index;

  static VarSetT lift(const ParamSetT<Scalar>& params, bool requires_grad) {
    VarSetT vs;
    for (const auto& [k, v] : params.items) {
      vs.index.emplace(k, vs.items.size());
      vs.items.emplace_back(k, make_leaf(v, requires_grad));
    }
    return vs;
  }

  const Var<Scalar>& at(const std::string& name) const {
    auto it = index.find(name);
    if (it == index.end())
      fail(ErrorKind::UnknownKey, "unknown parameter var: " + name);
    return items[it->second].second;
  }

  // Accumulated gradients in parameter order; zero tensors for parameters the
  // graph never touched.
  ParamSetT<Scalar> grads() const {
    ParamSetT<Scalar> g;
    for (const auto& [k, v] : items)
      g.add(k, v->grad_allocated ? v->grad : Tensor<Scalar>::zeros(v->value.dims));
    return g;
  }
};

using VarSet = VarSetT<Real>;

}  // namespace latdiff
