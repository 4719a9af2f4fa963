#pragma once

#include <cmath>
#include <string>

#include "latdiff/core/params.hpp"
#include "latdiff/core/rng.hpp"

namespace latdiff {

// Fan-in-scaled uniform initialization: weights U(-s, s) with
// s = 1/sqrt(fan_in); biases zero; normalization gains one.

inline void add_conv_param(ParamSet& ps, Rng& rng, const std::string& name,
                           int k, int ci, int co) {
  const double s = 1.0 / std::sqrt(static_cast<double>(k) * k * ci);
  Tensor<Real> w = Tensor<Real>::zeros({k, k, ci, co});
  for (Eigen::Index i = 0; i < w.data.size(); ++i)
    w.data[i] = static_cast<Real>(rng.uniform(-s, s));
  ps.add(name + ".w", std::move(w));
  ps.add(name + ".b", Tensor<Real>::zeros({co}));
}

inline void add_matrix_param(ParamSet& ps, Rng& rng, const std::string& name,
                             int rows, int cols) {
  const double s = 1.0 / std::sqrt(static_cast<double>(rows));
  Tensor<Real> w = Tensor<Real>::zeros({rows, cols});
  for (Eigen::Index i = 0; i < w.data.size(); ++i)
    w.data[i] = static_cast<Real>(rng.uniform(-s, s));
  ps.add(name, std::move(w));
}

inline void add_const_param(ParamSet& ps, const std::string& name,
                            std::vector<int> dims, Real value) {
  ps.add(name, Tensor<Real>::full(std::move(dims), value));
}

}  // namespace latdiff
