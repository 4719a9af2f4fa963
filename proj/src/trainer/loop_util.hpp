#pragma once

// Internal batching/graph helpers shared by the training loops.

#include <cmath>
#include <numeric>
#include <utility>
#include <vector>

#include "latdiff/core/autodiff.hpp"
#include "latdiff/core/rng.hpp"

namespace latdiff::loop {

inline std::vector<std::size_t> shuffled_indices(std::size_t n, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<int>(i) - 1));
    std::swap(idx[i - 1], idx[j]);
  }
  return idx;
}

inline std::vector<std::pair<std::size_t, std::size_t>> batch_ranges(
    std::size_t n, int batch_size) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  const auto b = static_cast<std::size_t>(batch_size);
  for (std::size_t lo = 0; lo < n; lo += b)
    out.emplace_back(lo, std::min(n, lo + b));
  return out;
}

inline Var<Real> mean_of(const std::vector<Var<Real>>& terms) {
  Var<Real> acc = terms[0];
  for (std::size_t i = 1; i < terms.size(); ++i) acc = add(acc, terms[i]);
  return scale(acc, Real(1) / static_cast<Real>(terms.size()));
}

inline void require_finite_loss(double v, const char* what, int epoch,
                                std::size_t batch) {
  if (!std::isfinite(v))
    fail(ErrorKind::NonFiniteLoss,
         std::string(what) + " became non-finite at epoch " +
             std::to_string(epoch) + ", batch " + std::to_string(batch));
}

}  // namespace latdiff::loop
