#pragma once

#include <cstdint>
#include <functional>

#include "latdiff/core/params.hpp"

namespace latdiff {

// Scalar objective over a parameter collection. When grads is non-null the
// function must also write analytic gradients for every parameter.
using ScalarFn = std::function<double(const ParamSet&, ParamSet* grads)>;

// Compares analytic partials against central differences
// (f(p+eps) - f(p-eps)) / (2 eps) at n_probes randomly chosen scalar
// coordinates; returns max |a - n| / max(|a|, |n|, gmax, 1e-8) where gmax is
// the largest analytic partial anywhere. Coordinates far below gmax are thus
// held to absolute agreement at the gradient's own scale, which is the
// strongest claim finite differences can certify. Perturbs a private copy of
// params. Throws NonFiniteGradient if any probe is non-finite.
double grad_check(const ScalarFn& fn, const ParamSet& params, double epsilon,
                  int n_probes, std::uint64_t seed = 0);

}  // namespace latdiff
