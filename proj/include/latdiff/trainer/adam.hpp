#pragma once

#include "latdiff/core/params.hpp"

namespace latdiff {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  ParamSet m;
  ParamSet v;
  long t = 0;

  static AdamState like(const ParamSet& params) {
    return AdamState{params.zeros_like(), params.zeros_like(), 0};
  }
};

// One bias-corrected update. grads must share names/shapes with params.
void adam_step(ParamSet& params, const ParamSet& grads, AdamState& state,
               const AdamConfig& cfg);

}  // namespace latdiff
