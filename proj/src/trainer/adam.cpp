#include <cmath>

#include "latdiff/trainer/adam.hpp"

namespace latdiff {

void adam_step(ParamSet& params, const ParamSet& grads, AdamState& state,
               const AdamConfig& cfg) {
  params.require_same_names(grads, "adam_step grads");
  params.require_same_names(state.m, "adam_step state");
  state.t += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.items.size(); ++i) {
    auto& p = params.items[i].second.data;
    const auto& g = grads.items[i].second.data;
    auto& m = state.m.items[i].second.data;
    auto& v = state.v.items[i].second.data;
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.square();
    p -= cfg.lr * (m / bc1) / ((v / bc2).sqrt() + cfg.eps);
  }
}

}  // namespace latdiff
