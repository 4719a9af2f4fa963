#pragma once

#include <cstdint>
#include <vector>

#include "latdiff/de/de_module.hpp"

namespace latdiff {

// Disentanglement diagnostic: ridge-regresses the nuisance label from
// spatially mean-pooled Z (one feature per latent channel) on a 70/30 split
// and returns held-out MSE. High error means the nuisance factor is absent
// from Z. Ridge 1e-3, closed form; deterministic given seed. Throws
// TooFewSamples below 20 pairs.
double nuisance_probe(const std::vector<LatentDifference>& latents,
                      const std::vector<double>& nuisance_labels,
                      std::uint64_t seed);

}  // namespace latdiff
