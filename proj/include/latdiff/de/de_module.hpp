#pragma once

#include <cstdint>

#include "latdiff/core/params.hpp"
#include "latdiff/dataio/image.hpp"

namespace latdiff {

// Difference-embedding module: a dual-branch encoder producing a spatial
// latent Z at 1/4 resolution, a decoder reconstructing the post image from
// (pre, Z), and an unconditional adversarial decoder reading Z alone.

struct DEArchConfig {
  int in_channels = 3;
  int c_z = 16;
  int base_width = 32;
  int image_size = 64;  // expected H = W, divisible by 4
};

void validate_arch(const DEArchConfig& arch);

struct LatentDifference {
  Tensor<Real> data;  // (H/4, W/4, c_z)
};

struct DEParams {
  ParamSet encoder_params;
  ParamSet decoder_params;
  ParamSet adversary_params;
  DEArchConfig arch;
};

// Fan-in-scaled uniform weights (U(-s, s), s = 1/sqrt(fan_in)), zero biases.
// Same (arch, seed) gives bitwise-identical parameters.
DEParams init_de(const DEArchConfig& arch, std::uint64_t seed);

// Graph builders, used by trainers to assemble differentiable objectives.
// The encoder's change branch consumes (post - pre), the context branch
// consumes pre; branch features are concatenated and fused by a linear 1x1
// conv down to c_z channels.
Var<Real> encode_g(const VarSet& enc, const DEArchConfig& arch,
                   const Var<Real>& pre, const Var<Real>& post);
// Pre is encoded to 1/4 resolution, concatenated with Z, and decoded by the
// three-layer transposed-conv stack back to image shape.
Var<Real> decode_conditional_g(const VarSet& dec, const DEArchConfig& arch,
                               const Var<Real>& pre, const Var<Real>& z);
// Mirrors the conditional decoder's transposed-conv stack with no pre path.
Var<Real> decode_adversarial_g(const VarSet& adv, const DEArchConfig& arch,
                               const Var<Real>& z);

// Forward contracts over plain tensors.
LatentDifference encode(const DEParams& params, const ImagePlane& pre,
                        const ImagePlane& post);
ImagePlane decode_conditional(const DEParams& params, const ImagePlane& pre,
                              const LatentDifference& z);
ImagePlane decode_adversarial(const DEParams& params,
                              const LatentDifference& z);

}  // namespace latdiff
