#pragma once

#include <cstdint>
#include <optional>

#include "latdiff/core/params.hpp"
#include "latdiff/de/de_module.hpp"

namespace latdiff {

enum class BackboneKind { unet, bit };
enum class InputMode { post_only, full_concat };
enum class InjectMode { input_concat, bottleneck_concat };

struct BackboneArchConfig {
  int in_channels = 3;
  int base_width = 16;
  int depth = 3;             // unet levels; inputs must divide by 2^depth
  int token_count = 4;       // bit only
  int transformer_dim = 32;  // bit only
  int transformer_layers = 1;  // bit only
  InputMode input_mode = InputMode::post_only;
  // Latent channels the model is built to consume; 0 builds the no-injection
  // baseline. Only the first layer reading the concatenated channels changes
  // shape between the two variants.
  int z_channels = 0;
};

struct Prediction {
  Tensor<Real> logits;  // (H, W, 2)
};

struct BackboneParams {
  BackboneKind kind = BackboneKind::unet;
  ParamSet params;
  BackboneArchConfig arch;
};

BackboneParams init_backbone(BackboneKind kind, const BackboneArchConfig& arch,
                             std::uint64_t seed);

// Bilinear-resizes z to the feature map's spatial size and concatenates it
// channelwise; the original channels pass through bit-exactly.
Tensor<Real> inject(const Tensor<Real>& features, const LatentDifference& z,
                    InjectMode mode);
Var<Real> inject_g(const Var<Real>& features, const Var<Real>& z);

// Graph builders. pre/post are (H, W, C) leaves; z, when present, is a
// (h, w, c_z) leaf and must match arch.z_channels.
Var<Real> unet_forward_g(const VarSet& vs, const BackboneArchConfig& arch,
                         const Var<Real>& pre, const Var<Real>& post,
                         const Var<Real>* z);
Var<Real> bit_forward_g(const VarSet& vs, const BackboneArchConfig& arch,
                        const Var<Real>& pre, const Var<Real>& post,
                        const Var<Real>* z);

Prediction unet_forward(const BackboneParams& params, const ImagePlane& pre,
                        const ImagePlane& post,
                        const std::optional<LatentDifference>& z);
Prediction bit_forward(const BackboneParams& params, const ImagePlane& pre,
                       const ImagePlane& post,
                       const std::optional<LatentDifference>& z);

// Dispatches on params.kind.
Prediction backbone_forward(const BackboneParams& params,
                            const ImagePlane& pre, const ImagePlane& post,
                            const std::optional<LatentDifference>& z);

// Per-pixel argmax; ties go to class 0 (no-change).
ChangeMask predict_mask(const Prediction& p);

}  // namespace latdiff
