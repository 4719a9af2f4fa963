#include "latdiff/backbones/backbone.hpp"
#include "latdiff/core/conv.hpp"

namespace latdiff {

namespace backbone_detail {
ParamSet make_unet_params(const BackboneArchConfig& arch, std::uint64_t seed);
ParamSet make_bit_params(const BackboneArchConfig& arch, std::uint64_t seed);
}  // namespace backbone_detail

Var<Real> inject_g(const Var<Real>& features, const Var<Real>& z) {
  const auto& fd = features->value.dims;
  if (fd.size() != 3 || z->value.dims.size() != 3)
    fail(ErrorKind::ShapeMismatch, "inject: rank-3 tensors required");
  Var<Real> zr = resize_bilinear(z, fd[0], fd[1]);
  return concat_channels(features, zr);
}

Tensor<Real> inject(const Tensor<Real>& features, const LatentDifference& z,
                    InjectMode mode) {
  (void)mode;  // both modes share the resize-and-concat mechanics
  return inject_g(constant(features), constant(z.data))->value;
}

BackboneParams init_backbone(BackboneKind kind, const BackboneArchConfig& arch,
                             std::uint64_t seed) {
  if (arch.in_channels < 1 || arch.base_width < 1 || arch.depth < 1 ||
      arch.token_count < 1 || arch.transformer_dim < 1 ||
      arch.transformer_layers < 1 || arch.z_channels < 0)
    fail(ErrorKind::InvalidArch, "backbone arch counts out of range");
  BackboneParams p;
  p.kind = kind;
  p.arch = arch;
  p.params = kind == BackboneKind::unet
                 ? backbone_detail::make_unet_params(arch, seed)
                 : backbone_detail::make_bit_params(arch, seed);
  return p;
}

Prediction backbone_forward(const BackboneParams& params,
                            const ImagePlane& pre, const ImagePlane& post,
                            const std::optional<LatentDifference>& z) {
  return params.kind == BackboneKind::unet ? unet_forward(params, pre, post, z)
                                           : bit_forward(params, pre, post, z);
}

ChangeMask predict_mask(const Prediction& p) {
  const auto& d = p.logits.dims;
  if (d.size() != 3 || d[2] != 2)
    fail(ErrorKind::ShapeMismatch, "predict_mask: logits must be (H,W,2)");
  if (!p.logits.all_finite())
    fail(ErrorKind::ShapeMismatch, "predict_mask: non-finite logits");
  ChangeMask m = make_mask(d[0], d[1]);
  for (std::size_t i = 0; i < m.data.size(); ++i) {
    const Real l0 = p.logits.data[static_cast<Eigen::Index>(2 * i)];
    const Real l1 = p.logits.data[static_cast<Eigen::Index>(2 * i + 1)];
    m.data[i] = l1 > l0 ? 1 : 0;  // tie goes to no-change
  }
  return m;
}

}  // namespace latdiff
