#include "latdiff/backbones/backbone.hpp"
#include "latdiff/core/conv.hpp"
#include "latdiff/core/init.hpp"

namespace latdiff {

namespace {

int stem_channels(const BackboneArchConfig& arch) {
  const int per_image = arch.in_channels;
  return per_image * (arch.input_mode == InputMode::full_concat ? 2 : 1) +
         arch.z_channels;
}

void check_inputs(const BackboneArchConfig& arch, const Tensor<Real>& pre,
                  const Tensor<Real>& post, const Var<Real>* z,
                  int down_factor) {
  if (pre.dims != post.dims)
    fail(ErrorKind::ShapeMismatch, "backbone: pre " + pre.shape_str() +
                                       " vs post " + post.shape_str());
  if (post.dims.size() != 3 || post.dims[2] != arch.in_channels)
    fail(ErrorKind::ShapeMismatch,
         "backbone: input " + post.shape_str() + " vs in_channels " +
             std::to_string(arch.in_channels));
  if (post.dims[0] % down_factor != 0 || post.dims[1] % down_factor != 0)
    fail(ErrorKind::ShapeMismatch,
         "backbone: input " + post.shape_str() + " not divisible by " +
             std::to_string(down_factor));
  if (z && arch.z_channels == 0)
    fail(ErrorKind::ModeMismatch,
         "backbone built without injection cannot accept a latent");
  if (!z && arch.z_channels > 0)
    fail(ErrorKind::ModeMismatch,
         "backbone built for injection requires a latent");
  if (z && (*z)->value.dims.size() == 3 &&
      (*z)->value.dims[2] != arch.z_channels)
    fail(ErrorKind::ShapeMismatch,
         "backbone: latent channels " +
             std::to_string((*z)->value.dims[2]) + " vs arch z_channels " +
             std::to_string(arch.z_channels));
}

}  // namespace

namespace backbone_detail {

ParamSet make_unet_params(const BackboneArchConfig& arch, std::uint64_t seed) {
  ParamSet ps;
  Rng rng = Rng::derived(seed, 10);
  const int bw = arch.base_width;
  auto width = [bw](int level) { return bw << level; };
  add_conv_param(ps, rng, "unet.stem", 3, stem_channels(arch), width(0));
  for (int i = 1; i <= arch.depth; ++i) {
    const std::string d = "unet.d" + std::to_string(i);
    add_conv_param(ps, rng, d + ".c1", 3, width(i - 1), width(i));
    add_conv_param(ps, rng, d + ".c2", 3, width(i), width(i));
  }
  for (int i = arch.depth; i >= 1; --i) {
    const std::string u = "unet.u" + std::to_string(i);
    add_conv_param(ps, rng, u + ".t", 4, width(i), width(i - 1));
    add_conv_param(ps, rng, u + ".c", 3, 2 * width(i - 1), width(i - 1));
  }
  add_conv_param(ps, rng, "unet.head", 1, width(0), 2);
  return ps;
}

}  // namespace backbone_detail

Var<Real> unet_forward_g(const VarSet& vs, const BackboneArchConfig& arch,
                         const Var<Real>& pre, const Var<Real>& post,
                         const Var<Real>* z) {
  check_inputs(arch, pre->value, post->value, z, 1 << arch.depth);

  Var<Real> x = arch.input_mode == InputMode::full_concat
                    ? concat_channels(pre, post)
                    : post;
  if (z) x = inject_g(x, *z);

  auto conv_relu = [&vs](const std::string& name, const Var<Real>& in,
                         int stride) {
    return relu(conv2d(in, vs.at(name + ".w"), vs.at(name + ".b"), stride, 1));
  };

  std::vector<Var<Real>> skips;
  skips.push_back(conv_relu("unet.stem", x, 1));
  for (int i = 1; i <= arch.depth; ++i) {
    const std::string d = "unet.d" + std::to_string(i);
    Var<Real> h = conv_relu(d + ".c1", skips.back(), 2);
    skips.push_back(conv_relu(d + ".c2", h, 1));
  }

  Var<Real> u = skips.back();
  for (int i = arch.depth; i >= 1; --i) {
    const std::string up = "unet.u" + std::to_string(i);
    u = relu(conv2d_transpose(u, vs.at(up + ".t.w"), vs.at(up + ".t.b"), 2, 1));
    u = concat_channels(u, skips[static_cast<std::size_t>(i - 1)]);
    u = conv_relu(up + ".c", u, 1);
  }
  return conv2d(u, vs.at("unet.head.w"), vs.at("unet.head.b"), 1, 0);
}

Prediction unet_forward(const BackboneParams& params, const ImagePlane& pre,
                        const ImagePlane& post,
                        const std::optional<LatentDifference>& z) {
  if (params.kind != BackboneKind::unet)
    fail(ErrorKind::ModeMismatch, "unet_forward: params are not a unet");
  VarSet vs = VarSet::lift(params.params, false);
  Var<Real> zv;
  if (z) zv = constant(z->data);
  Var<Real> logits =
      unet_forward_g(vs, params.arch, constant(pre.data), constant(post.data),
                     z ? &zv : nullptr);
  return Prediction{logits->value};
}

}  // namespace latdiff
