#include <cmath>

#include "latdiff/core/conv.hpp"
#include "latdiff/core/init.hpp"
#include "latdiff/de/de_module.hpp"

namespace latdiff {

void validate_arch(const DEArchConfig& arch) {
  if (arch.in_channels < 1 || arch.c_z < 1 || arch.base_width < 1 ||
      arch.image_size < 1)
    fail(ErrorKind::InvalidArch, "all architecture counts must be >= 1");
  if (arch.image_size % 4 != 0)
    fail(ErrorKind::InvalidArch,
         "image_size " + std::to_string(arch.image_size) +
             " not divisible by 4");
}

namespace {

Var<Real> conv_block(const VarSet& vs, const std::string& name,
                     const Var<Real>& x, int stride, int pad) {
  return conv2d(x, vs.at(name + ".w"), vs.at(name + ".b"), stride, pad);
}

Var<Real> tconv_block(const VarSet& vs, const std::string& name,
                      const Var<Real>& x, int stride, int pad) {
  return conv2d_transpose(x, vs.at(name + ".w"), vs.at(name + ".b"), stride,
                          pad);
}

// Two stride-2 conv layers to 1/4 resolution: width bw then 2*bw.
Var<Real> branch_encode(const VarSet& vs, const std::string& prefix,
                        const Var<Real>& x) {
  Var<Real> h = relu(conv_block(vs, prefix + ".c1", x, 2, 1));
  return relu(conv_block(vs, prefix + ".c2", h, 2, 1));
}

// Shared three-layer transposed-conv stack: two stride-2 upsamples, then a
// linear same-resolution layer back to image channels.
Var<Real> decode_stack(const VarSet& vs, const std::string& prefix,
                       const Var<Real>& h) {
  Var<Real> u = relu(tconv_block(vs, prefix + ".t1", h, 2, 1));
  u = relu(tconv_block(vs, prefix + ".t2", u, 2, 1));
  return tconv_block(vs, prefix + ".t3", u, 1, 1);
}

void check_image_shape(const DEArchConfig& arch, const Tensor<Real>& t,
                       const char* what) {
  if (t.dims != std::vector<int>{arch.image_size, arch.image_size,
                                 arch.in_channels})
    fail(ErrorKind::ShapeMismatch,
         std::string(what) + ": got " + t.shape_str() + ", arch expects (" +
             std::to_string(arch.image_size) + "," +
             std::to_string(arch.image_size) + "," +
             std::to_string(arch.in_channels) + ")");
}

void check_latent_shape(const DEArchConfig& arch, const Tensor<Real>& t,
                        const char* what) {
  const int q = arch.image_size / 4;
  if (t.dims != std::vector<int>{q, q, arch.c_z})
    fail(ErrorKind::ShapeMismatch,
         std::string(what) + ": latent got " + t.shape_str() + ", expects (" +
             std::to_string(q) + "," + std::to_string(q) + "," +
             std::to_string(arch.c_z) + ")");
}

}  // namespace

DEParams init_de(const DEArchConfig& arch, std::uint64_t seed) {
  validate_arch(arch);
  const int in = arch.in_channels;
  const int bw = arch.base_width;
  const int cz = arch.c_z;
  DEParams p;
  p.arch = arch;

  Rng enc_rng = Rng::derived(seed, 1);
  add_conv_param(p.encoder_params, enc_rng, "enc.change.c1", 3, in, bw);
  add_conv_param(p.encoder_params, enc_rng, "enc.change.c2", 3, bw, 2 * bw);
  add_conv_param(p.encoder_params, enc_rng, "enc.ctx.c1", 3, in, bw);
  add_conv_param(p.encoder_params, enc_rng, "enc.ctx.c2", 3, bw, 2 * bw);
  add_conv_param(p.encoder_params, enc_rng, "enc.fuse", 1, 4 * bw, cz);

  Rng dec_rng = Rng::derived(seed, 2);
  add_conv_param(p.decoder_params, dec_rng, "dec.cond.c1", 3, in, bw);
  add_conv_param(p.decoder_params, dec_rng, "dec.cond.c2", 3, bw, 2 * bw);
  add_conv_param(p.decoder_params, dec_rng, "dec.t1", 4, 2 * bw + cz, bw);
  add_conv_param(p.decoder_params, dec_rng, "dec.t2", 4, bw, bw);
  add_conv_param(p.decoder_params, dec_rng, "dec.t3", 3, bw, in);

  Rng adv_rng = Rng::derived(seed, 3);
  add_conv_param(p.adversary_params, adv_rng, "adv.t1", 4, cz, bw);
  add_conv_param(p.adversary_params, adv_rng, "adv.t2", 4, bw, bw);
  add_conv_param(p.adversary_params, adv_rng, "adv.t3", 3, bw, in);
  return p;
}

Var<Real> encode_g(const VarSet& enc, const DEArchConfig& arch,
                   const Var<Real>& pre, const Var<Real>& post) {
  Var<Real> diff = sub(post, pre);
  Var<Real> change = branch_encode(enc, "enc.change", diff);
  Var<Real> ctx = branch_encode(enc, "enc.ctx", pre);
  Var<Real> fused = concat_channels(change, ctx);
  return conv_block(enc, "enc.fuse", fused, 1, 0);
}

Var<Real> decode_conditional_g(const VarSet& dec, const DEArchConfig& arch,
                               const Var<Real>& pre, const Var<Real>& z) {
  Var<Real> ctx = branch_encode(dec, "dec.cond", pre);
  Var<Real> h = concat_channels(ctx, z);
  return decode_stack(dec, "dec", h);
}

Var<Real> decode_adversarial_g(const VarSet& adv, const DEArchConfig& arch,
                               const Var<Real>& z) {
  return decode_stack(adv, "adv", z);
}

LatentDifference encode(const DEParams& params, const ImagePlane& pre,
                        const ImagePlane& post) {
  check_image_shape(params.arch, pre.data, "encode pre");
  check_image_shape(params.arch, post.data, "encode post");
  VarSet enc = VarSet::lift(params.encoder_params, false);
  Var<Real> z = encode_g(enc, params.arch, constant(pre.data),
                         constant(post.data));
  return LatentDifference{z->value};
}

ImagePlane decode_conditional(const DEParams& params, const ImagePlane& pre,
                              const LatentDifference& z) {
  check_image_shape(params.arch, pre.data, "decode_conditional pre");
  check_latent_shape(params.arch, z.data, "decode_conditional");
  VarSet dec = VarSet::lift(params.decoder_params, false);
  Var<Real> x = decode_conditional_g(dec, params.arch, constant(pre.data),
                                     constant(z.data));
  ImagePlane out;
  out.data = x->value;
  return out;
}

ImagePlane decode_adversarial(const DEParams& params,
                              const LatentDifference& z) {
  check_latent_shape(params.arch, z.data, "decode_adversarial");
  VarSet adv = VarSet::lift(params.adversary_params, false);
  Var<Real> x = decode_adversarial_g(adv, params.arch, constant(z.data));
  ImagePlane out;
  out.data = x->value;
  return out;
}

}  // namespace latdiff
