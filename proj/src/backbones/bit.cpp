#include <cmath>

#include "latdiff/backbones/backbone.hpp"
#include "latdiff/core/conv.hpp"
#include "latdiff/core/init.hpp"

namespace latdiff {

namespace {

void check_inputs(const BackboneArchConfig& arch, const Tensor<Real>& pre,
                  const Tensor<Real>& post, const Var<Real>* z) {
  if (pre.dims != post.dims)
    fail(ErrorKind::ShapeMismatch, "bit: pre " + pre.shape_str() + " vs post " +
                                       post.shape_str());
  if (post.dims.size() != 3 || post.dims[2] != arch.in_channels)
    fail(ErrorKind::ShapeMismatch,
         "bit: input " + post.shape_str() + " vs in_channels " +
             std::to_string(arch.in_channels));
  if (post.dims[0] % 4 != 0 || post.dims[1] % 4 != 0)
    fail(ErrorKind::ShapeMismatch,
         "bit: input " + post.shape_str() + " not divisible by 4");
  if (z && arch.z_channels == 0)
    fail(ErrorKind::ModeMismatch,
         "bit built without injection cannot accept a latent");
  if (!z && arch.z_channels > 0)
    fail(ErrorKind::ModeMismatch, "bit built for injection requires a latent");
  if (z && (*z)->value.dims[2] != arch.z_channels)
    fail(ErrorKind::ShapeMismatch,
         "bit: latent channels " + std::to_string((*z)->value.dims[2]) +
             " vs arch z_channels " + std::to_string(arch.z_channels));
}

}  // namespace

namespace backbone_detail {

ParamSet make_bit_params(const BackboneArchConfig& arch, std::uint64_t seed) {
  ParamSet ps;
  Rng rng = Rng::derived(seed, 11);
  const int bw = arch.base_width;
  const int C = 2 * bw;
  const int D = arch.transformer_dim;
  const int T = arch.token_count;
  add_conv_param(ps, rng, "bit.enc.c1", 3, arch.in_channels, bw);
  add_conv_param(ps, rng, "bit.enc.c2", 3, bw, C);
  add_conv_param(ps, rng, "bit.fuse", 1, C + arch.z_channels, C);
  // The token scores feed a softmax over pixels, which is invariant to a
  // per-token shift, so the tokenizer carries no bias.
  add_matrix_param(ps, rng, "bit.tok.w", C, T);
  for (int l = 0; l < arch.transformer_layers; ++l) {
    const std::string p = "bit.tr" + std::to_string(l);
    add_matrix_param(ps, rng, p + ".wq", C, D);
    add_matrix_param(ps, rng, p + ".wk", C, D);
    add_matrix_param(ps, rng, p + ".wv", C, C);
    add_const_param(ps, p + ".ln1.g", {C}, 1);
    ps.add(p + ".ln1.b", Tensor<Real>::zeros({C}));
    add_matrix_param(ps, rng, p + ".mlp.w1", C, D);
    ps.add(p + ".mlp.b1", Tensor<Real>::zeros({D}));
    add_matrix_param(ps, rng, p + ".mlp.w2", D, C);
    ps.add(p + ".mlp.b2", Tensor<Real>::zeros({C}));
    add_const_param(ps, p + ".ln2.g", {C}, 1);
    ps.add(p + ".ln2.b", Tensor<Real>::zeros({C}));
  }
  add_matrix_param(ps, rng, "bit.rp.wq", C, D);
  add_matrix_param(ps, rng, "bit.rp.wk", C, D);
  add_matrix_param(ps, rng, "bit.rp.wv", C, C);
  add_conv_param(ps, rng, "bit.dec.t1", 4, C, bw);
  add_conv_param(ps, rng, "bit.dec.t2", 4, bw, bw);
  add_conv_param(ps, rng, "bit.head", 1, bw, 2);
  return ps;
}

}  // namespace backbone_detail

Var<Real> bit_forward_g(const VarSet& vs, const BackboneArchConfig& arch,
                        const Var<Real>& pre, const Var<Real>& post,
                        const Var<Real>* z) {
  check_inputs(arch, pre->value, post->value, z);
  const int bw = arch.base_width;
  const int C = 2 * bw;
  const int D = arch.transformer_dim;
  const int T = arch.token_count;
  const Real inv_sqrt_d = Real(1) / std::sqrt(static_cast<Real>(D));

  // Siamese 1/4-resolution encoder; fusion keeps C channels in both the
  // injected and baseline variants.
  auto features = [&](const Var<Real>& img) {
    Var<Real> h =
        relu(conv2d(img, vs.at("bit.enc.c1.w"), vs.at("bit.enc.c1.b"), 2, 1));
    Var<Real> f =
        relu(conv2d(h, vs.at("bit.enc.c2.w"), vs.at("bit.enc.c2.b"), 2, 1));
    if (z) f = inject_g(f, *z);
    return relu(conv2d(f, vs.at("bit.fuse.w"), vs.at("bit.fuse.b"), 1, 0));
  };
  Var<Real> f_pre = features(pre);
  Var<Real> f_post = features(post);
  const int h4 = f_pre->value.dims[0], w4 = f_pre->value.dims[1];
  const int hw = h4 * w4;

  // Semantic tokens: per-token spatial attention over the pixels.
  auto tokenize = [&](const Var<Real>& f) {
    Var<Real> fm = reshape(f, {hw, C});
    Var<Real> scores = matmul(fm, vs.at("bit.tok.w"));
    Var<Real> attn = softmax_rows(transpose2d(scores));  // (T, hw)
    return matmul(attn, fm);                             // (T, C)
  };
  Var<Real> tokens = concat_rows(tokenize(f_pre), tokenize(f_post));  // (2T, C)

  for (int l = 0; l < arch.transformer_layers; ++l) {
    const std::string p = "bit.tr" + std::to_string(l);
    Var<Real> q = matmul(tokens, vs.at(p + ".wq"));
    Var<Real> k = matmul(tokens, vs.at(p + ".wk"));
    Var<Real> v = matmul(tokens, vs.at(p + ".wv"));
    Var<Real> attn =
        softmax_rows(scale(matmul(q, transpose2d(k)), inv_sqrt_d));
    tokens = layer_norm_rows(add(tokens, matmul(attn, v)),
                             vs.at(p + ".ln1.g"), vs.at(p + ".ln1.b"));
    Var<Real> hmid = relu(add_row_broadcast(matmul(tokens, vs.at(p + ".mlp.w1")),
                                            vs.at(p + ".mlp.b1")));
    Var<Real> mlp = add_row_broadcast(matmul(hmid, vs.at(p + ".mlp.w2")),
                                      vs.at(p + ".mlp.b2"));
    tokens = layer_norm_rows(add(tokens, mlp), vs.at(p + ".ln2.g"),
                             vs.at(p + ".ln2.b"));
  }
  Var<Real> tok_pre = slice_rows(tokens, 0, T);
  Var<Real> tok_post = slice_rows(tokens, T, T);

  // Pixels attend to their branch's refined tokens; residual re-projection.
  auto reproject = [&](const Var<Real>& f, const Var<Real>& tks) {
    Var<Real> fm = reshape(f, {hw, C});
    Var<Real> q = matmul(fm, vs.at("bit.rp.wq"));
    Var<Real> k = matmul(tks, vs.at("bit.rp.wk"));
    Var<Real> attn =
        softmax_rows(scale(matmul(q, transpose2d(k)), inv_sqrt_d));
    return add(fm, matmul(attn, matmul(tks, vs.at("bit.rp.wv"))));
  };
  Var<Real> diff = sub(reproject(f_post, tok_post), reproject(f_pre, tok_pre));
  Var<Real> dmap = reshape(diff, {h4, w4, C});

  Var<Real> u = relu(
      conv2d_transpose(dmap, vs.at("bit.dec.t1.w"), vs.at("bit.dec.t1.b"), 2, 1));
  u = relu(
      conv2d_transpose(u, vs.at("bit.dec.t2.w"), vs.at("bit.dec.t2.b"), 2, 1));
  return conv2d(u, vs.at("bit.head.w"), vs.at("bit.head.b"), 1, 0);
}

Prediction bit_forward(const BackboneParams& params, const ImagePlane& pre,
                       const ImagePlane& post,
                       const std::optional<LatentDifference>& z) {
  if (params.kind != BackboneKind::bit)
    fail(ErrorKind::ModeMismatch, "bit_forward: params are not a bit model");
  VarSet vs = VarSet::lift(params.params, false);
  Var<Real> zv;
  if (z) zv = constant(z->data);
  Var<Real> logits =
      bit_forward_g(vs, params.arch, constant(pre.data), constant(post.data),
                    z ? &zv : nullptr);
  return Prediction{logits->value};
}

}  // namespace latdiff
