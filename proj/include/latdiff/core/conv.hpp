#pragma once

#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

#include "latdiff/core/autodiff.hpp"

namespace latdiff {

// Spatial ops over (H, W, C) tensors. Convolutions lower to im2col + GEMM;
// weights live in (k, k, Cin, Cout) layout, which flattens row-major to the
// (k*k*Cin, Cout) matrix the GEMM consumes.

namespace detail {

template <typename Scalar>
MatrixR<Scalar> im2col(const Tensor<Scalar>& x, int k, int stride, int pad,
                       int ho, int wo) {
  const int h = x.dims[0], w = x.dims[1], ci = x.dims[2];
  MatrixR<Scalar> cols = MatrixR<Scalar>::Zero(ho * wo, k * k * ci);
  for (int oy = 0; oy < ho; ++oy) {
    for (int ky = 0; ky < k; ++ky) {
      const int y = oy * stride - pad + ky;
      if (y < 0 || y >= h) continue;
      for (int ox = 0; ox < wo; ++ox) {
        Scalar* dst = cols.data() +
                      (static_cast<std::ptrdiff_t>(oy) * wo + ox) * k * k * ci +
                      static_cast<std::ptrdiff_t>(ky) * k * ci;
        for (int kx = 0; kx < k; ++kx) {
          const int xx = ox * stride - pad + kx;
          if (xx < 0 || xx >= w) continue;
          const Scalar* src =
              x.data.data() + (static_cast<std::ptrdiff_t>(y) * w + xx) * ci;
          std::memcpy(dst + kx * ci, src, sizeof(Scalar) * ci);
        }
      }
    }
  }
  return cols;
}

template <typename Scalar>
void col2im_add(const MatrixR<Scalar>& cols, int k, int stride, int pad,
                int ho, int wo, Tensor<Scalar>& x_grad) {
  const int h = x_grad.dims[0], w = x_grad.dims[1], ci = x_grad.dims[2];
  for (int oy = 0; oy < ho; ++oy) {
    for (int ky = 0; ky < k; ++ky) {
      const int y = oy * stride - pad + ky;
      if (y < 0 || y >= h) continue;
      for (int ox = 0; ox < wo; ++ox) {
        const Scalar* src =
            cols.data() +
            (static_cast<std::ptrdiff_t>(oy) * wo + ox) * k * k * ci +
            static_cast<std::ptrdiff_t>(ky) * k * ci;
        for (int kx = 0; kx < k; ++kx) {
          const int xx = ox * stride - pad + kx;
          if (xx < 0 || xx >= w) continue;
          Scalar* dst = x_grad.data.data() +
                        (static_cast<std::ptrdiff_t>(y) * w + xx) * ci;
          for (int c = 0; c < ci; ++c) dst[c] += src[kx * ci + c];
        }
      }
    }
  }
}

}  // namespace detail

// x: (H, W, Cin), w: (k, k, Cin, Cout), b: (Cout). Output spatial size uses
// the floor convention: Ho = (H + 2*pad - k) / stride + 1.
template <typename Scalar>
Var<Scalar> conv2d(const Var<Scalar>& x, const Var<Scalar>& w,
                   const Var<Scalar>& b, int stride, int pad) {
  const auto& dx = x->value.dims;
  const auto& dw = w->value.dims;
  if (dx.size() != 3 || dw.size() != 4 || dw[0] != dw[1] || dw[2] != dx[2])
    fail(ErrorKind::ShapeMismatch, "conv2d: x " + x->value.shape_str() +
                                       " w " + w->value.shape_str());
  const int k = dw[0], ci = dw[2], co = dw[3];
  if (b->value.size() != co)
    fail(ErrorKind::ShapeMismatch, "conv2d: bias length");
  const int h = dx[0], ww = dx[1];
  const int ho = (h + 2 * pad - k) / stride + 1;
  const int wo = (ww + 2 * pad - k) / stride + 1;
  if (ho < 1 || wo < 1) fail(ErrorKind::ShapeMismatch, "conv2d: empty output");

  MatrixR<Scalar> cols = detail::im2col(x->value, k, stride, pad, ho, wo);
  Tensor<Scalar> out = Tensor<Scalar>::zeros({ho, wo, co});
  auto om = out.as_matrix(ho * wo, co);
  om.noalias() = cols * w->value.as_matrix(k * k * ci, co);
  om.rowwise() += b->value.as_matrix(1, co).row(0);

  return make_op<Scalar>(
      std::move(out), {x, w, b},
      [k, ci, co, h, ww, ho, wo, stride, pad,
       cols = std::move(cols)](AdNode<Scalar>& self) {
        auto g = self.grad.as_matrix(ho * wo, co);
        auto& px = *self.parents[0];
        auto& pw = *self.parents[1];
        auto& pb = *self.parents[2];
        if (pb.requires_grad)
          pb.grad_ref().as_matrix(1, co) += g.colwise().sum();
        if (pw.requires_grad)
          pw.grad_ref().as_matrix(k * k * ci, co).noalias() +=
              cols.transpose() * g;
        if (px.requires_grad) {
          MatrixR<Scalar> dcols =
              g * pw.value.as_matrix(k * k * ci, co).transpose();
          detail::col2im_add(dcols, k, stride, pad, ho, wo, px.grad_ref());
        }
      });
}

// Transposed convolution (stride-s upsampling). x: (H, W, Cin),
// w: (k, k, Cin, Cout), b: (Cout). Ho = (H - 1)*stride - 2*pad + k.
template <typename Scalar>
Var<Scalar> conv2d_transpose(const Var<Scalar>& x, const Var<Scalar>& w,
                             const Var<Scalar>& b, int stride, int pad) {
  const auto& dx = x->value.dims;
  const auto& dw = w->value.dims;
  if (dx.size() != 3 || dw.size() != 4 || dw[0] != dw[1] || dw[2] != dx[2])
    fail(ErrorKind::ShapeMismatch, "conv2d_transpose: x " +
                                       x->value.shape_str() + " w " +
                                       w->value.shape_str());
  const int k = dw[0], ci = dw[2], co = dw[3];
  if (b->value.size() != co)
    fail(ErrorKind::ShapeMismatch, "conv2d_transpose: bias length");
  const int h = dx[0], ww = dx[1];
  const int ho = (h - 1) * stride - 2 * pad + k;
  const int wo = (ww - 1) * stride - 2 * pad + k;
  if (ho < 1 || wo < 1)
    fail(ErrorKind::ShapeMismatch, "conv2d_transpose: empty output");

  // Permute (k, k, Cin, Cout) into (Cin, k*k*Cout) so the input GEMM yields
  // per-pixel kernel stamps to scatter.
  MatrixR<Scalar> wr(ci, k * k * co);
  for (int ky = 0; ky < k; ++ky)
    for (int kx = 0; kx < k; ++kx)
      for (int c = 0; c < ci; ++c)
        for (int o = 0; o < co; ++o)
          wr(c, (ky * k + kx) * co + o) =
              w->value.data[((static_cast<std::ptrdiff_t>(ky) * k + kx) * ci +
                             c) *
                                co +
                            o];

  Tensor<Scalar> out = Tensor<Scalar>::zeros({ho, wo, co});
  MatrixR<Scalar> stamps = x->value.as_matrix(h * ww, ci) * wr;
  for (int y = 0; y < h; ++y)
    for (int xx = 0; xx < ww; ++xx) {
      const Scalar* srow =
          stamps.data() + (static_cast<std::ptrdiff_t>(y) * ww + xx) * k * k * co;
      for (int ky = 0; ky < k; ++ky) {
        const int oy = y * stride - pad + ky;
        if (oy < 0 || oy >= ho) continue;
        for (int kx = 0; kx < k; ++kx) {
          const int ox = xx * stride - pad + kx;
          if (ox < 0 || ox >= wo) continue;
          Scalar* dst = out.data.data() +
                        (static_cast<std::ptrdiff_t>(oy) * wo + ox) * co;
          const Scalar* src = srow + (ky * k + kx) * co;
          for (int o = 0; o < co; ++o) dst[o] += src[o];
        }
      }
    }
  auto om = out.as_matrix(ho * wo, co);
  om.rowwise() += b->value.as_matrix(1, co).row(0);

  return make_op<Scalar>(
      std::move(out), {x, w, b},
      [k, ci, co, h, ww, ho, wo, stride, pad,
       wr = std::move(wr)](AdNode<Scalar>& self) {
        auto& px = *self.parents[0];
        auto& pw = *self.parents[1];
        auto& pb = *self.parents[2];
        if (pb.requires_grad)
          pb.grad_ref().as_matrix(1, co) +=
              self.grad.as_matrix(ho * wo, co).colwise().sum();
        if (!px.requires_grad && !pw.requires_grad) return;
        // Gather output grads back into per-pixel stamp layout.
        MatrixR<Scalar> dstamps = MatrixR<Scalar>::Zero(h * ww, k * k * co);
        for (int y = 0; y < h; ++y)
          for (int xx = 0; xx < ww; ++xx) {
            Scalar* drow = dstamps.data() +
                           (static_cast<std::ptrdiff_t>(y) * ww + xx) * k * k *
                               co;
            for (int ky = 0; ky < k; ++ky) {
              const int oy = y * stride - pad + ky;
              if (oy < 0 || oy >= ho) continue;
              for (int kx = 0; kx < k; ++kx) {
                const int ox = xx * stride - pad + kx;
                if (ox < 0 || ox >= wo) continue;
                const Scalar* src =
                    self.grad.data.data() +
                    (static_cast<std::ptrdiff_t>(oy) * wo + ox) * co;
                Scalar* dst = drow + (ky * k + kx) * co;
                for (int o = 0; o < co; ++o) dst[o] += src[o];
              }
            }
          }
        if (px.requires_grad)
          px.grad_ref().as_matrix(h * ww, ci).noalias() +=
              dstamps * wr.transpose();
        if (pw.requires_grad) {
          MatrixR<Scalar> dwr =
              px.value.as_matrix(h * ww, ci).transpose() * dstamps;
          auto& gw = pw.grad_ref();
          for (int ky = 0; ky < k; ++ky)
            for (int kx = 0; kx < k; ++kx)
              for (int c = 0; c < ci; ++c)
                for (int o = 0; o < co; ++o)
                  gw.data[((static_cast<std::ptrdiff_t>(ky) * k + kx) * ci +
                           c) *
                              co +
                          o] += dwr(c, (ky * k + kx) * co + o);
        }
      });
}

// Bilinear resize of (H, W, C) to (ho, wo, C), half-pixel centers, edges
// clamped. Linear in x, so the backward pass reuses the forward weights.
template <typename Scalar>
Var<Scalar> resize_bilinear(const Var<Scalar>& x, int ho, int wo) {
  const auto& d = x->value.dims;
  if (d.size() != 3) fail(ErrorKind::ShapeMismatch, "resize_bilinear: rank");
  if (ho < 1 || wo < 1)
    fail(ErrorKind::ShapeMismatch, "resize_bilinear: target size");
  const int h = d[0], w = d[1], c = d[2];

  struct Axis {
    std::vector<int> i0, i1;
    std::vector<Scalar> t;
  };
  auto make_axis = [](int in, int out) {
    Axis ax;
    ax.i0.resize(out);
    ax.i1.resize(out);
    ax.t.resize(out);
    const double s = static_cast<double>(in) / out;
    for (int i = 0; i < out; ++i) {
      double src = (i + 0.5) * s - 0.5;
      src = std::min(std::max(src, 0.0), static_cast<double>(in - 1));
      const int lo = static_cast<int>(std::floor(src));
      ax.i0[i] = lo;
      ax.i1[i] = std::min(lo + 1, in - 1);
      ax.t[i] = static_cast<Scalar>(src - lo);
    }
    return ax;
  };
  Axis ay = make_axis(h, ho), ax = make_axis(w, wo);

  Tensor<Scalar> out = Tensor<Scalar>::zeros({ho, wo, c});
  for (int oy = 0; oy < ho; ++oy)
    for (int ox = 0; ox < wo; ++ox) {
      const Scalar ty = ay.t[oy], tx = ax.t[ox];
      const Scalar w00 = (1 - ty) * (1 - tx), w01 = (1 - ty) * tx;
      const Scalar w10 = ty * (1 - tx), w11 = ty * tx;
      for (int ch = 0; ch < c; ++ch)
        out.at(oy, ox, ch) = w00 * x->value.at(ay.i0[oy], ax.i0[ox], ch) +
                             w01 * x->value.at(ay.i0[oy], ax.i1[ox], ch) +
                             w10 * x->value.at(ay.i1[oy], ax.i0[ox], ch) +
                             w11 * x->value.at(ay.i1[oy], ax.i1[ox], ch);
    }
  return make_op<Scalar>(
      std::move(out), {x},
      [ho, wo, c, ay = std::move(ay), ax = std::move(ax)](AdNode<Scalar>& self) {
        auto& px = *self.parents[0];
        if (!px.requires_grad) return;
        auto& gx = px.grad_ref();
        for (int oy = 0; oy < ho; ++oy)
          for (int ox = 0; ox < wo; ++ox) {
            const Scalar ty = ay.t[oy], tx = ax.t[ox];
            const Scalar w00 = (1 - ty) * (1 - tx), w01 = (1 - ty) * tx;
            const Scalar w10 = ty * (1 - tx), w11 = ty * tx;
            for (int ch = 0; ch < c; ++ch) {
              const Scalar g = self.grad.at(oy, ox, ch);
              gx.at(ay.i0[oy], ax.i0[ox], ch) += w00 * g;
              gx.at(ay.i0[oy], ax.i1[ox], ch) += w01 * g;
              gx.at(ay.i1[oy], ax.i0[ox], ch) += w10 * g;
              gx.at(ay.i1[oy], ax.i1[ox], ch) += w11 * g;
            }
          }
      });
}

// a: (m, n) plus length-n bias broadcast over rows.
template <typename Scalar>
Var<Scalar> add_row_broadcast(const Var<Scalar>& a, const Var<Scalar>& b) {
  const auto& d = a->value.dims;
  if (d.size() != 2 || b->value.size() != d[1])
    fail(ErrorKind::ShapeMismatch, "add_row_broadcast");
  const int m = d[0], n = d[1];
  Tensor<Scalar> out = a->value;
  out.as_matrix(m, n).rowwise() += b->value.as_matrix(1, n).row(0);
  return make_op<Scalar>(std::move(out), {a, b}, [m, n](AdNode<Scalar>& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    if (pa.requires_grad) pa.grad_ref().data += self.grad.data;
    if (pb.requires_grad)
      pb.grad_ref().as_matrix(1, n) += self.grad.as_matrix(m, n).colwise().sum();
  });
}

}  // namespace latdiff
