#include <set>

#include "doctest.h"
#include "latdiff/core/autodiff.hpp"
#include "latdiff/core/conv.hpp"
#include "latdiff/core/init.hpp"
#include "latdiff/core/params.hpp"
#include "test_util.hpp"

using namespace latdiff;
using testutil::fd_check_leaf;
using testutil::mix_to_scalar;
using testutil::random_tensor;
using testutil::random_tensor_margin;
using testutil::rel_err;

TEST_CASE("rng: identical seeds give identical streams") {
  Rng a(123), b(123);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("rng: derived streams depend only on the key") {
  Rng a = Rng::derived(5, 17);
  Rng pre(5);
  pre.uniform();  // consuming the parent stream must not matter
  Rng b = Rng::derived(5, 17);
  for (int i = 0; i < 10; ++i) CHECK(a.next_u64() == b.next_u64());
  Rng c = Rng::derived(5, 18);
  bool any_diff = false;
  Rng a2 = Rng::derived(5, 17);
  for (int i = 0; i < 10; ++i)
    if (a2.next_u64() != c.next_u64()) any_diff = true;
  CHECK(any_diff);
}

TEST_CASE("rng: uniform_int covers the inclusive range and stays inside") {
  Rng r(9);
  std::set<std::int64_t> seen;
  for (int i = 0; i < 2000; ++i) {
    const auto v = r.uniform_int(2, 6);
    CHECK(v >= 2);
    CHECK(v <= 6);
    seen.insert(v);
  }
  CHECK(seen.size() == 5);
}

TEST_CASE("rng: uniform stays in [0,1) and state serializes") {
  Rng r(11);
  for (int i = 0; i < 100; ++i) {
    const double u = r.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
  const std::string s = r.serialize_state();
  const double next = r.uniform();
  Rng r2;
  r2.restore_state(s);
  CHECK(r2.uniform() == next);
}

TEST_CASE("tensor: layout is channel-fastest row-major") {
  Tensor<Real> t = Tensor<Real>::zeros({2, 3, 4});
  t.at(1, 2, 3) = 7.0;
  CHECK(t.data[(1 * 3 + 2) * 4 + 3] == 7.0);
  CHECK(t.size() == 24);
  CHECK(t.shape_str() == "(2,3,4)");
}

TEST_CASE("params: duplicate names are rejected, lookups work") {
  ParamSet p;
  p.add("a", Tensor<Real>::zeros({2, 2}));
  CHECK_THROWS_AS(p.add("a", Tensor<Real>::zeros({1})), Error);
  CHECK(p.has("a"));
  CHECK(!p.has("b"));
  CHECK_THROWS_AS(p.at("b"), Error);
  CHECK(p.value_count() == 4);
}

TEST_CASE("init: conv parameter shapes and fan-in bound") {
  ParamSet p;
  Rng rng(3);
  add_conv_param(p, rng, "c", 3, 4, 8);
  CHECK(p.at("c.w").dims == std::vector<int>{3, 3, 4, 8});
  CHECK(p.at("c.b").dims == std::vector<int>{8});
  const double bound = 1.0 / std::sqrt(9.0 * 4.0);
  for (Eigen::Index i = 0; i < p.at("c.w").size(); ++i)
    CHECK(std::fabs(p.at("c.w").data[i]) <= bound);
  CHECK((p.at("c.b").data == 0.0).all());
}

TEST_CASE("autodiff: scalar op values") {
  auto v = [](double x) { return make_leaf(Tensor<Real>::scalar(x), false); };
  CHECK(add(v(2), v(3))->value.data[0] == 5.0);
  CHECK(sub(v(2), v(3))->value.data[0] == -1.0);
  CHECK(scale(v(2), Real(4))->value.data[0] == 8.0);
  CHECK(hadamard(v(2), v(3))->value.data[0] == 6.0);
  CHECK(axpby(Real(2), v(3), Real(-1), v(4))->value.data[0] == 2.0);
  CHECK(relu(v(-2))->value.data[0] == 0.0);
  CHECK(relu(v(2))->value.data[0] == 2.0);
}

TEST_CASE("autodiff: mse matches the hand value") {
  Tensor<Real> a = Tensor<Real>::zeros({3});
  Tensor<Real> b = Tensor<Real>::zeros({3});
  a.data << 1.0, 2.0, 3.0;
  b.data << 0.0, 2.0, 5.0;
  // ((1)^2 + 0 + (2)^2) / 3
  const double expect = 5.0 / 3.0;
  CHECK(mse(make_leaf(a, false), make_leaf(b, false))->value.data[0] ==
        doctest::Approx(expect).epsilon(1e-15));
}

TEST_CASE("autodiff: binary cross-entropy oracle values") {
  // Frozen by hand: logits (1, 0). Class 0: -ln(e/(1+e)) = ln(1+exp(-1)).
  // Class 1: ln(1+exp(1)).
  Tensor<Real> logits = Tensor<Real>::zeros({1, 1, 2});
  logits.data << 1.0, 0.0;
  Tensor<Real> t0 = Tensor<Real>::zeros({1, 1});
  Tensor<Real> t1 = Tensor<Real>::full({1, 1}, 1.0);
  const double l0 =
      cross_entropy2(make_leaf(logits, false), t0)->value.data[0];
  const double l1 =
      cross_entropy2(make_leaf(logits, false), t1)->value.data[0];
  CHECK(rel_err(l0, 0.31326168751822286) < 1e-14);
  CHECK(rel_err(l1, 1.3132616875182228) < 1e-14);
  // Equal logits: exactly ln 2 regardless of the target.
  Tensor<Real> flat = Tensor<Real>::zeros({2, 2, 2});
  Tensor<Real> tgt = Tensor<Real>::zeros({2, 2});
  tgt.data << 1.0, 0.0, 0.0, 1.0;
  const double l2 = cross_entropy2(make_leaf(flat, false), tgt)->value.data[0];
  CHECK(rel_err(l2, 0.6931471805599453) < 1e-14);
}

TEST_CASE("autodiff: gradient of every elementwise op") {
  Rng rng(21);
  const Tensor<Real> x = random_tensor({4, 5}, rng);
  const Tensor<Real> y = random_tensor({4, 5}, rng);
  fd_check_leaf(
      [&](Var<Real> v) { return mix_to_scalar(add(v, constant(y))); }, x);
  fd_check_leaf(
      [&](Var<Real> v) { return mix_to_scalar(sub(constant(y), v)); }, x);
  fd_check_leaf([&](Var<Real> v) { return mix_to_scalar(scale(v, Real(-2.5))); },
                x);
  fd_check_leaf(
      [&](Var<Real> v) { return mix_to_scalar(hadamard(v, constant(y))); }, x);
  fd_check_leaf(
      [&](Var<Real> v) {
        return mix_to_scalar(axpby(Real(1.5), v, Real(-0.5), v));
      },
      x);
  const Tensor<Real> xm = random_tensor_margin({4, 5}, rng, 0.2);
  fd_check_leaf([&](Var<Real> v) { return mix_to_scalar(relu(v)); }, xm);
}

TEST_CASE("autodiff: gradient through shape ops") {
  Rng rng(22);
  const Tensor<Real> x = random_tensor({3, 4, 2}, rng);
  fd_check_leaf(
      [&](Var<Real> v) { return mix_to_scalar(reshape(v, {6, 4})); }, x);
  const Tensor<Real> other = random_tensor({3, 4, 3}, rng);
  fd_check_leaf(
      [&](Var<Real> v) {
        return mix_to_scalar(concat_channels(v, constant(other)));
      },
      x);
  fd_check_leaf(
      [&](Var<Real> v) {
        return mix_to_scalar(concat_channels(constant(other), v));
      },
      x);
  const Tensor<Real> m = random_tensor({5, 3}, rng);
  fd_check_leaf([&](Var<Real> v) { return mix_to_scalar(transpose2d(v)); }, m);
  fd_check_leaf(
      [&](Var<Real> v) { return mix_to_scalar(slice_rows(v, 1, 3)); }, m);
  const Tensor<Real> m2 = random_tensor({2, 3}, rng);
  fd_check_leaf(
      [&](Var<Real> v) {
        return mix_to_scalar(concat_rows(v, constant(m2)));
      },
      m);
  fd_check_leaf(
      [&](Var<Real> v) {
        return mix_to_scalar(concat_rows(constant(m2), v));
      },
      m);
}

TEST_CASE("autodiff: matmul values match Eigen and gradients check") {
  Rng rng(23);
  Tensor<Real> a = random_tensor({3, 4}, rng);
  Tensor<Real> b = random_tensor({4, 5}, rng);
  Var<Real> p = matmul(make_leaf(a, false), make_leaf(b, false));
  MatrixR<Real> ref = a.as_matrix(3, 4) * b.as_matrix(4, 5);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 5; ++j)
      CHECK(rel_err(p->value.as_matrix(3, 5)(i, j), ref(i, j)) < 1e-13);
  fd_check_leaf(
      [&](Var<Real> v) { return mix_to_scalar(matmul(v, constant(b))); }, a);
  fd_check_leaf(
      [&](Var<Real> v) { return mix_to_scalar(matmul(constant(a), v)); }, b);
}

TEST_CASE("autodiff: softmax rows sum to one and gradients check") {
  Rng rng(24);
  Tensor<Real> x = random_tensor({4, 6}, rng, -2.0, 2.0);
  Var<Real> s = softmax_rows(make_leaf(x, false));
  for (int i = 0; i < 4; ++i) {
    double row = 0;
    for (int j = 0; j < 6; ++j) row += s->value.as_matrix(4, 6)(i, j);
    CHECK(rel_err(row, 1.0) < 1e-12);
  }
  fd_check_leaf([&](Var<Real> v) { return mix_to_scalar(softmax_rows(v)); },
                x);
}

TEST_CASE("autodiff: layer norm normalizes and gradients check") {
  Rng rng(25);
  Tensor<Real> x = random_tensor({3, 8}, rng, -2.0, 2.0);
  Tensor<Real> gain = Tensor<Real>::full({8}, 1.0);
  Tensor<Real> bias = Tensor<Real>::zeros({8});
  Var<Real> y = layer_norm_rows(make_leaf(x, false),
                                make_leaf(gain, false),
                                make_leaf(bias, false));
  for (int i = 0; i < 3; ++i) {
    double mean = 0, var = 0;
    for (int j = 0; j < 8; ++j) mean += y->value.as_matrix(3, 8)(i, j);
    mean /= 8;
    for (int j = 0; j < 8; ++j) {
      const double d = y->value.as_matrix(3, 8)(i, j) - mean;
      var += d * d;
    }
    var /= 8;
    CHECK(std::fabs(mean) < 1e-12);
    CHECK(rel_err(var, 1.0) < 1e-4);  // eps in the denominator shifts it
  }
  fd_check_leaf(
      [&](Var<Real> v) {
        return mix_to_scalar(layer_norm_rows(v, constant(gain),
                                             constant(bias)));
      },
      x);
  Tensor<Real> g2 = random_tensor({8}, rng, 0.5, 1.5);
  Tensor<Real> b2 = random_tensor({8}, rng);
  fd_check_leaf(
      [&](Var<Real> v) {
        return mix_to_scalar(
            layer_norm_rows(constant(x), v, constant(b2)));
      },
      g2);
  fd_check_leaf(
      [&](Var<Real> v) {
        return mix_to_scalar(
            layer_norm_rows(constant(x), constant(g2), v));
      },
      b2);
}

TEST_CASE("autodiff: loss op gradients") {
  Rng rng(26);
  Tensor<Real> x = random_tensor({4, 4, 2}, rng);
  Tensor<Real> y = random_tensor({4, 4, 2}, rng);
  fd_check_leaf([&](Var<Real> v) { return mean_all(v); }, x);
  fd_check_leaf([&](Var<Real> v) { return mse(v, constant(y)); }, x);
  fd_check_leaf([&](Var<Real> v) { return mse(constant(y), v); }, x);
  Tensor<Real> tgt = Tensor<Real>::zeros({4, 4});
  Rng trng(27);
  for (Eigen::Index i = 0; i < tgt.size(); ++i)
    tgt.data[i] = trng.uniform() < 0.5 ? 0.0 : 1.0;
  fd_check_leaf([&](Var<Real> v) { return cross_entropy2(v, tgt); }, x);
}

TEST_CASE("autodiff: gradient accumulates through shared subexpressions") {
  // f(x) = mean((x*x) + x): the leaf feeds two paths.
  Rng rng(28);
  Tensor<Real> x = random_tensor({5}, rng);
  fd_check_leaf(
      [&](Var<Real> v) { return mean_all(add(hadamard(v, v), v)); }, x);
}

TEST_CASE("conv2d: forward matches a direct nested-loop reference") {
  Rng rng(30);
  const int h = 6, w = 7, ci = 3, co = 4, k = 3;
  for (const auto& [stride, pad] : std::vector<std::pair<int, int>>{
           {1, 1}, {2, 1}, {1, 0}, {2, 0}}) {
    Tensor<Real> x = random_tensor({h, w, ci}, rng);
    Tensor<Real> wt = random_tensor({k, k, ci, co}, rng);
    Tensor<Real> b = random_tensor({co}, rng);
    Var<Real> out = conv2d(make_leaf(x, false), make_leaf(wt, false),
                           make_leaf(b, false), stride, pad);
    const int ho = (h + 2 * pad - k) / stride + 1;
    const int wo = (w + 2 * pad - k) / stride + 1;
    REQUIRE(out->value.dims == std::vector<int>{ho, wo, co});
    for (int oy = 0; oy < ho; ++oy)
      for (int ox = 0; ox < wo; ++ox)
        for (int oc = 0; oc < co; ++oc) {
          double acc = b.data[oc];
          for (int ky = 0; ky < k; ++ky)
            for (int kx = 0; kx < k; ++kx) {
              const int iy = oy * stride + ky - pad;
              const int ix = ox * stride + kx - pad;
              if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
              for (int ic = 0; ic < ci; ++ic)
                acc += x.at(iy, ix, ic) * wt.data[((ky * k + kx) * ci + ic) *
                                                      co +
                                                  oc];
            }
          INFO("stride " << stride << " pad " << pad);
          CHECK(rel_err(out->value.at(oy, ox, oc), acc) < 1e-12);
        }
  }
}

TEST_CASE("conv2d: gradients for input, weights and bias") {
  Rng rng(31);
  Tensor<Real> x = random_tensor({5, 5, 2}, rng);
  Tensor<Real> wt = random_tensor({3, 3, 2, 3}, rng);
  Tensor<Real> b = random_tensor({3}, rng);
  fd_check_leaf(
      [&](Var<Real> v) {
        return mix_to_scalar(conv2d(v, constant(wt), constant(b), 2, 1));
      },
      x);
  fd_check_leaf(
      [&](Var<Real> v) {
        return mix_to_scalar(conv2d(constant(x), v, constant(b), 2, 1));
      },
      wt);
  fd_check_leaf(
      [&](Var<Real> v) {
        return mix_to_scalar(conv2d(constant(x), constant(wt), v, 2, 1));
      },
      b);
}

TEST_CASE("conv2d_transpose: forward matches scatter reference and inverts shape") {
  Rng rng(32);
  const int h = 3, w = 4, ci = 2, co = 3, k = 4, stride = 2, pad = 1;
  Tensor<Real> x = random_tensor({h, w, ci}, rng);
  Tensor<Real> wt = random_tensor({k, k, ci, co}, rng);
  Tensor<Real> b = random_tensor({co}, rng);
  Var<Real> out = conv2d_transpose(make_leaf(x, false), make_leaf(wt, false),
                                   make_leaf(b, false), stride, pad);
  const int ho = (h - 1) * stride - 2 * pad + k;
  const int wo = (w - 1) * stride - 2 * pad + k;
  REQUIRE(out->value.dims == std::vector<int>{ho, wo, co});
  // Scatter reference: every input pixel stamps a k x k weight block.
  Tensor<Real> ref = Tensor<Real>::zeros({ho, wo, co});
  for (Eigen::Index i = 0; i < ref.size(); ++i)
    ref.data[i] = b.data[i % co];
  for (int iy = 0; iy < h; ++iy)
    for (int ix = 0; ix < w; ++ix)
      for (int ky = 0; ky < k; ++ky)
        for (int kx = 0; kx < k; ++kx) {
          const int oy = iy * stride + ky - pad;
          const int ox = ix * stride + kx - pad;
          if (oy < 0 || oy >= ho || ox < 0 || ox >= wo) continue;
          for (int ic = 0; ic < ci; ++ic)
            for (int oc = 0; oc < co; ++oc)
              ref.at(oy, ox, oc) += x.at(iy, ix, ic) *
                                    wt.data[((ky * k + kx) * ci + ic) * co +
                                            oc];
        }
  for (Eigen::Index i = 0; i < ref.size(); ++i)
    CHECK(rel_err(out->value.data[i], ref.data[i]) < 1e-12);
  // Shape inversion: tconv(k=4, s=2, p=1) doubles a conv(k=4, s=2, p=1) halving.
  CHECK(ho == 2 * h);
  CHECK(wo == 2 * w);
}

TEST_CASE("conv2d_transpose: gradients for input, weights and bias") {
  Rng rng(33);
  Tensor<Real> x = random_tensor({3, 3, 2}, rng);
  Tensor<Real> wt = random_tensor({4, 4, 2, 2}, rng);
  Tensor<Real> b = random_tensor({2}, rng);
  fd_check_leaf(
      [&](Var<Real> v) {
        return mix_to_scalar(
            conv2d_transpose(v, constant(wt), constant(b), 2, 1));
      },
      x);
  fd_check_leaf(
      [&](Var<Real> v) {
        return mix_to_scalar(
            conv2d_transpose(constant(x), v, constant(b), 2, 1));
      },
      wt);
  fd_check_leaf(
      [&](Var<Real> v) {
        return mix_to_scalar(
            conv2d_transpose(constant(x), constant(wt), v, 2, 1));
      },
      b);
}

TEST_CASE("resize_bilinear: identity at equal size, constant stays constant") {
  Rng rng(34);
  Tensor<Real> x = random_tensor({4, 5, 2}, rng);
  Var<Real> same = resize_bilinear(make_leaf(x, false), 4, 5);
  for (Eigen::Index i = 0; i < x.size(); ++i)
    CHECK(same->value.data[i] == x.data[i]);
  Tensor<Real> c = Tensor<Real>::full({3, 3, 1}, 0.7);
  Var<Real> up = resize_bilinear(make_leaf(c, false), 9, 9);
  for (Eigen::Index i = 0; i < up->value.size(); ++i)
    CHECK(rel_err(up->value.data[i], 0.7) < 1e-13);
}

TEST_CASE("resize_bilinear: gradient checks") {
  Rng rng(35);
  Tensor<Real> x = random_tensor({3, 4, 2}, rng);
  fd_check_leaf(
      [&](Var<Real> v) { return mix_to_scalar(resize_bilinear(v, 6, 8)); },
      x);
  fd_check_leaf(
      [&](Var<Real> v) { return mix_to_scalar(resize_bilinear(v, 2, 2)); },
      x);
}

TEST_CASE("add_row_broadcast: value and gradients") {
  Rng rng(36);
  Tensor<Real> a = random_tensor({4, 3}, rng);
  Tensor<Real> b = random_tensor({3}, rng);
  Var<Real> y = add_row_broadcast(make_leaf(a, false), make_leaf(b, false));
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 3; ++j)
      CHECK(y->value.as_matrix(4, 3)(i, j) ==
            a.as_matrix(4, 3)(i, j) + b.data[j]);
  fd_check_leaf(
      [&](Var<Real> v) {
        return mix_to_scalar(add_row_broadcast(v, constant(b)));
      },
      a);
  fd_check_leaf(
      [&](Var<Real> v) {
        return mix_to_scalar(add_row_broadcast(constant(a), v));
      },
      b);
}

TEST_CASE("kink watch: records the minimum |preactivation| while armed") {
  Tensor<Real> x = Tensor<Real>::zeros({3});
  x.data << -0.5, 0.3, 2.0;
  KinkWatch::arm();
  relu(make_leaf(x, false));
  const double margin = KinkWatch::disarm();
  CHECK(margin == doctest::Approx(0.3));
  // Disarmed: further relu calls leave no trace.
  KinkWatch::arm();
  const double empty = KinkWatch::disarm();
  CHECK(std::isinf(empty));
}

TEST_CASE("backward: constant-only graphs carry no gradient state") {
  Tensor<Real> x = Tensor<Real>::full({2, 2}, 1.5);
  Var<Real> c = constant(x);
  Var<Real> y = mean_all(hadamard(c, c));
  CHECK(y->value.data[0] == doctest::Approx(2.25));
  CHECK_FALSE(y->requires_grad);
}
