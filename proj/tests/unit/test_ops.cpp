#include <doctest.h>

#include <cmath>

#include "lgtd/gradcheck.hpp"
#include "lgtd/ops.hpp"
#include "test_util.hpp"

using namespace lgtd;
using namespace testutil;

TEST_CASE("tensor arithmetic and shape checks") {
  Tensor a({2, 2, 2}, 1.0);
  Tensor b = random_tensor({2, 2, 2}, 1);
  Tensor c = a + b;
  CHECK(max_diff(c - b, a) < 1e-15);
  CHECK_THROWS_AS(a += Tensor({2, 2, 3}), std::invalid_argument);
  CHECK_THROWS(Tensor({2, 2}, std::vector<double>(3)));
  CHECK(shape_str({3, 4, 5}) == "[3, 4, 5]");
  CHECK(a.reshaped({8}).numel() == 8);
  CHECK_THROWS(a.reshaped({7}));
}

TEST_CASE("autograd accumulates over shared subexpressions") {
  Var x = leaf({1, 2, 2}, 2);
  Var y = ops::sum_all(ops::mul(x, x));  // d/dx = 2x
  y.backward();
  CHECK(max_diff(x.grad(), x.value() * 2.0) < 1e-15);
  // A second backward accumulates into the leaf.
  ops::sum_all(x).backward();
  Tensor expect = x.value() * 2.0 + Tensor(x.shape(), 1.0);
  CHECK(max_diff(x.grad(), expect) < 1e-15);
}

TEST_CASE("NoGradGuard records no graph") {
  Var x = leaf({1, 2, 2}, 3);
  Var y;
  {
    NoGradGuard guard;
    y = ops::sum_all(ops::relu(x));
    CHECK_FALSE(grad_enabled());
  }
  CHECK(grad_enabled());
  CHECK_FALSE(y.requires_grad());
  CHECK_THROWS(ops::relu(x).backward());  // non-scalar without a seed
}

TEST_CASE("conv2d matches the direct-loop oracle") {
  for (int k : {1, 3}) {
    for (int pad : {0, k / 2}) {
      for (std::uint64_t s = 0; s < 4; ++s) {
        Tensor x = random_tensor({3, 6, 5}, 10 + s);
        Tensor w = random_tensor({4, 3, k, k}, 20 + s);
        Tensor b = random_tensor({4}, 30 + s);
        Var out = ops::conv2d(Var(x), Var(w), Var(b), pad);
        CHECK(max_diff(out.value(), naive_conv(x, w, b, pad)) < 1e-12);
      }
    }
  }
}

TEST_CASE("conv2d rejects mismatched shapes") {
  CHECK_THROWS_AS(ops::conv2d(Var(Tensor({3, 4, 4})), Var(Tensor({2, 4, 3, 3})), Var(Tensor({2})), 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(ops::conv2d(Var(Tensor({3, 4, 4})), Var(Tensor({2, 3, 3, 3})), Var(Tensor({3})), 1),
                  std::invalid_argument);
}


TEST_CASE("deformable conv with zero offsets equals ordinary conv") {
  for (std::uint64_t s = 0; s < 10; ++s) {
    Tensor x = random_tensor({3, 7, 6}, 100 + s);
    Tensor w = random_tensor({4, 3, 3, 3}, 200 + s);
    Tensor b = random_tensor({4}, 300 + s);
    Var d = ops::deform_conv2d(Var(x), Var(Tensor({18, 7, 6})), Var(w), Var(b), 1);
    CHECK(max_diff(d.value(), naive_conv(x, w, b, 1)) <= 1e-6);
  }
}

TEST_CASE("deformable conv with integer offset (0, 1) equals conv of the left-shifted input") {
  for (std::uint64_t s = 0; s < 10; ++s) {
    Tensor x = random_tensor({2, 6, 7}, 400 + s);
    Tensor w = random_tensor({3, 2, 3, 3}, 500 + s);
    Tensor b = random_tensor({3}, 600 + s);
    Tensor off({18, 6, 7});
    for (int tap = 0; tap < 9; ++tap)
      for (int p = 0; p < 42; ++p) off[(2 * tap + 1) * 42 + p] = 1.0;
    Tensor shifted({2, 6, 7});
    for (int c = 0; c < 2; ++c)
      for (int y = 0; y < 6; ++y)
        for (int xx = 0; xx < 7; ++xx) shifted.at(c, y, xx) = zero_padded(x, c, y, xx + 1);
    // Column 0 differs by construction: the left tap of the shifted image
    // sees padding while the deformable tap reads x(y, 0).
    const Tensor d = ops::deform_conv2d(Var(x), Var(off), Var(w), Var(b), 1).value();
    const Tensor ref = naive_conv(shifted, w, b, 1);
    double err = 0;
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < 6; ++y)
        for (int xx = 1; xx < 7; ++xx) err = std::max(err, std::abs(d.at(c, y, xx) - ref.at(c, y, xx)));
    CHECK(err <= 1e-6);
  }
}

TEST_CASE("deformable conv with offsets pointing outside the image yields the bias") {
  Tensor x = random_tensor({2, 5, 5}, 7);
  Tensor w = random_tensor({3, 2, 3, 3}, 8);
  Tensor b = random_tensor({3}, 9);
  Tensor off({18, 5, 5}, 100.0);
  Var d = ops::deform_conv2d(Var(x), Var(off), Var(w), Var(b), 1);
  for (int c = 0; c < 3; ++c)
    for (int p = 0; p < 25; ++p) CHECK(d.value()[c * 25 + p] == b[c]);
}

TEST_CASE("deformable conv matches the bilinear oracle at fractional offsets") {
  Tensor x = random_tensor({2, 6, 6}, 11);
  Tensor off = random_tensor({18, 6, 6}, 12, -2.5, 2.5);
  Tensor w = random_tensor({3, 2, 3, 3}, 13);
  Tensor b = random_tensor({3}, 14);
  Var d = ops::deform_conv2d(Var(x), Var(off), Var(w), Var(b), 1);
  CHECK(max_diff(d.value(), naive_deform(x, off, w, b, 1)) < 1e-12);
}

TEST_CASE("deformable conv rejects bad offsets") {
  Var x(Tensor({1, 4, 4}));
  Var w(Tensor({1, 1, 3, 3}));
  Var b(Tensor({1}));
  Tensor off({18, 4, 4});
  off[5] = NAN;
  CHECK_THROWS_AS(ops::deform_conv2d(x, Var(off), w, b, 1), std::invalid_argument);
  CHECK_THROWS_AS(ops::deform_conv2d(x, Var(Tensor({18, 4, 3})), w, b, 1), std::invalid_argument);
}

TEST_CASE("pooling and bilinear upsampling match oracles") {
  Tensor x = random_tensor({2, 6, 4}, 21);
  CHECK(max_diff(ops::avg_pool2(Var(x)).value(), naive_avg_pool2(x)) < 1e-15);
  CHECK(max_diff(ops::upsample_bilinear2(Var(x)).value(), naive_upsample2(x)) < 1e-15);
  CHECK_THROWS_AS(ops::avg_pool2(Var(Tensor({1, 5, 4}))), std::invalid_argument);
  Var g = ops::global_avg_pool(Var(x));
  CHECK(g.shape() == Shape{2, 1, 1});
  double m = 0;
  for (int i = 0; i < 24; ++i) m += x[i];
  CHECK(g.value()[0] == doctest::Approx(m / 24).epsilon(1e-14));
}

TEST_CASE("pixel shuffle index oracle and bijectivity") {
  // C=1, r=2, 2x2 input grid: out(i, j) = in(2 (i mod 2) + (j mod 2), i/2, j/2).
  Tensor x = random_tensor({4, 2, 2}, 31);
  Tensor y = ops::pixel_shuffle(Var(x), 2).value();
  REQUIRE(y.shape() == Shape{1, 4, 4});
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) CHECK(y.at(0, i, j) == x.at(2 * (i % 2) + (j % 2), i / 2, j / 2));
  Tensor big = random_tensor({48, 5, 3}, 32);
  Tensor s = pixel_shuffle_tensor(big, 4);
  CHECK(s.shape() == Shape{3, 20, 12});
  CHECK(pixel_unshuffle(s, 4) == big);
  Tensor img = random_tensor({3, 8, 8}, 33);
  CHECK(pixel_shuffle_tensor(pixel_unshuffle(img, 2), 2) == img);
}

TEST_CASE("window attention matches the dense oracle") {
  for (auto [c, heads, win] : std::vector<std::tuple<int, int, int>>{{2, 1, 2}, {4, 2, 2}, {6, 3, 4}}) {
    Tensor q = random_tensor({c, 8, 4}, 40 + c), k = random_tensor({c, 8, 4}, 50 + c), v = random_tensor({c, 8, 4}, 60 + c);
    Var out = ops::window_attention(Var(q), Var(k), Var(v), heads, win);
    CHECK(max_diff(out.value(), naive_window_attention(q, k, v, heads, win)) < 1e-12);
  }
}

TEST_CASE("window attention with window 1 returns v") {
  for (std::uint64_t s = 0; s < 10; ++s) {
    Tensor q = random_tensor({4, 3, 5}, 70 + s), k = random_tensor({4, 3, 5}, 80 + s), v = random_tensor({4, 3, 5}, 90 + s);
    CHECK(max_diff(ops::window_attention(Var(q), Var(k), Var(v), 2, 1).value(), v) <= 1e-12);
  }
}

TEST_CASE("attention rows sum to one") {
  Tensor q = random_tensor({4, 8, 8}, 91, -3, 3), k = random_tensor({4, 8, 8}, 92, -3, 3);
  for (int head = 0; head < 2; ++head) {
    Tensor p = attention_weights(q, k, 2, 4, head, 1, 0);
    REQUIRE(p.shape() == Shape{16, 16});
    for (int r = 0; r < 16; ++r) {
      double s = 0;
      for (int j = 0; j < 16; ++j) s += p[r * 16 + j];
      CHECK(std::abs(s - 1) < 1e-6);
    }
  }
}

TEST_CASE("window attention rejects indivisible sizes") {
  Var t(Tensor({4, 6, 6}));
  CHECK_THROWS_AS(ops::window_attention(t, t, t, 2, 4), std::invalid_argument);
  CHECK_THROWS_AS(ops::window_attention(t, t, t, 3, 2), std::invalid_argument);
}

TEST_CASE("layer norm over channels matches the oracle") {
  Tensor x = random_tensor({5, 3, 4}, 93);
  Tensor g = random_tensor({5}, 94), b = random_tensor({5}, 95);
  Tensor y = ops::layer_norm_channels(Var(x), Var(g), Var(b)).value();
  for (int yy = 0; yy < 3; ++yy)
    for (int xx = 0; xx < 4; ++xx) {
      double m = 0, v = 0;
      for (int c = 0; c < 5; ++c) m += x.at(c, yy, xx) / 5;
      for (int c = 0; c < 5; ++c) v += (x.at(c, yy, xx) - m) * (x.at(c, yy, xx) - m) / 5;
      for (int c = 0; c < 5; ++c) {
        CHECK(std::abs(y.at(c, yy, xx) - ((x.at(c, yy, xx) - m) / std::sqrt(v + 1e-5) * g[c] + b[c])) < 1e-12);
      }
    }
}

TEST_CASE("l1 loss examples") {
  Tensor a = random_tensor({3, 2, 2}, 96);
  CHECK(ops::l1_loss(Var(a), Var(a)).value()[0] == 0.0);
  CHECK(ops::l1_loss(Var(Tensor({3, 2, 2}, 0.5)), Var(Tensor({3, 2, 2}))).value()[0] == 0.5);
  Tensor b = random_tensor({3, 2, 2}, 97);
  double m = 0;
  for (int i = 0; i < 12; ++i) m += std::abs(a[i] - b[i]) / 12;
  CHECK(ops::l1_loss(Var(a), Var(b)).value()[0] == doctest::Approx(m).epsilon(1e-14));
  CHECK_THROWS_AS(ops::l1_loss(Var(a), Var(Tensor({3, 2, 3}))), std::invalid_argument);
}

// ----- gradient checks -----

namespace {

double check(const ScalarFn& f, const std::vector<Var>& in, double eps = 1e-6) {
  const GradCheckResult r = grad_check(f, in, eps, 64, 1);
  INFO(r.worst);
  return r.max_rel_error;
}

}  // namespace

TEST_CASE("grad_check on a linear op is exact to rounding") {
  Var x = leaf({2, 3, 3}, 100);
  const double e = check([](const std::vector<Var>& v) { return probe(ops::scale(v[0], 3.0), 5); }, {x});
  CHECK(e < 1e-9);
}

TEST_CASE("grad_check on l1 loss away from kinks") {
  Var x = leaf({2, 3, 3}, 101);
  Tensor t = x.value() + random_tensor({2, 3, 3}, 102, 0.1, 0.5);
  CHECK(check([t](const std::vector<Var>& v) { return ops::l1_loss(v[0], Var(t)); }, {x}) < 1e-6);
}

TEST_CASE("grad_check on a sigmoid composition") {
  Var x = leaf({2, 3, 3}, 103);
  const double e =
      check([](const std::vector<Var>& v) { return probe(ops::sigmoid(ops::scale(ops::sigmoid(v[0]), 2.0)), 6); }, {x},
            1e-5);
  CHECK(e < 1e-7);
}

TEST_CASE("elementwise and structural ops pass grad_check") {
  Var a = leaf({3, 4, 4}, 110), b = leaf({3, 4, 4}, 111), s = leaf({3, 1, 1}, 112);
  auto f = [](const std::vector<Var>& v) {
    Var x = ops::add(ops::mul(v[0], v[1]), ops::sub(v[0], ops::scale(v[1], 0.3)));
    x = ops::leaky_relu(x, 0.1);
    x = ops::add(ops::relu(x), ops::mul_channel(x, v[2]));
    x = ops::concat_channels({x, ops::slice_channels(v[0], 1, 3)});
    x = ops::upsample_bilinear2(ops::avg_pool2(x));
    x = ops::add(x, ops::mul_channel(x, ops::global_avg_pool(x)));
    x = ops::clamp(x, -0.8, 0.8);
    return probe(x, 7);
  };
  CHECK(check(f, {a, b, s}) < 1e-6);
}

TEST_CASE("conv2d passes grad_check") {
  Var x = leaf({3, 5, 6}, 120), w = leaf({4, 3, 3, 3}, 121), b = leaf({4}, 122), w1 = leaf({2, 4, 1, 1}, 123),
      b1 = leaf({2}, 124);
  auto f = [](const std::vector<Var>& v) { return probe(ops::conv2d(ops::conv2d(v[0], v[1], v[2], 1), v[3], v[4], 0), 8); };
  CHECK(check(f, {x, w, b, w1, b1}) < 1e-6);
}

TEST_CASE("deformable conv passes grad_check away from integer sampling points") {
  // Offsets with fractional parts in [0.2, 0.8] keep every sample off the kinks.
  Tensor off = random_tensor({18, 5, 5}, 130, 0.2, 0.8);
  std::mt19937_64 rng(131);
  for (double& o : off.values()) o += static_cast<int>(rng() % 5) - 2;
  Var x = leaf({2, 5, 5}, 132), o(off, true), w = leaf({3, 2, 3, 3}, 133), b = leaf({3}, 134);
  auto f = [](const std::vector<Var>& v) { return probe(ops::deform_conv2d(v[0], v[1], v[2], v[3], 1), 9); };
  CHECK(check(f, {x, o, w, b}) < 1e-4);
}

TEST_CASE("layer norm, window attention and pixel shuffle pass grad_check") {
  Var x = leaf({4, 4, 4}, 140), g = leaf({4}, 141), bt = leaf({4}, 142), k = leaf({4, 4, 4}, 143), v = leaf({4, 4, 4}, 144);
  auto f = [](const std::vector<Var>& in) {
    Var n = ops::layer_norm_channels(in[0], in[1], in[2]);
    Var a = ops::window_attention(n, in[3], in[4], 2, 2);
    return probe(ops::pixel_shuffle(a, 2), 10);
  };
  CHECK(check(f, {x, g, bt, k, v}) < 1e-6);
}

TEST_CASE("grad_check flags a wrong backward") {
  // y = x^2 with a backward that returns x instead of 2x.
  auto bad_square = [](const Var& x) {
    Tensor y = x.value();
    for (double& v : y.values()) v *= v;
    return make_result(std::move(y), {x}, [](Node& self) {
      Tensor& g = self.inputs[0]->grad_buffer();
      for (std::size_t i = 0; i < g.numel(); ++i) g[i] += self.grad[i] * self.inputs[0]->value[i];
    });
  };
  Var x = leaf({1, 3, 3}, 150, 0.5, 1.5);
  auto f = [&](const std::vector<Var>& in) { return probe(bad_square(in[0]), 11); };
  CHECK(grad_check(f, {x}).max_rel_error > 0.4);
}
