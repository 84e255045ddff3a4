#include <doctest.h>

#include "lgtd/gradcheck.hpp"
#include "lgtd/reconstruction.hpp"
#include "test_util.hpp"

using namespace lgtd;
using namespace testutil;

namespace {

Tensor oracle_ca(const ParameterSet& p, const std::string& prefix, const Tensor& x) {
  const int c = x.dim(0);
  Tensor mean({c, 1, 1});
  for (int k = 0; k < c; ++k) {
    double s = 0;
    for (int y = 0; y < x.dim(1); ++y)
      for (int xx = 0; xx < x.dim(2); ++xx) s += x.at(k, y, xx);
    mean[k] = s / (x.dim(1) * x.dim(2));
  }
  Tensor s = naive_sigmoid(pconv(p, prefix + ".up", naive_relu(pconv(p, prefix + ".down", mean))));
  Tensor out = x;
  for (int k = 0; k < c; ++k)
    for (int y = 0; y < x.dim(1); ++y)
      for (int xx = 0; xx < x.dim(2); ++xx) out.at(k, y, xx) *= s[k];
  return out;
}

Tensor slice(const Tensor& x, int begin, int end) {
  const std::size_t plane = static_cast<std::size_t>(x.dim(1)) * x.dim(2);
  Tensor out({end - begin, x.dim(1), x.dim(2)});
  std::copy(x.data() + begin * plane, x.data() + end * plane, out.data());
  return out;
}

Tensor oracle_msa(const ParameterSet& p, const std::string& prefix, const Tensor& x, int heads, int window) {
  const int c = x.dim(0);
  Tensor qkv = pconv(p, prefix + ".qkv", x);
  Tensor a = naive_window_attention(slice(qkv, 0, c), slice(qkv, c, 2 * c), slice(qkv, 2 * c, 3 * c), heads, window);
  return pconv(p, prefix + ".proj", a);
}

Tensor oracle_lsab(const ParameterSet& p, const std::string& prefix, const Tensor& x, const LsabConfig& cfg) {
  Tensor n = naive_layer_norm(x, param(p, prefix + ".norm.gamma"), param(p, prefix + ".norm.beta"));
  Tensor y = add(x, oracle_msa(p, prefix + ".msa", n, cfg.heads, cfg.window));
  return add(y, oracle_ca(p, prefix + ".ca", pconv(p, prefix + ".sa_conv", y)));
}

LsabConfig small_lsab(int blocks = 1) {
  LsabConfig c;
  c.num_blocks = blocks;
  c.heads = 2;
  c.window = 2;
  c.ca_reduction = 2;
  return c;
}

}  // namespace

TEST_CASE("upsample stage count follows log2 of the scale") {
  CHECK(upsample_stages(2) == 1);
  CHECK(upsample_stages(4) == 2);
  CHECK(upsample_stages(8) == 3);
  for (int bad : {0, 1, 3, 6, -4}) CHECK_THROWS_AS(upsample_stages(bad), std::invalid_argument);
}

TEST_CASE("channel attention matches the oracle and validates reduction") {
  ParameterSet p;
  Rng rng(1);
  ChannelAttention ca(p, "ca", 4, 2, rng);
  randomize(p, 2);
  Tensor x = random_tensor({4, 5, 3}, 3);
  CHECK(max_diff(ca(Var(x)).value(), oracle_ca(p, "ca", x)) < 1e-12);
  CHECK(ca.scales(Var(x)).shape() == Shape{4, 1, 1});
  ParameterSet q;
  CHECK_THROWS_AS(ChannelAttention(q, "ca", 4, 8, rng), std::invalid_argument);
}

TEST_CASE("window MSA: zero at init, oracle with random weights, window 1 gives proj(V)") {
  ParameterSet p;
  Rng rng(4);
  WindowAttention msa(p, "msa", 4, 2, 2, rng);
  Tensor x = random_tensor({4, 4, 6}, 5);
  const Tensor init_out = msa(Var(x)).value();
  for (double v : init_out.values()) CHECK(v == 0.0);
  randomize(p, 6);
  CHECK(max_diff(msa(Var(x)).value(), oracle_msa(p, "msa", x, 2, 2)) < 1e-12);

  ParameterSet p1;
  WindowAttention one(p1, "msa", 4, 2, 1, rng);
  randomize(p1, 7);
  Tensor v = slice(pconv(p1, "msa.qkv", x), 8, 12);
  CHECK(max_diff(one(Var(x)).value(), pconv(p1, "msa.proj", v)) < 1e-12);

  ParameterSet bad;
  CHECK_THROWS_AS(WindowAttention(bad, "msa", 4, 3, 2, rng), std::invalid_argument);
}

TEST_CASE("window MSA only mixes tokens inside a window") {
  ParameterSet p;
  Rng rng(8);
  WindowAttention msa(p, "msa", 2, 1, 4, rng);
  randomize(p, 9);
  Tensor x = random_tensor({2, 8, 8}, 10), x2 = x;
  x2.at(0, 1, 1) += 1.0;  // top-left window only
  Tensor a = msa(Var(x)).value(), b = msa(Var(x2)).value();
  for (int c = 0; c < 2; ++c)
    for (int y = 0; y < 8; ++y)
      for (int xx = 0; xx < 8; ++xx) {
        if (y < 4 && xx < 4) continue;
        CHECK(a.at(c, y, xx) == b.at(c, y, xx));
      }
  CHECK(max_diff(a, b) > 0);
}

TEST_CASE("LSAB: identity at init and composition of both branches") {
  ParameterSet p;
  Rng rng(11);
  LsabConfig cfg = small_lsab();
  Lsab block(p, "lsab", 4, cfg, ReconMode::Hybrid, rng);
  Tensor x = random_tensor({4, 4, 4}, 12);
  CHECK(block(Var(x)).value() == x);
  randomize(p, 13);
  CHECK(max_diff(block(Var(x)).value(), oracle_lsab(p, "lsab", x, cfg)) < 1e-12);
  CHECK(max_diff(block(Var(x)).value(), block.short_branch(block.long_branch(Var(x))).value()) == 0.0);
}

TEST_CASE("LSAB ablation modes keep the right sub-blocks") {
  LsabConfig cfg = small_lsab();
  Rng rng(14);
  Tensor x = random_tensor({4, 4, 4}, 15);

  ParameterSet la;
  Lsab l(la, "lsab", 4, cfg, ReconMode::LaOnly, rng);
  randomize(la, 16);
  CHECK_THROWS(la.find("lsab.sa_conv.weight"));
  Tensor n = naive_layer_norm(x, param(la, "lsab.norm.gamma"), param(la, "lsab.norm.beta"));
  CHECK(max_diff(l(Var(x)).value(), add(x, oracle_msa(la, "lsab.msa", n, 2, 2))) < 1e-12);

  ParameterSet sa;
  Lsab s(sa, "lsab", 4, cfg, ReconMode::SaOnly, rng);
  randomize(sa, 17);
  CHECK_THROWS(sa.find("lsab.msa.qkv.weight"));
  CHECK(max_diff(s(Var(x)).value(), add(x, oracle_ca(sa, "lsab.ca", pconv(sa, "lsab.sa_conv", x)))) < 1e-12);

  ParameterSet rb;
  Lsab r(rb, "lsab", 4, cfg, ReconMode::ResBlock, rng);
  randomize(rb, 18);
  CHECK(rb.size() == 4);
  CHECK(max_diff(r(Var(x)).value(), pres(rb, "lsab.res", x)) < 1e-12);
}

TEST_CASE("reconstructor: shape, zero output at init, oracle with random weights") {
  for (int scale : {2, 4}) {
    ParameterSet p;
    Rng rng(19);
    LsabConfig cfg = small_lsab(2);
    Reconstructor rec(p, "recon", 4, scale, cfg, ReconMode::Hybrid, rng);
    Tensor x = random_tensor({4, 4, 6}, 20);
    Tensor out = rec(Var(x)).value();
    CHECK(out.shape() == Shape{3, 4 * scale, 6 * scale});
    for (double v : out.values()) CHECK(v == 0.0);

    randomize(p, 21);
    Tensor ref = pconv(p, "recon.body", oracle_lsab(p, "recon.lsab1", oracle_lsab(p, "recon.lsab0", x, cfg), cfg));
    for (int s = 0; s < upsample_stages(scale); ++s)
      ref = naive_leaky(naive_pixel_shuffle(pconv(p, "recon.up" + std::to_string(s), ref), 2), 0.1);
    ref = pconv(p, "recon.to_rgb", ref);
    CHECK(max_diff(rec(Var(x)).value(), ref) < 1e-10);
  }
}

TEST_CASE("constant features give a scale-periodic image away from the border") {
  ParameterSet p;
  Rng rng(22);
  Reconstructor rec(p, "recon", 4, 2, small_lsab(), ReconMode::Hybrid, rng);
  randomize(p, 23);
  Tensor x({4, 16, 16});
  for (int c = 0; c < 4; ++c)
    for (int i = 0; i < 256; ++i) x[c * 256 + i] = 0.1 * (c + 1);
  Tensor out = rec(Var(x)).value();
  // LR halo: sa_conv, body and up0 each add one pixel (3 LR = 6 HR), plus
  // to_rgb. Pixel shuffle makes the interior periodic with period r.
  for (int c = 0; c < 3; ++c)
    for (int y = 8; y < 24; ++y)
      for (int xx = 8; xx < 24; ++xx) CHECK(std::abs(out.at(c, y, xx) - out.at(c, 8 + y % 2, 8 + xx % 2)) < 1e-12);
}

TEST_CASE("reconstructor passes grad_check") {
  ParameterSet p;
  Rng rng(24);
  Reconstructor rec(p, "recon", 4, 2, small_lsab(), ReconMode::Hybrid, rng);
  randomize(p, 25, 0.3);
  std::vector<Var> in = leaves(p);
  in.push_back(leaf({4, 8, 8}, 26));
  const std::size_t np = p.size();
  auto f = [&rec, np](const std::vector<Var>& v) { return probe(rec(v[np]), 27); };
  const GradCheckResult r = grad_check(f, in, 1e-6, 96, 28);
  INFO(r.worst);
  CHECK(r.max_rel_error < 1e-4);
}
