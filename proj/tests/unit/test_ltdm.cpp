#include <doctest.h>

#include "lgtd/gradcheck.hpp"
#include "lgtd/ltdm.hpp"
#include "test_util.hpp"

using namespace lgtd;
using namespace testutil;

namespace {

AlignedStack random_stack(int t, int c, int h, int w, std::uint64_t seed) {
  AlignedStack s;
  for (int i = 0; i < t; ++i) s.frames.push_back(Var(random_tensor({c, h, w}, seed + i)));
  return s;
}

std::vector<Tensor> values(const std::vector<Var>& v) {
  std::vector<Tensor> out;
  for (const Var& x : v) out.push_back(x.value());
  return out;
}

Tensor oracle_smooth(const ParameterSet& p, const std::vector<Tensor>& seq) {
  return pconv(p, "ltdm.smooth", pconv(p, "ltdm.blend", concat(seq)));
}

Tensor oracle_branch(const ParameterSet& p, const std::string& prefix, const Tensor& d) {
  Tensor local = pconv(p, prefix + ".same_scale", d);
  Tensor prop = naive_upsample2(pconv(p, prefix + ".pooled_scale", naive_avg_pool2(d)));
  return naive_sigmoid(pconv(p, prefix + ".output", add(add(d, local), prop)));
}

ModelConfig ltdm_config(Direction dir = Direction::Both, FusionMode mode = FusionMode::Diff) {
  ModelConfig cfg = micro_config();
  cfg.ltdm_direction = dir;
  cfg.ltdm_mode = mode;
  return cfg;
}

}  // namespace

TEST_CASE("smoothing matches the blend + conv oracle in both directions") {
  ParameterSet p;
  Rng rng(1);
  LongTermModule m(p, "ltdm", 3, 5, ltdm_config(), rng);
  randomize(p, 2);
  AlignedStack s = random_stack(5, 3, 6, 8, 3);
  CHECK(max_diff(m.smooth(s.frames).value(), oracle_smooth(p, values(s.frames))) < 1e-12);
  CHECK(max_diff(m.smooth(s.reversed()).value(), oracle_smooth(p, values(s.reversed()))) < 1e-12);
  CHECK_THROWS_AS(m.smooth({s.frames[0]}), std::invalid_argument);
}

TEST_CASE("cross difference is antisymmetric") {
  Tensor a = random_tensor({2, 4, 4}, 4), b = random_tensor({2, 4, 4}, 5);
  GlobalDifference d = cross_difference(Var(a), Var(b));
  CHECK(d.forward.value() == sub(a, b));
  CHECK(d.backward.value() == sub(b, a));
  CHECK_THROWS_AS(cross_difference(Var(a), Var(Tensor({2, 4, 2}))), std::invalid_argument);
}

TEST_CASE("activation branch: 0.5 at init, oracle with random weights, values in (0,1)") {
  ParameterSet p;
  Rng rng(6);
  LongTermModule m(p, "ltdm", 2, 3, ltdm_config(), rng);
  Tensor d = random_tensor({2, 8, 8}, 7, -3, 3);
  const Tensor init_att = m.activate_forward(Var(d)).value();
  for (double v : init_att.values()) CHECK(v == 0.5);
  randomize(p, 8, 0.5);
  Tensor att = m.activate_forward(Var(d)).value();
  CHECK(max_diff(att, oracle_branch(p, "ltdm.att_forward", d)) < 1e-12);
  CHECK(max_diff(m.activate_backward(Var(d)).value(), oracle_branch(p, "ltdm.att_backward", d)) < 1e-12);
  for (double v : att.values()) CHECK((v > 0 && v < 1));
  CHECK_THROWS_AS(m.activate_forward(Var(Tensor({2, 7, 8}))), std::invalid_argument);
}

TEST_CASE("full pass matches the oracle with random weights") {
  ParameterSet p;
  Rng rng(9);
  ModelConfig cfg = ltdm_config();
  cfg.alpha = 0.3;
  cfg.beta = 0.9;
  LongTermModule m(p, "ltdm", 2, 5, cfg, rng);
  randomize(p, 10, 0.4);
  AlignedStack s = random_stack(5, 2, 8, 8, 11);
  Tensor fl = oracle_smooth(p, values(s.frames)), flr = oracle_smooth(p, values(s.reversed()));
  Tensor att_f = oracle_branch(p, "ltdm.att_forward", sub(fl, flr));
  Tensor att_b = oracle_branch(p, "ltdm.att_backward", sub(flr, fl));
  Tensor gate(att_f.shape());
  for (std::size_t i = 0; i < gate.numel(); ++i) gate[i] = 0.3 * att_f[i] + 0.9 * att_b[i];
  Tensor ref = add(mul(flr, gate), flr);
  LongTermTrace t = m.trace(s);
  CHECK(max_diff(t.gate.value(), gate) < 1e-12);
  CHECK(max_diff(t.output.value(), ref) < 1e-12);
}

TEST_CASE("gate balance: alpha = beta = 0 gives F'_L, init gives 1.5 F'_L") {
  ParameterSet p;
  Rng rng(12);
  LongTermModule m(p, "ltdm", 2, 3, ltdm_config(), rng);
  AlignedStack s = random_stack(3, 2, 4, 4, 13);
  LongTermTrace t = m.trace(s);
  const Tensor& flr = t.smoothed_backward.value();
  CHECK(max_diff(t.output.value(), scaled(flr, 1.5)) < 1e-15);
  m.set_balance(0, 0);
  CHECK(m.forward(s).value() == flr);
  CHECK_THROWS_AS(m.set_balance(-0.1, 0.5), std::invalid_argument);
}

TEST_CASE("modulation stays within [0, alpha + beta] of F'_L") {
  ParameterSet p;
  Rng rng(14);
  ModelConfig cfg = ltdm_config();
  cfg.alpha = 0.7;
  cfg.beta = 0.4;
  LongTermModule m(p, "ltdm", 3, 5, cfg, rng);
  randomize(p, 15, 0.6);
  LongTermTrace t = m.trace(random_stack(5, 3, 8, 8, 16));
  const Tensor& flr = t.smoothed_backward.value();
  for (std::size_t i = 0; i < flr.numel(); ++i) {
    if (flr[i] == 0) continue;
    const double ratio = (t.output.value()[i] - flr[i]) / flr[i];
    CHECK(ratio >= 0.0);
    CHECK(ratio <= 1.1 + 1e-12);
  }
}

TEST_CASE("static sequences give zero global difference; reversal swaps the differences") {
  ParameterSet p;
  Rng rng(17);
  LongTermModule m(p, "ltdm", 2, 5, ltdm_config(), rng);
  randomize(p, 18);
  Var still(random_tensor({2, 8, 8}, 19));
  LongTermTrace t = m.trace(AlignedStack{{still, still, still, still, still}});
  for (double v : t.diff_forward.value().values()) CHECK(v == 0.0);

  AlignedStack s = random_stack(5, 2, 8, 8, 20);
  AlignedStack r{s.reversed()};
  LongTermTrace a = m.trace(s), b = m.trace(r);
  CHECK(a.diff_forward.value() == b.diff_backward.value());
  CHECK(a.smoothed_forward.value() == b.smoothed_backward.value());
}

TEST_CASE("single-direction variants use one branch as the gate") {
  for (Direction dir : {Direction::Forward, Direction::Backward}) {
    ParameterSet p;
    Rng rng(21);
    LongTermModule m(p, "ltdm", 2, 3, ltdm_config(dir), rng);
    randomize(p, 22);
    LongTermTrace t = m.trace(random_stack(3, 2, 8, 8, 23));
    const Var& att = dir == Direction::Forward ? t.att_forward : t.att_backward;
    CHECK(t.gate.value() == att.value());
    const std::string absent = dir == Direction::Forward ? "ltdm.att_backward.output.weight" : "ltdm.att_forward.output.weight";
    CHECK_THROWS(p.find(absent));
    CHECK_THROWS_AS(dir == Direction::Forward ? m.activate_backward(t.diff_forward) : m.activate_forward(t.diff_forward),
                    std::logic_error);
  }
}

TEST_CASE("concat mode fuses the two smoothed streams and feeds both branches") {
  ParameterSet p;
  Rng rng(24);
  LongTermModule m(p, "ltdm", 2, 3, ltdm_config(Direction::Both, FusionMode::Concat), rng);
  randomize(p, 25);
  CHECK(p.find("ltdm.concat_fuse.weight").shape() == Shape{2, 4, 3, 3});
  AlignedStack s = random_stack(3, 2, 8, 8, 26);
  LongTermTrace t = m.trace(s);
  Tensor fused = pconv(p, "ltdm.concat_fuse", concat({t.smoothed_forward.value(), t.smoothed_backward.value()}));
  CHECK(max_diff(t.att_forward.value(), oracle_branch(p, "ltdm.att_forward", fused)) < 1e-12);
  CHECK(max_diff(t.att_backward.value(), oracle_branch(p, "ltdm.att_backward", fused)) < 1e-12);
}

TEST_CASE("long-term module passes grad_check") {
  ParameterSet p;
  Rng rng(27);
  LongTermModule m(p, "ltdm", 2, 3, ltdm_config(), rng);
  randomize(p, 28, 0.3);
  std::vector<Var> in = leaves(p);
  for (int i = 0; i < 3; ++i) in.push_back(leaf({2, 8, 8}, 30 + i));
  const std::size_t np = p.size();
  auto f = [&m, np](const std::vector<Var>& v) {
    return probe(m.forward(AlignedStack{{v[np], v[np + 1], v[np + 2]}}), 5);
  };
  const GradCheckResult r = grad_check(f, in, 1e-6, 96, 6);
  INFO(r.worst);
  CHECK(r.max_rel_error < 1e-5);
}
