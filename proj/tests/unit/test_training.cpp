#include <doctest.h>

#include <sstream>

#include "lgtd/ablation.hpp"
#include "lgtd/training.hpp"
#include "test_util.hpp"

using namespace lgtd;
using namespace testutil;

namespace {

std::vector<Clip> synth_set(int count, int size, int frames, std::uint64_t seed) {
  SynthParams sp;
  sp.height = sp.width = size;
  sp.frames = frames;
  std::vector<Clip> out;
  for (int i = 0; i < count; ++i) {
    Clip c = synth_scene(seed + i, sp);
    c.scene_id = "s" + std::to_string(i);
    out.push_back(std::move(c));
  }
  return out;
}

TrainConfig micro_train(int iterations) {
  TrainConfig tc;
  tc.batch_size = 2;
  tc.patch_size = 8;
  tc.lr_init = 1e-3;
  tc.iterations = iterations;
  tc.iters_per_epoch = 10;
  tc.seed = 5;
  return tc;
}

std::vector<double> flat_params(const ParameterSet& p) {
  std::vector<double> out;
  for (const auto& [name, v] : p.entries()) out.insert(out.end(), v.value().values().begin(), v.value().values().end());
  return out;
}

}  // namespace

TEST_CASE("step-halving learning rate schedule") {
  TrainConfig c;
  c.lr_init = 1e-4;
  c.halve_every = 10;
  CHECK(lr_at(0, c) == 1e-4);
  CHECK(lr_at(9, c) == 1e-4);
  CHECK(lr_at(10, c) == 5e-5);
  CHECK(lr_at(25, c) == 2.5e-5);
  CHECK(lr_at(49, c) == 1e-4 / 16);
  CHECK_THROWS_AS(lr_at(-1, c), std::invalid_argument);
}

TEST_CASE("train config validation names the field") {
  TrainConfig c;
  c.batch_size = 0;
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("train.batchSize"), std::invalid_argument);
  c = {};
  c.adam_beta2 = 1.0;
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("train.adamBeta2"), std::invalid_argument);
  c = {};
  c.lr_init = 0;
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("train.lrInit"), std::invalid_argument);
}

TEST_CASE("L1 distance examples") {
  CHECK(l1_distance(Tensor({1, 2, 2}, 0.25), Tensor({1, 2, 2}, 0.75)) == 0.5);
  Tensor a({1, 1, 4}, std::vector<double>{0, 1, 2, 3}), b({1, 1, 4}, std::vector<double>{1, 1, 1, 1});
  CHECK(l1_distance(a, b) == 1.0);
  CHECK_THROWS_AS(l1_distance(a, Tensor({1, 1, 3})), std::invalid_argument);
}

TEST_CASE("Adam matches a hand-rolled reference and skips unreached parameters") {
  ParameterSet p;
  Var w = p.add("w", Tensor({3}, std::vector<double>{1.0, -2.0, 0.5}));
  Var unused = p.add("unused", Tensor({2}, 7.0));
  Adam adam(p, 0.9, 0.999, 1e-8);
  std::vector<double> ref = {1.0, -2.0, 0.5}, m(3, 0), v(3, 0);
  for (int t = 1; t <= 5; ++t) {
    p.zero_grad();
    // loss = sum w^3 / 3, grad = w^2
    Tensor g({3});
    for (int i = 0; i < 3; ++i) g[i] = w.value()[i] * w.value()[i];
    w.mutable_grad() = g;
    adam.step(0.1);
    for (int i = 0; i < 3; ++i) {
      const double gi = ref[i] * ref[i];
      m[i] = 0.9 * m[i] + 0.1 * gi;
      v[i] = 0.999 * v[i] + 0.001 * gi * gi;
      ref[i] -= 0.1 * (m[i] / (1 - std::pow(0.9, t))) / (std::sqrt(v[i] / (1 - std::pow(0.999, t))) + 1e-8);
    }
    for (int i = 0; i < 3; ++i) CHECK(w.value()[i] == doctest::Approx(ref[i]).epsilon(1e-14));
  }
  CHECK(adam.steps() == 5);
  CHECK(unused.value() == Tensor({2}, 7.0));
  for (double x : adam.first_moments()[1].values()) CHECK(x == 0.0);
}

TEST_CASE("Adam with an all-zero gradient leaves fresh parameters unchanged") {
  ParameterSet p;
  Var w = p.add("w", Tensor({4}, 0.3));
  Adam adam(p, 0.9, 0.999, 1e-8);
  w.mutable_grad();  // reached, but the gradient is zero
  adam.step(0.1);
  CHECK(w.value() == Tensor({4}, 0.3));
}

TEST_CASE("make_windows slides over scenes and degrades once") {
  auto scenes = synth_set(2, 32, 7, 1);
  TrainSet t = make_windows(scenes, 2, 4);
  REQUIRE(t.samples.size() == 6);
  Clip lr = degrade(scenes[1], 4);
  const PairedSample& s = t.samples[4];
  CHECK(s.lr.start_index == 1);
  CHECK(s.hr == scenes[1].frames[3]);
  for (int k = 0; k < 5; ++k) CHECK(s.lr.frames[k] == lr.frames[1 + k]);
  CHECK(make_windows(scenes, 2, 4, 2).samples.size() == 4);
  CHECK_THROWS_AS(make_windows(synth_set(1, 32, 3, 1), 2, 4), std::invalid_argument);
}

TEST_CASE("identical seeds give bitwise-identical training") {
  TrainSet train = make_windows(synth_set(4, 32, 3, 10), 1, 2);
  std::vector<double> losses[2], params[2];
  for (int run = 0; run < 2; ++run) {
    LgtdModel m(micro_config(), 3);
    Trainer t(m, micro_train(6));
    for (const LogRow& r : t.run(train, nullptr, EvalProtocol{}, {})) losses[run].push_back(r.loss);
    params[run] = flat_params(m.parameters());
  }
  CHECK(losses[0] == losses[1]);
  CHECK(params[0] == params[1]);
}

TEST_CASE("micro model training reduces the loss") {
  TrainSet train = make_windows(synth_set(32, 32, 3, 100), 1, 2);
  LgtdModel m(micro_config(), 4);
  TrainConfig tc = micro_train(200);
  tc.batch_size = 4;
  Trainer t(m, tc);
  auto rows = t.run(train, nullptr, EvalProtocol{}, {});
  REQUIRE(rows.size() == 200);
  double first = 0, last = 0;
  for (int i = 0; i < 20; ++i) {
    first += rows[i].loss / 20;
    last += rows[180 + i].loss / 20;
  }
  INFO(first, " -> ", last);
  CHECK(last < first);
}

TEST_CASE("run() logs epochs, halves the rate and validates at epoch ends") {
  auto scenes = synth_set(3, 32, 3, 200);
  TrainSet train = make_windows(scenes, 1, 2), val = make_windows(synth_set(1, 32, 3, 300), 1, 2);
  LgtdModel m(micro_config(), 5);
  TrainConfig tc = micro_train(25);
  tc.halve_every = 1;
  Trainer t(m, tc);
  int epochs_seen = 0;
  Trainer::Hooks hooks;
  hooks.on_epoch_end = [&](int) { ++epochs_seen; };
  EvalProtocol ep;
  ep.border_crop = 0;
  auto rows = t.run(train, &val, ep, hooks);
  REQUIRE(rows.size() == 25);
  CHECK(rows[0].iter == 1);
  CHECK(rows[9].epoch == 0);
  CHECK(rows[10].epoch == 1);
  CHECK(rows[10].lr == tc.lr_init / 2);
  CHECK(rows[20].lr == tc.lr_init / 4);
  CHECK(epochs_seen == 3);
  CHECK(std::isnan(rows[8].val_psnr));
  CHECK(std::isfinite(rows[9].val_psnr));
  CHECK(std::isfinite(rows[24].val_psnr));  // budget end
  CHECK(t.iteration() == 25);
  CHECK(t.run(train, &val, ep, hooks).empty());  // already at budget
}

TEST_CASE("a non-finite loss aborts with batch, rate and gradient diagnostics") {
  TrainSet train = make_windows(synth_set(2, 32, 3, 400), 1, 2);
  LgtdModel m(micro_config(), 6);
  m.parameters().find("spatial_conv.bias").mutable_value()[0] = std::nan("");
  Trainer t(m, micro_train(3));
  try {
    t.step(train, 1e-3);
    FAIL("expected NonFiniteLoss");
  } catch (const NonFiniteLoss& e) {
    const std::string msg = e.what();
    CHECK(msg.find("lr 0.001") != std::string::npos);
    CHECK(msg.find("batch windows:") != std::string::npos);
    CHECK(msg.find("spatial_conv.weight=") != std::string::npos);
  }
}

TEST_CASE("log rows: fixed header, round-trippable loss, empty validation fields") {
  std::ostringstream out;
  write_log_header(out);
  LogRow r;
  r.iter = 3;
  r.epoch = 1;
  r.lr = 1e-4;
  r.loss = 0.1234567890123456789;
  r.wallclock = 1.5;
  write_log_row(out, r);
  r.val_psnr = 30.5;
  r.val_ssim = 0.9;
  write_log_row(out, r);
  std::istringstream in(out.str());
  std::string header, row1, row2;
  std::getline(in, header);
  std::getline(in, row1);
  std::getline(in, row2);
  CHECK(header == "iter,epoch,lr,loss,valPSNR,valSSIM,wallclock");
  CHECK(row1.rfind("3,1,0.0001,", 0) == 0);
  CHECK(row1.find(",,,") != std::string::npos);
  const std::string loss_text = row1.substr(11, row1.find(',', 11) - 11);
  CHECK(std::stod(loss_text) == r.loss);
  CHECK(row2.find(",30.500000,0.900000,") != std::string::npos);
}

TEST_CASE("every registry entry survives a forward pass and an optimizer step") {
  TrainSet train = make_windows(synth_set(2, 32, 3, 500), 1, 2);
  for (const AblationEntry& e : ablation_registry()) {
    INFO(e.name);
    LgtdModel m(ablation_config(e, micro_config()), 7);
    const auto before = flat_params(m.parameters());
    Trainer t(m, micro_train(1));
    CHECK(std::isfinite(t.step(train, 1e-3)));
    CHECK(flat_params(m.parameters()) != before);
  }
}
