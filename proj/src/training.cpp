#include "lgtd/training.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace lgtd {

void TrainConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw std::invalid_argument("invalid train config: " + field + " " + why);
  };
  if (batch_size <= 0) fail("train.batchSize", "must be > 0");
  if (patch_size <= 0) fail("train.patchSize", "must be > 0");
  if (!(lr_init > 0)) fail("train.lrInit", "must be > 0");
  if (halve_every <= 0) fail("train.halveEvery", "must be > 0");
  if (epochs <= 0) fail("train.epochs", "must be > 0");
  if (!(adam_beta1 > 0 && adam_beta1 < 1)) fail("train.adamBeta1", "must be in (0, 1)");
  if (!(adam_beta2 > 0 && adam_beta2 < 1)) fail("train.adamBeta2", "must be in (0, 1)");
  if (!(adam_eps > 0)) fail("train.adamEps", "must be > 0");
  if (iterations < 0) fail("train.iterations", "must be >= 0");
  if (iters_per_epoch < 0) fail("train.itersPerEpoch", "must be >= 0");
  if (val_every < 0) fail("train.valEvery", "must be >= 0");
  if (val_samples < 0) fail("train.valSamples", "must be >= 0");
}

double lr_at(int epoch, const TrainConfig& cfg) {
  if (epoch < 0) throw std::invalid_argument("lr_at: epoch must be >= 0");
  return cfg.lr_init * std::pow(0.5, epoch / cfg.halve_every);
}

double l1_distance(const Tensor& sr, const Tensor& gt) {
  require_same_shape(sr, gt, "l1_distance");
  double acc = 0;
  for (std::size_t i = 0; i < sr.numel(); ++i) acc += std::abs(sr[i] - gt[i]);
  return acc / static_cast<double>(sr.numel());
}

TrainSet make_windows(const std::vector<Clip>& hr_scenes, int half_frames, int scale, int stride) {
  if (stride <= 0) throw std::invalid_argument("make_windows: stride must be > 0");
  const int t = 2 * half_frames + 1;
  TrainSet set;
  for (const Clip& scene : hr_scenes) {
    if (scene.length() < t) {
      throw std::invalid_argument("scene '" + scene.scene_id + "' has fewer than " + std::to_string(t) + " frames");
    }
    const Clip lr = degrade(scene, scale);
    for (int s = 0; s + t <= scene.length(); s += stride) {
      PairedSample p;
      p.scale = scale;
      p.lr.scene_id = scene.scene_id;
      p.lr.start_index = scene.start_index + s;
      p.lr.frames.assign(lr.frames.begin() + s, lr.frames.begin() + s + t);
      p.hr = scene.frames[s + half_frames];
      set.samples.push_back(std::move(p));
    }
  }
  return set;
}

Adam::Adam(ParameterSet& params, double beta1, double beta2, double eps)
    : params_(params), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto& [name, p] : params_.entries()) {
    m_.emplace_back(p.shape());
    v_.emplace_back(p.shape());
  }
}

void Adam::step(double lr) {
  ++steps_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(steps_));
  const auto& entries = params_.entries();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    Var p = entries[i].second;
    if (!p.has_grad()) continue;  // never reached by a backward pass
    const Tensor& g = p.grad();
    Tensor& w = p.mutable_value();
    Tensor& m = m_[i];
    Tensor& v = v_[i];
    for (std::size_t k = 0; k < w.numel(); ++k) {
      m[k] = beta1_ * m[k] + (1 - beta1_) * g[k];
      v[k] = beta2_ * v[k] + (1 - beta2_) * g[k] * g[k];
      w[k] -= lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + eps_);
    }
  }
}

void write_log_header(std::ostream& out) { out << "iter,epoch,lr,loss,valPSNR,valSSIM,wallclock\n"; }

void write_log_row(std::ostream& out, const LogRow& r) {
  auto opt = [](double v) -> std::string {
    if (std::isnan(v)) return "";
    return format_metric(v);
  };
  std::ostringstream line;
  line << r.iter << "," << r.epoch << "," << std::setprecision(17) << r.lr << "," << r.loss << "," << opt(r.val_psnr)
       << "," << opt(r.val_ssim) << "," << std::setprecision(6) << std::fixed << r.wallclock << "\n";
  out << line.str();
}

double gradient_norm(const ParameterSet& params) {
  double acc = 0;
  for (const auto& [name, p] : params.entries()) {
    if (!p.has_grad()) continue;
    for (double g : p.grad().values()) acc += g * g;
  }
  return std::sqrt(acc);
}

ValMetrics validate_predictor(const Predictor& predict, const std::vector<PairedSample>& val,
                              const EvalProtocol& protocol, int max_samples) {
  const std::size_t n = max_samples > 0 ? std::min<std::size_t>(val.size(), max_samples) : val.size();
  if (n == 0) throw std::invalid_argument("validation: no samples");
  ValMetrics m;
  for (std::size_t i = 0; i < n; ++i) {
    const Frame sr = predict(val[i].lr);
    const Tensor gt = metric_channels(val[i].hr, protocol);
    const Tensor out = metric_channels(sr, protocol);
    m.psnr += psnr(gt, out, protocol);
    m.ssim += ssim(gt, out, protocol);
  }
  m.psnr /= static_cast<double>(n);
  m.ssim /= static_cast<double>(n);
  return m;
}

ValMetrics validate_model(const LgtdModel& model, const std::vector<PairedSample>& val, const EvalProtocol& protocol,
                          int max_samples) {
  return validate_predictor([&model](const Clip& lr) { return model.infer(lr); }, val, protocol, max_samples);
}

Trainer::Trainer(LgtdModel& model, const TrainConfig& cfg)
    : model_(model),
      cfg_(cfg),
      adam_(model.parameters(), cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps),
      rng_(cfg.seed) {
  cfg_.validate();
}

int Trainer::iterations_per_epoch(const TrainSet& train) const {
  if (cfg_.iters_per_epoch > 0) return cfg_.iters_per_epoch;
  const int n = static_cast<int>(train.samples.size());
  return std::max(1, (n + cfg_.batch_size - 1) / cfg_.batch_size);
}

int Trainer::total_iterations(const TrainSet& train) const {
  return cfg_.iterations > 0 ? cfg_.iterations : cfg_.epochs * iterations_per_epoch(train);
}

double Trainer::step(const TrainSet& train, double lr) {
  if (train.samples.empty()) throw std::invalid_argument("training set is empty");
  ParameterSet& params = model_.parameters();
  params.zero_grad();
  std::uniform_int_distribution<std::size_t> pick(0, train.samples.size() - 1);
  std::vector<std::size_t> batch;
  double loss = 0;
  for (int b = 0; b < cfg_.batch_size; ++b) {
    const std::size_t idx = pick(rng_);
    batch.push_back(idx);
    const PairedSample& s = train.samples[idx];
    const PatchOffset off = draw_patch_offset(s.lr.height(), s.lr.width(), cfg_.patch_size, rng_);
    const AugmentFlags flags = draw_augment_flags(rng_);
    const PairedSample patch = augment(crop_patch(s, cfg_.patch_size, off), flags);
    const Var out = model_.forward(frame_vars(patch.lr));
    const Var l = ops::scale(ops::l1_loss(out, Var(patch.hr)), 1.0 / cfg_.batch_size);
    l.backward();
    loss += l.value()[0];
  }
  if (!std::isfinite(loss)) {
    std::ostringstream msg;
    msg << "non-finite loss " << loss << " at iteration " << iteration_ + 1 << " (lr " << lr << "); batch windows:";
    for (std::size_t i : batch) {
      msg << " " << i << "(" << train.samples[i].lr.scene_id << "@" << train.samples[i].lr.start_index << ")";
    }
    msg << "; global grad norm " << gradient_norm(params) << "; per-parameter grad norms:";
    for (const auto& [name, p] : params.entries()) {
      double acc = 0;
      if (p.has_grad()) {
        for (double g : p.grad().values()) acc += g * g;
      }
      msg << " " << name << "=" << std::sqrt(acc);
    }
    throw NonFiniteLoss(msg.str());
  }
  adam_.step(lr);
  return loss;
}

std::vector<LogRow> Trainer::run(const TrainSet& train, const TrainSet* val, const EvalProtocol& protocol,
                                 const Hooks& hooks) {
  const int per_epoch = iterations_per_epoch(train);
  const int total = total_iterations(train);
  const auto start = std::chrono::steady_clock::now();
  std::vector<LogRow> rows;
  while (iteration_ < total) {
    const int epoch = iteration_ / per_epoch;
    LogRow row;
    row.epoch = epoch;
    row.lr = lr_at(epoch, cfg_);
    row.loss = step(train, row.lr);
    row.iter = ++iteration_;
    const bool epoch_end = iteration_ % per_epoch == 0 || iteration_ == total;
    if (epoch_end && val && !val->samples.empty() && cfg_.val_every > 0 &&
        ((epoch + 1) % cfg_.val_every == 0 || iteration_ == total)) {
      const ValMetrics m = validate_model(model_, val->samples, protocol, cfg_.val_samples);
      row.val_psnr = m.psnr;
      row.val_ssim = m.ssim;
    }
    row.wallclock = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    rows.push_back(row);
    if (hooks.on_row) hooks.on_row(row);
    if (epoch_end && hooks.on_epoch_end) hooks.on_epoch_end(epoch);
  }
  return rows;
}

}  // namespace lgtd
