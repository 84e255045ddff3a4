#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "lgtd/metrics.hpp"
#include "lgtd/model.hpp"

namespace lgtd {

struct TrainConfig {
  int batch_size = 4;
  int patch_size = 64;  // LR patch side
  double lr_init = 1e-4;
  int halve_every = 10;  // epochs
  int epochs = 50;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  int iterations = 0;       // total budget; 0 means epochs * iterations per epoch
  int iters_per_epoch = 0;  // 0 means ceil(training windows / batch size)
  int val_every = 1;        // epochs between validations; 0 disables
  int val_samples = 0;      // 0 means every validation window

  void validate() const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// lr_init * 0.5^floor(epoch / halve_every); no floor.
double lr_at(int epoch, const TrainConfig& cfg);

/// Mean absolute difference; throws on shape mismatch.
double l1_distance(const Tensor& sr, const Tensor& gt);

/// Training windows cut from HR scenes: every 2N+1 window with `stride`
/// between starts, degraded once up front.
struct TrainSet {
  std::vector<PairedSample> samples;
};

TrainSet make_windows(const std::vector<Clip>& hr_scenes, int half_frames, int scale, int stride = 1);

/// Adam with bias correction. Parameters that no backward pass has reached
/// yet are skipped.
class Adam {
 public:
  Adam(ParameterSet& params, double beta1, double beta2, double eps);

  void step(double lr);
  long long steps() const { return steps_; }
  void set_steps(long long s) { steps_ = s; }
  std::vector<Tensor>& first_moments() { return m_; }
  std::vector<Tensor>& second_moments() { return v_; }
  const std::vector<Tensor>& first_moments() const { return m_; }
  const std::vector<Tensor>& second_moments() const { return v_; }

 private:
  ParameterSet& params_;
  double beta1_, beta2_, eps_;
  long long steps_ = 0;
  std::vector<Tensor> m_, v_;
};

struct LogRow {
  int iter = 0;  // 1-based
  int epoch = 0;
  double lr = 0;
  double loss = 0;
  double val_psnr = std::numeric_limits<double>::quiet_NaN();
  double val_ssim = std::numeric_limits<double>::quiet_NaN();
  double wallclock = 0;  // seconds since run() started
};

void write_log_header(std::ostream& out);
void write_log_row(std::ostream& out, const LogRow& row);

/// Raised when the loss turns non-finite; the message carries the batch
/// window indices, learning rate and gradient norms.
class NonFiniteLoss : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ValMetrics {
  double psnr = 0;
  double ssim = 0;
};

/// Mean metric over the full-frame predictions of `val` windows.
ValMetrics validate_predictor(const Predictor& predict, const std::vector<PairedSample>& val,
                              const EvalProtocol& protocol, int max_samples = 0);
/// validate_predictor with the model's clamped inference.
ValMetrics validate_model(const LgtdModel& model, const std::vector<PairedSample>& val, const EvalProtocol& protocol,
                          int max_samples = 0);

class Trainer {
 public:
  Trainer(LgtdModel& model, const TrainConfig& cfg);

  const TrainConfig& config() const { return cfg_; }
  int iterations_per_epoch(const TrainSet& train) const;
  int total_iterations(const TrainSet& train) const;

  /// One optimisation step on a freshly drawn batch; returns the batch loss.
  double step(const TrainSet& train, double lr);

  struct Hooks {
    std::function<void(const LogRow&)> on_row;
    std::function<void(int epoch)> on_epoch_end;  // after validation
  };
  /// Runs from the current iteration to the budget.
  std::vector<LogRow> run(const TrainSet& train, const TrainSet* val, const EvalProtocol& protocol, const Hooks& hooks);

  int iteration() const { return iteration_; }
  void set_iteration(int it) { iteration_ = it; }
  Adam& optimizer() { return adam_; }
  const Adam& optimizer() const { return adam_; }
  Rng& rng() { return rng_; }
  const Rng& rng() const { return rng_; }
  LgtdModel& model() { return model_; }

 private:
  LgtdModel& model_;
  TrainConfig cfg_;
  Adam adam_;
  Rng rng_;
  int iteration_ = 0;
};

/// Global L2 norm of all parameter gradients.
double gradient_norm(const ParameterSet& params);

}  // namespace lgtd
