#pragma once

#include <cmath>
#include <functional>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include "lgtd/training.hpp"

namespace lgtd {

/// Published numbers for one ablation row; reference only, never asserted.
struct PaperReference {
  double psnr = std::numeric_limits<double>::quiet_NaN();
  double params_m = std::numeric_limits<double>::quiet_NaN();
  double gflops = std::numeric_limits<double>::quiet_NaN();
};

struct AblationEntry {
  std::string name;   // "Full", "Model-1", ...
  std::string table;  // "IV" ... "VIII"; "all" for Full
  std::string description;
  std::function<void(ModelConfig&)> apply;  // delta on top of a base config
  PaperReference paper;
};

const std::vector<AblationEntry>& ablation_registry();
/// Throws std::invalid_argument listing the known names.
const AblationEntry& find_ablation(const std::string& name);
ModelConfig ablation_config(const AblationEntry& entry, const ModelConfig& base);

struct AblationResult {
  std::string name;
  std::size_t params = 0;
  double gflops = 0;  // analytic, at the stats input size
  int iterations = 0;
  double final_loss = std::numeric_limits<double>::quiet_NaN();
  double val_psnr = std::numeric_limits<double>::quiet_NaN();
  double val_ssim = std::numeric_limits<double>::quiet_NaN();
  double seconds = 0;
  std::string status = "ok";
};

/// Builds the entry's model from `base`, trains it for `train_cfg`'s budget on
/// `train` and validates on `val`. Failures are reported in `status`, not thrown.
AblationResult run_ablation(const AblationEntry& entry, const ModelConfig& base, const TrainConfig& train_cfg,
                            const TrainSet& train, const TrainSet& val, const EvalProtocol& protocol,
                            int stats_size = 160);

/// Rows grouped per table with the full model repeated as each table's
/// baseline row; a lone Full result gives a single row.
void write_ablation_csv(std::ostream& out, const std::vector<AblationResult>& results, double bicubic_psnr);

}  // namespace lgtd
