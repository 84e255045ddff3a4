#include "lgtd/ablation.hpp"

#include <chrono>
#include <map>
#include <ostream>
#include <stdexcept>

namespace lgtd {

namespace {

std::vector<AblationEntry> build_registry() {
  auto ref = [](double psnr, double params_m, double gflops) { return PaperReference{psnr, params_m, gflops}; };
  const double none = std::numeric_limits<double>::quiet_NaN();
  return {
      {"Full", "all", "both TDMs with differences, bidirectional, DCUs, hybrid LSAB", [](ModelConfig&) {},
       ref(35.38, 20.73, 647.80)},
      {"Model-1", "IV", "short-term module only", [](ModelConfig& c) { c.use_ltdm = false; }, ref(35.28, 18.72, 481.02)},
      {"Model-2", "IV", "long-term module only", [](ModelConfig& c) { c.use_stdm = false; }, ref(35.34, 19.69, 633.83)},
      {"Model-3", "V", "short-term concat, long-term diff", [](ModelConfig& c) { c.stdm_mode = FusionMode::Concat; },
       ref(35.33, 20.73, 647.98)},
      {"Model-4", "V", "short-term diff, long-term concat", [](ModelConfig& c) { c.ltdm_mode = FusionMode::Concat; },
       ref(35.29, 20.79, 651.58)},
      {"Model-5", "V", "concat in both modules",
       [](ModelConfig& c) {
         c.stdm_mode = FusionMode::Concat;
         c.ltdm_mode = FusionMode::Concat;
       },
       ref(35.28, 20.8, 651.75)},
      {"Model-6", "VI", "forward activation only", [](ModelConfig& c) { c.ltdm_direction = Direction::Forward; },
       ref(35.15, 20.73, 636.23)},
      {"Model-7", "VI", "backward activation only", [](ModelConfig& c) { c.ltdm_direction = Direction::Backward; },
       ref(35.28, 20.73, 636.23)},
      {"Model-8", "VII", "no DCU, concatenate with spatial feature and fuse by 3x3 conv",
       [](ModelConfig& c) { c.use_dcu = false; }, ref(35.31, 20.47, 641.18)},
      {"Model-9", "VIII", "residual-block reconstruction", [](ModelConfig& c) { c.recon_mode = ReconMode::ResBlock; },
       ref(34.83, 6.88, none)},
      {"Model-10", "VIII", "window attention only", [](ModelConfig& c) { c.recon_mode = ReconMode::LaOnly; },
       ref(35.26, 15.15, none)},
      {"Model-11", "VIII", "channel attention only", [](ModelConfig& c) { c.recon_mode = ReconMode::SaOnly; },
       ref(34.72, 13.06, none)},
  };
}

void write_number(std::ostream& out, double v) {
  if (!std::isnan(v)) out << format_metric(v);
}

}  // namespace

const std::vector<AblationEntry>& ablation_registry() {
  static const std::vector<AblationEntry> registry = build_registry();
  return registry;
}

const AblationEntry& find_ablation(const std::string& name) {
  std::string known;
  for (const AblationEntry& e : ablation_registry()) {
    if (e.name == name) return e;
    known += (known.empty() ? "" : ", ") + e.name;
  }
  throw std::invalid_argument("unknown ablation model '" + name + "' (known: " + known + ")");
}

ModelConfig ablation_config(const AblationEntry& entry, const ModelConfig& base) {
  ModelConfig c = base;
  entry.apply(c);
  c.validate();
  return c;
}

AblationResult run_ablation(const AblationEntry& entry, const ModelConfig& base, const TrainConfig& train_cfg,
                            const TrainSet& train, const TrainSet& val, const EvalProtocol& protocol,
                            int stats_size) {
  AblationResult r;
  r.name = entry.name;
  const auto start = std::chrono::steady_clock::now();
  try {
    const ModelConfig cfg = ablation_config(entry, base);
    r.params = param_count(cfg);
    r.gflops = flops_estimate(cfg, stats_size, stats_size) / 1e9;
    LgtdModel model(cfg, train_cfg.seed);
    TrainConfig tc = train_cfg;
    tc.val_every = 0;  // one validation at the end
    Trainer trainer(model, tc);
    const auto rows = trainer.run(train, nullptr, protocol, {});
    r.iterations = trainer.iteration();
    if (!rows.empty()) r.final_loss = rows.back().loss;
    const ValMetrics m = validate_model(model, val.samples, protocol, tc.val_samples);
    r.val_psnr = m.psnr;
    r.val_ssim = m.ssim;
  } catch (const std::exception& e) {
    r.status = std::string("failed: ") + e.what();
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

void write_ablation_csv(std::ostream& out, const std::vector<AblationResult>& results, double bicubic_psnr) {
  out << "table,model,description,params,gflops,iterations,final_loss,val_psnr,val_ssim,bicubic_psnr,"
         "delta_vs_bicubic,paper_psnr,paper_params_m,paper_gflops,seconds,status\n";
  std::map<std::string, const AblationResult*> by_name;
  for (const AblationResult& r : results) by_name[r.name] = &r;

  auto row = [&](const std::string& table, const AblationResult& r) {
    const AblationEntry& e = find_ablation(r.name);
    out << table << ',' << r.name << ",\"" << e.description << "\"," << r.params << ',';
    write_number(out, r.gflops);
    out << ',' << r.iterations << ',';
    write_number(out, r.final_loss);
    out << ',';
    write_number(out, r.val_psnr);
    out << ',';
    write_number(out, r.val_ssim);
    out << ',';
    write_number(out, bicubic_psnr);
    out << ',';
    write_number(out, r.val_psnr - bicubic_psnr);
    out << ',';
    write_number(out, e.paper.psnr);
    out << ',';
    write_number(out, e.paper.params_m);
    out << ',';
    write_number(out, e.paper.gflops);
    out << ',' << format_metric(r.seconds) << ",\"" << r.status << "\"\n";
  };

  const AblationResult* full = by_name.count("Full") ? by_name["Full"] : nullptr;
  bool any_table = false;
  for (const std::string table : {"IV", "V", "VI", "VII", "VIII"}) {
    bool emitted = false;
    for (const AblationEntry& e : ablation_registry()) {
      if (e.table != table || !by_name.count(e.name)) continue;
      row(table, *by_name[e.name]);
      emitted = true;
    }
    if (emitted && full) row(table, *full);
    any_table |= emitted;
  }
  if (!any_table && full) row("all", *full);
}

}  // namespace lgtd
