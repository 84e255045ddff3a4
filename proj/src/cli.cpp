#include "lgtd/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "lgtd/checkpoint.hpp"
#include "lgtd/plot.hpp"

namespace lgtd {

namespace fs = std::filesystem;

namespace {

fs::path prepare_dir(const fs::path& dir) {
  fs::create_directories(dir);
  return dir;
}

std::string sanitize(std::string s) {
  for (char& c : s)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_' && c != '.') c = '_';
  return s.empty() ? "run" : s;
}

std::vector<Clip> synth_clips(std::uint64_t base_seed, int count, const SynthParams& p) {
  std::vector<Clip> out;
  for (int i = 0; i < count; ++i) {
    Clip c = synth_scene(base_seed + static_cast<std::uint64_t>(i), p);
    c.scene_id = "synth_" + std::to_string(base_seed + i);
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<Clip> load_all(const DatasetIndex& idx) {
  std::vector<Clip> out;
  for (std::size_t s = 0; s < idx.scenes().size(); ++s) out.push_back(idx.load_scene(s));
  return out;
}

DatasetIndex open_dataset(const fs::path& root, std::ostream& log) {
  if (!fs::is_directory(root)) throw std::invalid_argument("dataset directory not found: " + root.string());
  DatasetIndex idx = load_dataset(root);
  for (const RejectedScene& r : idx.rejected()) log << "skipping scene " << r.name << ": " << r.reason << "\n";
  if (idx.scenes().empty()) throw std::invalid_argument("no usable scenes under " + root.string());
  return idx;
}

std::vector<double> moving_average(const std::vector<double>& v, int window) {
  std::vector<double> out(v.size());
  double sum = 0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    sum += v[i];
    if (i >= static_cast<std::size_t>(window)) sum -= v[i - window];
    out[i] = sum / static_cast<double>(std::min<std::size_t>(i + 1, window));
  }
  return out;
}

void write_training_plots(const fs::path& dir, const std::vector<LogRow>& rows) {
  if (rows.empty()) return;
  Series raw{"loss", {}, {}, {0.70, 0.78, 0.92}}, val{"val psnr", {}, {}, palette(1), true, true};
  for (const LogRow& r : rows) {
    raw.x.push_back(r.iter);
    raw.y.push_back(r.loss);
    if (std::isfinite(r.val_psnr)) {
      val.x.push_back(r.iter);
      val.y.push_back(r.val_psnr);
    }
  }
  const int window = std::max(1, std::min(50, static_cast<int>(rows.size()) / 10));
  Series avg{"mean of " + std::to_string(window), raw.x, moving_average(raw.y, window), palette(0)};
  write_plot(dir / "loss.png", PlotSpec{"training loss (L1)", "iteration", "loss", {raw, avg}});
  if (!val.x.empty()) write_plot(dir / "val_psnr.png", PlotSpec{"validation psnr", "iteration", "psnr (dB)", {val}});
}

std::vector<LogRow> read_log_rows(const fs::path& path) {
  std::vector<LogRow> rows;
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() < 4) continue;
    LogRow r;
    r.iter = std::stoi(f[0]);
    r.epoch = std::stoi(f[1]);
    r.lr = std::stod(f[2]);
    r.loss = std::stod(f[3]);
    if (f.size() > 4 && !f[4].empty()) r.val_psnr = std::stod(f[4]);
    if (f.size() > 5 && !f[5].empty()) r.val_ssim = std::stod(f[5]);
    rows.push_back(r);
  }
  return rows;
}

std::string label_for(const fs::path& ckpt) {
  const std::string stem = ckpt.stem().string();
  if ((stem == "checkpoint" || stem == "model") && ckpt.has_parent_path() && !ckpt.parent_path().filename().empty()) {
    return sanitize(ckpt.parent_path().filename().string());
  }
  return sanitize(stem);
}

void print_scene_table(std::ostream& log, const EvalRun& run, Channel ch) {
  log << run.label << " (" << run.frames << " frames)\n";
  for (const SceneResult& s : run.scenes) {
    log << "  " << std::left << std::setw(20) << s.scene << std::right << " psnr" << to_string(ch) << " "
        << format_metric(s.mean_psnr) << "  ssim" << to_string(ch) << " " << format_metric(s.mean_ssim) << "\n";
  }
  const FrameMetrics all = overall_mean(run.scenes);
  log << "  " << std::left << std::setw(20) << "overall" << std::right << " psnr" << to_string(ch) << " "
      << format_metric(all.psnr) << "  ssim" << to_string(ch) << " " << format_metric(all.ssim) << "\n";
}

}  // namespace

fs::path output_root() {
  const char* env = std::getenv(kOutputRootEnv);
  return env && *env ? fs::path(env) : fs::path("runs");
}

fs::path resolve_output(const std::string& out, const std::string& default_name) {
  const fs::path p = out.empty() ? fs::path(default_name) : fs::path(out);
  return p.is_absolute() ? p : output_root() / p;
}

RunConfig resolve_config(const ConfigSource& src) {
  RunConfig cfg = preset_config(src.preset);
  if (!src.config_file.empty()) {
    std::ifstream in(src.config_file);
    if (!in) throw std::invalid_argument("cannot read config file " + src.config_file);
    std::stringstream ss;
    ss << in.rdbuf();
    merge_config_json(cfg, ss.str());
  }
  for (const std::string& o : src.overrides) apply_override(cfg, o);
  cfg.model.validate();
  cfg.train.validate();
  cfg.eval.validate();
  return cfg;
}

SceneSplit load_scenes(const DataSource& src, const RunConfig& cfg) {
  SceneSplit split;
  if (!src.dataset.empty()) {
    std::ostringstream sink;
    const DatasetIndex idx = open_dataset(src.dataset, sink);
    if (auto m = read_manifest(src.dataset)) {
      split.train = load_all(idx.subset(m->train));
      split.val = load_all(idx.subset(m->test));
    } else {
      split.train = load_all(idx);
    }
    return split;
  }
  if (src.synth_clips < 1) throw std::invalid_argument("--synth-clips must be >= 1");
  if (src.val_clips < 0) throw std::invalid_argument("--val-clips must be >= 0");
  SynthParams p;
  p.frames = src.synth_frames > 0 ? src.synth_frames : cfg.model.frames();
  int side = src.synth_size;
  if (side <= 0) {
    const int div = cfg.model.spatial_divisor();
    const int lr = (std::max(cfg.train.patch_size, 16) + div - 1) / div * div;
    side = lr * cfg.model.scale;
  }
  p.height = p.width = side;
  split.train = synth_clips(src.synth_seed, src.synth_clips, p);
  split.val = synth_clips(src.synth_seed + 1000000, src.val_clips, p);
  return split;
}

TrainReport cmd_train(const TrainOptions& opt, std::ostream& log) {
  RunConfig cfg;
  std::optional<Checkpoint> resume;
  if (!opt.resume.empty()) {
    resume = load_checkpoint(opt.resume);
    cfg = resume->config;
    for (const std::string& o : opt.config.overrides) apply_override(cfg, o);
    cfg.train.validate();
    cfg.eval.validate();
  } else {
    cfg = resolve_config(opt.config);
  }
  const fs::path dir = prepare_dir(resolve_output(opt.out, "train"));
  write_config(dir / "config.json", cfg);

  const SceneSplit scenes = load_scenes(opt.data, cfg);
  const TrainSet train = make_windows(scenes.train, cfg.model.half_frames, cfg.model.scale);
  const TrainSet val = make_windows(scenes.val, cfg.model.half_frames, cfg.model.scale);
  log << "training windows " << train.samples.size() << ", validation windows " << val.samples.size() << "\n";

  LgtdModel model(cfg.model, cfg.train.seed);
  Trainer trainer(model, cfg.train);
  if (resume) {
    load_parameters(model, *resume);
    restore_trainer(trainer, *resume);
    log << "resumed at iteration " << trainer.iteration() << "\n";
  }
  log << "parameters " << model.parameters().numel() << ", iterations " << trainer.total_iterations(train) << "\n";

  const fs::path log_path = dir / "log.csv";
  const bool append = resume && fs::exists(log_path);
  std::ofstream csv(log_path, append ? std::ios::app : std::ios::trunc);
  if (!csv) throw std::runtime_error("cannot write " + log_path.string());
  if (!append) write_log_header(csv);

  Trainer::Hooks hooks;
  hooks.on_row = [&](const LogRow& r) {
    write_log_row(csv, r);
    csv.flush();
    if (opt.print_every > 0 && (r.iter % opt.print_every == 0 || std::isfinite(r.val_psnr))) {
      log << "iter " << r.iter << " epoch " << r.epoch << " lr " << r.lr << " loss " << r.loss;
      if (std::isfinite(r.val_psnr)) log << " val psnr " << format_metric(r.val_psnr) << " ssim " << format_metric(r.val_ssim);
      log << "\n";
    }
  };
  hooks.on_epoch_end = [&](int epoch) {
    save_checkpoint(dir / "checkpoint.ckpt", make_checkpoint(model, cfg, &trainer, epoch + 1));
  };
  TrainReport report{dir, trainer.run(train, val.samples.empty() ? nullptr : &val, cfg.eval, hooks)};
  const int epoch = report.rows.empty() ? (resume ? resume->epoch : 0) : report.rows.back().epoch + 1;
  save_checkpoint(dir / "checkpoint.ckpt", make_checkpoint(model, cfg, &trainer, epoch));
  csv.close();
  write_training_plots(dir, append ? read_log_rows(log_path) : report.rows);
  log << "wrote " << (dir / "checkpoint.ckpt").string() << "\n";
  return report;
}

EvalReport cmd_eval(const EvalOptions& opt, std::ostream& log) {
  if (opt.dataset.empty()) throw std::invalid_argument("eval needs --data");
  if (opt.checkpoints.empty() && !opt.bicubic) throw std::invalid_argument("eval needs --checkpoint or --bicubic");
  RunConfig cfg = resolve_config(opt.config);
  const DatasetIndex all = open_dataset(opt.dataset, log);
  const auto manifest = read_manifest(opt.dataset);
  const DatasetIndex idx = manifest && !manifest->test.empty() ? all.subset(manifest->test) : all;
  const std::vector<Clip> scenes = load_all(idx);

  const fs::path dir = prepare_dir(resolve_output(opt.out, "eval"));
  EvalReport report{dir, {}};
  std::set<std::string> used;
  auto unique_label = [&](std::string l) {
    std::string out = l;
    for (int k = 2; used.count(out); ++k) out = l + "_" + std::to_string(k);
    used.insert(out);
    return out;
  };

  auto evaluate = [&](EvalRun run, const Predictor& predict, int half, int scale) {
    for (const Clip& s : scenes) run.scenes.push_back(evaluate_scene(predict, s, half, scale, cfg.eval));
    const fs::path sub = prepare_dir(dir / run.label);
    write_frame_csv(sub / "frames.csv", run.scenes, cfg.eval.channel);
    write_summary_csv(sub / "summary.csv", run.scenes, cfg.eval.channel);
    print_scene_table(log, run, cfg.eval.channel);
    report.runs.push_back(std::move(run));
  };

  bool first = true;
  for (const std::string& path : opt.checkpoints) {
    const Checkpoint ck = load_checkpoint(path);
    auto model = model_from_checkpoint(ck);
    if (first) cfg.model = ck.config.model;
    first = false;
    EvalRun run{unique_label(label_for(path)), ck.config.model.frames(), model->parameters().numel(), {}};
    const LgtdModel& m = *model;
    evaluate(std::move(run), [&m](const Clip& c) { return m.infer(c); }, ck.config.model.half_frames,
             ck.config.model.scale);
  }
  if (opt.bicubic) {
    const int scale = opt.checkpoints.empty() ? opt.scale : cfg.model.scale;
    EvalRun run{unique_label("bicubic"), 2 * opt.half_frames + 1, 0, {}};
    evaluate(std::move(run), bicubic_predictor(scale), opt.half_frames, scale);
  }
  write_config(dir / "config.json", cfg);

  std::ofstream models(dir / "models.csv");
  const std::string ch = to_string(cfg.eval.channel);
  models << "label,frames,params,psnr" << ch << ",ssim" << ch << "\n";
  PlotSpec per_frame{"psnr per frame (mean over scenes)", "frame index", "psnr (dB)", {}};
  Series lgtd{"lgtd", {}, {}, palette(0), true, true};
  double bic = NAN;
  for (std::size_t i = 0; i < report.runs.size(); ++i) {
    const EvalRun& r = report.runs[i];
    const FrameMetrics m = overall_mean(r.scenes);
    models << r.label << "," << r.frames << "," << r.params << "," << format_metric(m.psnr) << ","
           << format_metric(m.ssim) << "\n";
    std::map<int, std::pair<double, int>> acc;
    for (const SceneResult& s : r.scenes)
      for (const FrameMetrics& f : s.frames)
        if (std::isfinite(f.psnr)) acc[f.frame].first += f.psnr, ++acc[f.frame].second;
    Series s{r.label, {}, {}, palette(i), true, false};
    for (const auto& [t, v] : acc) s.x.push_back(t), s.y.push_back(v.first / v.second);
    per_frame.series.push_back(std::move(s));
    if (r.params == 0) {
      bic = m.psnr;
    } else {
      lgtd.x.push_back(r.frames);
      lgtd.y.push_back(m.psnr);
    }
  }
  write_plot(dir / "psnr_per_frame.png", per_frame);

  // Mean PSNR against the number of input frames, one point per checkpoint.
  std::vector<std::size_t> order(lgtd.x.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return lgtd.x[a] < lgtd.x[b]; });
  Series sorted{"lgtd", {}, {}, palette(0), true, true};
  for (std::size_t i : order) sorted.x.push_back(lgtd.x[i]), sorted.y.push_back(lgtd.y[i]);
  PlotSpec vs_frames{"psnr vs input frames", "input frames", "psnr (dB)", {}};
  if (!sorted.x.empty()) vs_frames.series.push_back(sorted);
  if (std::isfinite(bic)) {
    double lo = sorted.x.empty() ? 2 * opt.half_frames + 1 : sorted.x.front();
    double hi = sorted.x.empty() ? lo : sorted.x.back();
    if (hi == lo) lo -= 2, hi += 2;
    vs_frames.series.push_back(Series{"bicubic", {lo, hi}, {bic, bic}, palette(7)});
  }
  write_plot(dir / "psnr_vs_frames.png", vs_frames);
  log << "wrote " << (dir / "models.csv").string() << "\n";
  return report;
}

std::vector<fs::path> list_png_frames(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw std::invalid_argument("frame directory not found: " + dir.string());
  std::vector<fs::path> frames;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".png") frames.push_back(e.path());
  std::sort(frames.begin(), frames.end());
  if (frames.empty()) throw std::invalid_argument("no PNG frames in " + dir.string());
  return frames;
}

int cmd_infer(const InferOptions& opt, std::ostream& log) {
  if (opt.checkpoint.empty()) throw std::invalid_argument("infer needs --checkpoint");
  const Checkpoint ck = load_checkpoint(opt.checkpoint);
  auto model = model_from_checkpoint(ck);
  const auto paths = list_png_frames(opt.clip_dir);
  std::vector<Frame> frames;
  for (const fs::path& p : paths) frames.push_back(read_png(p));
  const fs::path dir = prepare_dir(resolve_output(opt.out, "infer"));
  write_config(dir / "config.json", ck.config);
  const int n = static_cast<int>(frames.size()), half = ck.config.model.half_frames;
  for (int t = 0; t < n; ++t) {
    Clip window;
    for (int i : window_indices(t, half, n)) window.frames.push_back(frames[i]);
    write_png(dir / paths[t].filename(), model->infer(window));
  }
  log << "wrote " << n << " frames to " << dir.string() << "\n";
  return n;
}

fs::path cmd_synth(const SynthOptions& opt, std::ostream& log) {
  if (opt.count < 1) throw std::invalid_argument("--count must be >= 1");
  if (opt.test_count < 0 || opt.test_count > opt.count) throw std::invalid_argument("--test-count must be in [0, count]");
  const fs::path dir = prepare_dir(resolve_output(opt.out, "synth"));
  Rng rng(opt.seed);
  Manifest manifest;
  for (int i = 0; i < opt.count; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "scene_%03d", i);
    write_clip(dir / name, synth_scene(rng(), opt.params));
    (i < opt.count - opt.test_count ? manifest.train : manifest.test).push_back(name);
  }
  write_manifest(dir, manifest);
  const nlohmann::json params{{"seed", opt.seed},
                              {"count", opt.count},
                              {"testCount", opt.test_count},
                              {"numObjects", opt.params.num_objects},
                              {"maxSpeed", opt.params.max_speed},
                              {"textureScale", opt.params.texture_scale},
                              {"frames", opt.params.frames},
                              {"height", opt.params.height},
                              {"width", opt.params.width}};
  std::ofstream(dir / "synth.json") << params.dump(2) << "\n";
  log << "wrote " << opt.count << " scenes to " << dir.string() << "\n";
  return dir;
}

AblateReport cmd_ablate(const AblateOptions& opt, std::ostream& log) {
  if (opt.iterations < 1) throw std::invalid_argument("--iterations must be >= 1");
  RunConfig cfg = resolve_config(opt.config);
  cfg.train.iterations = opt.iterations;
  std::vector<const AblationEntry*> entries;
  if (opt.models.empty()) {
    for (const AblationEntry& e : ablation_registry()) entries.push_back(&e);
  } else {
    for (const std::string& m : opt.models) entries.push_back(&find_ablation(m));
  }
  const SceneSplit scenes = load_scenes(opt.data, cfg);
  const TrainSet train = make_windows(scenes.train, cfg.model.half_frames, cfg.model.scale);
  const TrainSet val = make_windows(scenes.val, cfg.model.half_frames, cfg.model.scale);
  if (val.samples.empty()) throw std::invalid_argument("ablate needs validation scenes (--val-clips or a manifest test split)");

  const fs::path dir = prepare_dir(resolve_output(opt.out, "ablate"));
  write_config(dir / "config.json", cfg);
  AblateReport report{dir, {}, validate_predictor(bicubic_predictor(cfg.model.scale), val.samples, cfg.eval,
                                                  cfg.train.val_samples)
                                   .psnr};
  log << "bicubic psnr " << format_metric(report.bicubic_psnr) << "\n";
  for (const AblationEntry* e : entries) {
    AblationResult r = run_ablation(*e, cfg.model, cfg.train, train, val, cfg.eval, opt.stats_size);
    log << std::left << std::setw(9) << r.name << std::right << " params " << r.params << " loss "
        << format_metric(r.final_loss) << " val psnr " << format_metric(r.val_psnr) << " (" << r.status << ")\n";
    report.results.push_back(std::move(r));
  }
  std::ofstream csv(dir / "ablation.csv");
  write_ablation_csv(csv, report.results, report.bicubic_psnr);
  log << "wrote " << (dir / "ablation.csv").string() << "\n";
  return report;
}

StatsReport cmd_stats(const StatsOptions& opt, std::ostream& log) {
  RunConfig cfg = resolve_config(opt.config);
  cfg.model = ablation_config(find_ablation(opt.model), cfg.model);
  if (opt.height < 1 || opt.width < 1) throw std::invalid_argument("--height and --width must be positive");
  StatsReport rep;
  rep.dir = prepare_dir(resolve_output(opt.out, "stats"));
  rep.params = param_count(cfg.model);
  rep.flops = flops_estimate(cfg.model, opt.height, opt.width);
  rep.layers = layer_costs(cfg.model, opt.height, opt.width);
  write_config(rep.dir / "config.json", cfg);
  std::ofstream csv(rep.dir / "stats.csv");
  csv << "layer,params,flops\n";
  for (const LayerCost& l : rep.layers) csv << l.name << "," << l.params << "," << std::setprecision(17) << l.flops << "\n";
  csv << "total," << rep.params << "," << rep.flops << "\n";

  const AblationEntry& entry = find_ablation(opt.model);
  log << "model " << opt.model << " at " << opt.height << "x" << opt.width << " LR input\n";
  log << "params " << rep.params << " (" << std::fixed << std::setprecision(2) << rep.params / 1e6 << "M)\n";
  log << "flops " << std::setprecision(1) << rep.flops / 1e9 << "G (multiply and add counted separately)\n";
  if (cfg.model == ablation_config(entry, ModelConfig{})) {
    log << "published reference (not asserted): " << std::setprecision(2) << entry.paper.params_m << "M params";
    if (std::isfinite(entry.paper.gflops)) log << ", " << std::setprecision(1) << entry.paper.gflops << "G FLOPs";
    log << "\n";
  }
  log << std::defaultfloat << std::setprecision(6);
  return rep;
}

fs::path cmd_profile(const ProfileOptions& opt, std::ostream& log) {
  if (opt.stretch < 1) throw std::invalid_argument("--stretch must be >= 1");
  std::vector<Frame> frames;
  for (const fs::path& p : list_png_frames(opt.frames_dir)) frames.push_back(read_png(p));
  const Tensor prof = temporal_profile(frames, opt.row);
  Tensor out({prof.dim(0), prof.dim(1) * opt.stretch, prof.dim(2)});
  for (int c = 0; c < prof.dim(0); ++c)
    for (int t = 0; t < prof.dim(1) * opt.stretch; ++t)
      for (int x = 0; x < prof.dim(2); ++x) out.at(c, t, x) = prof.at(c, t / opt.stretch, x);
  const fs::path path = resolve_output(opt.out, "profile.png");
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_png(path, out);
  log << "wrote " << path.string() << " (" << frames.size() << " frames, row " << opt.row << ")\n";
  return path;
}

namespace {

void add_config_options(CLI::App* cmd, ConfigSource& c) {
  cmd->add_option("--preset", c.preset, "starting point: default, micro or toy")->capture_default_str();
  cmd->add_option("--config", c.config_file, "JSON config (nested or flat model.*, train.*, eval.* keys)");
  cmd->add_option("--set", c.overrides, "key=value override, repeatable")->allow_extra_args(false);
}

void add_data_options(CLI::App* cmd, DataSource& d) {
  cmd->add_option("--data", d.dataset, "dataset root (<scene>/<index>.png, optional manifest.json)");
  cmd->add_option("--synth-clips", d.synth_clips, "synthetic training clips when --data is absent")->capture_default_str();
  cmd->add_option("--val-clips", d.val_clips, "synthetic held-out clips")->capture_default_str();
  cmd->add_option("--synth-size", d.synth_size, "synthetic HR side (0: smallest that fits a patch)")->capture_default_str();
  cmd->add_option("--synth-frames", d.synth_frames, "synthetic clip length (0: 2N+1)")->capture_default_str();
  cmd->add_option("--synth-seed", d.synth_seed, "first synthetic scene seed")->capture_default_str();
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"LGTD video super-resolution: training, evaluation and analysis"};
  app.name("lgtd");
  app.require_subcommand(1);
  app.footer(std::string("Relative --out paths resolve under $") + kOutputRootEnv + " (default ./runs).");

  TrainOptions train;
  auto* c_train = app.add_subcommand("train", "train a model; writes config.json, log.csv, checkpoint.ckpt, plots");
  add_config_options(c_train, train.config);
  add_data_options(c_train, train.data);
  c_train->add_option("--out", train.out, "run directory")->capture_default_str();
  c_train->add_option("--resume", train.resume, "continue from a checkpoint");
  c_train->add_option("--print-every", train.print_every, "console progress interval")->capture_default_str();

  EvalOptions eval;
  auto* c_eval = app.add_subcommand("eval", "score checkpoints and/or bicubic on a dataset");
  add_config_options(c_eval, eval.config);
  c_eval->add_option("--checkpoint", eval.checkpoints, "checkpoint, repeatable");
  c_eval->add_flag("--bicubic", eval.bicubic, "include the bicubic baseline");
  c_eval->add_option("--half-frames", eval.half_frames, "N for bicubic-only runs")->capture_default_str();
  c_eval->add_option("--scale", eval.scale, "scale for bicubic-only runs")->capture_default_str();
  c_eval->add_option("--data", eval.dataset, "HR dataset root (manifest test split if present)")->required();
  c_eval->add_option("--out", eval.out, "output directory");
  std::string channel;
  int crop = -1;
  c_eval->add_option("--channel", channel, "y or rgb");
  c_eval->add_option("--crop", crop, "border crop in pixels");

  InferOptions infer;
  auto* c_infer = app.add_subcommand("infer", "super-resolve a directory of LR PNG frames");
  c_infer->add_option("--checkpoint", infer.checkpoint)->required();
  c_infer->add_option("--clip", infer.clip_dir, "directory of LR frames")->required();
  c_infer->add_option("--out", infer.out, "output directory");

  SynthOptions synth;
  auto* c_synth = app.add_subcommand("synth-data", "write a synthetic satellite-like dataset");
  c_synth->add_option("--seed", synth.seed)->capture_default_str();
  c_synth->add_option("--count", synth.count)->capture_default_str();
  c_synth->add_option("--test-count", synth.test_count, "scenes listed under manifest test")->capture_default_str();
  c_synth->add_option("--frames", synth.params.frames)->capture_default_str();
  c_synth->add_option("--height", synth.params.height)->capture_default_str();
  c_synth->add_option("--width", synth.params.width)->capture_default_str();
  c_synth->add_option("--objects", synth.params.num_objects)->capture_default_str();
  c_synth->add_option("--max-speed", synth.params.max_speed, "pixels per frame")->capture_default_str();
  c_synth->add_option("--texture-scale", synth.params.texture_scale)->capture_default_str();
  c_synth->add_option("--out", synth.out, "dataset directory");

  AblateOptions ablate;
  auto* c_ablate = app.add_subcommand("ablate", "train registry variants and write ablation.csv");
  add_config_options(c_ablate, ablate.config);
  add_data_options(c_ablate, ablate.data);
  c_ablate->add_option("--models", ablate.models, "comma-separated names (default: all)")->delimiter(',');
  c_ablate->add_option("--iterations", ablate.iterations)->capture_default_str();
  c_ablate->add_option("--stats-size", ablate.stats_size, "LR side for the FLOPs column")->capture_default_str();
  c_ablate->add_option("--out", ablate.out, "output directory");

  StatsOptions stats;
  auto* c_stats = app.add_subcommand("stats", "parameter and FLOP counts");
  add_config_options(c_stats, stats.config);
  c_stats->add_option("--model", stats.model, "registry entry")->capture_default_str();
  c_stats->add_option("--height", stats.height, "LR input height")->capture_default_str();
  c_stats->add_option("--width", stats.width, "LR input width")->capture_default_str();
  c_stats->add_option("--out", stats.out, "output directory");

  ProfileOptions profile;
  auto* c_profile = app.add_subcommand("profile", "temporal profile image of one pixel row");
  c_profile->add_option("--frames", profile.frames_dir)->required();
  c_profile->add_option("--row", profile.row)->required();
  c_profile->add_option("--stretch", profile.stretch, "rows per time step")->capture_default_str();
  c_profile->add_option("--out", profile.out, "PNG path")->required();

  std::string current = "lgtd";
  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
    if (c_eval->parsed()) {
      if (!channel.empty()) eval.config.overrides.push_back("eval.channel=" + channel);
      if (crop >= 0) eval.config.overrides.push_back("eval.borderCrop=" + std::to_string(crop));
    }
    for (CLI::App* sub : app.get_subcommands()) current = "lgtd " + sub->get_name();
    if (c_train->parsed()) cmd_train(train, out);
    if (c_eval->parsed()) cmd_eval(eval, out);
    if (c_infer->parsed()) cmd_infer(infer, out);
    if (c_synth->parsed()) cmd_synth(synth, out);
    if (c_ablate->parsed()) cmd_ablate(ablate, out);
    if (c_stats->parsed()) cmd_stats(stats, out);
    if (c_profile->parsed()) cmd_profile(profile, out);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : 2;
  } catch (const NonFiniteLoss& e) {
    err << current << ": error: " << e.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    err << current << ": error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << current << ": error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace lgtd
