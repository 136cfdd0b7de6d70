#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "baselines.hpp"
#include "config.hpp"
#include "data.hpp"
#include "error.hpp"
#include "image_io.hpp"
#include "metrics.hpp"
#include "toy.hpp"
#include "trainer.hpp"

namespace in2i::cli {

namespace fs = std::filesystem;

/// Records the resolved options of a command in out/resolved_config.ini and
/// echoes them to stderr.
inline void write_resolved(const fs::path& out, const std::string& text) {
  fs::create_directories(out);
  std::ofstream f(out / "resolved_config.ini");
  f << text;
  if (!f) throw IoError("cli", "cannot write " + (out / "resolved_config.ini").string());
  std::cerr << "resolved configuration:\n" << text << std::flush;
}

inline std::string command_section(const std::string& name, const std::vector<std::pair<std::string, std::string>>& kv) {
  std::string s = "[command]\nname = " + name + "\n";
  for (const auto& [k, v] : kv) s += k + " = " + v + "\n";
  return s;
}

struct TrainArgs {
  fs::path config;
  std::optional<fs::path> data;
  fs::path out;
  std::optional<std::int64_t> seed;
  std::optional<fs::path> resume;
  std::optional<std::int64_t> max_steps;
  bool verbose = false;
};

/// Resolves the configuration a train-like command runs with.
inline Config resolve_train_config(const TrainArgs& a) {
  if (!a.seed) throw ConfigError("cli", "--seed is required");
  auto cfg = load_config(a.config);
  cfg.train.seed = *a.seed;
  if (a.data) cfg.data.root = a.data->string();
  if (a.max_steps) cfg.train.max_steps = *a.max_steps;
  if (cfg.data.root.empty()) throw ConfigError("cli", "no dataset root: pass --data or set [data] root");
  return validate_config(cfg);
}

inline UnpairedMultiModalDataset scan_for(const Config& cfg) {
  return scan_dataset(cfg.data.root, cfg.model.domains, static_cast<std::uint64_t>(cfg.train.seed),
                      static_cast<std::size_t>(cfg.data.test_count));
}

inline TrainSummary train(const TrainArgs& a) {
  const auto cfg = resolve_train_config(a);
  write_resolved(a.out, serialize_config(cfg));
  const auto ds = scan_for(cfg);
  TrainOptions opt;
  opt.out_dir = a.out;
  opt.resume_from = a.resume;
  opt.verbose = a.verbose;
  auto summary = run_training(cfg, ds, opt);
  std::cerr << "trained " << summary.steps << " steps; final checkpoint " << summary.final_checkpoint.string() << "\n";
  return summary;
}

struct AblationRow {
  AblationPreset preset;
  double test_cycle_l1 = 0.0;
  std::optional<MetricSummary> metrics;
  fs::path run_dir;
};

struct AblateArgs {
  TrainArgs train;
  std::vector<AblationPreset> presets{AblationPreset::adv, AblationPreset::adv_latent, AblationPreset::full};
};

/// Trains one run per preset under out/<preset>/ and tabulates test-set
/// forward cycle error and PSNR/SSIM in out/ablation.csv and ablation.md.
inline std::vector<AblationRow> ablate(const AblateArgs& a) {
  const auto base = resolve_train_config(a.train);
  std::string presets;
  for (auto p : a.presets) presets += (presets.empty() ? "" : ",") + to_string(p);
  write_resolved(a.train.out, serialize_config(base) + "\n" + command_section("ablate", {{"presets", presets}}));
  const auto ds = scan_for(base);
  std::vector<AblationRow> rows;
  for (auto preset : a.presets) {
    auto cfg = base;
    cfg.train = apply_preset(cfg.train, preset);
    auto dir_name = to_string(preset);
    std::replace(dir_name.begin(), dir_name.end(), '+', '_');
    TrainOptions opt;
    opt.out_dir = a.train.out / dir_name;
    opt.verbose = a.train.verbose;
    fs::create_directories(opt.out_dir);
    save_config(cfg, opt.out_dir / "resolved_config.ini");
    run_training(cfg, ds, opt);
    auto state = load_train_state(cfg, opt.out_dir / "final");
    const auto eval = evaluate_model(state, ds, ds.test_ids);
    AblationRow row{preset, eval.forward_cycle_l1, std::nullopt, opt.out_dir};
    if (!eval.metrics.empty()) row.metrics = aggregate(eval.metrics);
    rows.push_back(row);
  }
  std::ofstream csv(a.train.out / "ablation.csv");
  csv << "preset,lambda1,lambda2,test_cycle_l1,psnr_mean,psnr_var,ssim_mean,ssim_var\n";
  std::ofstream md(a.train.out / "ablation.md");
  md << "| Variant | Test cycle L1 | PSNR | SSIM |\n|---|---|---|---|\n";
  for (const auto& r : rows) {
    const auto t = apply_preset(base.train, r.preset);
    csv << to_string(r.preset) << "," << t.lambda1 << "," << t.lambda2 << "," << format_value(r.test_cycle_l1, 6);
    if (r.metrics)
      csv << "," << format_value(r.metrics->psnr.mean, 6) << "," << format_value(r.metrics->psnr.variance, 6) << ","
          << format_value(r.metrics->ssim.mean, 6) << "," << format_value(r.metrics->ssim.variance, 6);
    else
      csv << ",,,,";
    csv << "\n";
    md << "| " << to_string(r.preset) << " | " << format_value(r.test_cycle_l1, 4) << " | "
       << (r.metrics ? format_cell(r.metrics->psnr) : "-") << " | " << (r.metrics ? format_cell(r.metrics->ssim) : "-")
       << " |\n";
  }
  return rows;
}

struct TranslateArgs {
  fs::path checkpoint;
  std::vector<std::string> sources;  // "modality=path", in checkpoint order
  fs::path out;
  bool cycle = false;
};

/// Writes <stem>_translated.png and, with `cycle`, one <stem>_rec_<modality>.png
/// per source modality.
inline std::vector<fs::path> translate(const TranslateArgs& a) {
  auto model = load_inference_model(a.checkpoint);
  const auto& mc = model.config.model;
  std::string src_text;
  for (const auto& s : a.sources) src_text += (src_text.empty() ? "" : ",") + s;
  write_resolved(a.out, command_section("translate", {{"checkpoint", a.checkpoint.string()},
                                                      {"sources", src_text},
                                                      {"cycle", a.cycle ? "true" : "false"}}));
  const auto& domains = mc.domains.sources;
  if (a.sources.size() != domains.size())
    throw ConfigError("cli", "checkpoint expects " + std::to_string(domains.size()) + " sources, got " +
                                 std::to_string(a.sources.size()));
  std::vector<torch::Tensor> images;
  std::string stem;
  for (std::size_t i = 0; i < a.sources.size(); ++i) {
    const auto eq = a.sources[i].find('=');
    if (eq == std::string::npos) throw ConfigError("cli", "--source must be written modality=path");
    const auto name = a.sources[i].substr(0, eq);
    const fs::path path = a.sources[i].substr(eq + 1);
    if (name != domains[i].name)
      throw ConfigError("cli", "source " + std::to_string(i) + " is '" + name + "' but the checkpoint expects '" +
                                   domains[i].name + "' (modality order is fixed)");
    images.push_back(load_image(path, domains[i].channels, mc.image_size.height, mc.image_size.width).unsqueeze(0));
    if (stem.empty()) stem = path.stem().string();
  }
  torch::NoGradGuard no_grad;
  const auto net_sources = adapt_sources(mc, images);
  const auto fwd = model.g_forward->forward(net_sources);
  std::vector<fs::path> written{a.out / (stem + "_translated.png")};
  save_image(fwd.image, written.back());
  if (a.cycle) {
    const auto back = model.g_reverse->forward(fwd.image);
    const auto net_domains = network_domains(mc);
    for (std::size_t i = 0; i < back.images.size(); ++i) {
      auto name = net_domains.sources[i].name;
      std::replace(name.begin(), name.end(), '+', '_');
      written.push_back(a.out / (stem + "_rec_" + name + ".png"));
      save_image(back.images[i], written.back());
    }
  }
  return written;
}

struct EvaluateArgs {
  fs::path pred_dir;
  fs::path gt_dir;
  fs::path report;  // output directory
  std::string method = "prediction";
};

inline MetricSummary evaluate(const EvaluateArgs& a) {
  write_resolved(a.report, command_section("evaluate", {{"pred_dir", a.pred_dir.string()},
                                                        {"gt_dir", a.gt_dir.string()},
                                                        {"method", a.method}}));
  const auto preds = detail::list_images(a.pred_dir);
  const auto gts = detail::list_images(a.gt_dir);
  if (preds.empty() && gts.empty()) throw DataError("metrics", "no images in " + a.pred_dir.string() + " or " + a.gt_dir.string());
  std::vector<std::string> only_pred, only_gt;
  for (const auto& [name, _] : preds)
    if (!gts.count(name)) only_pred.push_back(name);
  for (const auto& [name, _] : gts)
    if (!preds.count(name)) only_gt.push_back(name);
  if (!only_pred.empty() || !only_gt.empty()) {
    std::string msg = "file sets differ;";
    for (const auto& n : only_pred) msg += " " + n + " (prediction only)";
    for (const auto& n : only_gt) msg += " " + n + " (ground truth only)";
    throw DataError("metrics", msg);
  }
  std::vector<ImageMetrics> rows;
  for (const auto& [name, pred_path] : preds) {
    // Channel count follows the ground truth file.
    const auto probe = cv::imread(gts.at(name).string(), cv::IMREAD_UNCHANGED);
    const int channels = probe.channels() >= 3 ? 3 : 1;
    const auto gt = to_unit_range(load_image(gts.at(name), channels));
    const auto pred = to_unit_range(load_image(pred_path, channels, static_cast<int>(gt.size(1)), static_cast<int>(gt.size(2))));
    rows.push_back({name, psnr(pred, gt), ssim(pred, gt)});
  }
  const auto summary = aggregate(rows);
  std::ofstream csv(a.report / "metrics.csv");
  write_metrics_csv(csv, rows);
  std::ofstream md(a.report / "summary.md");
  write_metrics_markdown(md, summary, a.method);
  std::cout << "PSNR " << format_cell(summary.psnr) << "  SSIM " << format_cell(summary.ssim) << "\n";
  return summary;
}

struct FuseArgs {
  std::vector<fs::path> inputs;
  fs::path out;
  int levels = 2;
  std::string boundary = "symmetric";
};

/// db4 pixel-level fusion of single-channel images into out/<stem>_db4fused.png.
inline fs::path fuse(const FuseArgs& a) {
  const auto boundary = parse_wavelet_boundary(a.boundary);
  if (!boundary) throw ConfigError("cli", "--boundary must be symmetric or zero");
  if (a.inputs.empty()) throw ConfigError("cli", "--inputs needs at least one image");
  std::string inputs;
  for (const auto& p : a.inputs) inputs += (inputs.empty() ? "" : ",") + p.string();
  write_resolved(a.out, command_section("fuse", {{"inputs", inputs},
                                                 {"levels", std::to_string(a.levels)},
                                                 {"boundary", a.boundary},
                                                 {"wavelet", "db4"}}));
  std::vector<torch::Tensor> images;
  for (const auto& p : a.inputs) images.push_back(load_image(p, 1));
  const auto fused = wavelet_fuse(images, {a.levels, *boundary, true});
  const auto path = a.out / (a.inputs.front().stem().string() + "_db4fused.png");
  save_image(fused, path);
  return path;
}

inline void make_toy(const toy::ToyOptions& opt) {
  write_resolved(opt.out, command_section("make-toy", {{"size", std::to_string(opt.size)},
                                                       {"count", std::to_string(opt.count)},
                                                       {"test_count", std::to_string(opt.test_count)},
                                                       {"seed", std::to_string(opt.seed)}}));
  toy::make_toy(opt);
}

}  // namespace in2i::cli
