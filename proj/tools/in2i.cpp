// Command-line front end: train, translate, evaluate, ablate, fuse, make-toy.
// Exit codes: 0 success, 2 config error, 3 data error, 4 numeric failure.

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "in2i/commands.hpp"

namespace {

void add_train_options(CLI::App* cmd, in2i::cli::TrainArgs& a, std::string& data, std::int64_t& seed,
                       std::string& resume, std::int64_t& max_steps) {
  cmd->add_option("--config", a.config, "configuration file ([model], [train], [data])")->required();
  cmd->add_option("--data", data, "dataset root (overrides [data] root)");
  cmd->add_option("--out", a.out, "output directory")->required();
  cmd->add_option("--seed", seed, "random seed (required)");
  cmd->add_option("--max-steps", max_steps, "stop after this many optimisation steps");
  cmd->add_flag("--verbose", a.verbose, "print progress every 50 steps");
  cmd->add_option("--resume", resume, "checkpoint directory to resume from");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-image-to-image translation: training, inference and evaluation"};
  app.require_subcommand(1);

  in2i::cli::TrainArgs train_args;
  std::string data, resume;
  std::int64_t seed = -1, max_steps = -1;
  auto* train = app.add_subcommand("train", "train forward and reverse generators");
  add_train_options(train, train_args, data, seed, resume, max_steps);

  in2i::cli::AblateArgs ablate_args;
  std::string variants;
  auto* ablate = app.add_subcommand("ablate", "train the adv / adv+latent / full ablation variants");
  add_train_options(ablate, ablate_args.train, data, seed, resume, max_steps);
  ablate->add_option("--variants", variants, "comma-separated subset of adv,adv+latent,full");

  in2i::cli::TranslateArgs translate_args;
  auto* translate = app.add_subcommand("translate", "translate source images with a checkpoint");
  translate->add_option("--checkpoint", translate_args.checkpoint, "checkpoint directory")->required();
  translate->add_option("--source", translate_args.sources, "modality=path, repeated in checkpoint order")->required();
  translate->add_option("--out", translate_args.out, "output directory")->required();
  translate->add_flag("--cycle", translate_args.cycle, "also write reverse reconstructions");

  in2i::cli::EvaluateArgs evaluate_args;
  auto* evaluate = app.add_subcommand("evaluate", "PSNR/SSIM of predictions against ground truth");
  evaluate->add_option("--pred-dir", evaluate_args.pred_dir, "predicted images")->required();
  evaluate->add_option("--gt-dir", evaluate_args.gt_dir, "ground-truth images")->required();
  evaluate->add_option("--report", evaluate_args.report, "output directory for metrics.csv and summary.md")->required();
  evaluate->add_option("--method", evaluate_args.method, "row label in the summary table");

  in2i::cli::FuseArgs fuse_args;
  auto* fuse = app.add_subcommand("fuse", "db4 wavelet pixel-level fusion of single-channel images");
  fuse->add_option("--inputs", fuse_args.inputs, "images to fuse")->required();
  fuse->add_option("--out", fuse_args.out, "output directory")->required();
  fuse->add_option("--levels", fuse_args.levels, "decomposition depth");
  fuse->add_option("--boundary", fuse_args.boundary, "symmetric or zero");

  in2i::toy::ToyOptions toy_args;
  std::int64_t toy_seed = -1;
  int toy_test = -1;
  auto* make_toy = app.add_subcommand("make-toy", "generate the synthetic shapes dataset");
  make_toy->add_option("--out", toy_args.out, "dataset root to create")->required();
  make_toy->add_option("--size", toy_args.size, "image side (multiple of 4)");
  make_toy->add_option("--count", toy_args.count, "number of source samples");
  make_toy->add_option("--test-count", toy_test, "held-out samples (default count / 5)");
  make_toy->add_option("--seed", toy_seed, "random seed (required)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  auto finish_train_args = [&](in2i::cli::TrainArgs& a) {
    if (!data.empty()) a.data = data;
    if (seed >= 0) a.seed = seed;
    if (!resume.empty()) a.resume = resume;
    if (max_steps >= 0) a.max_steps = max_steps;
  };

  try {
    if (*train) {
      finish_train_args(train_args);
      in2i::cli::train(train_args);
    } else if (*ablate) {
      finish_train_args(ablate_args.train);
      if (!variants.empty()) {
        ablate_args.presets.clear();
        std::stringstream ss(variants);
        std::string item;
        while (std::getline(ss, item, ',')) {
          auto p = in2i::parse_ablation_preset(item);
          if (!p) throw in2i::ConfigError("cli", "unknown ablation variant '" + item + "'");
          ablate_args.presets.push_back(*p);
        }
      }
      for (const auto& row : in2i::cli::ablate(ablate_args))
        std::cout << in2i::to_string(row.preset) << " test_cycle_l1=" << row.test_cycle_l1 << "\n";
    } else if (*translate) {
      for (const auto& p : in2i::cli::translate(translate_args)) std::cout << p.string() << "\n";
    } else if (*evaluate) {
      in2i::cli::evaluate(evaluate_args);
    } else if (*fuse) {
      std::cout << in2i::cli::fuse(fuse_args).string() << "\n";
    } else if (*make_toy) {
      if (toy_seed < 0) throw in2i::ConfigError("cli", "--seed is required");
      toy_args.seed = static_cast<std::uint64_t>(toy_seed);
      toy_args.test_count = toy_test >= 0 ? toy_test : toy_args.count / 5;
      in2i::cli::make_toy(toy_args);
    }
  } catch (const in2i::Error& e) {
    std::cerr << "error [" << e.module() << "]: " << e.what() << "\n";
    return in2i::exit_code(e.kind());
  } catch (const c10::Error& e) {
    std::cerr << "error [torch]: " << e.what_without_backtrace() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
