#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "baselines.hpp"
#include "checkpoint.hpp"
#include "config.hpp"
#include "data.hpp"
#include "discriminator.hpp"
#include "generator.hpp"
#include "image_io.hpp"
#include "losses.hpp"
#include "metrics.hpp"
#include "rng.hpp"

namespace in2i {

/// Constant until `decay_start`, then linear: base (epochs - e) / (epochs - decay_start).
/// The last epoch runs at base / (epochs - decay_start), not zero.
inline double learning_rate(double base, std::int64_t epoch, std::int64_t epochs, std::int64_t decay_start) {
  if (epoch < decay_start) return base;
  const double frac = static_cast<double>(epochs - epoch) / static_cast<double>(epochs - decay_start);
  return base * std::min(1.0, frac);
}

/// Ablation presets: (a) adversarial only, (b) adversarial + latent, (c) full.
enum class AblationPreset { adv, adv_latent, full };

inline std::string to_string(AblationPreset p) {
  switch (p) {
    case AblationPreset::adv: return "adv";
    case AblationPreset::adv_latent: return "adv+latent";
    case AblationPreset::full: return "full";
  }
  return "full";
}

inline std::optional<AblationPreset> parse_ablation_preset(const std::string& s) {
  if (s == "adv") return AblationPreset::adv;
  if (s == "adv+latent") return AblationPreset::adv_latent;
  if (s == "full") return AblationPreset::full;
  return std::nullopt;
}

/// Lambdas for a preset; `full` keeps the configured values.
inline TrainConfig apply_preset(TrainConfig train, AblationPreset preset) {
  if (preset == AblationPreset::adv) train.lambda1 = train.lambda2 = 0.0;
  if (preset == AblationPreset::adv_latent) train.lambda1 = 0.0;
  return train;
}

struct TrainState {
  Config config;
  ForwardGenerator g_forward{nullptr};
  ReverseGenerator g_reverse{nullptr};
  DiscriminatorBank discriminators;
  std::unique_ptr<torch::optim::Adam> opt_generators;
  std::unique_ptr<torch::optim::Adam> opt_discriminators;
  std::int64_t epoch = 0;
  std::int64_t position = 0;
  std::int64_t step = 0;
  double lr_generator = 0.0;
  double lr_discriminator = 0.0;

  std::vector<torch::Tensor> generator_parameters() const {
    auto params = g_forward->parameters();
    for (auto& p : g_reverse->parameters()) params.push_back(p);
    return params;
  }
};

/// Builds both generators and the discriminator bank with seeded
/// initialisation, plus one Adam optimiser per side.
inline TrainState make_train_state(const Config& config) {
  TrainState s;
  s.config = validate_config(config);
  const auto& model = s.config.model;
  const auto& train = s.config.train;
  SeededRng rng(static_cast<std::uint64_t>(train.seed));
  const auto shape = GeneratorShape::from(model);
  s.g_forward = ForwardGenerator(shape);
  s.g_reverse = ReverseGenerator(shape);
  s.discriminators = build_discriminator_bank(network_domains(model), model.base_width);
  init_weights(*s.g_forward, rng);
  init_weights(*s.g_reverse, rng);
  for (auto& d : s.discriminators.members) init_weights(*d, rng);

  s.opt_generators = std::make_unique<torch::optim::Adam>(
      s.generator_parameters(),
      torch::optim::AdamOptions(train.lr_generator).betas({train.adam_beta1, train.adam_beta2}));
  s.opt_discriminators = std::make_unique<torch::optim::Adam>(
      s.discriminators.parameters(),
      torch::optim::AdamOptions(train.lr_discriminator).betas({train.adam_beta1, train.adam_beta2}));
  s.lr_generator = train.lr_generator;
  s.lr_discriminator = train.lr_discriminator;
  return s;
}

inline void set_epoch_learning_rates(TrainState& s, std::int64_t epoch) {
  const auto& t = s.config.train;
  s.lr_generator = learning_rate(t.lr_generator, epoch, t.epochs, t.decay_start_epoch);
  s.lr_discriminator = learning_rate(t.lr_discriminator, epoch, t.epochs, t.decay_start_epoch);
  for (auto& g : s.opt_generators->param_groups()) static_cast<torch::optim::AdamOptions&>(g.options()).lr(s.lr_generator);
  for (auto& g : s.opt_discriminators->param_groups())
    static_cast<torch::optim::AdamOptions&>(g.options()).lr(s.lr_discriminator);
}

struct StepResult {
  LossReport report;
  double generator_objective = 0.0;
  double discriminator_objective = 0.0;
};

namespace detail {

inline void set_requires_grad(DiscriminatorBank& bank, bool on) {
  for (auto& p : bank.parameters()) p.set_requires_grad(on);
}

inline double checked_value(const torch::Tensor& t, const char* term) {
  const double v = t.item<double>();
  if (!std::isfinite(v)) throw NumericError("trainer", std::string("non-finite ") + term + " (" + std::to_string(v) + ")");
  return v;
}

}  // namespace detail

/// Batched (NxCxHxW) tensors for one optimisation step.
struct StepBatch {
  std::vector<torch::Tensor> sources;  // raw sources in DomainSpec order
  torch::Tensor target;
};

inline StepBatch stack_bundles(const std::vector<SampleBundle>& bundles) {
  StepBatch b;
  const auto n = bundles.front().sources.size();
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<torch::Tensor> items;
    for (const auto& bundle : bundles) items.push_back(bundle.sources[i]);
    b.sources.push_back(torch::stack(items));
  }
  std::vector<torch::Tensor> targets;
  for (const auto& bundle : bundles) targets.push_back(bundle.target);
  b.target = torch::stack(targets);
  return b;
}

/// One alternating update: every discriminator on detached fakes, then both
/// generators jointly on adversarial + lambda1 cycle + lambda2 latent terms.
/// The report holds the values evaluated during this step; disabled terms
/// (lambda = 0) are reported as exactly zero.
inline StepResult train_step(TrainState& s, const StepBatch& batch) {
  const auto& model = s.config.model;
  const auto mode = model.gan_mode;
  const double lambda1 = s.config.train.lambda1;
  const double lambda2 = s.config.train.lambda2;
  const auto sources = adapt_sources(model, batch.sources);
  const auto& target = batch.target;
  const std::size_t n = sources.size();

  auto fwd = s.g_forward->forward(sources);
  auto rev = s.g_reverse->forward(target);

  // Discriminators.
  detail::set_requires_grad(s.discriminators, true);
  s.opt_discriminators->zero_grad();
  LossParts parts;
  torch::Tensor d_objective;
  {
    auto& d_t = s.discriminators.target();
    const auto real = d_t->forward(target);
    const auto fake = d_t->forward(fwd.image.detach());
    d_objective = discriminator_objective(real, fake, mode);
    parts.adv_forward =
        adversarial_forward(score_probabilities(real.detach(), mode), score_probabilities(fake.detach(), mode), mode)
            .item<double>();
    double reverse_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      auto& d_s = s.discriminators.source(i);
      const auto r = d_s->forward(sources[i]);
      const auto f = d_s->forward(rev.images[i].detach());
      d_objective = d_objective + discriminator_objective(r, f, mode);
      reverse_sum += adversarial_term(score_probabilities(r.detach(), mode), score_probabilities(f.detach(), mode), mode)
                         .item<double>();
    }
    parts.adv_reverse = reverse_sum;
  }
  const double d_value = detail::checked_value(d_objective, "discriminator objective");
  d_objective.backward();
  s.opt_discriminators->step();

  // Generators.
  detail::set_requires_grad(s.discriminators, false);
  s.opt_generators->zero_grad();
  auto g_objective = generator_adversarial_objective(s.discriminators.target()->forward(fwd.image), mode);
  for (std::size_t i = 0; i < n; ++i)
    g_objective = g_objective + generator_adversarial_objective(s.discriminators.source(i)->forward(rev.images[i]), mode);

  if (lambda1 > 0.0 || lambda2 > 0.0) {
    auto back_to_sources = s.g_reverse->forward(fwd.image);  // s -> T -> S
    auto back_to_target = s.g_forward->forward(rev.images);  // t -> S -> T
    if (lambda1 > 0.0) {
      const auto cyc_f = cycle_forward(sources, back_to_sources.images);
      const auto cyc_r = cycle_reverse(target, back_to_target.image);
      parts.cycle_forward = detail::checked_value(cyc_f, "forward cycle loss");
      parts.cycle_reverse = detail::checked_value(cyc_r, "reverse cycle loss");
      g_objective = g_objective + lambda1 * (cyc_f + cyc_r);
    }
    if (lambda2 > 0.0) {
      const auto lat_f = latent_consistency_forward(fwd.latent, back_to_sources.latent);
      const auto lat_r = latent_consistency_reverse(rev.latent, back_to_target.latent);
      parts.latent_forward = detail::checked_value(lat_f, "forward latent loss");
      parts.latent_reverse = detail::checked_value(lat_r, "reverse latent loss");
      g_objective = g_objective + lambda2 * (lat_f + lat_r);
    }
  }
  const double g_value = detail::checked_value(g_objective, "generator objective");
  g_objective.backward();
  s.opt_generators->step();
  detail::set_requires_grad(s.discriminators, true);

  ++s.step;
  return {total_loss(parts, lambda1, lambda2), g_value, d_value};
}

inline StepResult train_step(TrainState& s, const SampleBundle& bundle) {
  return train_step(s, stack_bundles({bundle}));
}

// ---------------------------------------------------------------------------
// Loss CSV
// ---------------------------------------------------------------------------

inline constexpr const char* kLossCsvHeader = "step,epoch,adv_fwd,adv_rev,lat_fwd,lat_rev,cyc_fwd,cyc_rev,total,lr_g,lr_d";

inline std::string loss_csv_row(std::int64_t step, std::int64_t epoch, const LossReport& r, double lr_g, double lr_d) {
  char buf[512];
  std::snprintf(buf, sizeof buf, "%lld,%lld,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g", static_cast<long long>(step),
                static_cast<long long>(epoch), r.adv_forward, r.adv_reverse, r.latent_forward, r.latent_reverse,
                r.cycle_forward, r.cycle_reverse, r.total, lr_g, lr_d);
  return buf;
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

inline std::vector<NamedModule> checkpoint_modules(TrainState& s) {
  std::vector<NamedModule> out{{"g_forward", s.g_forward.get()}, {"g_reverse", s.g_reverse.get()}};
  for (std::size_t i = 0; i < s.discriminators.size(); ++i)
    out.push_back({"d" + std::to_string(i), s.discriminators.members[i].get()});
  return out;
}

inline CheckpointHeader make_header(const ModelConfig& model) {
  CheckpointHeader h;
  h.config_hash = hex_hash(config_hash(model));
  h.gan_mode = to_string(model.gan_mode);
  h.sources = detail::format_modalities(model.domains.sources);
  h.target = detail::format_modalities({model.domains.target});
  return h;
}

inline void save_checkpoint(TrainState& s, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  Manifest m;
  m.header = make_header(s.config.model);
  m.header.epoch = s.epoch;
  m.header.position = s.position;
  m.header.step = s.step;
  m.parameters = save_parameters(checkpoint_modules(s), dir);
  save_config(s.config, dir / "config.ini");
  torch::save(*s.opt_generators, (dir / "optim_generators.pt").string());
  torch::save(*s.opt_discriminators, (dir / "optim_discriminators.pt").string());
  write_manifest(m, dir / "manifest.txt");
}

/// Restores a training state. The checkpoint must have been written for
/// `config.model`; a different model configuration is a ConfigError.
inline TrainState load_train_state(const Config& config, const std::filesystem::path& dir) {
  auto s = make_train_state(config);
  const auto manifest = read_manifest(dir / "manifest.txt");
  verify_config_hash(manifest, s.config.model);
  load_parameters(checkpoint_modules(s), manifest, dir);
  if (std::filesystem::exists(dir / "optim_generators.pt")) torch::load(*s.opt_generators, (dir / "optim_generators.pt").string());
  if (std::filesystem::exists(dir / "optim_discriminators.pt"))
    torch::load(*s.opt_discriminators, (dir / "optim_discriminators.pt").string());
  s.epoch = manifest.header.epoch;
  s.position = manifest.header.position;
  s.step = manifest.header.step;
  set_epoch_learning_rates(s, s.epoch);
  return s;
}

/// Generators restored for inference; the model configuration is read from
/// the checkpoint itself and checked against the manifest hash.
struct InferenceModel {
  Config config;
  ForwardGenerator g_forward{nullptr};
  ReverseGenerator g_reverse{nullptr};
};

inline InferenceModel load_inference_model(const std::filesystem::path& dir) {
  InferenceModel m;
  m.config = validate_config(load_config(dir / "config.ini"));
  const auto manifest = read_manifest(dir / "manifest.txt");
  verify_config_hash(manifest, m.config.model);
  const auto shape = GeneratorShape::from(m.config.model);
  m.g_forward = ForwardGenerator(shape);
  m.g_reverse = ReverseGenerator(shape);
  Manifest generators_only = manifest;
  std::erase_if(generators_only.parameters, [](const ParameterEntry& e) { return e.name.rfind("g_", 0) != 0; });
  load_parameters({{"g_forward", m.g_forward.get()}, {"g_reverse", m.g_reverse.get()}}, generators_only, dir);
  m.g_forward->eval();
  m.g_reverse->eval();
  return m;
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

struct TrainOptions {
  std::filesystem::path out_dir;
  std::optional<std::filesystem::path> resume_from;
  std::function<void(const TrainState&, const StepResult&)> on_step;  // optional observer
  bool verbose = false;
};

struct TrainSummary {
  std::int64_t steps = 0;
  LossReport last;
  std::vector<std::filesystem::path> checkpoints;
  std::filesystem::path final_checkpoint;
  std::filesystem::path loss_csv;
};

inline std::string epoch_dir_name(std::int64_t epoch) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "epoch_%04lld", static_cast<long long>(epoch));
  return buf;
}

/// Runs epochs (or up to max_steps) writing loss.csv, per-epoch checkpoints
/// under checkpoints/ and a final checkpoint in final/.
inline TrainSummary run_training(const Config& config, const UnpairedMultiModalDataset& dataset,
                                 const TrainOptions& options) {
  torch::set_num_threads(1);
  auto state = options.resume_from ? load_train_state(config, *options.resume_from) : make_train_state(config);
  const auto& cfg = state.config;
  std::filesystem::create_directories(options.out_dir);

  TrainSummary summary;
  summary.loss_csv = options.out_dir / "loss.csv";
  const bool append = options.resume_from && std::filesystem::exists(summary.loss_csv);
  std::ofstream csv(summary.loss_csv, append ? std::ios::app : std::ios::trunc);
  if (!csv) throw IoError("trainer", "cannot write " + summary.loss_csv.string());
  if (!append) csv << kLossCsvHeader << "\n";

  BundleSampler sampler(dataset, cfg.model.image_size, static_cast<std::uint64_t>(cfg.train.seed), cfg.data.random_crop);
  const auto max_steps = cfg.train.max_steps;
  bool budget_done = max_steps > 0 && state.step >= max_steps;

  while (!budget_done && state.epoch < cfg.train.epochs) {
    set_epoch_learning_rates(state, state.epoch);
    EpochState es{state.epoch, static_cast<std::size_t>(state.position)};
    while (true) {
      std::vector<SampleBundle> bundles;
      while (static_cast<int>(bundles.size()) < cfg.train.batch_size) {
        auto b = sampler.next_batch(es);
        if (!b) break;
        bundles.push_back(std::move(*b));
      }
      if (bundles.empty()) break;
      const auto result = train_step(state, stack_bundles(bundles));
      state.position = static_cast<std::int64_t>(es.position);
      summary.last = result.report;
      ++summary.steps;
      csv << loss_csv_row(state.step, state.epoch, result.report, state.lr_generator, state.lr_discriminator) << "\n";
      if (!csv) throw IoError("trainer", "cannot write " + summary.loss_csv.string());
      if (options.on_step) options.on_step(state, result);
      if (options.verbose && state.step % 50 == 0)
        std::fprintf(stderr, "step %lld epoch %lld total %.4f\n", static_cast<long long>(state.step),
                     static_cast<long long>(state.epoch), result.report.total);
      if (max_steps > 0 && state.step >= max_steps) {
        budget_done = true;
        break;
      }
    }
    if (budget_done && state.position < static_cast<std::int64_t>(sampler.epoch_size())) break;
    const auto finished = state.epoch;
    ++state.epoch;
    state.position = 0;
    const int every = cfg.train.checkpoint_every;
    if (every > 0 && (finished + 1) % every == 0) {
      const auto dir = options.out_dir / "checkpoints" / epoch_dir_name(finished);
      save_checkpoint(state, dir);
      summary.checkpoints.push_back(dir);
    }
  }
  csv.flush();
  summary.final_checkpoint = options.out_dir / "final";
  save_checkpoint(state, summary.final_checkpoint);
  return summary;
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

struct EvaluationResult {
  double forward_cycle_l1 = 0.0;  // mean over samples of the pooled source L1
  std::vector<ImageMetrics> metrics;  // against ground truth, [0, 1] scale
};

/// Translates every listed sample (no gradients) and measures the forward
/// cycle error and, where ground truth exists, PSNR/SSIM.
inline EvaluationResult evaluate_model(const ModelConfig& model, ForwardGenerator& g_forward,
                                       ReverseGenerator& g_reverse, const UnpairedMultiModalDataset& ds,
                                       const std::vector<std::string>& ids) {
  torch::NoGradGuard no_grad;
  EvaluationResult r;
  if (ids.empty()) return r;
  double cycle_sum = 0.0;
  for (const auto& id : ids) {
    const auto sample = load_test_sample(ds, id, model.image_size);
    std::vector<torch::Tensor> batched;
    for (const auto& s : sample.sources) batched.push_back(s.unsqueeze(0));
    const auto sources = adapt_sources(model, batched);
    const auto fwd = g_forward->forward(sources);
    const auto back = g_reverse->forward(fwd.image);
    cycle_sum += cycle_forward(sources, back.images).item<double>();
    if (sample.ground_truth) {
      const auto pred = to_unit_range(fwd.image.squeeze(0));
      const auto gt = to_unit_range(*sample.ground_truth);
      r.metrics.push_back({id, psnr(pred, gt), ssim(pred, gt)});
    }
  }
  r.forward_cycle_l1 = cycle_sum / static_cast<double>(ids.size());
  return r;
}

inline EvaluationResult evaluate_model(TrainState& s, const UnpairedMultiModalDataset& ds,
                                       const std::vector<std::string>& ids) {
  return evaluate_model(s.config.model, s.g_forward, s.g_reverse, ds, ids);
}

}  // namespace in2i
