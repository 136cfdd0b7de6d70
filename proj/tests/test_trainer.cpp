#include <gtest/gtest.h>

#include <sstream>

#include "in2i/toy.hpp"
#include "in2i/trainer.hpp"
#include "test_util.hpp"

using namespace in2i;
using namespace in2i::toy;
using in2i::testing::read_file;
using in2i::testing::TempDir;

namespace {

Config small_config(const std::filesystem::path& root, std::uint64_t seed = 5) {
  auto c = toy_config(root, 32, seed);
  c.train.batch_size = 1;
  c.train.max_steps = 0;
  c.train.epochs = 2;
  c.train.decay_start_epoch = 1;
  return c;
}

StepBatch random_batch(std::uint64_t seed) {
  torch::manual_seed(seed);
  StepBatch b;
  b.sources = {torch::rand({1, 1, 32, 32}) * 2 - 1, torch::rand({1, 1, 32, 32}) * 2 - 1};
  b.target = torch::rand({1, 3, 32, 32}) * 2 - 1;
  return b;
}

std::vector<torch::Tensor> snapshot(const std::vector<torch::Tensor>& params) {
  std::vector<torch::Tensor> out;
  for (const auto& p : params) out.push_back(p.detach().clone());
  return out;
}

void freeze(torch::optim::Adam& opt) {
  for (auto& g : opt.param_groups()) static_cast<torch::optim::AdamOptions&>(g.options()).lr(0.0);
}

bool all_equal(const std::vector<torch::Tensor>& a, const std::vector<torch::Tensor>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!torch::equal(a[i], b[i].detach())) return false;
  return true;
}

std::vector<std::string> csv_lines(const std::filesystem::path& p) {
  std::istringstream in(read_file(p));
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  return lines;
}

std::vector<double> csv_row(const std::string& line) {
  std::vector<double> v;
  std::istringstream in(line);
  for (std::string cell; std::getline(in, cell, ',');) v.push_back(std::stod(cell));
  return v;
}

struct ToyFixture {
  TempDir dir{"trainer"};
  std::filesystem::path data = dir.path() / "data";
  UnpairedMultiModalDataset ds;

  ToyFixture() {
    ToyOptions t;
    t.out = data;
    t.size = 32;
    t.count = 6;
    t.test_count = 2;
    t.seed = 1;
    make_toy(t);
    ds = scan_dataset(data, toy_config(data, 32, 1).model.domains);
  }
};

}  // namespace

TEST(LearningRate, ConstantThenLinearDecay) {
  const double base = 2e-4;
  for (int e = 0; e < 100; ++e) EXPECT_EQ(learning_rate(base, e, 200, 100), base);
  EXPECT_DOUBLE_EQ(learning_rate(base, 100, 200, 100), base);
  EXPECT_DOUBLE_EQ(learning_rate(base, 150, 200, 100), base / 2);
  EXPECT_DOUBLE_EQ(learning_rate(base, 199, 200, 100), base / 100);
  for (int e = 100; e < 199; ++e) EXPECT_GT(learning_rate(base, e, 200, 100), learning_rate(base, e + 1, 200, 100));
}

TEST(AblationPresets, SetLambdas) {
  TrainConfig t;
  EXPECT_EQ(apply_preset(t, AblationPreset::adv).lambda1, 0.0);
  EXPECT_EQ(apply_preset(t, AblationPreset::adv).lambda2, 0.0);
  EXPECT_EQ(apply_preset(t, AblationPreset::adv_latent).lambda1, 0.0);
  EXPECT_EQ(apply_preset(t, AblationPreset::adv_latent).lambda2, 1.0);
  EXPECT_EQ(apply_preset(t, AblationPreset::full), t);
  for (auto p : {AblationPreset::adv, AblationPreset::adv_latent, AblationPreset::full})
    EXPECT_EQ(parse_ablation_preset(to_string(p)), p);
  EXPECT_FALSE(parse_ablation_preset("cycle").has_value());
}

TEST(TrainStep, BitwiseReproducible) {
  TempDir d("step");
  const auto cfg = small_config(d.path());
  auto a = make_train_state(cfg), b = make_train_state(cfg);
  EXPECT_TRUE(all_equal(a.generator_parameters(), b.generator_parameters()));
  for (std::uint64_t k = 0; k < 3; ++k) {
    const auto batch = random_batch(k);
    const auto ra = train_step(a, batch), rb = train_step(b, batch);
    EXPECT_EQ(ra.generator_objective, rb.generator_objective);
    EXPECT_EQ(ra.discriminator_objective, rb.discriminator_objective);
    EXPECT_EQ(ra.report.total, rb.report.total);
  }
  EXPECT_TRUE(all_equal(a.generator_parameters(), b.generator_parameters()));
  EXPECT_TRUE(all_equal(a.discriminators.parameters(), b.discriminators.parameters()));
  EXPECT_EQ(a.step, 3);
}

TEST(TrainStep, ZeroLambdasLeaveOnlyAdversarialGradient) {
  TempDir d("lambda");
  auto cfg = small_config(d.path());
  cfg.train.lambda1 = cfg.train.lambda2 = 0.0;
  auto a = make_train_state(cfg), b = make_train_state(cfg);
  freeze(*a.opt_discriminators);  // keep D fixed so the reference sees the same critics
  const auto batch = random_batch(11);
  const auto r = train_step(a, batch);
  EXPECT_EQ(r.report.cycle_forward, 0.0);
  EXPECT_EQ(r.report.cycle_reverse, 0.0);
  EXPECT_EQ(r.report.latent_forward, 0.0);
  EXPECT_EQ(r.report.latent_reverse, 0.0);

  // Reference gradient: adversarial generator terms only.
  for (auto& p : b.generator_parameters()) p.mutable_grad() = torch::Tensor();
  auto fwd = b.g_forward->forward(batch.sources);
  auto rev = b.g_reverse->forward(batch.target);
  auto obj = generator_adversarial_objective(b.discriminators.target()->forward(fwd.image), GanMode::least_squares);
  for (std::size_t i = 0; i < 2; ++i)
    obj = obj + generator_adversarial_objective(b.discriminators.source(i)->forward(rev.images[i]), GanMode::least_squares);
  EXPECT_DOUBLE_EQ(obj.item<double>(), r.generator_objective);
  obj.backward();
  const auto pa = a.generator_parameters(), pb = b.generator_parameters();
  for (std::size_t i = 0; i < pa.size(); ++i) {
    ASSERT_TRUE(pb[i].grad().defined());
    EXPECT_LE((pa[i].grad() - pb[i].grad()).abs().max().item<double>(),
              1e-6 * (1.0 + pb[i].grad().abs().max().item<double>()))
        << "parameter " << i;
  }
}

TEST(TrainStep, OptimisersTouchOnlyTheirOwnSide) {
  TempDir d("sides");
  auto cfg = small_config(d.path());
  {
    auto s = make_train_state(cfg);
    freeze(*s.opt_generators);
    const auto g0 = snapshot(s.generator_parameters()), d0 = snapshot(s.discriminators.parameters());
    train_step(s, random_batch(1));
    EXPECT_TRUE(all_equal(g0, s.generator_parameters()));
    EXPECT_FALSE(all_equal(d0, s.discriminators.parameters()));
  }
  {
    auto s = make_train_state(cfg);
    freeze(*s.opt_discriminators);
    const auto g0 = snapshot(s.generator_parameters()), d0 = snapshot(s.discriminators.parameters());
    train_step(s, random_batch(1));
    EXPECT_FALSE(all_equal(g0, s.generator_parameters()));
    EXPECT_TRUE(all_equal(d0, s.discriminators.parameters()));
  }
}

TEST(RunTraining, WritesCheckpointsAndOneCsvRowPerStep) {
  ToyFixture fx;
  auto cfg = small_config(fx.data);
  cfg.train.checkpoint_every = 1;
  cfg.train.decay_start_epoch = 0;
  TrainOptions opt;
  opt.out_dir = fx.dir.path() / "run";
  std::int64_t observed = 0;
  opt.on_step = [&](const TrainState&, const StepResult&) { ++observed; };
  const auto summary = run_training(cfg, fx.ds, opt);
  const std::int64_t expected = static_cast<std::int64_t>(fx.ds.train_ids.size()) * 2;
  EXPECT_EQ(summary.steps, expected);
  EXPECT_EQ(observed, expected);
  const auto lines = csv_lines(summary.loss_csv);
  ASSERT_EQ(static_cast<std::int64_t>(lines.size()), expected + 1);
  EXPECT_EQ(lines[0], kLossCsvHeader);
  ASSERT_EQ(summary.checkpoints.size(), 2u);
  for (const auto& c : summary.checkpoints) EXPECT_TRUE(std::filesystem::exists(c / "manifest.txt"));
  EXPECT_TRUE(std::filesystem::exists(opt.out_dir / "checkpoints" / "epoch_0000" / "manifest.txt"));
  EXPECT_TRUE(std::filesystem::exists(opt.out_dir / "final" / "manifest.txt"));
  // Epoch 0 runs at the base rate, epoch 1 at half of it.
  EXPECT_DOUBLE_EQ(csv_row(lines[1]).at(9), cfg.train.lr_generator);
  EXPECT_DOUBLE_EQ(csv_row(lines.back()).at(9), cfg.train.lr_generator / 2);
}

TEST(RunTraining, ResumeReproducesUninterruptedRun) {
  ToyFixture fx;
  auto cfg = small_config(fx.data);
  cfg.train.epochs = 4;
  cfg.train.decay_start_epoch = 1;
  TrainOptions full;
  full.out_dir = fx.dir.path() / "full";
  run_training(cfg, fx.ds, full);

  auto first = cfg;
  first.train.max_steps = static_cast<std::int64_t>(fx.ds.train_ids.size()) * 2 + 1;  // stop mid-epoch
  TrainOptions part;
  part.out_dir = fx.dir.path() / "part";
  run_training(first, fx.ds, part);
  TrainOptions resume;
  resume.out_dir = part.out_dir;
  resume.resume_from = part.out_dir / "final";
  run_training(cfg, fx.ds, resume);

  EXPECT_EQ(read_file(full.out_dir / "loss.csv"), read_file(part.out_dir / "loss.csv"));
  const auto a = csv_lines(full.out_dir / "loss.csv");
  std::vector<double> lrs;
  for (std::size_t i = 1; i < a.size(); ++i) lrs.push_back(csv_row(a[i]).at(9));
  EXPECT_NEAR(lrs.front(), 1e-3, 1e-12);
  EXPECT_NEAR(lrs.back(), 1e-3 / 3, 1e-12);  // csv keeps 9 significant digits
}

TEST(RunTraining, DisabledTermsAreZeroInTheCsv) {
  ToyFixture fx;
  auto cfg = small_config(fx.data);
  cfg.train = apply_preset(cfg.train, AblationPreset::adv_latent);
  cfg.train.epochs = 1;
  cfg.train.decay_start_epoch = 0;
  TrainOptions opt;
  opt.out_dir = fx.dir.path() / "run";
  run_training(cfg, fx.ds, opt);
  const auto lines = csv_lines(opt.out_dir / "loss.csv");
  ASSERT_GT(lines.size(), 1u);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto row = csv_row(lines[i]);
    EXPECT_EQ(row.at(6), 0.0);
    EXPECT_EQ(row.at(7), 0.0);
    EXPECT_GT(row.at(4), 0.0);
    EXPECT_GT(row.at(5), 0.0);
  }
}

TEST(Checkpoint, RoundTripAndConfigMismatch) {
  TempDir d("ckpt");
  const auto cfg = small_config(d.path());
  auto s = make_train_state(cfg);
  train_step(s, random_batch(3));
  s.epoch = 1;
  s.position = 2;
  save_checkpoint(s, d.path() / "c");
  auto r = load_train_state(cfg, d.path() / "c");
  EXPECT_TRUE(all_equal(s.generator_parameters(), r.generator_parameters()));
  EXPECT_TRUE(all_equal(s.discriminators.parameters(), r.discriminators.parameters()));
  EXPECT_EQ(r.step, 1);
  EXPECT_EQ(r.epoch, 1);
  EXPECT_EQ(r.position, 2);
  // Optimiser moments were restored: the next step matches bitwise.
  const auto batch = random_batch(4);
  EXPECT_EQ(train_step(s, batch).generator_objective, train_step(r, batch).generator_objective);
  EXPECT_TRUE(all_equal(s.generator_parameters(), r.generator_parameters()));

  auto inference = load_inference_model(d.path() / "c");
  EXPECT_EQ(inference.config.model, cfg.model);

  auto other = cfg;
  other.model.base_width = 4;
  EXPECT_THROW(load_train_state(other, d.path() / "c"), ConfigError);
}
