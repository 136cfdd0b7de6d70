#include <gtest/gtest.h>

#include <random>

#include "in2i/generator.hpp"
#include "test_util.hpp"

using namespace in2i;
using in2i::testing::max_relative_error;

namespace {

ModelConfig colorization(int side = 256) {
  ModelConfig m;
  m.domains.sources = {{"nir", 1}, {"grey", 1}};
  m.domains.target = {"rgb", 3};
  m.image_size = {side, side};
  return validate_config(m, TrainConfig{}).model;
}

ModelConfig small_model(std::vector<int> source_channels, int target_channels, int width, int side) {
  ModelConfig m;
  for (std::size_t i = 0; i < source_channels.size(); ++i)
    m.domains.sources.push_back({"m" + std::to_string(i), source_channels[i]});
  m.domains.target = {"t", target_channels};
  m.image_size = {side, side};
  m.base_width = width;
  m.n_res_extract = 1;
  m.n_res_encoder = 1;
  m.n_res_decoder = 1;
  m.n_res_reverse_decoder = 1;
  return validate_config(m, TrainConfig{}).model;
}

std::vector<torch::Tensor> random_sources(const GeneratorShape& s, int side, torch::Dtype dtype = torch::kFloat32) {
  std::vector<torch::Tensor> out;
  for (auto c : s.source_channels) out.push_back(torch::rand({1, c, side, side}, dtype) * 2 - 1);
  return out;
}

void seed_init(torch::nn::Module& m, std::uint64_t seed, double sd = 0.02) {
  SeededRng rng(seed);
  init_weights(m, rng, sd);
}

}  // namespace

TEST(ForwardGenerator, ColorizationShapes) {
  const auto shape = GeneratorShape::from(colorization());
  ForwardGenerator g(shape);
  torch::NoGradGuard ng;
  const auto out = g->forward(random_sources(shape, 256));
  EXPECT_EQ(out.image.sizes(), (std::vector<std::int64_t>{1, 3, 256, 256}));
  EXPECT_EQ(out.latent.sizes(), (std::vector<std::int64_t>{1, 256, 64, 64}));
}

TEST(ReverseGenerator, ColorizationShapes) {
  const auto shape = GeneratorShape::from(colorization());
  ReverseGenerator g(shape);
  torch::NoGradGuard ng;
  const auto out = g->forward(torch::rand({1, 3, 256, 256}) * 2 - 1);
  ASSERT_EQ(out.images.size(), 2u);
  for (const auto& img : out.images) EXPECT_EQ(img.sizes(), (std::vector<std::int64_t>{1, 1, 256, 256}));
  EXPECT_EQ(out.latent.sizes(), (std::vector<std::int64_t>{1, 256, 64, 64}));
}

TEST(Generators, DefaultLayerCounts) {
  const auto shape = GeneratorShape::from(colorization());
  ForwardGenerator f(shape);
  ReverseGenerator r(shape);
  ASSERT_EQ(f->extractors.size(), 2u);
  EXPECT_EQ(f->extractors[0]->size(), 3u + 4u);
  EXPECT_EQ(f->encoder->size(), 4u);
  EXPECT_EQ(f->decoder->size(), 3u + 3u);
  EXPECT_EQ(r->extractor->size(), 3u);
  EXPECT_EQ(r->encoder->size(), 4u);
  ASSERT_EQ(r->decoders.size(), 2u);
  EXPECT_EQ(r->decoders[1]->size(), 5u + 3u);
  // Fusion consumes n x branch channels.
  EXPECT_EQ(f->fusion->options().in_channels, 2 * shape.branch_channels());
}

TEST(ForwardGenerator, ThreeModalitiesGiveOneRgbImage) {
  const auto shape = GeneratorShape::from(small_model({1, 1, 1}, 3, 8, 32));
  ForwardGenerator g(shape);
  torch::NoGradGuard ng;
  const auto out = g->forward(random_sources(shape, 32));
  EXPECT_EQ(out.image.sizes(), (std::vector<std::int64_t>{1, 3, 32, 32}));
}

TEST(ForwardGenerator, ZeroFinalConvGivesZeroOutput) {
  const auto shape = GeneratorShape::from(small_model({1, 1}, 3, 8, 16));
  ForwardGenerator g(shape);
  seed_init(*g, 1);
  {
    torch::NoGradGuard ng;
    auto last = g->decoder->ptr<ConvBlockImpl>(g->decoder->size() - 1);
    last->conv->weight.zero_();
    last->conv->bias.zero_();
  }
  torch::NoGradGuard ng;
  const auto out = g->forward(random_sources(shape, 16));
  EXPECT_EQ(out.image.abs().max().item<double>(), 0.0);
}

TEST(ReverseGenerator, SingleSourceIsCycleGanShaped) {
  const auto shape = GeneratorShape::from(small_model({1}, 3, 8, 16));
  ReverseGenerator g(shape);
  torch::NoGradGuard ng;
  EXPECT_EQ(g->forward(torch::rand({1, 3, 16, 16})).images.size(), 1u);
}

TEST(Generators, RejectBadInputs) {
  const auto shape = GeneratorShape::from(small_model({1, 2}, 3, 4, 16));
  ForwardGenerator f(shape);
  ReverseGenerator r(shape);
  torch::NoGradGuard ng;
  EXPECT_THROW(f->forward({torch::rand({1, 1, 16, 16})}), ShapeError);
  EXPECT_THROW(f->forward({torch::rand({1, 2, 16, 16}), torch::rand({1, 1, 16, 16})}), ShapeError);  // swapped order
  EXPECT_THROW(f->forward({torch::rand({1, 1, 16, 16}), torch::rand({1, 2, 12, 12})}), ShapeError);
  EXPECT_THROW(f->forward({torch::rand({1, 1, 18, 18}), torch::rand({1, 2, 18, 18})}), ShapeError);
  EXPECT_THROW(r->forward(torch::rand({1, 1, 16, 16})), ShapeError);
}

TEST(FuseFeatures, ColorizationArithmetic) {
  ConvBlock fusion(ConvBlockOptions{512, 256, 3, 1, 1, Padding::reflect});
  torch::NoGradGuard ng;
  const auto y = fuse_features({torch::randn({1, 256, 64, 64}), torch::randn({1, 256, 64, 64})}, fusion);
  EXPECT_EQ(y.sizes(), (std::vector<std::int64_t>{1, 256, 64, 64}));
}

TEST(FuseFeatures, SingleBranchIsPlainConv) {
  ConvBlock fusion(ConvBlockOptions{4, 6, 3, 1, 1, Padding::reflect});
  torch::NoGradGuard ng;
  const auto x = torch::randn({1, 4, 8, 8});
  EXPECT_TRUE(torch::equal(fuse_features({x}, fusion), fusion->forward(x)));
}

TEST(FuseFeatures, SpatialMismatchIsAnError) {
  ConvBlock fusion(ConvBlockOptions{8, 4, 3, 1, 1});
  EXPECT_THROW(fuse_features({torch::randn({1, 4, 8, 8}), torch::randn({1, 4, 4, 4})}, fusion), ShapeError);
  EXPECT_THROW(fuse_features({torch::randn({1, 4, 8, 8}), torch::randn({1, 3, 8, 8})}, fusion), ShapeError);
}

TEST(FuseFeatures, BranchPermutationWithPermutedKernelIsInvariant) {
  ConvBlock a(ConvBlockOptions{6, 5, 3, 1, 1, Padding::reflect});
  ConvBlock b(ConvBlockOptions{6, 5, 3, 1, 1, Padding::reflect});
  a->to(torch::kFloat64);
  b->to(torch::kFloat64);
  {
    torch::NoGradGuard ng;
    const auto w = a->conv->weight;
    b->conv->weight.copy_(torch::cat({w.slice(1, 3, 6), w.slice(1, 0, 3)}, 1));
    b->conv->bias.copy_(a->conv->bias);
  }
  torch::NoGradGuard ng;
  const auto x = torch::randn({1, 3, 8, 8}, torch::kFloat64), y = torch::randn({1, 3, 8, 8}, torch::kFloat64);
  EXPECT_LT((fuse_features({x, y}, a) - fuse_features({y, x}, b)).abs().max().item<double>(), 1e-12);
}

TEST(Generators, LatentShapesAgreeProperty) {
  std::mt19937 rng(11);
  for (int trial = 0; trial < 12; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 3);
    std::vector<int> channels;
    for (int i = 0; i < n; ++i) channels.push_back(1 + static_cast<int>(rng() % 3));
    const int side = 4 * (2 + static_cast<int>(rng() % 4));
    auto model = small_model(channels, 1 + static_cast<int>(rng() % 3), 2 + static_cast<int>(rng() % 4), side);
    if (rng() % 2) model.latent_channels = 3 + static_cast<int>(rng() % 9);
    const auto shape = GeneratorShape::from(model);
    ForwardGenerator f(shape);
    ReverseGenerator r(shape);
    torch::NoGradGuard ng;
    const auto fo = f->forward(random_sources(shape, side));
    const auto ro = r->forward(torch::rand({1, shape.target_channels, side, side}) * 2 - 1);
    EXPECT_EQ(fo.latent.sizes(), ro.latent.sizes());
    EXPECT_EQ(fo.latent.size(1), shape.latent_channels);
    EXPECT_EQ(fo.latent.size(2), side / 4);
    ASSERT_EQ(ro.images.size(), static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) EXPECT_EQ(ro.images[static_cast<std::size_t>(i)].size(1), channels[static_cast<std::size_t>(i)]);
  }
}

TEST(Generators, OutputsLieInUnitRange) {
  const auto shape = GeneratorShape::from(small_model({1, 1}, 3, 4, 16));
  ForwardGenerator f(shape);
  ReverseGenerator r(shape);
  seed_init(*f, 2, 1.0);  // large weights drive tanh into saturation
  seed_init(*r, 3, 1.0);
  torch::NoGradGuard ng;
  const auto fo = f->forward(random_sources(shape, 16));
  EXPECT_LE(fo.image.abs().max().item<double>(), 1.0);
  for (const auto& img : r->forward(fo.image).images) EXPECT_LE(img.abs().max().item<double>(), 1.0);
}

TEST(ReverseGenerator, DecoderBranchesAreIsolated) {
  const auto shape = GeneratorShape::from(small_model({1, 2}, 3, 4, 16));
  ReverseGenerator r(shape);
  r->to(torch::kFloat64);
  seed_init(*r, 4, 0.2);
  const auto t = torch::rand({1, 3, 16, 16}, torch::kFloat64) * 2 - 1;

  // Jacobian of output 0 with respect to decoder 1 parameters is zero.
  const auto out = r->forward(t);
  const auto grads = torch::autograd::grad({out.images[0].sum()}, r->decoders[1]->parameters(), {}, true, false, true);
  for (const auto& g : grads) EXPECT_TRUE(!g.defined() || g.abs().max().item<double>() == 0.0);

  // Perturbing decoder 0 changes output 0 only.
  torch::NoGradGuard ng;
  for (auto& p : r->decoders[0]->parameters()) p.add_(0.05);
  const auto after = r->forward(t);
  EXPECT_TRUE(torch::equal(after.images[1], out.images[1].detach()));
  EXPECT_FALSE(torch::equal(after.images[0], out.images[0].detach()));
}

TEST(Generators, EndToEndGradientMatchesFiniteDifferences) {
  // 8x8, two modalities, width 4, default residual depths. The 2x2 bottleneck
  // makes instance norm sharply curved, hence the small step.
  ModelConfig m;
  m.domains.sources = {{"a", 1}, {"b", 1}};
  m.domains.target = {"t", 3};
  m.image_size = {8, 8};
  m.base_width = 4;
  const auto shape = GeneratorShape::from(validate_config(m, TrainConfig{}).model);
  ForwardGenerator f(shape);
  f->to(torch::kFloat64);
  seed_init(*f, 5, 0.3);
  const auto sources = random_sources(shape, 8, torch::kFloat64);
  const auto w = torch::randn({1, 3, 8, 8}, torch::kFloat64);
  auto fn = [&] {
    const auto out = f->forward(sources);
    return (out.image * w).sum() + 0.1 * out.latent.pow(2).sum();
  };
  const auto params = f->parameters();
  EXPECT_LT(max_relative_error(fn, params, 1e-6, 16), 1e-3);
}
