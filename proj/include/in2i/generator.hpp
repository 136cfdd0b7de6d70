#pragma once

#include <string>
#include <vector>

#include <torch/torch.h>

#include "blocks.hpp"
#include "config.hpp"
#include "error.hpp"

namespace in2i {

/// Widths and depths shared by both generators, resolved from a ModelConfig.
struct GeneratorShape {
  std::vector<std::int64_t> source_channels;
  std::int64_t target_channels = 3;
  std::int64_t base_width = 64;
  std::int64_t latent_channels = 256;
  int n_res_extract = 4;
  int n_res_encoder = 4;
  int n_res_decoder = 3;
  int n_res_reverse_decoder = 5;

  static GeneratorShape from(const ModelConfig& model) {
    GeneratorShape s;
    for (const auto& m : network_domains(model).sources) s.source_channels.push_back(m.channels);
    s.target_channels = model.domains.target.channels;
    s.base_width = model.base_width;
    s.latent_channels = model.latent_channels > 0 ? model.latent_channels : 4 * model.base_width;
    s.n_res_extract = model.n_res_extract;
    s.n_res_encoder = model.n_res_encoder;
    s.n_res_decoder = model.n_res_decoder;
    s.n_res_reverse_decoder = model.n_res_reverse_decoder;
    return s;
  }

  std::size_t n() const noexcept { return source_channels.size(); }
  std::int64_t branch_channels() const noexcept { return 4 * base_width; }
};

struct ForwardOutput {
  torch::Tensor image;
  torch::Tensor latent;
};

struct ReverseOutput {
  std::vector<torch::Tensor> images;
  torch::Tensor latent;
};

namespace detail {

/// 7x7 stem followed by two stride-2 convolutions: C x H x W -> out x H/4 x W/4.
inline torch::nn::Sequential downsampling_stem(std::int64_t in_channels, std::int64_t width, std::int64_t out_channels) {
  torch::nn::Sequential stem;
  stem->push_back(ConvBlock(ConvBlockOptions{in_channels, width, 7, 1, 3, Padding::reflect}));
  stem->push_back(ConvBlock(ConvBlockOptions{width, 2 * width, 3, 2, 1}));
  stem->push_back(ConvBlock(ConvBlockOptions{2 * width, out_channels, 3, 2, 1}));
  return stem;
}

inline void append_res_blocks(torch::nn::Sequential& seq, std::int64_t channels, int count) {
  for (int i = 0; i < count; ++i) seq->push_back(ResBlock(channels));
}

/// Residual blocks at latent width, two upsampling deconvolutions and a 7x7
/// output convolution followed by tanh (applied in forward).
inline torch::nn::Sequential decoder_stack(std::int64_t latent_channels, std::int64_t width, std::int64_t out_channels,
                                           int n_res) {
  torch::nn::Sequential dec;
  append_res_blocks(dec, latent_channels, n_res);
  dec->push_back(DeconvBlock(DeconvBlockOptions{latent_channels, 2 * width}));
  dec->push_back(DeconvBlock(DeconvBlockOptions{2 * width, width}));
  dec->push_back(ConvBlock(ConvBlockOptions{width, out_channels, 7, 1, 3, Padding::reflect, false, false}));
  return dec;
}

inline std::string shape_string(const torch::Tensor& t) {
  std::string s;
  for (auto d : t.sizes()) s += (s.empty() ? "" : "x") + std::to_string(d);
  return s;
}

inline void check_image(const torch::Tensor& x, std::int64_t channels, const std::string& what) {
  if (x.dim() != 4) throw ShapeError("generator", what + " must be NxCxHxW, got " + shape_string(x));
  if (x.size(1) != channels)
    throw ShapeError("generator", what + " must have " + std::to_string(channels) + " channels, got " +
                                      std::to_string(x.size(1)));
  if (x.size(2) % 4 != 0 || x.size(3) % 4 != 0)
    throw ShapeError("generator", what + " height and width must be divisible by 4, got " + shape_string(x));
}

}  // namespace detail

/// Concatenates per-modality feature maps along channels and reduces them
/// with one stride-1 3x3 convolution block.
inline torch::Tensor fuse_features(const std::vector<torch::Tensor>& branch_features, ConvBlock& fusion) {
  if (branch_features.empty()) throw ShapeError("generator", "fusion needs at least one branch");
  const auto& first = branch_features.front();
  for (std::size_t i = 1; i < branch_features.size(); ++i) {
    const auto& f = branch_features[i];
    if (f.dim() != 4 || f.size(2) != first.size(2) || f.size(3) != first.size(3))
      throw ShapeError("generator", "branch " + std::to_string(i) + " has spatial shape " + detail::shape_string(f) +
                                        ", expected to match " + detail::shape_string(first));
    if (f.size(1) != first.size(1))
      throw ShapeError("generator", "branch " + std::to_string(i) + " has " + std::to_string(f.size(1)) +
                                        " channels, expected " + std::to_string(first.size(1)));
  }
  const auto stacked = branch_features.size() == 1 ? first : torch::cat(branch_features, 1);
  return fusion->forward(stacked);
}

/// N -> 1 generator: n extractor branches, fusion, shared encoder to the
/// latent tap, single decoder to the target domain.
class ForwardGeneratorImpl : public torch::nn::Module {
 public:
  explicit ForwardGeneratorImpl(GeneratorShape shape) : shape_(std::move(shape)) {
    const auto w = shape_.base_width;
    const auto branch = shape_.branch_channels();
    for (std::size_t i = 0; i < shape_.n(); ++i) {
      auto ex = detail::downsampling_stem(shape_.source_channels[i], w, branch);
      detail::append_res_blocks(ex, branch, shape_.n_res_extract);
      extractors.push_back(register_module("extractor" + std::to_string(i), ex));
    }
    fusion = register_module(
        "fusion", ConvBlock(ConvBlockOptions{static_cast<std::int64_t>(shape_.n()) * branch, shape_.latent_channels,
                                             3, 1, 1, Padding::reflect}));
    encoder = torch::nn::Sequential();
    detail::append_res_blocks(encoder, shape_.latent_channels, shape_.n_res_encoder);
    register_module("encoder", encoder);
    decoder = register_module("decoder", detail::decoder_stack(shape_.latent_channels, w, shape_.target_channels,
                                                               shape_.n_res_decoder));
  }

  /// Source images -> latent code (the extractor/fusion/encoder half).
  torch::Tensor encode(const std::vector<torch::Tensor>& sources) {
    if (sources.size() != shape_.n())
      throw ShapeError("generator", "expected " + std::to_string(shape_.n()) + " source images, got " +
                                        std::to_string(sources.size()));
    std::vector<torch::Tensor> features;
    features.reserve(sources.size());
    for (std::size_t i = 0; i < sources.size(); ++i) {
      detail::check_image(sources[i], shape_.source_channels[i], "source " + std::to_string(i));
      if (sources[i].size(2) != sources[0].size(2) || sources[i].size(3) != sources[0].size(3))
        throw ShapeError("generator", "source images must share height and width");
      features.push_back(extractors[i]->forward(sources[i]));
    }
    return encoder->forward(fuse_features(features, fusion));
  }

  torch::Tensor decode(const torch::Tensor& latent) { return torch::tanh(decoder->forward(latent)); }

  ForwardOutput forward(const std::vector<torch::Tensor>& sources) {
    auto latent = encode(sources);
    return {decode(latent), latent};
  }

  const GeneratorShape& shape() const noexcept { return shape_; }

  std::vector<torch::nn::Sequential> extractors;
  ConvBlock fusion{nullptr};
  torch::nn::Sequential encoder{nullptr};
  torch::nn::Sequential decoder{nullptr};

 private:
  GeneratorShape shape_;
};
TORCH_MODULE(ForwardGenerator);

/// 1 -> N generator: single extractor and encoder to the latent tap, then n
/// disjoint decoders, decoder i emitting source modality i.
class ReverseGeneratorImpl : public torch::nn::Module {
 public:
  explicit ReverseGeneratorImpl(GeneratorShape shape) : shape_(std::move(shape)) {
    extractor = register_module(
        "extractor", detail::downsampling_stem(shape_.target_channels, shape_.base_width, shape_.latent_channels));
    encoder = torch::nn::Sequential();
    detail::append_res_blocks(encoder, shape_.latent_channels, shape_.n_res_encoder);
    register_module("encoder", encoder);
    for (std::size_t i = 0; i < shape_.n(); ++i)
      decoders.push_back(register_module(
          "decoder" + std::to_string(i), detail::decoder_stack(shape_.latent_channels, shape_.base_width,
                                                               shape_.source_channels[i], shape_.n_res_reverse_decoder)));
  }

  torch::Tensor encode(const torch::Tensor& target) {
    detail::check_image(target, shape_.target_channels, "target");
    return encoder->forward(extractor->forward(target));
  }

  std::vector<torch::Tensor> decode(const torch::Tensor& latent) {
    std::vector<torch::Tensor> out;
    out.reserve(decoders.size());
    for (auto& dec : decoders) out.push_back(torch::tanh(dec->forward(latent)));
    return out;
  }

  ReverseOutput forward(const torch::Tensor& target) {
    auto latent = encode(target);
    return {decode(latent), latent};
  }

  const GeneratorShape& shape() const noexcept { return shape_; }

  torch::nn::Sequential extractor{nullptr};
  torch::nn::Sequential encoder{nullptr};
  std::vector<torch::nn::Sequential> decoders;

 private:
  GeneratorShape shape_;
};
TORCH_MODULE(ReverseGenerator);

inline ForwardOutput forward_translate(ForwardGenerator& gen, const std::vector<torch::Tensor>& sources) {
  return gen->forward(sources);
}

inline ReverseOutput reverse_translate(ReverseGenerator& gen, const torch::Tensor& target) {
  return gen->forward(target);
}

}  // namespace in2i
