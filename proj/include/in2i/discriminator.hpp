#pragma once

#include <vector>

#include <torch/torch.h>

#include "config.hpp"
#include "error.hpp"

namespace in2i {

/// 70x70 PatchGAN: C64-C128-C256-C512 (4x4 kernels, strides 2,2,2,1, pad 1)
/// and a final 4x4 stride-1 convolution to one score channel. Leaky ReLU 0.2,
/// instance norm on all but the first layer. Emits raw scores (logits).
class PatchDiscriminatorImpl : public torch::nn::Module {
 public:
  PatchDiscriminatorImpl(std::int64_t in_channels, std::int64_t base_width = 64) : in_channels_(in_channels) {
    const std::int64_t widths[] = {base_width, 2 * base_width, 4 * base_width, 8 * base_width};
    const std::int64_t strides[] = {2, 2, 2, 1};
    std::int64_t prev = in_channels;
    for (int i = 0; i < 4; ++i) {
      layers->push_back(torch::nn::Conv2d(torch::nn::Conv2dOptions(prev, widths[i], 4).stride(strides[i]).padding(1)));
      if (i > 0) layers->push_back(torch::nn::InstanceNorm2d(torch::nn::InstanceNorm2dOptions(widths[i])));
      layers->push_back(torch::nn::LeakyReLU(torch::nn::LeakyReLUOptions().negative_slope(0.2)));
      prev = widths[i];
    }
    layers->push_back(torch::nn::Conv2d(torch::nn::Conv2dOptions(prev, 1, 4).stride(1).padding(1)));
    register_module("layers", layers);
  }

  torch::Tensor forward(const torch::Tensor& x) {
    if (x.dim() != 4 || x.size(1) != in_channels_)
      throw ShapeError("discriminator", "expects NxCxHxW input with " + std::to_string(in_channels_) +
                                            " channels, got " + std::to_string(x.dim() == 4 ? x.size(1) : -1));
    return layers->forward(x);
  }

  /// Final score convolution; exposed for tests that pin it.
  torch::nn::Conv2d score_layer() { return layers->ptr<torch::nn::Conv2dImpl>(layers->size() - 1); }

  std::int64_t in_channels() const noexcept { return in_channels_; }

  torch::nn::Sequential layers;

 private:
  std::int64_t in_channels_;
};
TORCH_MODULE(PatchDiscriminator);

/// Closed-form patch-map side for an input side: three stride-2 layers then
/// two stride-1 layers, all 4x4 with pad 1.
constexpr std::int64_t patch_map_side(std::int64_t side) {
  for (int i = 0; i < 3; ++i) side = (side + 2 - 4) / 2 + 1;
  for (int i = 0; i < 2; ++i) side = side + 2 - 4 + 1;
  return side;
}

inline torch::Tensor discriminate(PatchDiscriminator& d, const torch::Tensor& x) { return d->forward(x); }

/// Map raw scores into the space the adversarial losses read: sigmoid in
/// log mode, identity in least-squares mode.
inline torch::Tensor score_probabilities(const torch::Tensor& raw, GanMode mode) {
  return mode == GanMode::log ? torch::sigmoid(raw) : raw;
}

/// n + 1 discriminators: index 0 judges the target domain, index 1 + i judges
/// source modality i.
struct DiscriminatorBank {
  std::vector<PatchDiscriminator> members;

  PatchDiscriminator& target() { return members.front(); }
  PatchDiscriminator& source(std::size_t i) { return members.at(1 + i); }
  std::size_t size() const noexcept { return members.size(); }

  std::vector<torch::Tensor> parameters() const {
    std::vector<torch::Tensor> out;
    for (const auto& d : members)
      for (auto& p : d->parameters()) out.push_back(p);
    return out;
  }
};

inline DiscriminatorBank build_discriminator_bank(const DomainSpec& domains, std::int64_t base_width = 64) {
  DiscriminatorBank bank;
  bank.members.emplace_back(domains.target.channels, base_width);
  for (const auto& m : domains.sources) bank.members.emplace_back(m.channels, base_width);
  return bank;
}

}  // namespace in2i
