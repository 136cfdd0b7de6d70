#pragma once

#include <string>

#include <torch/torch.h>

#include "error.hpp"
#include "rng.hpp"

namespace in2i {

namespace F = torch::nn::functional;

enum class Padding { zeros, reflect };

namespace detail {

inline void check_input(const torch::Tensor& x, std::int64_t in_channels, const char* block) {
  if (x.dim() != 4)
    throw ShapeError("nn_blocks", std::string(block) + " expects an NxCxHxW tensor, got " + std::to_string(x.dim()) +
                                      " dims");
  if (x.size(1) != in_channels)
    throw ShapeError("nn_blocks", std::string(block) + " expects " + std::to_string(in_channels) +
                                      " input channels, got " + std::to_string(x.size(1)));
  if (!torch::isfinite(x).all().item<bool>())
    throw NumericError("nn_blocks", std::string(block) + " received non-finite input");
}

inline torch::Tensor instance_norm(const torch::Tensor& x, double eps) {
  return F::instance_norm(x, F::InstanceNormFuncOptions().eps(eps));
}

}  // namespace detail

struct ConvBlockOptions {
  std::int64_t in_channels = 1;
  std::int64_t out_channels = 1;
  std::int64_t kernel = 3;
  std::int64_t stride = 1;
  std::int64_t pad = 1;
  Padding padding = Padding::zeros;
  bool norm = true;
  bool relu = true;
  double eps = 1e-5;
};

/// Convolution, optional instance norm (no affine), optional ReLU.
/// Output side = floor((H + 2 pad - k) / stride) + 1.
class ConvBlockImpl : public torch::nn::Module {
 public:
  explicit ConvBlockImpl(ConvBlockOptions options) : options_(options) {
    auto conv_options = torch::nn::Conv2dOptions(options.in_channels, options.out_channels, options.kernel)
                            .stride(options.stride)
                            .padding(options.pad);
    if (options.padding == Padding::reflect) conv_options.padding_mode(torch::kReflect);
    conv = register_module("conv", torch::nn::Conv2d(conv_options));
  }

  torch::Tensor forward(const torch::Tensor& x) {
    detail::check_input(x, options_.in_channels, "ConvBlock");
    auto y = conv->forward(x);
    if (options_.norm) y = detail::instance_norm(y, options_.eps);
    if (options_.relu) y = torch::relu(y);
    return y;
  }

  const ConvBlockOptions& options() const noexcept { return options_; }

  torch::nn::Conv2d conv{nullptr};

 private:
  ConvBlockOptions options_;
};
TORCH_MODULE(ConvBlock);

/// Two reflection-padded 3x3 conv + instance norm stages with an identity
/// skip: y = x + IN(conv(ReLU(IN(conv(x))))).
class ResBlockImpl : public torch::nn::Module {
 public:
  explicit ResBlockImpl(std::int64_t channels, double eps = 1e-5) : channels_(channels) {
    first = register_module("first", ConvBlock(ConvBlockOptions{channels, channels, 3, 1, 1, Padding::reflect,
                                                                 true, true, eps}));
    second = register_module("second", ConvBlock(ConvBlockOptions{channels, channels, 3, 1, 1, Padding::reflect,
                                                                   true, false, eps}));
  }

  torch::Tensor forward(const torch::Tensor& x) {
    detail::check_input(x, channels_, "ResBlock");
    return x + second->forward(first->forward(x));
  }

  std::int64_t channels() const noexcept { return channels_; }

  ConvBlock first{nullptr};
  ConvBlock second{nullptr};

 private:
  std::int64_t channels_;
};
TORCH_MODULE(ResBlock);

struct DeconvBlockOptions {
  std::int64_t in_channels = 1;
  std::int64_t out_channels = 1;
  std::int64_t kernel = 3;
  std::int64_t stride = 2;
  std::int64_t pad = 1;
  std::int64_t output_pad = 1;
  bool norm = true;
  bool relu = true;
  double eps = 1e-5;
};

/// Transposed convolution, instance norm, ReLU. Output side =
/// (H - 1) stride - 2 pad + k + output_pad, i.e. 2H for the 3/2/1/1 default.
class DeconvBlockImpl : public torch::nn::Module {
 public:
  explicit DeconvBlockImpl(DeconvBlockOptions options) : options_(options) {
    deconv = register_module(
        "deconv", torch::nn::ConvTranspose2d(
                      torch::nn::ConvTranspose2dOptions(options.in_channels, options.out_channels, options.kernel)
                          .stride(options.stride)
                          .padding(options.pad)
                          .output_padding(options.output_pad)));
  }

  torch::Tensor forward(const torch::Tensor& x) {
    detail::check_input(x, options_.in_channels, "DeconvBlock");
    auto y = deconv->forward(x);
    if (options_.norm) y = detail::instance_norm(y, options_.eps);
    if (options_.relu) y = torch::relu(y);
    return y;
  }

  const DeconvBlockOptions& options() const noexcept { return options_; }

  torch::nn::ConvTranspose2d deconv{nullptr};

 private:
  DeconvBlockOptions options_;
};
TORCH_MODULE(DeconvBlock);

/// N(0, stddev) for every conv and deconv kernel, zero biases. Parameters are
/// visited in registration order so a seed fixes the whole network.
inline void init_weights(torch::nn::Module& module, SeededRng& rng, double stddev = 0.02) {
  torch::NoGradGuard no_grad;
  for (auto& named : module.named_parameters(/*recurse=*/true)) {
    auto& p = named.value();
    const auto& name = named.key();
    const bool is_bias = name.size() >= 4 && name.compare(name.size() - 4, 4, "bias") == 0;
    if (is_bias) {
      p.zero_();
    } else {
      p.copy_(rng.normal(p.sizes(), 0.0, stddev, p.scalar_type()));
    }
  }
}

}  // namespace in2i
