#pragma once

#include <string>
#include <utility>
#include <vector>

#include <torch/torch.h>

#include "config.hpp"
#include "error.hpp"
#include "wavelet.hpp"

namespace in2i {

struct NamedImage {
  std::string modality;
  torch::Tensor image;
};

/// Channel-stacks the sources (CxHxW or NxCxHxW) in their given order.
inline torch::Tensor concat_adapter(const std::vector<torch::Tensor>& sources) {
  if (sources.empty()) throw ShapeError("baselines", "concat_adapter needs at least one source");
  if (sources.size() == 1) return sources.front();
  const int axis = sources.front().dim() == 4 ? 1 : 0;
  for (const auto& s : sources)
    if (s.dim() != sources.front().dim() || s.size(-1) != sources.front().size(-1) ||
        s.size(-2) != sources.front().size(-2))
      throw ShapeError("baselines", "concat_adapter: sources differ in spatial size");
  return torch::cat(sources, axis);
}

/// As above, but checks the inputs arrive in DomainSpec order.
inline torch::Tensor concat_adapter(const std::vector<NamedImage>& sources, const DomainSpec& domains) {
  if (sources.size() != domains.sources.size())
    throw ShapeError("baselines", "expected " + std::to_string(domains.sources.size()) + " sources, got " +
                                      std::to_string(sources.size()));
  std::vector<torch::Tensor> images;
  for (std::size_t i = 0; i < sources.size(); ++i) {
    if (sources[i].modality != domains.sources[i].name)
      throw ShapeError("baselines", "source " + std::to_string(i) + " is '" + sources[i].modality + "', expected '" +
                                        domains.sources[i].name + "'");
    images.push_back(sources[i].image);
  }
  return concat_adapter(images);
}

struct WaveletFuseOptions {
  int levels = 2;
  WaveletBoundary boundary = WaveletBoundary::symmetric;
  bool clip = true;  // clip to [-1, 1]
};

namespace detail {

inline wavelet::Plane to_plane(const torch::Tensor& t) {
  auto c = t.detach().to(torch::kCPU).to(torch::kFloat64).contiguous();
  wavelet::Plane p(static_cast<std::size_t>(c.size(-2)), static_cast<std::size_t>(c.size(-1)));
  std::copy(c.data_ptr<double>(), c.data_ptr<double>() + c.numel(), p.data.begin());
  return p;
}

}  // namespace detail

/// Pixel-level db4 fusion: decompose every single-channel source, average
/// each coefficient across modalities, reconstruct. The result has the shape
/// and dtype of the first input.
inline torch::Tensor wavelet_fuse(const std::vector<torch::Tensor>& sources, const WaveletFuseOptions& opt = {}) {
  if (sources.empty()) throw ShapeError("baselines", "wavelet_fuse needs at least one source");
  const auto& first = sources.front();
  for (const auto& s : sources) {
    const auto channels = s.dim() >= 3 ? s.size(-3) : 1;
    if (s.dim() < 2 || s.dim() > 4 || channels != 1 || (s.dim() == 4 && s.size(0) != 1))
      throw ShapeError("baselines", "wavelet_fuse needs single-channel images; convert colour sources first");
    if (s.size(-1) != first.size(-1) || s.size(-2) != first.size(-2))
      throw ShapeError("baselines", "wavelet_fuse: sources differ in spatial size");
  }
  std::vector<wavelet::Decomposition> decs;
  for (const auto& s : sources) decs.push_back(wavelet::wavedec2(detail::to_plane(s), opt.levels, opt.boundary));

  auto fused = decs.front();
  const double inv = 1.0 / static_cast<double>(decs.size());
  auto average = [&](auto member_of) {
    auto& dst = member_of(fused).data;
    for (std::size_t k = 0; k < dst.size(); ++k) {
      double sum = 0.0;
      for (auto& d : decs) sum += member_of(d).data[k];
      dst[k] = sum * inv;
    }
  };
  average([](wavelet::Decomposition& d) -> wavelet::Plane& { return d.approximation; });
  for (std::size_t l = 0; l < fused.levels.size(); ++l) {
    average([l](wavelet::Decomposition& d) -> wavelet::Plane& { return d.levels[l].lh; });
    average([l](wavelet::Decomposition& d) -> wavelet::Plane& { return d.levels[l].hl; });
    average([l](wavelet::Decomposition& d) -> wavelet::Plane& { return d.levels[l].hh; });
  }
  auto plane = wavelet::waverec2(fused);
  auto out = torch::from_blob(plane.data.data(), {static_cast<std::int64_t>(plane.rows), static_cast<std::int64_t>(plane.cols)},
                              torch::kFloat64)
                 .clone();
  if (opt.clip) out = out.clamp(-1.0, 1.0);
  return out.reshape(first.sizes()).to(first.scalar_type());
}

/// Sources as the network sees them under the configured fusion mode.
inline std::vector<torch::Tensor> adapt_sources(const ModelConfig& model, const std::vector<torch::Tensor>& sources) {
  switch (model.fusion) {
    case FusionMode::feature: return sources;
    case FusionMode::concat: return {concat_adapter(sources)};
    case FusionMode::wavelet_db4: {
      const WaveletFuseOptions opt{model.wavelet_levels, model.wavelet_boundary, true};
      if (sources.front().dim() == 4 && sources.front().size(0) > 1) {
        // Fuse each batch element separately.
        std::vector<torch::Tensor> fused;
        for (std::int64_t b = 0; b < sources.front().size(0); ++b) {
          std::vector<torch::Tensor> one;
          for (const auto& s : sources) one.push_back(s.slice(0, b, b + 1));
          fused.push_back(wavelet_fuse(one, opt));
        }
        return {torch::cat(fused, 0)};
      }
      return {wavelet_fuse(sources, opt)};
    }
  }
  return sources;
}

}  // namespace in2i
