#pragma once

#include <algorithm>
#include <filesystem>
#include <string>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>
#include <torch/torch.h>

#include "error.hpp"

namespace in2i {

/// Decodes an 8-bit image into a CxHxW float tensor in [-1, 1]. Channel order
/// is RGB for colour images. When `height`/`width` are positive the image is
/// bilinearly resized to that size.
inline torch::Tensor load_image(const std::filesystem::path& path, int channels, int height = 0, int width = 0) {
  if (channels != 1 && channels != 3)
    throw DataError("data", "only 1- and 3-channel image files are supported, modality asks for " +
                                std::to_string(channels));
  cv::Mat img = cv::imread(path.string(), channels == 1 ? cv::IMREAD_GRAYSCALE : cv::IMREAD_COLOR);
  if (img.empty()) throw DataError("data", "cannot read image " + path.string());
  if (channels == 3) cv::cvtColor(img, img, cv::COLOR_BGR2RGB);
  if (height > 0 && width > 0 && (img.rows != height || img.cols != width))
    cv::resize(img, img, cv::Size(width, height), 0, 0, cv::INTER_LINEAR);
  auto t = torch::from_blob(img.data, {img.rows, img.cols, channels}, torch::kUInt8).clone();
  return t.permute({2, 0, 1}).to(torch::kFloat32).div(127.5).sub(1.0).contiguous();
}

/// Encodes a CxHxW (or 1xCxHxW) tensor in [-1, 1] to an 8-bit file.
inline void save_image(const torch::Tensor& image, const std::filesystem::path& path) {
  auto t = image.detach().to(torch::kCPU).to(torch::kFloat32);
  if (t.dim() == 4) t = t.squeeze(0);
  if (t.dim() != 3 || (t.size(0) != 1 && t.size(0) != 3))
    throw ShapeError("data", "save_image expects a 1- or 3-channel CxHxW tensor");
  const int channels = static_cast<int>(t.size(0));
  auto bytes = t.clamp(-1.0, 1.0).add(1.0).mul(127.5).round().to(torch::kUInt8).permute({1, 2, 0}).contiguous();
  cv::Mat img(static_cast<int>(t.size(1)), static_cast<int>(t.size(2)), channels == 1 ? CV_8UC1 : CV_8UC3,
              bytes.data_ptr<std::uint8_t>());
  cv::Mat out = img.clone();
  if (channels == 3) cv::cvtColor(out, out, cv::COLOR_RGB2BGR);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  if (!cv::imwrite(path.string(), out)) throw IoError("data", "cannot write image " + path.string());
}

/// [-1, 1] -> [0, 1].
inline torch::Tensor to_unit_range(const torch::Tensor& t) { return t.add(1.0).mul(0.5); }

}  // namespace in2i
