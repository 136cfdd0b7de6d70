#pragma once

#include <array>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "config.hpp"
#include "error.hpp"
#include "rng.hpp"

namespace in2i::toy {

namespace fs = std::filesystem;

enum class ShapeClass { circle, square, triangle, cross };
inline constexpr int kClassCount = 4;

/// Fixed class -> RGB colour table of the toy target domain.
inline constexpr std::array<std::array<std::uint8_t, 3>, kClassCount> kClassColors = {{
    {230, 40, 40},   // circle: red
    {40, 200, 40},   // square: green
    {40, 80, 230},   // triangle: blue
    {230, 210, 40},  // cross: yellow
}};

inline const char* class_name(ShapeClass c) {
  switch (c) {
    case ShapeClass::circle: return "circle";
    case ShapeClass::square: return "square";
    case ShapeClass::triangle: return "triangle";
    case ShapeClass::cross: return "cross";
  }
  return "?";
}

struct ShapeSample {
  ShapeClass cls = ShapeClass::circle;
  int cx = 0, cy = 0, radius = 0;
};

inline ShapeSample draw_shape(std::mt19937_64& engine, int size) {
  ShapeSample s;
  s.cls = static_cast<ShapeClass>(engine() % kClassCount);
  const int min_r = std::max(3, size / 6);
  const int max_r = std::max(min_r, size * 3 / 8);
  s.radius = min_r + static_cast<int>(engine() % static_cast<std::uint64_t>(max_r - min_r + 1));
  const int lo = s.radius + 1, hi = size - s.radius - 2;
  s.cx = lo + static_cast<int>(engine() % static_cast<std::uint64_t>(std::max(1, hi - lo + 1)));
  s.cy = lo + static_cast<int>(engine() % static_cast<std::uint64_t>(std::max(1, hi - lo + 1)));
  return s;
}

/// Binary (0/255) filled mask of the shape.
inline cv::Mat render_mask(const ShapeSample& s, int size) {
  cv::Mat m = cv::Mat::zeros(size, size, CV_8UC1);
  const cv::Scalar white(255);
  const int r = s.radius;
  switch (s.cls) {
    case ShapeClass::circle: cv::circle(m, {s.cx, s.cy}, r, white, cv::FILLED, cv::LINE_8); break;
    case ShapeClass::square: cv::rectangle(m, {s.cx - r, s.cy - r}, {s.cx + r, s.cy + r}, white, cv::FILLED); break;
    case ShapeClass::triangle: {
      std::vector<cv::Point> pts{{s.cx, s.cy - r}, {s.cx - r, s.cy + r}, {s.cx + r, s.cy + r}};
      cv::fillConvexPoly(m, pts, white, cv::LINE_8);
      break;
    }
    case ShapeClass::cross: {
      const int t = std::max(1, r / 3);
      cv::rectangle(m, {s.cx - r, s.cy - t}, {s.cx + r, s.cy + t}, white, cv::FILLED);
      cv::rectangle(m, {s.cx - t, s.cy - r}, {s.cx + t, s.cy + r}, white, cv::FILLED);
      break;
    }
  }
  return m;
}

/// Morphological gradient of the mask (dilation minus erosion, 5x5 ellipse):
/// a band about four pixels wide straddling the shape outline. Thinner
/// outlines are so sparse that the reverse edge decoder tends to collapse
/// to an all-background image.
inline cv::Mat render_edges(const cv::Mat& mask) {
  cv::Mat edges;
  cv::morphologyEx(mask, edges, cv::MORPH_GRADIENT, cv::getStructuringElement(cv::MORPH_ELLIPSE, {5, 5}), {-1, -1}, 1,
                   cv::BORDER_CONSTANT, 0);
  return edges;
}

/// Shape filled with its class colour on black, stored BGR for imwrite.
inline cv::Mat render_target(const ShapeSample& s, const cv::Mat& mask) {
  const auto& rgb = kClassColors[static_cast<int>(s.cls)];
  cv::Mat out = cv::Mat::zeros(mask.size(), CV_8UC3);
  out.setTo(cv::Scalar(rgb[2], rgb[1], rgb[0]), mask);
  return out;
}

struct ToyOptions {
  fs::path out;
  int size = 32;
  int count = 80;       // source samples
  int test_count = 16;  // of which held out
  std::uint64_t seed = 0;
};

inline std::string sample_id(int i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d", i);
  return buf;
}

/// The model/train configuration used for the toy task at the given size.
/// Small widths, least-squares GAN and a larger batch keep 1500 steps
/// within a few CPU minutes while still converging.
inline Config toy_config(const fs::path& root, int size, std::uint64_t seed) {
  Config c;
  c.model.domains.sources = {{"mask", 1}, {"edges", 1}};
  c.model.domains.target = {"rgb", 3};
  c.model.image_size = {size, size};
  c.model.base_width = 8;
  c.model.n_res_extract = 1;
  c.model.n_res_encoder = 2;
  c.model.n_res_decoder = 1;
  c.model.n_res_reverse_decoder = 2;
  c.model.latent_channels = 32;
  c.model.gan_mode = GanMode::least_squares;
  c.train.lr_generator = 1e-3;
  c.train.lr_discriminator = 1e-3;
  c.train.batch_size = 4;
  c.train.epochs = 96;
  c.train.decay_start_epoch = 48;
  c.train.max_steps = 1500;
  c.train.checkpoint_every = 0;
  c.train.seed = static_cast<std::int64_t>(seed);
  c.data.root = root.string();
  return c;
}

/// Writes the toy dataset in the standard layout plus toy.ini. Source pairs
/// (mask, edges) and ground truth are rendered from the same shape; the
/// target pool is an independent draw of shapes.
inline void make_toy(const ToyOptions& opt) {
  if (opt.size < 16 || opt.size % 4 != 0) throw ConfigError("cli", "toy size must be a multiple of 4 and at least 16");
  if (opt.count < 1 || opt.test_count < 0 || opt.test_count >= opt.count)
    throw ConfigError("cli", "toy needs count >= 1 and 0 <= test_count < count");
  const fs::path root = opt.out;
  for (const auto* dir : {"source/mask", "source/edges", "target", "ground_truth"}) fs::create_directories(root / dir);

  std::mt19937_64 source_engine(mix_seed(opt.seed, 11));
  std::mt19937_64 target_engine(mix_seed(opt.seed, 12));
  const auto split_order = seeded_permutation(static_cast<std::size_t>(opt.count), opt.seed, 13);
  std::vector<bool> is_test(static_cast<std::size_t>(opt.count), false);
  for (int k = 0; k < opt.test_count; ++k) is_test[split_order[static_cast<std::size_t>(k)]] = true;

  auto write = [](const fs::path& p, const cv::Mat& img) {
    if (!cv::imwrite(p.string(), img)) throw IoError("cli", "cannot write " + p.string());
  };
  std::ofstream split(root / "split.txt");
  std::ofstream classes(root / "classes.txt");
  for (int i = 0; i < opt.count; ++i) {
    const auto id = sample_id(i);
    const auto shape = draw_shape(source_engine, opt.size);
    const auto mask = render_mask(shape, opt.size);
    write(root / "source" / "mask" / (id + ".png"), mask);
    write(root / "source" / "edges" / (id + ".png"), render_edges(mask));
    const bool test = is_test[static_cast<std::size_t>(i)];
    if (test) write(root / "ground_truth" / (id + ".png"), render_target(shape, mask));
    split << id << (test ? " test\n" : " train\n");
    classes << id << " " << class_name(shape.cls) << "\n";
  }
  const int pool = opt.count - opt.test_count;
  for (int i = 0; i < pool; ++i) {
    const auto shape = draw_shape(target_engine, opt.size);
    write(root / "target" / ("t" + sample_id(i) + ".png"), render_target(shape, render_mask(shape, opt.size)));
  }
  save_config(toy_config(fs::absolute(root).lexically_normal(), opt.size, opt.seed), root / "toy.ini");
}

}  // namespace in2i::toy
