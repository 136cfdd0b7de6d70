#pragma once

#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "error.hpp"

namespace in2i {

namespace metrics_detail {

/// Contiguous float64 copy of a CxHxW (or 1xCxHxW) image.
inline torch::Tensor as_chw_double(const torch::Tensor& t) {
  auto c = t.detach().to(torch::kCPU).to(torch::kFloat64);
  if (c.dim() == 4 && c.size(0) == 1) c = c.squeeze(0);
  if (c.dim() == 2) c = c.unsqueeze(0);
  if (c.dim() != 3) throw ShapeError("metrics", "expected a CxHxW image");
  return c.contiguous();
}

inline void require_same_shape(const torch::Tensor& x, const torch::Tensor& y) {
  if (x.sizes() != y.sizes()) throw ShapeError("metrics", "images must have the same shape");
}

inline std::vector<double> gaussian_kernel(int size, double sigma) {
  std::vector<double> k(size);
  double sum = 0.0;
  const double c = (size - 1) / 2.0;
  for (int i = 0; i < size; ++i) {
    k[i] = std::exp(-((i - c) * (i - c)) / (2.0 * sigma * sigma));
    sum += k[i];
  }
  for (auto& v : k) v /= sum;
  return k;
}

/// Separable "valid" filtering of one HxW plane.
inline std::vector<double> filter_valid(const double* img, int h, int w, const std::vector<double>& k) {
  const int n = static_cast<int>(k.size());
  const int oh = h - n + 1, ow = w - n + 1;
  std::vector<double> rows(static_cast<std::size_t>(h) * ow);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += k[i] * img[y * w + x + i];
      rows[static_cast<std::size_t>(y) * ow + x] = s;
    }
  std::vector<double> out(static_cast<std::size_t>(oh) * ow);
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += k[i] * rows[static_cast<std::size_t>(y + i) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = s;
    }
  return out;
}

}  // namespace metrics_detail

struct SsimOptions {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 1.0;
};

/// 10 log10(1 / MSE) for images in [0, 1]; +inf when the images are identical.
inline double psnr(const torch::Tensor& x, const torch::Tensor& y) {
  metrics_detail::require_same_shape(x, y);
  const double mse = (x.detach().to(torch::kFloat64) - y.detach().to(torch::kFloat64)).pow(2).mean().item<double>();
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

struct SsimResult {
  double ssim = 0.0;
  double contrast_structure = 0.0;  // mean of the cs factor alone
};

/// Mean local SSIM over all valid window positions, averaged over channels.
inline SsimResult ssim_detailed(const torch::Tensor& x, const torch::Tensor& y, const SsimOptions& opt = {}) {
  metrics_detail::require_same_shape(x, y);
  const auto a = metrics_detail::as_chw_double(x);
  const auto b = metrics_detail::as_chw_double(y);
  const int c = static_cast<int>(a.size(0)), h = static_cast<int>(a.size(1)), w = static_cast<int>(a.size(2));
  if (h < opt.window || w < opt.window)
    throw ShapeError("metrics", "image " + std::to_string(h) + "x" + std::to_string(w) + " is smaller than the " +
                                    std::to_string(opt.window) + "x" + std::to_string(opt.window) + " SSIM window");
  const auto k = metrics_detail::gaussian_kernel(opt.window, opt.sigma);
  const double c1 = (opt.k1 * opt.dynamic_range) * (opt.k1 * opt.dynamic_range);
  const double c2 = (opt.k2 * opt.dynamic_range) * (opt.k2 * opt.dynamic_range);
  const std::size_t plane = static_cast<std::size_t>(h) * w;

  SsimResult total;
  for (int ch = 0; ch < c; ++ch) {
    const double* pa = a.data_ptr<double>() + ch * plane;
    const double* pb = b.data_ptr<double>() + ch * plane;
    std::vector<double> aa(plane), bb(plane), ab(plane);
    for (std::size_t i = 0; i < plane; ++i) {
      aa[i] = pa[i] * pa[i];
      bb[i] = pb[i] * pb[i];
      ab[i] = pa[i] * pb[i];
    }
    const auto mu_a = metrics_detail::filter_valid(pa, h, w, k);
    const auto mu_b = metrics_detail::filter_valid(pb, h, w, k);
    const auto e_aa = metrics_detail::filter_valid(aa.data(), h, w, k);
    const auto e_bb = metrics_detail::filter_valid(bb.data(), h, w, k);
    const auto e_ab = metrics_detail::filter_valid(ab.data(), h, w, k);
    double sum = 0.0, cs_sum = 0.0;
    for (std::size_t i = 0; i < mu_a.size(); ++i) {
      const double var_a = e_aa[i] - mu_a[i] * mu_a[i];
      const double var_b = e_bb[i] - mu_b[i] * mu_b[i];
      const double cov = e_ab[i] - mu_a[i] * mu_b[i];
      const double lum = (2.0 * mu_a[i] * mu_b[i] + c1) / (mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + c1);
      const double cs = (2.0 * cov + c2) / (var_a + var_b + c2);
      sum += lum * cs;
      cs_sum += cs;
    }
    total.ssim += sum / static_cast<double>(mu_a.size());
    total.contrast_structure += cs_sum / static_cast<double>(mu_a.size());
  }
  total.ssim /= c;
  total.contrast_structure /= c;
  return total;
}

inline double ssim(const torch::Tensor& x, const torch::Tensor& y, const SsimOptions& opt = {}) {
  return ssim_detailed(x, y, opt).ssim;
}

struct ImageMetrics {
  std::string name;
  double psnr = 0.0;
  double ssim = 0.0;
};

struct MetricStats {
  double mean = 0.0;
  double variance = 0.0;  // population
  std::size_t count = 0;  // finite values aggregated
  std::size_t infinite = 0;
};

struct MetricSummary {
  MetricStats psnr;
  MetricStats ssim;
};

inline MetricStats population_stats(const std::vector<double>& values) {
  MetricStats s;
  double sum = 0.0;
  for (double v : values) {
    if (std::isinf(v)) {
      ++s.infinite;
      continue;
    }
    sum += v;
    ++s.count;
  }
  if (s.count == 0) {
    s.mean = s.infinite ? std::numeric_limits<double>::infinity() : 0.0;
    return s;
  }
  s.mean = sum / static_cast<double>(s.count);
  double sq = 0.0;
  for (double v : values)
    if (!std::isinf(v)) sq += (v - s.mean) * (v - s.mean);
  s.variance = sq / static_cast<double>(s.count);
  return s;
}

/// Population mean and variance per metric. Infinite PSNR values are counted
/// separately and left out of the moments.
inline MetricSummary aggregate(const std::vector<ImageMetrics>& reports) {
  if (reports.empty()) throw DataError("metrics", "cannot aggregate an empty report set");
  std::vector<double> p, s;
  for (const auto& r : reports) {
    p.push_back(r.psnr);
    s.push_back(r.ssim);
  }
  return {population_stats(p), population_stats(s)};
}

inline std::string format_value(double v, int decimals = 3) {
  if (std::isinf(v)) return "inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

/// "mean (variance)" with three decimals, e.g. "23.113 (9.147)".
inline std::string format_cell(const MetricStats& s) {
  return format_value(s.mean) + " (" + format_value(s.variance) + ")";
}

inline void write_metrics_csv(std::ostream& os, const std::vector<ImageMetrics>& reports) {
  os << "image,psnr,ssim\n";
  for (const auto& r : reports) os << r.name << "," << format_value(r.psnr, 6) << "," << format_value(r.ssim, 6) << "\n";
}

inline void write_metrics_markdown(std::ostream& os, const MetricSummary& summary, const std::string& method) {
  os << "| Method | PSNR | SSIM |\n"
     << "|---|---|---|\n"
     << "| " << method << " | " << format_cell(summary.psnr) << " | " << format_cell(summary.ssim) << " |\n";
  if (summary.psnr.infinite > 0)
    os << "\n" << summary.psnr.infinite << " image(s) with infinite PSNR (identical to ground truth) are excluded "
       << "from the PSNR mean and variance.\n";
}

}  // namespace in2i
