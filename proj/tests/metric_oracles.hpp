#pragma once

#include <cmath>
#include <cstdint>

#include <torch/torch.h>

namespace in2i::testing {

/// Scalar-loop PSNR for images in [0, 1].
inline double oracle_psnr(const torch::Tensor& x, const torch::Tensor& y) {
  auto a = x.to(torch::kFloat64).contiguous(), b = y.to(torch::kFloat64).contiguous();
  const double* p = a.data_ptr<double>();
  const double* q = b.data_ptr<double>();
  double s = 0;
  for (std::int64_t i = 0; i < a.numel(); ++i) s += (p[i] - q[i]) * (p[i] - q[i]);
  return 10 * std::log10(1.0 / (s / static_cast<double>(a.numel())));
}

/// Direct 11x11 window evaluation with a 2-D Gaussian (sigma 1.5), no
/// separable filtering. Mean over valid windows, then over channels.
inline double oracle_ssim(const torch::Tensor& x, const torch::Tensor& y) {
  constexpr int win = 11;
  const double sigma = 1.5, c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  double g[win][win], gs = 0;
  for (int i = 0; i < win; ++i)
    for (int j = 0; j < win; ++j) {
      const double di = i - 5, dj = j - 5;
      g[i][j] = std::exp(-(di * di + dj * dj) / (2 * sigma * sigma));
      gs += g[i][j];
    }
  auto a = x.to(torch::kFloat64).contiguous(), b = y.to(torch::kFloat64).contiguous();
  const auto c = a.size(0), h = a.size(1), w = a.size(2);
  auto A = a.accessor<double, 3>(), B = b.accessor<double, 3>();
  double total = 0;
  for (std::int64_t ch = 0; ch < c; ++ch) {
    double sum = 0;
    int count = 0;
    for (std::int64_t r = 0; r + win <= h; ++r)
      for (std::int64_t q = 0; q + win <= w; ++q) {
        double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
        for (int i = 0; i < win; ++i)
          for (int j = 0; j < win; ++j) {
            const double wt = g[i][j] / gs, u = A[ch][r + i][q + j], v = B[ch][r + i][q + j];
            ma += wt * u;
            mb += wt * v;
            saa += wt * u * u;
            sbb += wt * v * v;
            sab += wt * u * v;
          }
        const double va = saa - ma * ma, vb = sbb - mb * mb, cov = sab - ma * mb;
        sum += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
        ++count;
      }
    total += sum / count;
  }
  return total / static_cast<double>(c);
}

}  // namespace in2i::testing
