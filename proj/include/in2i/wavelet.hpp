#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "config.hpp"
#include "error.hpp"

namespace in2i::wavelet {

/// Daubechies-4 (8-tap) analysis and synthesis filters.
inline constexpr std::array<double, 8> kDb4DecLo = {
    -0.010597401785069032, 0.0328830116668852,  0.030841381835560764, -0.18703481171909309,
    -0.027983769416859854, 0.6308807679298589, 0.7148465705529157,   0.2303778133088965};
inline constexpr std::array<double, 8> kDb4DecHi = {
    -0.2303778133088965,  0.7148465705529157,   -0.6308807679298589, -0.027983769416859854,
    0.18703481171909309,  0.030841381835560764, -0.0328830116668852, -0.010597401785069032};
inline constexpr std::array<double, 8> kDb4RecLo = {
    0.2303778133088965,    0.7148465705529157,  0.6308807679298589,   -0.027983769416859854,
    -0.18703481171909309,  0.030841381835560764, 0.0328830116668852,   -0.010597401785069032};
inline constexpr std::array<double, 8> kDb4RecHi = {
    -0.010597401785069032, -0.0328830116668852,  0.030841381835560764, 0.18703481171909309,
    -0.027983769416859854, -0.6308807679298589, 0.7148465705529157,   -0.2303778133088965};
inline constexpr std::size_t kFilterLength = kDb4DecLo.size();

/// Row-major plane of doubles.
struct Plane {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Plane() = default;
  Plane(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}
  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

/// Coefficient count after one analysis step of a length-n signal.
constexpr std::size_t coeff_length(std::size_t n) { return (n + kFilterLength - 1) / 2; }

namespace detail {

inline double extended(const double* x, std::ptrdiff_t n, std::ptrdiff_t k, WaveletBoundary boundary) {
  if (k >= 0 && k < n) return x[k];
  if (boundary == WaveletBoundary::zero) return 0.0;
  // Half-sample symmetric: x[-1] = x[0], x[n] = x[n - 1].
  while (k < 0 || k >= n) {
    if (k < 0) k = -1 - k;
    if (k >= n) k = 2 * n - 1 - k;
  }
  return x[k];
}

inline void analyze(const double* x, std::size_t n, std::size_t stride_in, double* lo, double* hi,
                    std::size_t stride_out, WaveletBoundary boundary) {
  // Gather into a contiguous buffer so the stride only matters once.
  std::vector<double> buf(n);
  for (std::size_t i = 0; i < n; ++i) buf[i] = x[i * stride_in];
  const std::size_t m = coeff_length(n);
  for (std::size_t i = 0; i < m; ++i) {
    const auto o = static_cast<std::ptrdiff_t>(2 * i + 1);
    double a = 0.0, d = 0.0;
    for (std::size_t j = 0; j < kFilterLength; ++j) {
      const double v = extended(buf.data(), static_cast<std::ptrdiff_t>(n), o - static_cast<std::ptrdiff_t>(j), boundary);
      a += kDb4DecLo[j] * v;
      d += kDb4DecHi[j] * v;
    }
    lo[i * stride_out] = a;
    hi[i * stride_out] = d;
  }
}

/// Inverse of analyze, cropped to `n` outputs.
inline void synthesize(const double* lo, const double* hi, std::size_t m, std::size_t stride_in, double* x, std::size_t n,
                       std::size_t stride_out) {
  const auto f = static_cast<std::ptrdiff_t>(kFilterLength);
  for (std::size_t o = 0; o < n; ++o) {
    double s = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const auto j = static_cast<std::ptrdiff_t>(o) + f - 2 - 2 * static_cast<std::ptrdiff_t>(i);
      if (j < 0 || j >= f) continue;
      s += lo[i * stride_in] * kDb4RecLo[j] + hi[i * stride_in] * kDb4RecHi[j];
    }
    x[o * stride_out] = s;
  }
}

}  // namespace detail

struct Level2D {
  Plane lh, hl, hh;  // detail subbands
  std::size_t rows = 0, cols = 0;  // size of the plane this level decomposed
};

/// Multi-level 2D decomposition: final approximation plus details, coarsest last.
struct Decomposition {
  Plane approximation;
  std::vector<Level2D> levels;  // levels[0] is the finest
};

struct Split2D {
  Plane ll, lh, hl, hh;
};

inline Split2D dwt2(const Plane& x, WaveletBoundary boundary) {
  const std::size_t mr = coeff_length(x.rows), mc = coeff_length(x.cols);
  Plane lo(x.rows, mc), hi(x.rows, mc);
  for (std::size_t r = 0; r < x.rows; ++r)
    detail::analyze(&x.data[r * x.cols], x.cols, 1, &lo.data[r * mc], &hi.data[r * mc], 1, boundary);
  Split2D s{Plane(mr, mc), Plane(mr, mc), Plane(mr, mc), Plane(mr, mc)};
  for (std::size_t c = 0; c < mc; ++c) {
    detail::analyze(&lo.data[c], x.rows, mc, &s.ll.data[c], &s.lh.data[c], mc, boundary);
    detail::analyze(&hi.data[c], x.rows, mc, &s.hl.data[c], &s.hh.data[c], mc, boundary);
  }
  return s;
}

inline Plane idwt2(const Split2D& s, std::size_t rows, std::size_t cols) {
  const std::size_t mr = s.ll.rows, mc = s.ll.cols;
  Plane lo(rows, mc), hi(rows, mc);
  for (std::size_t c = 0; c < mc; ++c) {
    detail::synthesize(&s.ll.data[c], &s.lh.data[c], mr, mc, &lo.data[c], rows, mc);
    detail::synthesize(&s.hl.data[c], &s.hh.data[c], mr, mc, &hi.data[c], rows, mc);
  }
  Plane x(rows, cols);
  for (std::size_t r = 0; r < rows; ++r)
    detail::synthesize(&lo.data[r * mc], &hi.data[r * mc], mc, 1, &x.data[r * cols], cols, 1);
  return x;
}

inline Decomposition wavedec2(const Plane& x, int levels, WaveletBoundary boundary) {
  if (levels < 1) throw ConfigError("baselines", "wavelet decomposition needs at least one level");
  Decomposition out;
  Plane current = x;
  for (int l = 0; l < levels; ++l) {
    if (current.rows < kFilterLength || current.cols < kFilterLength)
      throw ShapeError("baselines", "image too small for a " + std::to_string(levels) + "-level db4 decomposition");
    auto s = dwt2(current, boundary);
    out.levels.push_back({std::move(s.lh), std::move(s.hl), std::move(s.hh), current.rows, current.cols});
    current = std::move(s.ll);
  }
  out.approximation = std::move(current);
  return out;
}

inline Plane waverec2(const Decomposition& d) {
  Plane current = d.approximation;
  for (auto it = d.levels.rbegin(); it != d.levels.rend(); ++it)
    current = idwt2({std::move(current), it->lh, it->hl, it->hh}, it->rows, it->cols);
  return current;
}

}  // namespace in2i::wavelet
