#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include <ATen/CPUGeneratorImpl.h>
#include <torch/torch.h>

namespace in2i {

/// Mixes a seed with a stream tag so independent consumers (weight init,
/// epoch shuffles, target draws) never share a sequence.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

/// Deterministic random stream. Holds both a std engine for host-side
/// decisions and a torch generator for tensor initialisation.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed)
      : seed_(seed), engine_(mix_seed(seed, 0)), torch_gen_(at::make_generator<at::CPUGeneratorImpl>(mix_seed(seed, 1))) {}

  std::uint64_t seed() const noexcept { return seed_; }
  std::mt19937_64& engine() noexcept { return engine_; }
  at::Generator& torch_generator() noexcept { return torch_gen_; }

  std::uint64_t next() { return engine_(); }

  /// Standard normal draws shaped like `sizes`, from the torch stream.
  torch::Tensor normal(at::IntArrayRef sizes, double mean = 0.0, double stddev = 1.0,
                       torch::Dtype dtype = torch::kFloat32) {
    return at::normal(mean, stddev, sizes, torch_gen_, torch::TensorOptions().dtype(dtype));
  }

  torch::Tensor uniform(at::IntArrayRef sizes, double low, double high, torch::Dtype dtype = torch::kFloat32) {
    auto t = torch::empty(sizes, torch::TensorOptions().dtype(dtype));
    t.uniform_(low, high, torch_gen_);
    return t;
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  at::Generator torch_gen_;
};

/// Permutation of [0, n) that is a pure function of (seed, stream).
inline std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed, std::uint64_t stream) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 engine(mix_seed(seed, stream));
  // Fisher-Yates by hand: std::shuffle's draw pattern is library-defined.
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(engine() % i);
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

}  // namespace in2i
