#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <torch/torch.h>

#include "config.hpp"
#include "error.hpp"
#include "image_io.hpp"
#include "rng.hpp"

namespace in2i {

namespace fs = std::filesystem;

/// Index over the on-disk layout
///   root/source/<modality>/<id>.(png|jpg)
///   root/target/<id>.(png|jpg)
///   root/ground_truth/<id>.(png|jpg)   optional
///   root/split.txt                     optional, "<id> train|test" per line
struct UnpairedMultiModalDataset {
  fs::path root;
  DomainSpec domains;
  std::map<std::string, std::vector<fs::path>> sources;  // id -> one path per modality, DomainSpec order
  std::vector<fs::path> targets;                         // sorted
  std::map<std::string, fs::path> ground_truth;
  std::vector<std::string> train_ids;                    // sorted
  std::vector<std::string> test_ids;                     // sorted
};

struct SampleBundle {
  std::vector<torch::Tensor> sources;  // CxHxW each
  torch::Tensor target;
  std::string sample_id;
  std::string target_id;
};

namespace detail {

inline bool is_image_file(const fs::path& p) {
  auto ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

inline std::map<std::string, fs::path> list_images(const fs::path& dir) {
  std::map<std::string, fs::path> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file() || !is_image_file(entry.path())) continue;
    const auto id = entry.path().stem().string();
    if (!out.emplace(id, entry.path()).second)
      throw DataError("data", "id '" + id + "' appears with two extensions in " + dir.string());
  }
  return out;
}

}  // namespace detail

/// Seeded train/test split; a pure function of (seed, ids).
inline std::pair<std::vector<std::string>, std::vector<std::string>> split_ids(std::vector<std::string> ids,
                                                                               std::uint64_t seed,
                                                                               std::size_t test_count) {
  std::sort(ids.begin(), ids.end());
  if (test_count > ids.size()) throw DataError("data", "test_count exceeds the number of samples");
  const auto order = seeded_permutation(ids.size(), seed, /*stream=*/7);
  std::vector<std::string> train, test;
  for (std::size_t k = 0; k < order.size(); ++k) (k < test_count ? test : train).push_back(ids[order[k]]);
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return {train, test};
}

/// Builds complete, deterministically ordered indices. Without a split.txt
/// the split is drawn from `seed` holding out `test_count` ids.
inline UnpairedMultiModalDataset scan_dataset(const fs::path& root, const DomainSpec& domains, std::uint64_t seed = 0,
                                              std::size_t test_count = 0) {
  if (!fs::is_directory(root)) throw DataError("data", "dataset root " + root.string() + " does not exist");
  UnpairedMultiModalDataset ds;
  ds.root = root;
  ds.domains = domains;

  std::vector<std::map<std::string, fs::path>> per_modality;
  std::set<std::string> all_ids;
  for (const auto& m : domains.sources) {
    const auto dir = root / "source" / m.name;
    if (!fs::is_directory(dir)) throw DataError("data", "missing modality directory " + dir.string());
    per_modality.push_back(detail::list_images(dir));
    for (const auto& [id, _] : per_modality.back()) all_ids.insert(id);
  }
  std::vector<std::string> incomplete;
  for (const auto& id : all_ids) {
    std::vector<fs::path> paths;
    std::string missing;
    for (std::size_t i = 0; i < per_modality.size(); ++i) {
      auto it = per_modality[i].find(id);
      if (it == per_modality[i].end()) missing += (missing.empty() ? "" : ",") + domains.sources[i].name;
      else paths.push_back(it->second);
    }
    if (!missing.empty()) incomplete.push_back(id + " (missing " + missing + ")");
    else ds.sources.emplace(id, std::move(paths));
  }
  if (!incomplete.empty()) {
    std::string msg = "samples missing a modality: ";
    for (std::size_t i = 0; i < incomplete.size(); ++i) msg += (i ? ", " : "") + incomplete[i];
    throw DataError("data", msg);
  }
  if (ds.sources.empty()) throw DataError("data", "no source samples under " + (root / "source").string());

  for (const auto& [_, path] : detail::list_images(root / "target")) ds.targets.push_back(path);
  if (ds.targets.empty()) throw DataError("data", "empty target pool under " + (root / "target").string());
  ds.ground_truth = detail::list_images(root / "ground_truth");

  const auto split_path = root / "split.txt";
  if (fs::exists(split_path)) {
    std::ifstream in(split_path);
    std::string line;
    std::set<std::string> seen;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      std::istringstream ls(line);
      std::string id, which;
      if (!(ls >> id)) continue;
      if (!(ls >> which) || (which != "train" && which != "test"))
        throw DataError("data", "split.txt line " + std::to_string(line_no) + " must read '<id> train|test'");
      if (!ds.sources.count(id))
        throw DataError("data", "split.txt names unknown sample id '" + id + "'");
      if (!seen.insert(id).second) throw DataError("data", "split.txt lists id '" + id + "' twice");
      (which == "train" ? ds.train_ids : ds.test_ids).push_back(id);
    }
    // Ids absent from split.txt default to train.
    for (const auto& [id, _] : ds.sources)
      if (!seen.count(id)) ds.train_ids.push_back(id);
    std::sort(ds.train_ids.begin(), ds.train_ids.end());
    std::sort(ds.test_ids.begin(), ds.test_ids.end());
  } else {
    std::vector<std::string> ids;
    for (const auto& [id, _] : ds.sources) ids.push_back(id);
    std::tie(ds.train_ids, ds.test_ids) = split_ids(std::move(ids), seed, test_count);
  }
  return ds;
}

/// Rec. 601 luminance, Y = 0.299 R + 0.587 G + 0.114 B.
inline torch::Tensor derive_grayscale(const torch::Tensor& rgb) {
  const bool batched = rgb.dim() == 4;
  const auto c = batched ? rgb.size(1) : rgb.size(0);
  if ((rgb.dim() != 3 && !batched) || c != 3) throw ShapeError("data", "derive_grayscale expects a 3-channel image");
  const int axis = batched ? 1 : 0;
  auto ch = rgb.unbind(axis);
  return (0.299 * ch[0] + 0.587 * ch[1] + 0.114 * ch[2]).unsqueeze(axis);
}

/// Position inside the sampling schedule. Everything drawn is a pure function
/// of (seed, epoch, position), so a resumed run replays the same sequence.
struct EpochState {
  std::int64_t epoch = 0;
  std::size_t position = 0;
};

/// Draws SampleBundles: sources by a per-epoch shuffle of the train ids,
/// targets from an independent shuffle stream over the target pool.
class BundleSampler {
 public:
  BundleSampler(const UnpairedMultiModalDataset& ds, ImageSize size, std::uint64_t seed, bool random_crop = false)
      : ds_(&ds), size_(size), seed_(seed), random_crop_(random_crop) {
    if (ds.train_ids.empty()) throw DataError("data", "train split is empty");
  }

  std::size_t epoch_size() const noexcept { return ds_->train_ids.size(); }

  std::vector<std::size_t> epoch_order(std::int64_t epoch) const {
    return seeded_permutation(ds_->train_ids.size(), seed_, 1000 + static_cast<std::uint64_t>(epoch));
  }

  /// Target index for the k-th draw overall: shuffled blocks over the pool.
  std::size_t target_index(std::uint64_t draw) const {
    const auto pool = ds_->targets.size();
    const auto block = draw / pool;
    const auto perm = seeded_permutation(pool, seed_, (1ull << 40) + block);
    return perm[draw % pool];
  }

  /// Next bundle of the epoch, or nullopt once every train id has been seen.
  std::optional<SampleBundle> next_batch(EpochState& state) {
    if (state.position >= epoch_size()) return std::nullopt;
    if (cached_epoch_ != state.epoch) {
      order_ = epoch_order(state.epoch);
      cached_epoch_ = state.epoch;
    }
    const auto draw = static_cast<std::uint64_t>(state.epoch) * epoch_size() + state.position;
    const auto& id = ds_->train_ids[order_[state.position]];
    ++state.position;

    SampleBundle b;
    b.sample_id = id;
    const auto& paths = ds_->sources.at(id);
    for (std::size_t i = 0; i < paths.size(); ++i) b.sources.push_back(load(paths[i], ds_->domains.sources[i].channels, draw, 0));
    const auto& tpath = ds_->targets[target_index(draw)];
    b.target_id = tpath.stem().string();
    b.target = load(tpath, ds_->domains.target.channels, draw, 1);
    return b;
  }

 private:
  torch::Tensor load(const fs::path& path, int channels, std::uint64_t draw, std::uint64_t role) {
    if (!random_crop_) return cached(path, channels, size_.height, size_.width);
    // Resize 1/8 larger, then crop at a position fixed by (seed, draw, role).
    const int h = size_.height + size_.height / 8;
    const int w = size_.width + size_.width / 8;
    auto big = cached(path, channels, h, w);
    const auto r = mix_seed(seed_, (3ull << 40) + 2 * draw + role);
    const auto y = static_cast<std::int64_t>(r % static_cast<std::uint64_t>(h - size_.height + 1));
    const auto x = static_cast<std::int64_t>((r >> 32) % static_cast<std::uint64_t>(w - size_.width + 1));
    return big.slice(1, y, y + size_.height).slice(2, x, x + size_.width).clone();
  }

  torch::Tensor cached(const fs::path& path, int channels, int h, int w) {
    const auto key = path.string() + "#" + std::to_string(h) + "x" + std::to_string(w);
    auto it = cache_.find(key);
    if (it == cache_.end()) it = cache_.emplace(key, load_image(path, channels, h, w)).first;
    return it->second;
  }

  const UnpairedMultiModalDataset* ds_;
  ImageSize size_;
  std::uint64_t seed_;
  bool random_crop_;
  std::int64_t cached_epoch_ = -1;
  std::vector<std::size_t> order_;
  std::unordered_map<std::string, torch::Tensor> cache_;
};

/// Held-out sample with its paired ground truth (if present) for evaluation.
struct TestSample {
  std::string id;
  std::vector<torch::Tensor> sources;
  std::optional<torch::Tensor> ground_truth;
};

inline TestSample load_test_sample(const UnpairedMultiModalDataset& ds, const std::string& id, ImageSize size) {
  TestSample s;
  s.id = id;
  const auto& paths = ds.sources.at(id);
  for (std::size_t i = 0; i < paths.size(); ++i)
    s.sources.push_back(load_image(paths[i], ds.domains.sources[i].channels, size.height, size.width));
  if (auto it = ds.ground_truth.find(id); it != ds.ground_truth.end())
    s.ground_truth = load_image(it->second, ds.domains.target.channels, size.height, size.width);
  return s;
}

}  // namespace in2i
