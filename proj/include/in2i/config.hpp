#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "error.hpp"

namespace in2i {

struct ModalitySpec {
  std::string name;
  int channels = 1;

  bool operator==(const ModalitySpec&) const = default;
};

/// Ordered source modalities plus the target. Decoder i of the reverse
/// generator always emits source i.
struct DomainSpec {
  std::vector<ModalitySpec> sources;
  ModalitySpec target;

  std::size_t n() const noexcept { return sources.size(); }
  bool operator==(const DomainSpec&) const = default;
};

enum class GanMode { log, least_squares };

/// How the n sources reach the network. `feature` is the multi-branch
/// generator; the other two collapse the sources into a single input image.
enum class FusionMode { feature, concat, wavelet_db4 };

enum class WaveletBoundary { symmetric, zero };

struct ImageSize {
  int height = 256;
  int width = 256;

  bool operator==(const ImageSize&) const = default;
};

struct ModelConfig {
  DomainSpec domains;
  ImageSize image_size;
  int base_width = 64;
  int n_res_extract = 4;
  int n_res_encoder = 4;
  int n_res_decoder = 3;
  int n_res_reverse_decoder = 5;
  int latent_channels = 0;  // 0 resolves to 4 * base_width
  GanMode gan_mode = GanMode::log;
  FusionMode fusion = FusionMode::feature;
  int wavelet_levels = 2;
  WaveletBoundary wavelet_boundary = WaveletBoundary::symmetric;

  bool operator==(const ModelConfig&) const = default;
};

struct TrainConfig {
  double lambda1 = 10.0;
  double lambda2 = 1.0;
  double lr_generator = 2e-4;
  double lr_discriminator = 1e-4;
  int epochs = 200;
  int decay_start_epoch = 100;
  int batch_size = 1;
  std::int64_t seed = 0;
  std::int64_t max_steps = 0;  // 0: run all epochs
  int checkpoint_every = 1;    // epochs between checkpoints, 0 disables intermediate ones
  double adam_beta1 = 0.5;
  double adam_beta2 = 0.999;

  bool operator==(const TrainConfig&) const = default;
};

struct DataConfig {
  std::string root;
  bool random_crop = false;
  int test_count = 0;  // used only when root/split.txt is absent

  bool operator==(const DataConfig&) const = default;
};

struct Config {
  ModelConfig model;
  TrainConfig train;
  DataConfig data;

  bool operator==(const Config&) const = default;
};

inline std::string to_string(GanMode mode) { return mode == GanMode::log ? "log" : "least_squares"; }

inline std::string to_string(FusionMode mode) {
  switch (mode) {
    case FusionMode::feature: return "feature";
    case FusionMode::concat: return "concat";
    case FusionMode::wavelet_db4: return "wavelet_db4";
  }
  return "feature";
}

inline std::string to_string(WaveletBoundary b) { return b == WaveletBoundary::symmetric ? "symmetric" : "zero"; }

inline std::optional<GanMode> parse_gan_mode(const std::string& s) {
  if (s == "log") return GanMode::log;
  if (s == "least_squares") return GanMode::least_squares;
  return std::nullopt;
}

inline std::optional<FusionMode> parse_fusion_mode(const std::string& s) {
  if (s == "feature") return FusionMode::feature;
  if (s == "concat") return FusionMode::concat;
  if (s == "wavelet_db4") return FusionMode::wavelet_db4;
  return std::nullopt;
}

inline std::optional<WaveletBoundary> parse_wavelet_boundary(const std::string& s) {
  if (s == "symmetric") return WaveletBoundary::symmetric;
  if (s == "zero") return WaveletBoundary::zero;
  return std::nullopt;
}

/// The domains the network actually sees. Concat and wavelet fusion turn the
/// n sources into one pixel-level input, so the model is built with n = 1.
inline DomainSpec network_domains(const ModelConfig& model) {
  if (model.fusion == FusionMode::feature) return model.domains;
  DomainSpec out;
  out.target = model.domains.target;
  ModalitySpec fused;
  for (const auto& m : model.domains.sources) {
    if (!fused.name.empty()) fused.name += "+";
    fused.name += m.name;
  }
  if (model.fusion == FusionMode::concat) {
    fused.channels = 0;
    for (const auto& m : model.domains.sources) fused.channels += m.channels;
  } else {
    fused.channels = 1;
  }
  out.sources.push_back(fused);
  return out;
}

struct ValidatedConfig {
  ModelConfig model;
  TrainConfig train;
};

/// Checks every invariant and fills defaulted fields. Throws ConfigError
/// listing all problems found, not just the first.
inline ValidatedConfig validate_config(ModelConfig model, TrainConfig train) {
  std::vector<std::string> problems;
  const auto& d = model.domains;
  if (d.sources.empty()) problems.emplace_back("at least one source modality is required");
  std::set<std::string> names;
  for (const auto& m : d.sources) {
    if (m.name.empty()) problems.emplace_back("modality name must not be empty");
    if (m.channels < 1) problems.push_back("modality '" + m.name + "' must have at least one channel");
    if (!names.insert(m.name).second) problems.push_back("duplicate modality name '" + m.name + "'");
  }
  if (d.target.name.empty()) problems.emplace_back("target modality name must not be empty");
  if (d.target.channels < 1) problems.emplace_back("target must have at least one channel");
  if (!names.insert(d.target.name).second) problems.push_back("duplicate modality name '" + d.target.name + "'");

  const auto& sz = model.image_size;
  if (sz.height <= 0 || sz.width <= 0) {
    problems.emplace_back("image size must be positive");
  } else if (sz.height % 4 != 0 || sz.width % 4 != 0) {
    problems.push_back("image size " + std::to_string(sz.height) + "x" + std::to_string(sz.width) +
                       " not divisible by 4");
  }
  if (model.base_width < 1) problems.emplace_back("base_width must be positive");
  if (model.n_res_extract < 0 || model.n_res_encoder < 0 || model.n_res_decoder < 0 ||
      model.n_res_reverse_decoder < 0)
    problems.emplace_back("residual block counts must be non-negative");
  if (model.latent_channels < 0) problems.emplace_back("latent_channels must be positive");
  if (model.latent_channels == 0) model.latent_channels = 4 * model.base_width;
  if (model.wavelet_levels < 1) problems.emplace_back("wavelet_levels must be at least 1");
  if (model.fusion == FusionMode::wavelet_db4) {
    for (const auto& m : d.sources)
      if (m.channels != 1)
        problems.push_back("wavelet_db4 fusion needs single-channel sources; '" + m.name + "' has " +
                           std::to_string(m.channels));
  }

  if (!(train.lambda1 >= 0.0)) problems.emplace_back("lambda1 must be non-negative");
  if (!(train.lambda2 >= 0.0)) problems.emplace_back("lambda2 must be non-negative");
  if (!(train.lr_generator > 0.0) || !(train.lr_discriminator > 0.0))
    problems.emplace_back("learning rates must be positive");
  if (train.epochs < 1) problems.emplace_back("epochs must be at least 1");
  if (train.decay_start_epoch < 0 || train.decay_start_epoch >= train.epochs)
    problems.emplace_back("decay_start_epoch must be in [0, epochs)");
  if (train.batch_size < 1) problems.emplace_back("batch_size must be at least 1");
  if (train.max_steps < 0) problems.emplace_back("max_steps must be non-negative");
  if (train.checkpoint_every < 0) problems.emplace_back("checkpoint_every must be non-negative");
  if (!(train.adam_beta1 >= 0.0 && train.adam_beta1 < 1.0) || !(train.adam_beta2 >= 0.0 && train.adam_beta2 < 1.0))
    problems.emplace_back("adam betas must lie in [0, 1)");

  if (!problems.empty()) throw ConfigError("core", problems);
  return {std::move(model), std::move(train)};
}

inline Config validate_config(Config cfg) {
  auto v = validate_config(std::move(cfg.model), std::move(cfg.train));
  if (cfg.data.test_count < 0) throw ConfigError("core", "test_count must be non-negative");
  return {std::move(v.model), std::move(v.train), std::move(cfg.data)};
}

namespace detail {

inline std::string format_real(double v) {
  std::ostringstream os;
  os << std::setprecision(std::numeric_limits<double>::max_digits10) << v;
  return os.str();
}

inline std::string format_modalities(const std::vector<ModalitySpec>& ms) {
  std::string out;
  for (const auto& m : ms) {
    if (!out.empty()) out += ", ";
    out += m.name + ":" + std::to_string(m.channels);
  }
  return out;
}

inline std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

inline ModalitySpec parse_modality(const std::string& item, std::vector<std::string>& problems) {
  const auto text = trim(item);
  const auto colon = text.find(':');
  if (colon == std::string::npos) {
    problems.push_back("modality '" + text + "' must be written as name:channels");
    return {text, 0};
  }
  ModalitySpec m{trim(text.substr(0, colon)), 0};
  try {
    std::size_t used = 0;
    const auto channel_text = trim(text.substr(colon + 1));
    m.channels = std::stoi(channel_text, &used);
    if (used != channel_text.size()) throw std::invalid_argument("trailing");
  } catch (const std::exception&) {
    problems.push_back("modality '" + text + "' has a non-integer channel count");
  }
  return m;
}

inline std::vector<ModalitySpec> parse_modalities(const std::string& text, std::vector<std::string>& problems) {
  std::vector<ModalitySpec> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!trim(item).empty()) out.push_back(parse_modality(item, problems));
  return out;
}

template <typename T>
T parse_number(const std::string& key, const std::string& text, std::vector<std::string>& problems) {
  std::istringstream is(trim(text));
  T value{};
  is >> value;
  if (is.fail() || !is.eof()) {
    problems.push_back("key '" + key + "' expects a number, got '" + text + "'");
    return T{};
  }
  return value;
}

inline bool parse_bool(const std::string& key, const std::string& text, std::vector<std::string>& problems) {
  const auto t = trim(text);
  if (t == "true" || t == "1") return true;
  if (t == "false" || t == "0") return false;
  problems.push_back("key '" + key + "' expects true/false, got '" + text + "'");
  return false;
}

}  // namespace detail

/// Canonical text form. Sections [model], [train], [data]; every field is a key.
inline std::string serialize_config(const Config& cfg) {
  using detail::format_real;
  const auto& m = cfg.model;
  const auto& t = cfg.train;
  std::ostringstream os;
  os << "[model]\n"
     << "sources = " << detail::format_modalities(m.domains.sources) << "\n"
     << "target = " << m.domains.target.name << ":" << m.domains.target.channels << "\n"
     << "image_size = " << m.image_size.height << "x" << m.image_size.width << "\n"
     << "base_width = " << m.base_width << "\n"
     << "n_res_extract = " << m.n_res_extract << "\n"
     << "n_res_encoder = " << m.n_res_encoder << "\n"
     << "n_res_decoder = " << m.n_res_decoder << "\n"
     << "n_res_reverse_decoder = " << m.n_res_reverse_decoder << "\n"
     << "latent_channels = " << m.latent_channels << "\n"
     << "gan_mode = " << to_string(m.gan_mode) << "\n"
     << "fusion = " << to_string(m.fusion) << "\n"
     << "wavelet_levels = " << m.wavelet_levels << "\n"
     << "wavelet_boundary = " << to_string(m.wavelet_boundary) << "\n"
     << "\n[train]\n"
     << "lambda1 = " << format_real(t.lambda1) << "\n"
     << "lambda2 = " << format_real(t.lambda2) << "\n"
     << "lr_generator = " << format_real(t.lr_generator) << "\n"
     << "lr_discriminator = " << format_real(t.lr_discriminator) << "\n"
     << "epochs = " << t.epochs << "\n"
     << "decay_start_epoch = " << t.decay_start_epoch << "\n"
     << "batch_size = " << t.batch_size << "\n"
     << "seed = " << t.seed << "\n"
     << "max_steps = " << t.max_steps << "\n"
     << "checkpoint_every = " << t.checkpoint_every << "\n"
     << "adam_beta1 = " << format_real(t.adam_beta1) << "\n"
     << "adam_beta2 = " << format_real(t.adam_beta2) << "\n"
     << "\n[data]\n"
     << "root = " << cfg.data.root << "\n"
     << "random_crop = " << (cfg.data.random_crop ? "true" : "false") << "\n"
     << "test_count = " << cfg.data.test_count << "\n";
  return os.str();
}

/// Only the [model] section; the basis of the checkpoint config hash.
inline std::string serialize_model_section(const ModelConfig& model) {
  const auto text = serialize_config(Config{model, {}, {}});
  return text.substr(0, text.find("\n[train]"));
}

/// Parses the structured text form. Missing keys keep their defaults;
/// unknown sections or keys are a hard error.
inline Config parse_config(const std::string& text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream is(text);
  try {
    pt::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("core", std::string("malformed config: ") + e.message() + " at line " +
                                  std::to_string(e.line()));
  }

  Config cfg;
  std::vector<std::string> problems;
  using detail::parse_number;
  for (const auto& [section, keys] : tree) {
    if (section != "model" && section != "train" && section != "data") {
      problems.push_back("unknown section [" + section + "]");
      continue;
    }
    if (!keys.data().empty() && keys.empty()) {
      problems.push_back("key '" + section + "' outside of any section");
      continue;
    }
    for (const auto& [key, node] : keys) {
      const std::string value = detail::trim(node.data());
      const std::string qualified = section + "." + key;
      auto& m = cfg.model;
      auto& t = cfg.train;
      auto& d = cfg.data;
      if (section == "model") {
        if (key == "sources") {
          m.domains.sources = detail::parse_modalities(value, problems);
        } else if (key == "target") {
          m.domains.target = detail::parse_modality(value, problems);
        } else if (key == "image_size") {
          const auto x = value.find('x');
          if (x == std::string::npos) {
            problems.push_back("image_size must be written HxW, got '" + value + "'");
          } else {
            m.image_size.height = parse_number<int>(qualified, value.substr(0, x), problems);
            m.image_size.width = parse_number<int>(qualified, value.substr(x + 1), problems);
          }
        } else if (key == "base_width") {
          m.base_width = parse_number<int>(qualified, value, problems);
        } else if (key == "n_res_extract") {
          m.n_res_extract = parse_number<int>(qualified, value, problems);
        } else if (key == "n_res_encoder") {
          m.n_res_encoder = parse_number<int>(qualified, value, problems);
        } else if (key == "n_res_decoder") {
          m.n_res_decoder = parse_number<int>(qualified, value, problems);
        } else if (key == "n_res_reverse_decoder") {
          m.n_res_reverse_decoder = parse_number<int>(qualified, value, problems);
        } else if (key == "latent_channels") {
          m.latent_channels = parse_number<int>(qualified, value, problems);
        } else if (key == "gan_mode") {
          if (auto g = parse_gan_mode(value)) m.gan_mode = *g;
          else problems.push_back("gan_mode must be log or least_squares, got '" + value + "'");
        } else if (key == "fusion") {
          if (auto f = parse_fusion_mode(value)) m.fusion = *f;
          else problems.push_back("fusion must be feature, concat or wavelet_db4, got '" + value + "'");
        } else if (key == "wavelet_levels") {
          m.wavelet_levels = parse_number<int>(qualified, value, problems);
        } else if (key == "wavelet_boundary") {
          if (auto b = parse_wavelet_boundary(value)) m.wavelet_boundary = *b;
          else problems.push_back("wavelet_boundary must be symmetric or zero, got '" + value + "'");
        } else {
          problems.push_back("unknown key '" + qualified + "'");
        }
      } else if (section == "train") {
        if (key == "lambda1") t.lambda1 = parse_number<double>(qualified, value, problems);
        else if (key == "lambda2") t.lambda2 = parse_number<double>(qualified, value, problems);
        else if (key == "lr_generator") t.lr_generator = parse_number<double>(qualified, value, problems);
        else if (key == "lr_discriminator") t.lr_discriminator = parse_number<double>(qualified, value, problems);
        else if (key == "epochs") t.epochs = parse_number<int>(qualified, value, problems);
        else if (key == "decay_start_epoch") t.decay_start_epoch = parse_number<int>(qualified, value, problems);
        else if (key == "batch_size") t.batch_size = parse_number<int>(qualified, value, problems);
        else if (key == "seed") t.seed = parse_number<std::int64_t>(qualified, value, problems);
        else if (key == "max_steps") t.max_steps = parse_number<std::int64_t>(qualified, value, problems);
        else if (key == "checkpoint_every") t.checkpoint_every = parse_number<int>(qualified, value, problems);
        else if (key == "adam_beta1") t.adam_beta1 = parse_number<double>(qualified, value, problems);
        else if (key == "adam_beta2") t.adam_beta2 = parse_number<double>(qualified, value, problems);
        else problems.push_back("unknown key '" + qualified + "'");
      } else {
        if (key == "root") d.root = value;
        else if (key == "random_crop") d.random_crop = detail::parse_bool(qualified, value, problems);
        else if (key == "test_count") d.test_count = parse_number<int>(qualified, value, problems);
        else problems.push_back("unknown key '" + qualified + "'");
      }
    }
  }
  if (!problems.empty()) throw ConfigError("core", problems);
  return cfg;
}

inline Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("core", "cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

inline void save_config(const Config& cfg, const std::filesystem::path& path) {
  std::ofstream out(path);
  out << serialize_config(cfg);
  if (!out) throw IoError("core", "cannot write " + path.string());
}

/// FNV-1a over the canonical [model] text.
inline std::uint64_t config_hash(const ModelConfig& model) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : serialize_model_section(model)) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hex_hash(std::uint64_t h) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

}  // namespace in2i
