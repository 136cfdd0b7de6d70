#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "config.hpp"
#include "error.hpp"

namespace in2i {

/// Checkpoint directory layout:
///   manifest.txt    [checkpoint] header and one [parameters] line per tensor
///   config.ini      the full resolved configuration
///   params/<name>.bin  raw little-endian float32 data, C order
///   optim_*.pt      optimizer moments (libtorch archive), optional
struct CheckpointHeader {
  std::string config_hash;
  std::int64_t epoch = 0;     // next epoch to run
  std::int64_t position = 0;  // next sample position inside that epoch
  std::int64_t step = 0;
  std::string gan_mode;
  std::string sources;
  std::string target;
};

struct ParameterEntry {
  std::string name;
  std::vector<std::int64_t> shape;
  std::string file;
};

struct Manifest {
  CheckpointHeader header;
  std::vector<ParameterEntry> parameters;
};

inline constexpr const char* kManifestFormat = "in2i-checkpoint-1";

namespace detail {

inline std::string shape_text(const std::vector<std::int64_t>& shape) {
  std::string s;
  for (auto d : shape) s += (s.empty() ? "" : "x") + std::to_string(d);
  return s.empty() ? "scalar" : s;
}

inline std::vector<std::int64_t> parse_shape(const std::string& text) {
  std::vector<std::int64_t> out;
  if (text == "scalar") return out;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, 'x')) out.push_back(std::stoll(part));
  return out;
}

inline void write_blob(const torch::Tensor& t, const std::filesystem::path& path) {
  auto c = t.detach().to(torch::kCPU).to(torch::kFloat32).contiguous();
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(c.data_ptr<float>()), static_cast<std::streamsize>(c.numel() * sizeof(float)));
  if (!out) throw IoError("checkpoint", "cannot write " + path.string());
}

inline torch::Tensor read_blob(const std::filesystem::path& path, const std::vector<std::int64_t>& shape) {
  auto t = torch::empty(shape, torch::kFloat32);
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw IoError("checkpoint", "cannot open " + path.string());
  const auto bytes = static_cast<std::int64_t>(in.tellg());
  if (bytes != t.numel() * static_cast<std::int64_t>(sizeof(float)))
    throw IoError("checkpoint", path.string() + " holds " + std::to_string(bytes) + " bytes, expected " +
                                    std::to_string(t.numel() * sizeof(float)));
  in.seekg(0);
  in.read(reinterpret_cast<char*>(t.data_ptr<float>()), bytes);
  return t;
}

}  // namespace detail

inline void write_manifest(const Manifest& m, const std::filesystem::path& path) {
  std::ofstream out(path);
  const auto& h = m.header;
  out << "[checkpoint]\n"
      << "format = " << kManifestFormat << "\n"
      << "config_hash = " << h.config_hash << "\n"
      << "epoch = " << h.epoch << "\n"
      << "position = " << h.position << "\n"
      << "step = " << h.step << "\n"
      << "gan_mode = " << h.gan_mode << "\n"
      << "sources = " << h.sources << "\n"
      << "target = " << h.target << "\n"
      << "\n[parameters]\n";
  for (const auto& p : m.parameters) out << p.name << " = " << detail::shape_text(p.shape) << " " << p.file << "\n";
  if (!out) throw IoError("checkpoint", "cannot write " + path.string());
}

inline Manifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("checkpoint", "cannot open manifest " + path.string());
  Manifest m;
  std::string line, section;
  std::map<std::string, std::string> header;
  while (std::getline(in, line)) {
    line = detail::trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      section = line;
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw IoError("checkpoint", "malformed manifest line: " + line);
    const auto key = detail::trim(line.substr(0, eq));
    const auto value = detail::trim(line.substr(eq + 1));
    if (section == "[checkpoint]") {
      header[key] = value;
    } else if (section == "[parameters]") {
      std::istringstream vs(value);
      std::string shape, file;
      vs >> shape >> file;
      m.parameters.push_back({key, detail::parse_shape(shape), file});
    }
  }
  if (header["format"] != kManifestFormat) throw IoError("checkpoint", "unsupported manifest format in " + path.string());
  auto& h = m.header;
  h.config_hash = header["config_hash"];
  h.epoch = std::stoll(header["epoch"]);
  h.position = std::stoll(header["position"]);
  h.step = std::stoll(header["step"]);
  h.gan_mode = header["gan_mode"];
  h.sources = header["sources"];
  h.target = header["target"];
  return m;
}

/// A named group of modules written under a common prefix.
struct NamedModule {
  std::string prefix;
  torch::nn::Module* module;
};

inline std::vector<ParameterEntry> save_parameters(const std::vector<NamedModule>& modules,
                                                   const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "params");
  std::vector<ParameterEntry> entries;
  for (const auto& nm : modules) {
    for (const auto& p : nm.module->named_parameters(true)) {
      const auto name = nm.prefix + "." + p.key();
      const auto file = "params/" + name + ".bin";
      detail::write_blob(p.value(), dir / file);
      entries.push_back({name, p.value().sizes().vec(), file});
    }
  }
  return entries;
}

inline void load_parameters(const std::vector<NamedModule>& modules, const Manifest& manifest,
                            const std::filesystem::path& dir) {
  std::map<std::string, const ParameterEntry*> by_name;
  for (const auto& e : manifest.parameters) by_name[e.name] = &e;
  torch::NoGradGuard no_grad;
  std::size_t used = 0;
  for (const auto& nm : modules) {
    for (auto& p : nm.module->named_parameters(true)) {
      const auto name = nm.prefix + "." + p.key();
      auto it = by_name.find(name);
      if (it == by_name.end()) throw IoError("checkpoint", "checkpoint lacks parameter " + name);
      if (it->second->shape != p.value().sizes().vec())
        throw IoError("checkpoint", "parameter " + name + " has shape " + detail::shape_text(it->second->shape) +
                                        ", model expects " + detail::shape_text(p.value().sizes().vec()));
      p.value().copy_(detail::read_blob(dir / it->second->file, it->second->shape).to(p.value().scalar_type()));
      ++used;
    }
  }
  if (used != manifest.parameters.size())
    throw IoError("checkpoint", "checkpoint holds " + std::to_string(manifest.parameters.size()) +
                                    " parameters, model uses " + std::to_string(used));
}

/// Throws ConfigError unless the manifest was written for `model`.
inline void verify_config_hash(const Manifest& manifest, const ModelConfig& model) {
  const auto expected = hex_hash(config_hash(model));
  if (manifest.header.config_hash != expected)
    throw ConfigError("checkpoint", "config hash mismatch: checkpoint " + manifest.header.config_hash +
                                        ", configuration " + expected);
}

}  // namespace in2i
