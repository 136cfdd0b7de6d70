#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace in2i {

enum class ErrorKind { config, data, numeric, shape, io };

/// Base error carrying the originating module name so the CLI can surface it.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string module, const std::string& what)
      : std::runtime_error(module + ": " + what), kind_(kind), module_(std::move(module)) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& module() const noexcept { return module_; }

 private:
  ErrorKind kind_;
  std::string module_;
};

class ConfigError : public Error {
 public:
  ConfigError(std::string module, std::vector<std::string> problems)
      : Error(ErrorKind::config, std::move(module), join(problems)), problems_(std::move(problems)) {}
  ConfigError(std::string module, const std::string& problem)
      : ConfigError(std::move(module), std::vector<std::string>{problem}) {}

  const std::vector<std::string>& problems() const noexcept { return problems_; }

 private:
  static std::string join(const std::vector<std::string>& items) {
    std::string out;
    for (const auto& item : items) {
      if (!out.empty()) out += "; ";
      out += item;
    }
    return out;
  }
  std::vector<std::string> problems_;
};

class DataError : public Error {
 public:
  DataError(std::string module, const std::string& what) : Error(ErrorKind::data, std::move(module), what) {}
};

class NumericError : public Error {
 public:
  NumericError(std::string module, const std::string& what) : Error(ErrorKind::numeric, std::move(module), what) {}
};

class ShapeError : public Error {
 public:
  ShapeError(std::string module, const std::string& what) : Error(ErrorKind::shape, std::move(module), what) {}
};

class IoError : public Error {
 public:
  IoError(std::string module, const std::string& what) : Error(ErrorKind::io, std::move(module), what) {}
};

/// Process exit code for an error kind: 2 config, 3 data, 4 numeric.
inline int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config: return 2;
    case ErrorKind::data:
    case ErrorKind::shape:
    case ErrorKind::io: return 3;
    case ErrorKind::numeric: return 4;
  }
  return 1;
}

}  // namespace in2i
