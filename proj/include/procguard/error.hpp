#pragma once

#include <stdexcept>
#include <string>

namespace procguard {

// Exit codes shared by every CLI subcommand.
enum class ExitCode : int {
  kOk = 0,
  kConfig = 2,
  kInput = 3,
  kSampler = 4,
};

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual ExitCode exit_code() const noexcept { return ExitCode::kInput; }
};

// Bad parameters, shapes or option values.
class ConfigError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::kConfig; }
};

// Missing, malformed or unusable input data.
class InputError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::kInput; }
};

class SamplerError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::kSampler; }
};

}  // namespace procguard
