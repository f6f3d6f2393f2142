#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace promim {

enum class ErrorKind {
  kDimension,
  kDegenerateInput,
  kInput,
  kContract,
  kNumeric,
  kTraining,
  kIo,
};

std::string_view to_string(ErrorKind kind);

/// Every failure raised by the library. `module()` names the subsystem that
/// detected it ("numerics", "encoders", ...) so the CLI can tag diagnostics.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string module, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& module() const noexcept { return module_; }

 private:
  ErrorKind kind_;
  std::string module_;
};

[[noreturn]] void raise(ErrorKind kind, std::string_view module, const std::string& message);

}  // namespace promim
