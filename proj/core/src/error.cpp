#include "promim/error.hpp"

namespace promim {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kDimension:
      return "dimension error";
    case ErrorKind::kDegenerateInput:
      return "degenerate input";
    case ErrorKind::kInput:
      return "input error";
    case ErrorKind::kContract:
      return "contract error";
    case ErrorKind::kNumeric:
      return "numeric error";
    case ErrorKind::kTraining:
      return "training error";
    case ErrorKind::kIo:
      return "io error";
  }
  return "error";
}

Error::Error(ErrorKind kind, std::string module, const std::string& message)
    : std::runtime_error("[" + module + "] " + std::string(to_string(kind)) + ": " + message),
      kind_(kind),
      module_(std::move(module)) {}

void raise(ErrorKind kind, std::string_view module, const std::string& message) {
  throw Error(kind, std::string(module), message);
}

}  // namespace promim
