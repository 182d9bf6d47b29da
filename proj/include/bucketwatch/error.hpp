#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace bucketwatch {

// Coarse failure classes. The CLI prints the category name as the first
// token of its one-line error message so scripts can dispatch on it.
enum class ErrorCategory {
  InvalidArgument,
  Parse,
  Io,
  MissingKey,
  Singular,
  Infeasible,
  Version,
};

constexpr std::string_view to_string(ErrorCategory c) noexcept {
  switch (c) {
    case ErrorCategory::InvalidArgument: return "invalid_argument";
    case ErrorCategory::Parse: return "parse";
    case ErrorCategory::Io: return "io";
    case ErrorCategory::MissingKey: return "missing_key";
    case ErrorCategory::Singular: return "singular";
    case ErrorCategory::Infeasible: return "infeasible";
    case ErrorCategory::Version: return "version";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

}  // namespace bucketwatch
