#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fedcore {

enum class ErrorKind {
  kDimensionMismatch,
  kIo,
  kMalformedHeader,
  kTruncated,
  kNonFinite,
  kValidation,
  kTooFewSamples,
  kDegenerateAffinity,
  kDomain,
  kProtocol,
  kConfiguration,
  kEmptyInput,
  kUndefined,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// Every failure raised by the library carries a machine-readable kind so the
/// CLI can report it as JSON and tests can match on it.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace fedcore
