#include "fedcore/error.hpp"

namespace fedcore {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::kDimensionMismatch: return "dimension_mismatch";
    case ErrorKind::kIo: return "io";
    case ErrorKind::kMalformedHeader: return "malformed_header";
    case ErrorKind::kTruncated: return "truncated";
    case ErrorKind::kNonFinite: return "non_finite";
    case ErrorKind::kValidation: return "validation";
    case ErrorKind::kTooFewSamples: return "too_few_samples";
    case ErrorKind::kDegenerateAffinity: return "degenerate_affinity";
    case ErrorKind::kDomain: return "domain";
    case ErrorKind::kProtocol: return "protocol";
    case ErrorKind::kConfiguration: return "configuration";
    case ErrorKind::kEmptyInput: return "empty_input";
    case ErrorKind::kUndefined: return "undefined";
  }
  return "unknown";
}

}  // namespace fedcore
