#include "xmrca/core/error.hpp"

namespace xmrca {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kSchemaViolation: return "schema-violation";
    case ErrorCode::kEmptyInput: return "empty-input";
    case ErrorCode::kIncompletePanel: return "incomplete-panel";
    case ErrorCode::kFormulaParse: return "formula-parse";
    case ErrorCode::kFormulaUnbound: return "formula-unbound";
    case ErrorCode::kFormulaDomain: return "formula-domain";
    case ErrorCode::kMalformedRow: return "malformed-row";
    case ErrorCode::kDuplicateRow: return "duplicate-row";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kInsufficientHistory: return "insufficient-history";
    case ErrorCode::kDivergence: return "divergence";
    case ErrorCode::kNoCandidates: return "no-candidates";
    case ErrorCode::kNoAnomaly: return "no-anomaly";
    case ErrorCode::kGeneration: return "generation";
  }
  return "unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), detail_(message) {}

FormulaParseError::FormulaParseError(std::size_t position, const std::string& message)
    : Error(ErrorCode::kFormulaParse, message + " at position " + std::to_string(position)),
      position_(position) {}

}  // namespace xmrca
