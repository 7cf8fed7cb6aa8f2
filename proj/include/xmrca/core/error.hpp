#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace xmrca {

enum class ErrorCode {
  kInvalidArgument,
  kSchemaViolation,
  kEmptyInput,
  kIncompletePanel,
  kFormulaParse,
  kFormulaUnbound,
  kFormulaDomain,
  kMalformedRow,
  kDuplicateRow,
  kIo,
  kInsufficientHistory,
  kDivergence,
  kNoCandidates,
  kNoAnomaly,
  kGeneration,
};

const char* to_string(ErrorCode code);

// Every failure the library reports carries a code so the CLI can map it to
// an exit status without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }
  // Message without the code prefix.
  const std::string& detail() const noexcept { return detail_; }

  // Same code, detail extended with `context`.
  Error with_context(const std::string& context) const { return Error(code_, detail_ + " " + context); }

 private:
  ErrorCode code_;
  std::string detail_;
};

class FormulaParseError : public Error {
 public:
  FormulaParseError(std::size_t position, const std::string& message);

  // Zero-based character offset into the formula text.
  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

}  // namespace xmrca
