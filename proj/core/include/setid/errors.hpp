#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace setid {

enum class ErrorCode {
  InvalidArgument,
  ParseError,
  UnknownParameterName,
  DimensionMismatch,
  RaggedRows,
  NonNumericCell,
  SurveyOutOfRange,
  IoError,
  Indeterminate,
  NoStableSolution,
  NumericalFailure,
  RiccatiDivergence,
  SolveFailedAtPerturbation,
  SingularMapUnflagged,
  CalibrationOutsideValidRegion,
  NonPSDCovariance,
  DegenerateSurvey,
  AlphaBlockRankDeficient,
  AllProposalsRejected,
  NonFiniteCriterion,
  EmptySetAtCutoff,
  SingularMomentCovariance,
  QPInfeasible,
  QPNotConverged,
  SingularVarianceOnTestedCoords,
  DegenerateBootstrapDistribution,
};

std::string_view error_name(ErrorCode code);

// Process exit status used by the CLI for each error class.
int exit_code(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }
  // Message without the error-name prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

// Thrown by the config parser. Line and column are 1-based; column counts
// code points, not bytes.
class ParseError : public Error {
 public:
  ParseError(const std::string& message, int line, int column);

  int line() const noexcept { return line_; }
  int column() const noexcept { return column_; }

 private:
  int line_;
  int column_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

}  // namespace setid
