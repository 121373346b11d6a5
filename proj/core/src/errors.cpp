#include "setid/errors.hpp"

namespace setid {

std::string_view error_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::UnknownParameterName: return "UnknownParameterName";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::RaggedRows: return "RaggedRows";
    case ErrorCode::NonNumericCell: return "NonNumericCell";
    case ErrorCode::SurveyOutOfRange: return "SurveyOutOfRange";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::Indeterminate: return "Indeterminate";
    case ErrorCode::NoStableSolution: return "NoStableSolution";
    case ErrorCode::NumericalFailure: return "NumericalFailure";
    case ErrorCode::RiccatiDivergence: return "RiccatiDivergence";
    case ErrorCode::SolveFailedAtPerturbation: return "SolveFailedAtPerturbation";
    case ErrorCode::SingularMapUnflagged: return "SingularMapUnflagged";
    case ErrorCode::CalibrationOutsideValidRegion: return "CalibrationOutsideValidRegion";
    case ErrorCode::NonPSDCovariance: return "NonPSDCovariance";
    case ErrorCode::DegenerateSurvey: return "DegenerateSurvey";
    case ErrorCode::AlphaBlockRankDeficient: return "AlphaBlockRankDeficient";
    case ErrorCode::AllProposalsRejected: return "AllProposalsRejected";
    case ErrorCode::NonFiniteCriterion: return "NonFiniteCriterion";
    case ErrorCode::EmptySetAtCutoff: return "EmptySetAtCutoff";
    case ErrorCode::SingularMomentCovariance: return "SingularMomentCovariance";
    case ErrorCode::QPInfeasible: return "QPInfeasible";
    case ErrorCode::QPNotConverged: return "QPNotConverged";
    case ErrorCode::SingularVarianceOnTestedCoords: return "SingularVarianceOnTestedCoords";
    case ErrorCode::DegenerateBootstrapDistribution: return "DegenerateBootstrapDistribution";
  }
  return "Unknown";
}

int exit_code(ErrorCode code) { return 10 + static_cast<int>(code); }

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(error_name(code)) + ": " + message), code_(code), detail_(message) {}

ParseError::ParseError(const std::string& message, int line, int column)
    : Error(ErrorCode::ParseError,
            "line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + message),
      line_(line),
      column_(column) {}

void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

}  // namespace setid
