#ifndef IVDYN_ERROR_HPP
#define IVDYN_ERROR_HPP

#include <stdexcept>
#include <string>

namespace ivdyn {

enum class ErrorCode {
    CriticalPoint,
    RangeViolation,
    FlatBranch,
    GapOverlap,
    InvalidMap,
    DegenerateFamily,
    NotClassified,
    ShadowingFailed,
    EnvelopeViolation,
    ResolutionTooFine,
    DichotomyViolation,
    PreconditionFailed,
    ParseError
};

inline const char* to_string(ErrorCode c) noexcept {
    switch (c) {
    case ErrorCode::CriticalPoint: return "CriticalPoint";
    case ErrorCode::RangeViolation: return "RangeViolation";
    case ErrorCode::FlatBranch: return "FlatBranch";
    case ErrorCode::GapOverlap: return "GapOverlap";
    case ErrorCode::InvalidMap: return "InvalidMap";
    case ErrorCode::DegenerateFamily: return "DegenerateFamily";
    case ErrorCode::NotClassified: return "NotClassified";
    case ErrorCode::ShadowingFailed: return "ShadowingFailed";
    case ErrorCode::EnvelopeViolation: return "EnvelopeViolation";
    case ErrorCode::ResolutionTooFine: return "ResolutionTooFine";
    case ErrorCode::DichotomyViolation: return "DichotomyViolation";
    case ErrorCode::PreconditionFailed: return "PreconditionFailed";
    case ErrorCode::ParseError: return "ParseError";
    }
    return "Unknown";
}

class DynamicsError : public std::runtime_error {
public:
    DynamicsError(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
    throw DynamicsError(code, what);
}

} // namespace ivdyn

#endif
