#pragma once

#include <stdexcept>
#include <string>

namespace scb {

enum class ErrorCode {
    InvalidSpec,
    InvalidInput,
    InvalidParameter,
    DuplicateRoot,
    DegenerateResidue,
    ComplexRoots,
    MultipleRoots,
    SingularInitial,
    UnsupportedPrecision,
    ToleranceFailure,
    SingularPoint,
    DivergentIntegral,
    NoConvergence,
    OutsidePolygon,
    DegenerateGeometry,
    CornerEncounter,
    InsufficientTail,
    FitWindowTooSmall,
    NotEscaped,
    IoError,
};

const char* error_name(ErrorCode c);

// true for errors caused by bad user input rather than numerical failure
bool is_input_error(ErrorCode c);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(error_name(code)) + ": " + what), code_(code) {}
    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

} // namespace scb
