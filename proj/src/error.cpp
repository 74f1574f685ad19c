#include "scb/error.hpp"

namespace scb {

const char* error_name(ErrorCode c)
{
    switch (c) {
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::InvalidInput: return "InvalidInput";
    case ErrorCode::InvalidParameter: return "InvalidParameter";
    case ErrorCode::DuplicateRoot: return "DuplicateRoot";
    case ErrorCode::DegenerateResidue: return "DegenerateResidue";
    case ErrorCode::ComplexRoots: return "ComplexRoots";
    case ErrorCode::MultipleRoots: return "MultipleRoots";
    case ErrorCode::SingularInitial: return "SingularInitial";
    case ErrorCode::UnsupportedPrecision: return "UnsupportedPrecision";
    case ErrorCode::ToleranceFailure: return "ToleranceFailure";
    case ErrorCode::SingularPoint: return "SingularPoint";
    case ErrorCode::DivergentIntegral: return "DivergentIntegral";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::OutsidePolygon: return "OutsidePolygon";
    case ErrorCode::DegenerateGeometry: return "DegenerateGeometry";
    case ErrorCode::CornerEncounter: return "CornerEncounter";
    case ErrorCode::InsufficientTail: return "InsufficientTail";
    case ErrorCode::FitWindowTooSmall: return "FitWindowTooSmall";
    case ErrorCode::NotEscaped: return "NotEscaped";
    case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

bool is_input_error(ErrorCode c)
{
    switch (c) {
    case ErrorCode::InvalidSpec:
    case ErrorCode::InvalidInput:
    case ErrorCode::InvalidParameter:
    case ErrorCode::DuplicateRoot:
    case ErrorCode::ComplexRoots:
    case ErrorCode::MultipleRoots:
    case ErrorCode::SingularInitial:
    case ErrorCode::UnsupportedPrecision:
    case ErrorCode::IoError:
        return true;
    default:
        return false;
    }
}

} // namespace scb
