#include "dagsim/error.hpp"

namespace dagsim {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::SyntaxError: return "SyntaxError";
        case ErrorCode::UnknownFunction: return "UnknownFunction";
        case ErrorCode::NonConstantCoefficient: return "NonConstantCoefficient";
        case ErrorCode::DuplicateTerm: return "DuplicateTerm";
        case ErrorCode::UnknownColumn: return "UnknownColumn";
        case ErrorCode::UnknownLevel: return "UnknownLevel";
        case ErrorCode::TimeOutsideSimulation: return "TimeOutsideSimulation";
        case ErrorCode::DomainError: return "DomainError";
        case ErrorCode::DuplicateName: return "DuplicateName";
        case ErrorCode::UnknownType: return "UnknownType";
        case ErrorCode::ReservedSuffix: return "ReservedSuffix";
        case ErrorCode::UnknownNode: return "UnknownNode";
        case ErrorCode::CyclicGraph: return "CyclicGraph";
        case ErrorCode::ValidationError: return "ValidationError";
        case ErrorCode::InvalidParameter: return "InvalidParameter";
        case ErrorCode::ProbabilityOutOfRange: return "ProbabilityOutOfRange";
        case ErrorCode::RowNotNormalized: return "RowNotNormalized";
        case ErrorCode::UnmappedCombination: return "UnmappedCombination";
        case ErrorCode::NoMatchingComponent: return "NoMatchingComponent";
        case ErrorCode::NoTimeDependentNode: return "NoTimeDependentNode";
        case ErrorCode::TdNodePresent: return "TdNodePresent";
        case ErrorCode::InsufficientSavedStates: return "InsufficientSavedStates";
        case ErrorCode::ParseError: return "ParseError";
        case ErrorCode::IOError: return "IOError";
    }
    return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), message_(message) {}

Error Error::with_context(const std::string& context) const {
    return Error(code_, context + ": " + message_);
}

void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

}  // namespace dagsim
