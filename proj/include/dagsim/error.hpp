#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dagsim {

enum class ErrorCode {
    // parsing
    SyntaxError,
    UnknownFunction,
    NonConstantCoefficient,
    DuplicateTerm,
    // evaluation
    UnknownColumn,
    UnknownLevel,
    TimeOutsideSimulation,
    DomainError,
    // dag assembly
    DuplicateName,
    UnknownType,
    ReservedSuffix,
    UnknownNode,
    CyclicGraph,
    ValidationError,
    // sampling
    InvalidParameter,
    ProbabilityOutOfRange,
    RowNotNormalized,
    UnmappedCombination,
    NoMatchingComponent,
    // simulation / transform
    NoTimeDependentNode,
    TdNodePresent,
    InsufficientSavedStates,
    // cli
    ParseError,
    IOError,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the library. `code()` identifies the failure class;
/// the message carries the location (node, time step, row, source position).
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message);

    ErrorCode code() const noexcept { return code_; }
    /// The message without the "Code: " prefix that what() carries.
    const std::string& message() const noexcept { return message_; }

    /// Returns a copy whose message is prefixed with `context` ("node 'Y', t=12: ...").
    Error with_context(const std::string& context) const;

private:
    ErrorCode code_;
    std::string message_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

}  // namespace dagsim
