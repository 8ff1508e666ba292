#pragma once

#include <stdexcept>
#include <string>

namespace rprop {

enum class ErrorKind {
    DegeneratePair,
    BrokenChain,
    LoopDetected,
    LengthMismatch,
    IndexOutOfRange,
    StartNotInChain,
    StepsExceedChain,
    WindowOutOfRange,
    Unsatisfiable,
    EmptyInput,
    WindowTooShort,
    TooLarge,
    InvalidScheme,
    DecodeAmbiguity,
    SchemeTooLarge,
    ParseError,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& detail);
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace rprop
