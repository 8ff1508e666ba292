#include "rprop/error.hpp"

namespace rprop {

const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::DegeneratePair: return "DegeneratePair";
        case ErrorKind::BrokenChain: return "BrokenChain";
        case ErrorKind::LoopDetected: return "LoopDetected";
        case ErrorKind::LengthMismatch: return "LengthMismatch";
        case ErrorKind::IndexOutOfRange: return "IndexOutOfRange";
        case ErrorKind::StartNotInChain: return "StartNotInChain";
        case ErrorKind::StepsExceedChain: return "StepsExceedChain";
        case ErrorKind::WindowOutOfRange: return "WindowOutOfRange";
        case ErrorKind::Unsatisfiable: return "Unsatisfiable";
        case ErrorKind::EmptyInput: return "EmptyInput";
        case ErrorKind::WindowTooShort: return "WindowTooShort";
        case ErrorKind::TooLarge: return "TooLarge";
        case ErrorKind::InvalidScheme: return "InvalidScheme";
        case ErrorKind::DecodeAmbiguity: return "DecodeAmbiguity";
        case ErrorKind::SchemeTooLarge: return "SchemeTooLarge";
        case ErrorKind::ParseError: return "ParseError";
    }
    return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& detail)
    : std::runtime_error(std::string(to_string(kind)) + ": " + detail), kind_(kind) {}

}  // namespace rprop
