#pragma once

#include <stdexcept>
#include <string>

namespace fmprog {

/// Error classes. The CLI maps each class to a stable exit code.
enum class ErrorKind {
    Parse,            // malformed input file
    Integrity,        // data violates a structural invariant (cycle gaps, NaN)
    Config,           // configuration cannot be satisfied
    Parameter,        // argument out of its documented range
    Contract,         // shape / precondition mismatch between modules
    Numerical,        // divergence, non-finite state
    MissingArtifact,  // an upstream pipeline stage has not been run
    Lock,             // run directory is in use
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

inline int exit_code(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::Config:
    case ErrorKind::Parameter: return 2;
    case ErrorKind::MissingArtifact: return 3;
    case ErrorKind::Parse:
    case ErrorKind::Integrity: return 4;
    case ErrorKind::Numerical: return 5;
    case ErrorKind::Lock: return 6;
    case ErrorKind::Contract: return 7;
    }
    return 1;
}

inline const char* to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::Parse: return "parse error";
    case ErrorKind::Integrity: return "integrity error";
    case ErrorKind::Config: return "configuration error";
    case ErrorKind::Parameter: return "parameter error";
    case ErrorKind::Contract: return "contract error";
    case ErrorKind::Numerical: return "numerical error";
    case ErrorKind::MissingArtifact: return "missing artifact";
    case ErrorKind::Lock: return "lock error";
    }
    return "error";
}

}  // namespace fmprog
