#pragma once

#include <stdexcept>
#include <string>

namespace avgtrack {

/// Failure categories. The CLI maps these onto process exit codes.
enum class ErrorKind {
    input,        ///< malformed values, dimension mismatch, schema problems
    design,       ///< an assumption of the gain design does not hold
    convergence,  ///< an iterative method hit its iteration cap
    numerical,    ///< singular systems, non-finite values, integration blow-up
    io,           ///< files that cannot be read or written
};

inline const char* to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::input: return "input";
        case ErrorKind::design: return "design";
        case ErrorKind::convergence: return "convergence";
        case ErrorKind::numerical: return "numerical";
        case ErrorKind::io: return "io";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace avgtrack
