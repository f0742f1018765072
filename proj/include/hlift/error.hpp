#pragma once

#include <stdexcept>
#include <string>

namespace hlift {

/// Failure categories shared by every module. The CLI maps them onto exit codes.
enum class ErrorKind {
    Parse,       ///< malformed input text
    Structure,   ///< well-formed rows in an impossible order
    Data,        ///< exposure or data-gap problems in otherwise valid input
    Rank,        ///< degenerate matrix where a factor is required
    Convergence, ///< iterative routine did not converge
    Degenerate,  ///< zero variance, empty tails, non-positive SCR and the like
    Regression,  ///< singular design matrix
    Numeric,     ///< NaN/Inf propagation
    Training,    ///< divergence during optimisation
    Insufficient,///< not enough history for the requested window
    Domain,      ///< argument outside the function's domain
    Shape,       ///< dimension mismatch or invalid serialized shapes
    Io,          ///< file could not be read or written
    MissingStage,///< an upstream artifact is absent or stale
};

const char* to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
    throw Error(kind, what);
}

inline void require(bool cond, ErrorKind kind, const std::string& what) {
    if (!cond) throw Error(kind, what);
}

} // namespace hlift
