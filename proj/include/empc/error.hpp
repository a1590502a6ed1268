#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace empc {

/// Failure categories surfaced by the library. The CLI maps precondition-type
/// kinds to exit code 2 and numerical kinds to exit code 3.
enum class ErrorKind {
    DimensionMismatch,
    PreconditionViolated,
    NotPositiveDefinite,
    RankDeficient,
    NoConvergence,
    UnknownScenario,
    ControllerInfeasible,
    EmptySet,
    Infeasible,
    MaxIter,
    NonConvex,
    SamplingExhausted,
    EnumerationBudgetExceeded,
    OutsidePartition,
    NonInvertible,
    DiscontinuousInput,
    EmptyPieces,
    NonFiniteLoss,
    ProjectionInfeasible,
    InfeasibleMargin,
    SingleClassInput,
    EmptyPositiveReference,
    EmptyDenominator,
    Io,
    AuditFailed,
};

std::string_view to_string(ErrorKind kind);

/// True for kinds caused by bad input rather than numerical trouble.
bool is_precondition_error(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

/// Raised by rollout when the controller cannot produce an input.
class ControllerInfeasibleError : public Error {
public:
    ControllerInfeasibleError(std::size_t step, const std::string& what)
        : Error(ErrorKind::ControllerInfeasible, "step " + std::to_string(step) + ": " + what),
          step_(step) {}

    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool cond, ErrorKind kind, const char* what) {
    if (!cond) throw Error(kind, what);
}
inline void require(bool cond, ErrorKind kind, const std::string& what) {
    if (!cond) throw Error(kind, what);
}

}  // namespace empc
