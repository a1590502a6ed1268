#include "empc/error.hpp"

namespace empc {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::DimensionMismatch: return "DimensionMismatch";
        case ErrorKind::PreconditionViolated: return "PreconditionViolated";
        case ErrorKind::NotPositiveDefinite: return "NotPositiveDefinite";
        case ErrorKind::RankDeficient: return "RankDeficient";
        case ErrorKind::NoConvergence: return "NoConvergence";
        case ErrorKind::UnknownScenario: return "UnknownScenario";
        case ErrorKind::ControllerInfeasible: return "ControllerInfeasible";
        case ErrorKind::EmptySet: return "EmptySet";
        case ErrorKind::Infeasible: return "Infeasible";
        case ErrorKind::MaxIter: return "MaxIter";
        case ErrorKind::NonConvex: return "NonConvex";
        case ErrorKind::SamplingExhausted: return "SamplingExhausted";
        case ErrorKind::EnumerationBudgetExceeded: return "EnumerationBudgetExceeded";
        case ErrorKind::OutsidePartition: return "OutsidePartition";
        case ErrorKind::NonInvertible: return "NonInvertible";
        case ErrorKind::DiscontinuousInput: return "DiscontinuousInput";
        case ErrorKind::EmptyPieces: return "EmptyPieces";
        case ErrorKind::NonFiniteLoss: return "NonFiniteLoss";
        case ErrorKind::ProjectionInfeasible: return "ProjectionInfeasible";
        case ErrorKind::InfeasibleMargin: return "InfeasibleMargin";
        case ErrorKind::SingleClassInput: return "SingleClassInput";
        case ErrorKind::EmptyPositiveReference: return "EmptyPositiveReference";
        case ErrorKind::EmptyDenominator: return "EmptyDenominator";
        case ErrorKind::Io: return "Io";
        case ErrorKind::AuditFailed: return "AuditFailed";
    }
    return "Unknown";
}

bool is_precondition_error(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::DimensionMismatch:
        case ErrorKind::PreconditionViolated:
        case ErrorKind::UnknownScenario:
        case ErrorKind::EmptySet:
        case ErrorKind::EmptyPieces:
        case ErrorKind::SingleClassInput:
        case ErrorKind::EmptyPositiveReference:
        case ErrorKind::EmptyDenominator:
        case ErrorKind::Io:
            return true;
        default:
            return false;
    }
}

}  // namespace empc
