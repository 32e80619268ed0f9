#include "mlrel/error.hpp"
#include "mlrel/estimate.hpp"

namespace mlrel {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::EmptyDataset: return "EmptyDataset";
        case ErrorCode::SingleClassDataset: return "SingleClassDataset";
        case ErrorCode::LabelNoise: return "LabelNoise";
        case ErrorCode::InvalidMixture: return "InvalidMixture";
        case ErrorCode::MalformedRow: return "MalformedRow";
        case ErrorCode::CoordinateOutOfRange: return "CoordinateOutOfRange";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::EpsilonTooLarge: return "EpsilonTooLarge";
        case ErrorCode::DegenerateData: return "DegenerateData";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::CellNotCrossBoundary: return "CellNotCrossBoundary";
        case ErrorCode::KTooSmall: return "KTooSmall";
        case ErrorCode::CyclicTree: return "CyclicTree";
        case ErrorCode::UnboundBE: return "UnboundBE";
        case ErrorCode::InvalidTree: return "InvalidTree";
        case ErrorCode::UnknownEvent: return "UnknownEvent";
        case ErrorCode::ProbabilityOutOfRange: return "ProbabilityOutOfRange";
        case ErrorCode::Infeasible: return "Infeasible";
        case ErrorCode::PathNotInTree: return "PathNotInTree";
        case ErrorCode::IoError: return "IoError";
        case ErrorCode::SubprocessFailure: return "SubprocessFailure";
    }
    return "Unknown";
}

std::string_view to_string(EstimateMethod m) {
    switch (m) {
        case EstimateMethod::kde: return "kde";
        case EstimateMethod::kde_bootstrap: return "kde_bootstrap";
        case EstimateMethod::analytic: return "analytic";
        case EstimateMethod::smc: return "smc";
        case EstimateMethod::assigned: return "assigned";
        case EstimateMethod::assembled: return "assembled";
    }
    return "unknown";
}

}  // namespace mlrel
