#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mlrel {

enum class ErrorCode {
    EmptyDataset,
    SingleClassDataset,
    LabelNoise,
    InvalidMixture,
    MalformedRow,
    CoordinateOutOfRange,
    DimensionMismatch,
    EpsilonTooLarge,
    DegenerateData,
    InvalidArgument,
    CellNotCrossBoundary,
    KTooSmall,
    CyclicTree,
    UnboundBE,
    InvalidTree,
    UnknownEvent,
    ProbabilityOutOfRange,
    Infeasible,
    PathNotInTree,
    IoError,
    SubprocessFailure,
};

std::string_view to_string(ErrorCode code);

// Every module reports failures through this one exception type; the code
// lets callers and tests distinguish the failure kinds named by each API.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace mlrel
