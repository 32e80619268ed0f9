#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

#include "classifier.hpp"
#include "estimate.hpp"
#include "geometry.hpp"
#include "partition.hpp"

namespace mlrel {

enum class ConditionalOp { uniform };

struct CellRobustnessQuery {
    Box region;
    ClassId ground_truth = 0;
    const Classifier* classifier = nullptr;
    ConditionalOp conditional_op = ConditionalOp::uniform;
    std::size_t samples = 1000;
    std::uint64_t seed = 0;  // already derived per cell by the caller
};

// Estimates cell unastuteness, the probability that the model disagrees with
// the cell's ground truth under the conditional OP. Stateless given a query.
class AstutenessEstimator {
public:
    virtual ~AstutenessEstimator() = default;
    virtual Estimate estimate(const CellRobustnessQuery& query) const = 0;
};

// Simple Monte Carlo: mean of the misclassification indicator over uniform
// draws, variance = sum (I - mean)^2 / ((n - 1) n).
class SmcEstimator final : public AstutenessEstimator {
public:
    Estimate estimate(const CellRobustnessQuery& query) const override;
};

Estimate smc_unastuteness(const CellRobustnessQuery& query);

// (1, 0) for cross-boundary cells; throws CellNotCrossBoundary otherwise.
Estimate assign_cross_boundary(const Cell& cell);

enum class AcuMode { full_partition, sampled };

// Average cell unastuteness. Full mode: variance = sum Var[l_i] / m^2.
// Sampled mode: equal-weight weighted-average estimator.
Estimate acu(std::span<const Estimate> lambdas, AcuMode mode = AcuMode::full_partition);

}  // namespace mlrel
