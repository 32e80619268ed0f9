#include "mlrel/robustness.hpp"

#include "mlrel/error.hpp"
#include "mlrel/rng.hpp"

namespace mlrel {

namespace {
constexpr std::size_t kBatch = 256;
}

Estimate smc_unastuteness(const CellRobustnessQuery& query) {
    if (query.classifier == nullptr) throw Error(ErrorCode::InvalidArgument, "no classifier");
    if (query.samples < 2) throw Error(ErrorCode::InvalidArgument, "SMC needs n_s >= 2");
    const std::size_t d = query.region.dim();
    if (query.classifier->dim() != d)
        throw Error(ErrorCode::DimensionMismatch, "classifier and cell dimensions differ");

    Rng rng(query.seed);
    std::vector<double> xs(kBatch * d);
    std::vector<ClassId> predicted(kBatch);
    std::size_t wrong = 0;
    for (std::size_t done = 0; done < query.samples;) {
        const std::size_t count = std::min(kBatch, query.samples - done);
        for (std::size_t s = 0; s < count; ++s)
            sample_uniform(query.region, rng, std::span<double>(xs).subspan(s * d, d));
        query.classifier->predict_batch(std::span<const double>(xs).first(count * d),
                                        std::span<ClassId>(predicted).first(count));
        for (std::size_t s = 0; s < count; ++s) wrong += predicted[s] != query.ground_truth;
        done += count;
    }

    // Indicators are 0/1, so sum (I - mean)^2 = wrong (1 - mean)^2 + right mean^2.
    const double n = static_cast<double>(query.samples);
    const double mean = static_cast<double>(wrong) / n;
    const double ss = static_cast<double>(wrong) * (1.0 - mean) * (1.0 - mean) +
                      (n - static_cast<double>(wrong)) * mean * mean;
    return {mean, ss / ((n - 1.0) * n), EstimateMethod::smc};
}

Estimate SmcEstimator::estimate(const CellRobustnessQuery& query) const {
    return smc_unastuteness(query);
}

Estimate assign_cross_boundary(const Cell& cell) {
    if (cell.status != CellStatus::cross_boundary)
        throw Error(ErrorCode::CellNotCrossBoundary,
                    "cell is " + std::string(to_string(cell.status)));
    return {1.0, 0.0, EstimateMethod::assigned};
}

Estimate acu(std::span<const Estimate> lambdas, AcuMode mode) {
    if (lambdas.empty()) throw Error(ErrorCode::InvalidArgument, "ACU of no cells");
    const double m = static_cast<double>(lambdas.size());
    double sum = 0.0, sum_sq = 0.0, var = 0.0;
    for (const auto& e : lambdas) {
        sum += e.mean;
        sum_sq += e.mean * e.mean;
        var += e.variance;
    }
    const double mean = sum / m;
    if (mode == AcuMode::full_partition) return {mean, var / (m * m), EstimateMethod::assembled};
    if (lambdas.size() < 2) throw Error(ErrorCode::KTooSmall, "sampled ACU needs k >= 2");
    const double v = (sum_sq / m - mean * mean) / (m - 1.0);
    return {mean, v < 0.0 ? 0.0 : v, EstimateMethod::assembled};
}

}  // namespace mlrel
