#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "classifier.hpp"
#include "estimate.hpp"
#include "op_model.hpp"
#include "robustness.hpp"

namespace mlrel {

struct CellEstimate {
    Estimate op;
    Estimate lambda;
};

// E = sum E[l]E[Op];
// Var = sum E[l]^2 Var[Op] + E[Op]^2 Var[l] + Var[l] Var[Op].
// Terms are summed in input order.
Estimate assemble_full(std::span<const CellEstimate> cells);

struct SampledEstimate {
    Estimate estimate;
    bool variance_clamped = false;  // negative round-off variance set to 0
};

// Weighted-average estimator over k drawn balls:
// mean = sum w l / sum w; Var = (sum w l^2 / sum w - mean^2) / (k - 1).
// Throws KTooSmall when k < 2.
SampledEstimate assemble_sampled(std::span<const double> weights,
                                 std::span<const double> lambda_means);

// k uniform draws with replacement from [0, frame_size); prefixes of a longer
// draw are the draws for smaller k.
std::vector<std::size_t> draw_balls(std::size_t frame_size, std::size_t k, std::uint64_t seed);

SampledEstimate assemble_sampled(const SampleFrame& frame, std::span<const std::size_t> draws,
                                 std::span<const Estimate> lambdas);

struct UpperBound {
    double value = 0.0;
    bool clamped = false;
};

// Normal-approximation bound mean + z_{1-alpha} sqrt(var), clamped to [0,1].
UpperBound confidence_upper_bound(const Estimate& e, double alpha);

double normal_quantile(double p);

// "0.975" for alpha = 0.025
std::string confidence_key(double alpha);

enum class AssumptionStatus { declared, holds, violated, not_applicable, flagged };

std::string_view to_string(AssumptionStatus s);

struct AssumptionEntry {
    int id = 0;
    std::string name;
    AssumptionStatus status = AssumptionStatus::declared;
    std::string note;
};

// The seven modelling assumptions, all initially declared.
std::vector<AssumptionEntry> default_assumptions();

enum class AssessmentMode { full_partition, sampled };

struct ReliabilityResult {
    AssessmentMode mode = AssessmentMode::full_partition;
    std::size_t k = 0;  // sampled mode only
    std::uint64_t seed = 0;
    Estimate pmi;
    Estimate acu;
    std::map<std::string, UpperBound> pmi_ub;
    std::map<std::string, UpperBound> acu_ub;
    std::vector<AssumptionEntry> assumptions;
    std::vector<std::string> diagnostics;

    void add_bounds(std::span<const double> alphas);
    nlohmann::json to_json() const;
};

// Lambda estimates for balls drawn in the sampled mode. Each ball's estimate
// uses the stream (seed, ball index) and is computed once per ball.
class BallLambdaCache {
public:
    BallLambdaCache(const SampleFrame& frame, const Classifier& classifier,
                    const AstutenessEstimator& estimator, std::size_t samples, std::uint64_t seed);

    // Evaluates every not-yet-seen ball in `draws` (in parallel) and returns
    // the estimates aligned with `draws`.
    std::vector<Estimate> lambdas(std::span<const std::size_t> draws, std::size_t threads = 0);

private:
    const SampleFrame& frame_;
    const Classifier& classifier_;
    const AstutenessEstimator& estimator_;
    std::size_t samples_;
    std::uint64_t seed_;
    std::map<std::size_t, Estimate> cache_;
};

// Nested draws: one draw sequence of length max(k_grid) whose prefixes give
// each row. Rows carry pmi (frame weights), ACU (equal weights) and the
// bounds for `alphas`.
std::vector<ReliabilityResult> k_convergence(const SampleFrame& frame,
                                             const Classifier& classifier,
                                             std::span<const std::size_t> k_grid,
                                             std::uint64_t seed, std::size_t samples = 1000,
                                             std::span<const double> alphas = {},
                                             std::size_t threads = 0);

// k,pmi_mean,pmi_var,pmi_ub,acu_mean,acu_var,acu_ub (bound at 0.975)
std::string k_convergence_csv(std::span<const ReliabilityResult> rows);

}  // namespace mlrel
