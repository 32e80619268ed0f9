#include "mlrel/assembly.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <boost/math/distributions/normal.hpp>

#include "mlrel/error.hpp"
#include "mlrel/parallel.hpp"
#include "mlrel/rng.hpp"

namespace mlrel {

Estimate assemble_full(std::span<const CellEstimate> cells) {
    if (cells.empty()) throw Error(ErrorCode::InvalidArgument, "nothing to assemble");
    double mean = 0.0, var = 0.0;
    for (const auto& c : cells) {
        const double el = c.lambda.mean, vl = c.lambda.variance;
        const double eo = c.op.mean, vo = c.op.variance;
        mean += el * eo;
        var += el * el * vo + eo * eo * vl + vl * vo;
    }
    return {mean, var, EstimateMethod::assembled};
}

SampledEstimate assemble_sampled(std::span<const double> weights,
                                 std::span<const double> lambda_means) {
    if (weights.size() != lambda_means.size())
        throw Error(ErrorCode::DimensionMismatch, "weights and lambdas differ in length");
    const std::size_t k = weights.size();
    if (k < 2) throw Error(ErrorCode::KTooSmall, "the weighted-average estimator needs k >= 2");
    double sw = 0.0, swl = 0.0, swl2 = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        sw += weights[i];
        swl += weights[i] * lambda_means[i];
        swl2 += weights[i] * lambda_means[i] * lambda_means[i];
    }
    if (!(sw > 0.0)) throw Error(ErrorCode::InvalidArgument, "drawn balls carry no weight");
    const double mean = swl / sw;
    double var = (swl2 / sw - mean * mean) / static_cast<double>(k - 1);
    SampledEstimate out;
    if (var < 0.0) {
        var = 0.0;
        out.variance_clamped = true;
    }
    out.estimate = {mean, var, EstimateMethod::assembled};
    return out;
}

std::vector<std::size_t> draw_balls(std::size_t frame_size, std::size_t k, std::uint64_t seed) {
    if (frame_size == 0) throw Error(ErrorCode::InvalidArgument, "empty sample frame");
    Rng rng = make_rng(seed, stream::ball_draw);
    std::vector<std::size_t> draws(k);
    for (auto& d : draws) d = static_cast<std::size_t>(uniform_index(rng, frame_size));
    return draws;
}

SampledEstimate assemble_sampled(const SampleFrame& frame, std::span<const std::size_t> draws,
                                 std::span<const Estimate> lambdas) {
    if (draws.size() != lambdas.size())
        throw Error(ErrorCode::DimensionMismatch, "draws and lambdas differ in length");
    std::vector<double> w(draws.size()), l(draws.size());
    for (std::size_t i = 0; i < draws.size(); ++i) {
        w[i] = frame.balls.at(draws[i]).weight;
        l[i] = lambdas[i].mean;
    }
    return assemble_sampled(w, l);
}

double normal_quantile(double p) {
    return boost::math::quantile(boost::math::normal_distribution<double>(0.0, 1.0), p);
}

UpperBound confidence_upper_bound(const Estimate& e, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0))
        throw Error(ErrorCode::InvalidArgument, "alpha must lie in (0, 1)");
    const double raw = e.mean + normal_quantile(1.0 - alpha) * std::sqrt(std::max(0.0, e.variance));
    const double v = std::clamp(raw, 0.0, 1.0);
    return {v, v != raw};
}

std::string confidence_key(double alpha) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", 1.0 - alpha);
    return buf;
}

std::string_view to_string(AssumptionStatus s) {
    switch (s) {
        case AssumptionStatus::declared: return "declared";
        case AssumptionStatus::holds: return "holds";
        case AssumptionStatus::violated: return "violated";
        case AssumptionStatus::not_applicable: return "not_applicable";
        case AssumptionStatus::flagged: return "flagged";
    }
    return "unknown";
}

std::vector<AssumptionEntry> default_assumptions() {
    return {
        {1, "r_stable_ground_truth", AssumptionStatus::declared,
         "a ground truth stable within radius r exists and r is estimable from the dataset"},
        {2, "dataset_represents_op", AssumptionStatus::declared,
         "the dataset is a random sample of the operational profile (not checkable from data)"},
        {3, "single_label_cells", AssumptionStatus::declared,
         "cells narrower than r hold a single ground-truth label"},
        {4, "model_beats_random_per_cell", AssumptionStatus::declared,
         "the model beats random guessing in every cell; empty-cell labels come from its votes"},
        {5, "uniform_conditional_op", AssumptionStatus::declared,
         "inputs are uniformly distributed inside a cell"},
        {6, "independent_cell_estimates", AssumptionStatus::declared,
         "all cell unastuteness and OP estimates are independent"},
        {7, "ball_sampling_dominates", AssumptionStatus::declared,
         "drawing k balls is the dominant source of uncertainty; estimator variances are ignored"},
    };
}

void ReliabilityResult::add_bounds(std::span<const double> alphas) {
    for (double a : alphas) {
        pmi_ub[confidence_key(a)] = confidence_upper_bound(pmi, a);
        acu_ub[confidence_key(a)] = confidence_upper_bound(acu, a);
    }
}

nlohmann::json ReliabilityResult::to_json() const {
    auto bounds = [](const std::map<std::string, UpperBound>& m) {
        nlohmann::json values = nlohmann::json::object();
        nlohmann::json clamped = nlohmann::json::array();
        for (const auto& [k, ub] : m) {
            values[k] = ub.value;
            if (ub.clamped) clamped.push_back(k);
        }
        return std::make_pair(values, clamped);
    };
    const auto [pmi_values, pmi_clamped] = bounds(pmi_ub);
    const auto [acu_values, acu_clamped] = bounds(acu_ub);

    nlohmann::json assumptions_json = nlohmann::json::array();
    for (const auto& a : assumptions)
        assumptions_json.push_back(
            {{"id", a.id}, {"name", a.name}, {"status", to_string(a.status)}, {"note", a.note}});

    nlohmann::json j{
        {"mode", mode == AssessmentMode::full_partition ? "full_partition" : "sampled"},
        {"pmi", {{"mean", pmi.mean}, {"var", pmi.variance}}},
        {"acu", {{"mean", acu.mean}, {"var", acu.variance}}},
        {"ub", pmi_values},
        {"acu_ub", acu_values},
        {"ub_clamped", pmi_clamped},
        {"acu_ub_clamped", acu_clamped},
        {"bound_type", "normal-approximation"},
        {"k", mode == AssessmentMode::sampled ? nlohmann::json(k) : nlohmann::json(nullptr)},
        {"seed", seed},
        {"assumptions", assumptions_json},
        {"diagnostics", diagnostics},
    };
    return j;
}

// ---------------------------------------------------------------------------

BallLambdaCache::BallLambdaCache(const SampleFrame& frame, const Classifier& classifier,
                                 const AstutenessEstimator& estimator, std::size_t samples,
                                 std::uint64_t seed)
    : frame_(frame), classifier_(classifier), estimator_(estimator), samples_(samples),
      seed_(seed) {}

std::vector<Estimate> BallLambdaCache::lambdas(std::span<const std::size_t> draws,
                                               std::size_t threads) {
    std::vector<std::size_t> fresh;
    for (std::size_t b : draws)
        if (!cache_.count(b)) fresh.push_back(b);
    std::sort(fresh.begin(), fresh.end());
    fresh.erase(std::unique(fresh.begin(), fresh.end()), fresh.end());

    std::vector<Estimate> computed(fresh.size());
    parallel_for(
        fresh.size(),
        [&](std::size_t i) {
            const Ball& ball = frame_.balls.at(fresh[i]);
            CellRobustnessQuery q;
            q.region = ball.region();
            q.ground_truth = ball.label;
            q.classifier = &classifier_;
            q.samples = samples_;
            q.seed = derive_seed(seed_, stream::smc, fresh[i]);
            computed[i] = estimator_.estimate(q);
        },
        threads);
    for (std::size_t i = 0; i < fresh.size(); ++i) cache_[fresh[i]] = computed[i];

    std::vector<Estimate> out;
    out.reserve(draws.size());
    for (std::size_t b : draws) out.push_back(cache_.at(b));
    return out;
}

std::vector<ReliabilityResult> k_convergence(const SampleFrame& frame, const Classifier& classifier,
                                             std::span<const std::size_t> k_grid,
                                             std::uint64_t seed, std::size_t samples,
                                             std::span<const double> alphas, std::size_t threads) {
    if (k_grid.empty()) throw Error(ErrorCode::InvalidArgument, "empty k grid");
    for (std::size_t i = 0; i < k_grid.size(); ++i) {
        if (k_grid[i] < 2) throw Error(ErrorCode::KTooSmall, "every k must be >= 2");
        if (i > 0 && k_grid[i] <= k_grid[i - 1])
            throw Error(ErrorCode::InvalidArgument, "k grid must be strictly ascending");
    }
    frame.validate();

    const auto draws = draw_balls(frame.balls.size(), k_grid.back(), seed);
    SmcEstimator smc;
    BallLambdaCache cache(frame, classifier, smc, samples, seed);
    const auto lambdas = cache.lambdas(draws, threads);

    std::vector<double> bound_alphas(alphas.begin(), alphas.end());
    if (std::find(bound_alphas.begin(), bound_alphas.end(), 0.025) == bound_alphas.end())
        bound_alphas.push_back(0.025);

    std::vector<ReliabilityResult> rows;
    for (std::size_t k : k_grid) {
        const std::span<const std::size_t> d(draws.data(), k);
        const std::span<const Estimate> l(lambdas.data(), k);
        ReliabilityResult r;
        r.mode = AssessmentMode::sampled;
        r.k = k;
        r.seed = seed;
        const auto pmi = assemble_sampled(frame, d, l);
        std::vector<double> ones(k, 1.0), means(k);
        for (std::size_t i = 0; i < k; ++i) means[i] = l[i].mean;
        const auto flat = assemble_sampled(ones, means);
        r.pmi = pmi.estimate;
        r.acu = flat.estimate;
        if (pmi.variance_clamped)
            r.diagnostics.push_back("pmi variance was negative from round-off and set to 0");
        if (flat.variance_clamped)
            r.diagnostics.push_back("ACU variance was negative from round-off and set to 0");
        r.assumptions = default_assumptions();
        r.assumptions[5].status = AssumptionStatus::not_applicable;
        r.add_bounds(bound_alphas);
        rows.push_back(std::move(r));
    }
    return rows;
}

std::string k_convergence_csv(std::span<const ReliabilityResult> rows) {
    std::string out = "k,pmi_mean,pmi_var,pmi_ub,acu_mean,acu_var,acu_ub\n";
    const std::string key = confidence_key(0.025);
    char buf[512];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.k, r.pmi.mean,
                      r.pmi.variance, r.pmi_ub.at(key).value, r.acu.mean, r.acu.variance,
                      r.acu_ub.at(key).value);
        out += buf;
    }
    return out;
}

}  // namespace mlrel
