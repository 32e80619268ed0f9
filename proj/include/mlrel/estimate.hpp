#pragma once

#include <string_view>

namespace mlrel {

enum class EstimateMethod { kde, kde_bootstrap, analytic, smc, assigned, assembled };

std::string_view to_string(EstimateMethod m);

// A point estimate paired with the variance expressing trust in it.
struct Estimate {
    double mean = 0.0;
    double variance = 0.0;
    EstimateMethod method = EstimateMethod::assembled;
};

}  // namespace mlrel
