#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "rng.hpp"

namespace mlrel {

// Axis-aligned box [lo, hi] in R^d.
struct Box {
    std::vector<double> lo;
    std::vector<double> hi;

    std::size_t dim() const { return lo.size(); }
    double volume() const;
    bool contains(std::span<const double> x) const;  // half-open [lo, hi)

    // Intersection; empty boxes have hi <= lo on some axis and volume 0.
    Box intersect(const Box& other) const;

    static Box unit(std::size_t dim);
    // Box of side `side` centered at c.
    static Box centered(std::span<const double> c, double side);
};

// Fills `out` (size dim) with a uniform draw from the box.
void sample_uniform(const Box& box, Rng& rng, std::span<double> out);

}  // namespace mlrel
