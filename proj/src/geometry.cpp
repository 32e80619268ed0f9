#include "mlrel/geometry.hpp"

#include <algorithm>

namespace mlrel {

double Box::volume() const {
    double v = 1.0;
    for (std::size_t a = 0; a < lo.size(); ++a) v *= std::max(0.0, hi[a] - lo[a]);
    return v;
}

bool Box::contains(std::span<const double> x) const {
    for (std::size_t a = 0; a < lo.size(); ++a)
        if (x[a] < lo[a] || x[a] >= hi[a]) return false;
    return true;
}

Box Box::intersect(const Box& other) const {
    Box out{lo, hi};
    for (std::size_t a = 0; a < lo.size(); ++a) {
        out.lo[a] = std::max(lo[a], other.lo[a]);
        out.hi[a] = std::min(hi[a], other.hi[a]);
    }
    return out;
}

Box Box::unit(std::size_t dim) {
    return Box{std::vector<double>(dim, 0.0), std::vector<double>(dim, 1.0)};
}

Box Box::centered(std::span<const double> c, double side) {
    Box b{std::vector<double>(c.begin(), c.end()), std::vector<double>(c.begin(), c.end())};
    for (std::size_t a = 0; a < c.size(); ++a) {
        b.lo[a] -= 0.5 * side;
        b.hi[a] += 0.5 * side;
    }
    return b;
}

void sample_uniform(const Box& box, Rng& rng, std::span<double> out) {
    for (std::size_t a = 0; a < box.lo.size(); ++a) out[a] = uniform(rng, box.lo[a], box.hi[a]);
}

}  // namespace mlrel
