#include "mlrel/datasets.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>
#include <tuple>

#include "mlrel/error.hpp"
#include "mlrel/rng.hpp"

namespace mlrel {

std::string_view to_string(Metric m) { return m == Metric::linf ? "linf" : "l2"; }

Metric metric_from_string(std::string_view s) {
    if (s == "linf") return Metric::linf;
    if (s == "l2") return Metric::l2;
    throw Error(ErrorCode::InvalidArgument, "unknown metric '" + std::string(s) + "'");
}

double distance(std::span<const double> a, std::span<const double> b, Metric metric) {
    double acc = 0.0;
    if (metric == Metric::linf) {
        for (std::size_t i = 0; i < a.size(); ++i) acc = std::max(acc, std::abs(a[i] - b[i]));
        return acc;
    }
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return std::sqrt(acc);
}

LabeledDataset::LabeledDataset(std::size_t dim, std::vector<double> coords,
                               std::vector<ClassId> labels, std::vector<std::string> class_names)
    : dim_(dim), coords_(std::move(coords)), labels_(std::move(labels)),
      class_names_(std::move(class_names)) {
    if (labels_.empty()) throw Error(ErrorCode::EmptyDataset, "dataset has no points");
    if (dim_ == 0) throw Error(ErrorCode::DimensionMismatch, "dimension must be positive");
    if (coords_.size() != labels_.size() * dim_)
        throw Error(ErrorCode::DimensionMismatch, "coordinate count does not match labels x dim");
    for (std::size_t i = 0; i < coords_.size(); ++i) {
        const double v = coords_[i];
        if (!(v >= 0.0 && v <= 1.0))
            throw Error(ErrorCode::CoordinateOutOfRange,
                        "point " + std::to_string(i / dim_) + " axis " + std::to_string(i % dim_) +
                            " = " + std::to_string(v) + " is outside [0,1]");
    }
    for (ClassId y : labels_)
        if (y < 0) throw Error(ErrorCode::InvalidArgument, "class ids must be non-negative");
    if (!class_names_.empty()) {
        std::vector<bool> seen(class_names_.size(), false);
        for (ClassId y : labels_) {
            if (static_cast<std::size_t>(y) >= class_names_.size())
                throw Error(ErrorCode::InvalidArgument, "label without a declared class name");
            seen[static_cast<std::size_t>(y)] = true;
        }
        if (std::find(seen.begin(), seen.end(), false) != seen.end())
            throw Error(ErrorCode::InvalidArgument, "declared class has no points");
    }
}

std::vector<ClassId> LabeledDataset::distinct_labels() const {
    std::set<ClassId> s(labels_.begin(), labels_.end());
    return {s.begin(), s.end()};
}

std::string_view to_string(SeparationConvention c) {
    return c == SeparationConvention::half_min_cross_distance ? "half_min_cross_distance"
                                                              : "raw_min_cross_distance";
}

SeparationConvention convention_from_string(std::string_view s) {
    if (s == "half" || s == "half_min_cross_distance")
        return SeparationConvention::half_min_cross_distance;
    if (s == "raw" || s == "raw_min_cross_distance")
        return SeparationConvention::raw_min_cross_distance;
    throw Error(ErrorCode::InvalidArgument, "unknown r-separation convention '" + std::string(s) + "'");
}

RSeparation estimate_r_separation(const LabeledDataset& ds, SeparationConvention convention,
                                  Metric metric) {
    if (ds.empty()) throw Error(ErrorCode::EmptyDataset, "dataset has no points");
    if (ds.distinct_labels().size() < 2)
        throw Error(ErrorCode::SingleClassDataset, "r-separation needs at least two labels");

    const std::size_t n = ds.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const double xa = ds.point(a)[0];
        const double xb = ds.point(b)[0];
        return xa < xb || (xa == xb && a < b);
    });

    // Both metrics dominate the first-axis gap, so the sweep can stop once
    // that gap alone exceeds the best distance.
    double best = std::numeric_limits<double>::infinity();
    std::size_t bi = 0, bj = 0;
    for (std::size_t p = 0; p < n; ++p) {
        const std::size_t i = order[p];
        const auto xi = ds.point(i);
        for (std::size_t q = p + 1; q < n; ++q) {
            const std::size_t j = order[q];
            const auto xj = ds.point(j);
            if (xj[0] - xi[0] > best) break;
            if (ds.label(i) == ds.label(j)) continue;
            const double d = distance(xi, xj, metric);
            const std::size_t lo = std::min(i, j), hi = std::max(i, j);
            if (d < best || (d == best && std::tie(lo, hi) < std::tie(bi, bj))) {
                best = d;
                bi = lo;
                bj = hi;
            }
        }
    }
    if (best == 0.0)
        throw Error(ErrorCode::LabelNoise, "points " + std::to_string(bi) + " and " +
                                               std::to_string(bj) +
                                               " coincide with conflicting labels");

    RSeparation r;
    r.convention = convention;
    r.metric = metric;
    r.witness_pair = {bi, bj};
    r.min_cross_distance = best;
    r.r_hat = convention == SeparationConvention::half_min_cross_distance ? 0.5 * best : best;
    return r;
}

nlohmann::json to_json(const RSeparation& r) {
    return {{"r_hat", r.r_hat},
            {"convention", to_string(r.convention)},
            {"metric", to_string(r.metric)},
            {"min_cross_distance", r.min_cross_distance},
            {"witness_pair", {r.witness_pair.first, r.witness_pair.second}}};
}

// ---------------------------------------------------------------------------

double HalfplaneRule::signed_distance(std::span<const double> x) const {
    double dot = 0.0, norm = 0.0;
    for (std::size_t a = 0; a < normal.size(); ++a) {
        dot += normal[a] * x[a];
        norm += normal[a] * normal[a];
    }
    return (dot - offset) / std::sqrt(norm);
}

ClassId HalfplaneRule::label(std::span<const double> x) const {
    return signed_distance(x) < 0.0 ? 0 : 1;
}

void MixtureSpec::validate() const {
    if (components.empty()) throw Error(ErrorCode::InvalidMixture, "no components");
    const std::size_t d = dim();
    if (d == 0) throw Error(ErrorCode::InvalidMixture, "component mean is empty");
    double total = 0.0;
    for (const auto& c : components) {
        if (c.mean.size() != d || c.scale.size() != d)
            throw Error(ErrorCode::InvalidMixture, "component dimensions disagree");
        for (double s : c.scale)
            if (!(s > 0.0) || !std::isfinite(s))
                throw Error(ErrorCode::InvalidMixture, "scales must be positive");
        for (double m : c.mean)
            if (!std::isfinite(m)) throw Error(ErrorCode::InvalidMixture, "non-finite mean");
        if (!(c.weight >= 0.0)) throw Error(ErrorCode::InvalidMixture, "negative weight");
        total += c.weight;
    }
    if (std::abs(total - 1.0) > 1e-9)
        throw Error(ErrorCode::InvalidMixture, "weights sum to " + std::to_string(total));
    if (label_rule.normal.size() != d)
        throw Error(ErrorCode::InvalidMixture, "label rule normal has wrong dimension");
    if (std::all_of(label_rule.normal.begin(), label_rule.normal.end(),
                    [](double v) { return v == 0.0; }))
        throw Error(ErrorCode::InvalidMixture, "label rule normal is zero");
    if (label_rule.margin < 0.0) throw Error(ErrorCode::InvalidMixture, "negative margin");
}

MixtureSpec MixtureSpec::from_json(const nlohmann::json& j) {
    MixtureSpec spec;
    try {
        for (const auto& c : j.at("components")) {
            MixtureComponent comp;
            comp.mean = c.at("mean").get<std::vector<double>>();
            comp.scale = c.at("scale").get<std::vector<double>>();
            comp.weight = c.at("weight").get<double>();
            spec.components.push_back(std::move(comp));
        }
        const auto& rule = j.at("label_rule");
        if (rule.value("type", std::string("halfplane")) != "halfplane")
            throw Error(ErrorCode::InvalidMixture, "only halfplane label rules are supported");
        spec.label_rule.normal = rule.at("normal").get<std::vector<double>>();
        spec.label_rule.offset = rule.at("offset").get<double>();
        spec.label_rule.margin = rule.value("margin", 0.0);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::InvalidMixture, e.what());
    }
    spec.validate();
    return spec;
}

nlohmann::json MixtureSpec::to_json() const {
    nlohmann::json comps = nlohmann::json::array();
    for (const auto& c : components)
        comps.push_back({{"mean", c.mean}, {"scale", c.scale}, {"weight", c.weight}});
    return {{"components", comps},
            {"label_rule",
             {{"type", "halfplane"},
              {"normal", label_rule.normal},
              {"offset", label_rule.offset},
              {"margin", label_rule.margin}}}};
}

MixtureSpec load_mixture_spec(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::InvalidMixture, path.string() + ": " + e.what());
    }
    return MixtureSpec::from_json(j);
}

namespace {

constexpr std::size_t kMaxRejections = 1'000'000;

double truncated_normal01(Rng& rng, std::normal_distribution<double>& stdnorm, double mean,
                          double scale) {
    for (std::size_t attempt = 0; attempt < kMaxRejections; ++attempt) {
        const double v = mean + scale * stdnorm(rng);
        if (v >= 0.0 && v <= 1.0) return v;
    }
    throw Error(ErrorCode::InvalidMixture, "component has negligible mass inside [0,1]");
}

}  // namespace

SyntheticSample sample_mixture(const MixtureSpec& spec, std::size_t n, std::uint64_t seed) {
    spec.validate();
    if (n == 0) throw Error(ErrorCode::EmptyDataset, "n must be positive");
    const std::size_t d = spec.dim();
    Rng rng = make_rng(seed, stream::mixture);
    std::normal_distribution<double> stdnorm(0.0, 1.0);

    std::vector<double> cumulative;
    double acc = 0.0;
    for (const auto& c : spec.components) cumulative.push_back(acc += c.weight);

    std::vector<double> coords;
    coords.reserve(n * d);
    std::vector<ClassId> labels;
    std::vector<std::size_t> comp_ids;
    std::vector<double> x(d);
    std::size_t rejected = 0;
    while (labels.size() < n) {
        const double u = uniform01(rng) * acc;
        std::size_t c = static_cast<std::size_t>(
            std::upper_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin());
        c = std::min(c, spec.components.size() - 1);
        const auto& comp = spec.components[c];
        for (std::size_t a = 0; a < d; ++a)
            x[a] = truncated_normal01(rng, stdnorm, comp.mean[a], comp.scale[a]);
        if (std::abs(spec.label_rule.signed_distance(x)) < spec.label_rule.margin) {
            if (++rejected > kMaxRejections)
                throw Error(ErrorCode::InvalidMixture, "label margin rejects almost every draw");
            continue;
        }
        coords.insert(coords.end(), x.begin(), x.end());
        labels.push_back(spec.label_rule.label(x));
        comp_ids.push_back(c);
    }
    return {LabeledDataset(d, std::move(coords), std::move(labels)), std::move(comp_ids)};
}

LabeledDataset generate_synthetic(const MixtureSpec& spec, std::size_t n, std::uint64_t seed) {
    return sample_mixture(spec, n, seed).dataset;
}

LabeledDataset generate_uniform(const HalfplaneRule& rule, std::size_t dim, std::size_t n,
                                std::uint64_t seed) {
    if (n == 0) throw Error(ErrorCode::EmptyDataset, "n must be positive");
    if (rule.normal.size() != dim)
        throw Error(ErrorCode::DimensionMismatch, "rule normal has wrong dimension");
    Rng rng = make_rng(seed, stream::mixture);
    std::vector<double> coords;
    coords.reserve(n * dim);
    std::vector<ClassId> labels;
    std::vector<double> x(dim);
    std::size_t rejected = 0;
    while (labels.size() < n) {
        for (auto& v : x) v = uniform01(rng);
        if (std::abs(rule.signed_distance(x)) < rule.margin) {
            if (++rejected > kMaxRejections)
                throw Error(ErrorCode::InvalidArgument, "label margin rejects almost every draw");
            continue;
        }
        coords.insert(coords.end(), x.begin(), x.end());
        labels.push_back(rule.label(x));
    }
    return LabeledDataset(dim, std::move(coords), std::move(labels));
}

// ---------------------------------------------------------------------------

namespace {

std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(',', start);
        out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos
                                                                        : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    return s;
}

}  // namespace

LabeledDataset load_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());

    std::string line;
    if (!std::getline(in, line) || trim(line).empty())
        throw Error(ErrorCode::EmptyDataset, path.string() + " is empty");
    const auto header = split_commas(trim(line));
    if (header.size() < 2 || trim(header.back()) != "label")
        throw Error(ErrorCode::MalformedRow, "header must be x1,...,xd,label");
    const std::size_t d = header.size() - 1;
    for (std::size_t a = 0; a < d; ++a)
        if (trim(header[a]) != "x" + std::to_string(a + 1))
            throw Error(ErrorCode::MalformedRow, "header must be x1,...,xd,label");

    std::vector<double> coords;
    std::vector<ClassId> labels;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        const auto t = trim(line);
        if (t.empty()) continue;
        const auto fields = split_commas(t);
        if (fields.size() != d + 1)
            throw Error(ErrorCode::MalformedRow, "row " + std::to_string(row) + " has " +
                                                     std::to_string(fields.size()) + " fields");
        for (std::size_t a = 0; a < d; ++a) {
            const auto f = trim(fields[a]);
            double v = 0.0;
            const auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
            if (ec != std::errc() || p != f.data() + f.size())
                throw Error(ErrorCode::MalformedRow, "row " + std::to_string(row) +
                                                         ": bad number '" + std::string(f) + "'");
            if (!(v >= 0.0 && v <= 1.0))
                throw Error(ErrorCode::CoordinateOutOfRange,
                            "row " + std::to_string(row) + ": x" + std::to_string(a + 1) + "=" +
                                std::string(f) + " is outside [0,1]");
            coords.push_back(v);
        }
        const auto f = trim(fields[d]);
        ClassId y = 0;
        const auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), y);
        if (ec != std::errc() || p != f.data() + f.size() || y < 0)
            throw Error(ErrorCode::MalformedRow,
                        "row " + std::to_string(row) + ": bad label '" + std::string(f) + "'");
        labels.push_back(y);
    }
    if (labels.empty()) throw Error(ErrorCode::EmptyDataset, path.string() + " has no rows");
    return LabeledDataset(d, std::move(coords), std::move(labels));
}

void save_csv(const LabeledDataset& ds, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    for (std::size_t a = 0; a < ds.dim(); ++a) out << 'x' << (a + 1) << ',';
    out << "label\n";
    char buf[64];
    for (std::size_t i = 0; i < ds.size(); ++i) {
        for (double v : ds.point(i)) {
            const auto res = std::to_chars(buf, buf + sizeof buf, v);
            out.write(buf, res.ptr - buf);
            out << ',';
        }
        out << ds.label(i) << '\n';
    }
    if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

}  // namespace mlrel
