#include "mlrel/classifier.hpp"

#include <cmath>
#include <fstream>

#include "mlrel/error.hpp"

namespace mlrel {

void Classifier::predict_batch(std::span<const double> xs, std::span<ClassId> out) const {
    const std::size_t d = dim();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = predict(xs.subspan(i * d, d));
}

double test_error(const Classifier& c, const LabeledDataset& ds) {
    if (ds.empty()) throw Error(ErrorCode::EmptyDataset, "test set has no points");
    if (c.dim() != ds.dim())
        throw Error(ErrorCode::DimensionMismatch, "classifier and dataset dimensions differ");
    std::vector<ClassId> predicted(ds.size());
    c.predict_batch(ds.coords(), predicted);
    std::size_t wrong = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) wrong += predicted[i] != ds.label(i);
    return static_cast<double>(wrong) / static_cast<double>(ds.size());
}

// ---------------------------------------------------------------------------

namespace {

// Measure of {s <= t : frac((s - phase)/period) < duty}, anchored at phase.
double stripe_cumulative(double t, double period, double duty, double phase) {
    const double z = (t - phase) / period;
    const double whole = std::floor(z);
    return period * (whole * duty + std::min(z - whole, duty));
}

}  // namespace

bool ErrorRegion::contains(std::span<const double> x) const {
    if (!box.contains(x)) return false;
    if (!striped) return true;
    const double z = (x[stripe_axis] - phase) / period;
    return z - std::floor(z) < duty;
}

double ErrorRegion::volume_within(const Box& query) const {
    const Box q = box.intersect(query);
    if (!striped) return q.volume();
    double v = 1.0;
    for (std::size_t a = 0; a < q.dim(); ++a) {
        const double len = q.hi[a] - q.lo[a];
        if (len <= 0.0) return 0.0;
        if (a == stripe_axis)
            v *= stripe_cumulative(q.hi[a], period, duty, phase) -
                 stripe_cumulative(q.lo[a], period, duty, phase);
        else
            v *= len;
    }
    return v;
}

OracleClassifier::OracleClassifier(std::size_t dim, ThresholdRule truth,
                                   std::vector<ErrorRegion> regions, std::string name)
    : dim_(dim), truth_(truth), regions_(std::move(regions)), name_(std::move(name)) {
    if (truth_.axis >= dim_) throw Error(ErrorCode::InvalidArgument, "truth axis out of range");
    if (truth_.below == truth_.above)
        throw Error(ErrorCode::InvalidArgument, "truth rule needs two distinct labels");
    for (const auto& r : regions_) {
        if (r.box.dim() != dim_ || r.box.hi.size() != dim_)
            throw Error(ErrorCode::DimensionMismatch, "error region dimension");
        if (r.striped) {
            if (r.stripe_axis >= dim_ || !(r.period > 0.0) || !(r.duty >= 0.0 && r.duty <= 1.0))
                throw Error(ErrorCode::InvalidArgument, "bad stripe parameters");
        }
    }
    for (std::size_t i = 0; i < regions_.size(); ++i)
        for (std::size_t j = i + 1; j < regions_.size(); ++j)
            if (regions_[i].box.intersect(regions_[j].box).volume() > 0.0)
                throw Error(ErrorCode::InvalidArgument, "error regions overlap");
}

bool OracleClassifier::misclassified(std::span<const double> x) const {
    for (const auto& r : regions_)
        if (r.contains(x)) return true;
    return false;
}

ClassId OracleClassifier::predict(std::span<const double> x) const {
    const ClassId t = truth_.label(x);
    if (!misclassified(x)) return t;
    return t == truth_.below ? truth_.above : truth_.below;
}

double OracleClassifier::misclassified_volume(const Box& query) const {
    double v = 0.0;
    for (const auto& r : regions_) v += r.volume_within(query);
    return v;
}

OracleClassifier OracleClassifier::from_json(const nlohmann::json& j) {
    try {
        const std::size_t dim = j.at("dim").get<std::size_t>();
        ThresholdRule truth;
        const auto& t = j.at("truth");
        truth.axis = t.at("axis").get<std::size_t>();
        truth.threshold = t.at("threshold").get<double>();
        truth.below = t.value("below", 0);
        truth.above = t.value("above", 1);
        std::vector<ErrorRegion> regions;
        for (const auto& r : j.value("error_regions", nlohmann::json::array())) {
            ErrorRegion region;
            region.box.lo = r.at("lo").get<std::vector<double>>();
            region.box.hi = r.at("hi").get<std::vector<double>>();
            if (r.contains("stripes")) {
                const auto& s = r.at("stripes");
                region.striped = true;
                region.stripe_axis = s.at("axis").get<std::size_t>();
                region.period = s.at("period").get<double>();
                region.duty = s.at("duty").get<double>();
                region.phase = s.value("phase", 0.0);
            }
            regions.push_back(std::move(region));
        }
        return OracleClassifier(dim, truth, std::move(regions), j.value("name", std::string("oracle")));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::InvalidArgument, std::string("oracle spec: ") + e.what());
    }
}

nlohmann::json OracleClassifier::to_json() const {
    nlohmann::json regions = nlohmann::json::array();
    for (const auto& r : regions_) {
        nlohmann::json o{{"lo", r.box.lo}, {"hi", r.box.hi}};
        if (r.striped)
            o["stripes"] = {{"axis", r.stripe_axis},
                            {"period", r.period},
                            {"duty", r.duty},
                            {"phase", r.phase}};
        regions.push_back(std::move(o));
    }
    return {{"type", "oracle"},
            {"name", name_},
            {"dim", dim_},
            {"truth",
             {{"axis", truth_.axis},
              {"threshold", truth_.threshold},
              {"below", truth_.below},
              {"above", truth_.above}}},
            {"error_regions", regions}};
}

OracleClassifier load_oracle(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::InvalidArgument, path.string() + ": " + e.what());
    }
    return OracleClassifier::from_json(j);
}

}  // namespace mlrel
