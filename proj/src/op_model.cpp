#include "mlrel/op_model.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numbers>
#include <numeric>
#include <ostream>

#include "mlrel/error.hpp"
#include "mlrel/parallel.hpp"
#include "mlrel/rng.hpp"

namespace mlrel {

namespace {

constexpr double kInvSqrt2Pi = 0.3989422804014327;

double std_normal_cdf(double u) { return 0.5 * std::erfc(-u / std::numbers::sqrt2); }

double kernel_value(KernelType k, double u) {
    if (k == KernelType::gaussian) return kInvSqrt2Pi * std::exp(-0.5 * u * u);
    return 0.5 * std::exp(-std::abs(u));
}

double kernel_cdf(KernelType k, double u) {
    if (k == KernelType::gaussian) return std_normal_cdf(u);
    return u < 0.0 ? 0.5 * std::exp(u) : 1.0 - 0.5 * std::exp(-u);
}

bool in_unit_box(std::span<const double> x) {
    return std::all_of(x.begin(), x.end(), [](double v) { return v >= 0.0 && v <= 1.0; });
}

}  // namespace

double OpDensity::density_variance(std::span<const double>) const { return 0.0; }

double UniformDensity::density(std::span<const double> x) const {
    return in_unit_box(x) ? 1.0 : 0.0;
}

double UniformDensity::box_mass(const Box& box) const {
    return box.intersect(Box::unit(dim_)).volume();
}

MixtureDensity::MixtureDensity(MixtureSpec spec) : spec_(std::move(spec)) {
    spec_.validate();
    for (const auto& c : spec_.components) {
        double z = 1.0;
        for (std::size_t a = 0; a < c.mean.size(); ++a)
            z *= std_normal_cdf((1.0 - c.mean[a]) / c.scale[a]) -
                 std_normal_cdf((0.0 - c.mean[a]) / c.scale[a]);
        norm_.push_back(z);
    }
}

double MixtureDensity::density(std::span<const double> x) const {
    if (!in_unit_box(x)) return 0.0;
    double f = 0.0;
    for (std::size_t c = 0; c < spec_.components.size(); ++c) {
        const auto& comp = spec_.components[c];
        double p = comp.weight / norm_[c];
        for (std::size_t a = 0; a < x.size(); ++a) {
            const double u = (x[a] - comp.mean[a]) / comp.scale[a];
            p *= kInvSqrt2Pi * std::exp(-0.5 * u * u) / comp.scale[a];
        }
        f += p;
    }
    return f;
}

double MixtureDensity::box_mass(const Box& box) const {
    const Box b = box.intersect(Box::unit(dim()));
    if (b.volume() <= 0.0) return 0.0;
    double m = 0.0;
    for (std::size_t c = 0; c < spec_.components.size(); ++c) {
        const auto& comp = spec_.components[c];
        double p = comp.weight / norm_[c];
        for (std::size_t a = 0; a < b.dim(); ++a)
            p *= std_normal_cdf((b.hi[a] - comp.mean[a]) / comp.scale[a]) -
                 std_normal_cdf((b.lo[a] - comp.mean[a]) / comp.scale[a]);
        m += p;
    }
    return m;
}

// ---------------------------------------------------------------------------

std::string_view to_string(KernelType k) {
    return k == KernelType::gaussian ? "gaussian" : "exponential";
}

KernelType kernel_from_string(std::string_view s) {
    if (s == "gaussian") return KernelType::gaussian;
    if (s == "exponential") return KernelType::exponential;
    throw Error(ErrorCode::InvalidArgument, "unknown kernel '" + std::string(s) + "'");
}

BandwidthPolicy BandwidthPolicy::fixed(double h) {
    BandwidthPolicy p;
    p.kind = BandwidthPolicyKind::fixed;
    p.fixed_h = h;
    return p;
}

BandwidthPolicy BandwidthPolicy::rule_of_thumb() { return BandwidthPolicy{}; }

BandwidthPolicy BandwidthPolicy::cv_grid(std::uint64_t seed) {
    BandwidthPolicy p;
    p.kind = BandwidthPolicyKind::cv_grid;
    p.seed = seed;
    return p;
}

BandwidthPolicy BandwidthPolicy::parse(std::string_view s, std::uint64_t seed) {
    if (s == "rot" || s == "rule_of_thumb") return rule_of_thumb();
    if (s == "cv" || s == "cv_grid") return cv_grid(seed);
    if (s.starts_with("fixed:")) {
        try {
            const double h = std::stod(std::string(s.substr(6)));
            if (h > 0.0 && std::isfinite(h)) return fixed(h);
        } catch (const std::exception&) {
        }
    }
    throw Error(ErrorCode::InvalidArgument, "unknown bandwidth policy '" + std::string(s) + "'");
}

std::string BandwidthPolicy::describe() const {
    switch (kind) {
        case BandwidthPolicyKind::fixed: return "fixed";
        case BandwidthPolicyKind::rule_of_thumb: return "rule_of_thumb";
        case BandwidthPolicyKind::cv_grid:
            return "cv_grid(" + std::to_string(folds) + "-fold," + std::to_string(grid_size) +
                   " candidates)";
    }
    return "unknown";
}

KdeModel::KdeModel(std::size_t dim, std::vector<double> points, KernelType kernel,
                   std::vector<double> bandwidth, bool reflect)
    : dim_(dim), n_(dim ? points.size() / dim : 0), points_(std::move(points)), kernel_(kernel),
      h_(std::move(bandwidth)), reflect_(reflect) {
    if (n_ == 0) throw Error(ErrorCode::EmptyDataset, "KDE needs training points");
    if (h_.size() == 1 && dim_ > 1) h_.assign(dim_, h_.front());
    if (h_.size() != dim_) throw Error(ErrorCode::DimensionMismatch, "bandwidth per axis");
    for (double h : h_)
        if (!(h > 0.0) || !std::isfinite(h))
            throw Error(ErrorCode::InvalidArgument, "bandwidth must be positive");
}

double KdeModel::kernel_at(std::size_t j, std::span<const double> x) const {
    const double* p = points_.data() + j * dim_;
    if (!reflect_ && kernel_ == KernelType::gaussian) {
        double q = 0.0, norm = 1.0;
        for (std::size_t a = 0; a < dim_; ++a) {
            const double u = (x[a] - p[a]) / h_[a];
            q += u * u;
            norm *= kInvSqrt2Pi / h_[a];
        }
        return norm * std::exp(-0.5 * q);
    }
    double v = 1.0;
    for (std::size_t a = 0; a < dim_; ++a) {
        const double h = h_[a];
        double k = kernel_value(kernel_, (x[a] - p[a]) / h);
        if (reflect_)
            k += kernel_value(kernel_, (x[a] + p[a]) / h) +
                 kernel_value(kernel_, (x[a] - 2.0 + p[a]) / h);
        v *= k / h;
    }
    return v;
}

double KdeModel::density(std::span<const double> x) const {
    if (reflect_ && !in_unit_box(x)) return 0.0;
    double s = 0.0;
    for (std::size_t j = 0; j < n_; ++j) s += kernel_at(j, x);
    return s / static_cast<double>(n_);
}

double KdeModel::weighted_density(std::span<const double> x,
                                  std::span<const std::uint32_t> counts) const {
    if (reflect_ && !in_unit_box(x)) return 0.0;
    double s = 0.0;
    std::uint64_t total = 0;
    for (std::size_t j = 0; j < n_; ++j) {
        if (counts[j] == 0) continue;
        s += counts[j] * kernel_at(j, x);
        total += counts[j];
    }
    return s / static_cast<double>(total);
}

double KdeModel::box_mass(const Box& box) const {
    const Box b = box.intersect(Box::unit(dim_));
    if (b.volume() <= 0.0) return 0.0;
    double total = 0.0;
    for (std::size_t j = 0; j < n_; ++j) {
        const double* p = points_.data() + j * dim_;
        double m = 1.0;
        for (std::size_t a = 0; a < dim_; ++a) {
            const double h = h_[a];
            auto mass = [&](double centre) {
                return kernel_cdf(kernel_, (b.hi[a] - centre) / h) -
                       kernel_cdf(kernel_, (b.lo[a] - centre) / h);
            };
            double axis = mass(p[a]);
            if (reflect_) axis += mass(-p[a]) + mass(2.0 - p[a]);
            m *= axis;
        }
        total += m;
    }
    return total / static_cast<double>(n_);
}

nlohmann::json KdeModel::to_json(const std::string& points_ref) const {
    return {{"kernel", to_string(kernel_)},
            {"h", h_},
            {"points_ref", points_ref},
            {"n", n_},
            {"reflect", reflect_},
            {"policy", policy_}};
}

KdeModel KdeModel::from_json(const nlohmann::json& j, const LabeledDataset& ds) {
    try {
        const std::size_t n = j.at("n").get<std::size_t>();
        if (n != ds.size())
            throw Error(ErrorCode::DimensionMismatch, "KDE was fit on " + std::to_string(n) +
                                                          " points, dataset has " +
                                                          std::to_string(ds.size()));
        KdeModel m(ds.dim(), ds.coords(), kernel_from_string(j.at("kernel").get<std::string>()),
                   j.at("h").get<std::vector<double>>(), j.value("reflect", false));
        m.set_policy(j.value("policy", std::string("fixed")));
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::InvalidArgument, std::string("KDE model: ") + e.what());
    }
}

namespace {

constexpr std::size_t kCvMaxPoints = 4000;

bool all_identical(const LabeledDataset& ds) {
    for (std::size_t i = 1; i < ds.size(); ++i)
        if (!std::equal(ds.point(i).begin(), ds.point(i).end(), ds.point(0).begin())) return false;
    return true;
}

std::vector<double> rule_of_thumb_bandwidth(const LabeledDataset& ds) {
    const std::size_t d = ds.dim();
    const double n = static_cast<double>(ds.size());
    const double factor =
        std::pow(4.0 / ((static_cast<double>(d) + 2.0) * n), 1.0 / (static_cast<double>(d) + 4.0));
    std::vector<double> h(d);
    for (std::size_t a = 0; a < d; ++a) {
        double mean = 0.0;
        for (std::size_t i = 0; i < ds.size(); ++i) mean += ds.point(i)[a];
        mean /= n;
        double var = 0.0;
        for (std::size_t i = 0; i < ds.size(); ++i) {
            const double t = ds.point(i)[a] - mean;
            var += t * t;
        }
        h[a] = std::sqrt(var / (n - 1.0)) * factor;
    }
    // Axes without spread borrow the smallest positive bandwidth.
    double fallback = 0.0;
    for (double v : h)
        if (v > 0.0 && (fallback == 0.0 || v < fallback)) fallback = v;
    for (double& v : h)
        if (v <= 0.0) v = fallback;
    return h;
}

// k-fold held-out log-likelihood over a log-spaced isotropic grid.
double cv_bandwidth(const LabeledDataset& ds, KernelType kernel, const BandwidthPolicy& policy,
                    bool reflect) {
    const std::size_t d = ds.dim();
    std::vector<std::size_t> idx(ds.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    Rng rng = make_rng(policy.seed, stream::cv_folds);
    for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[uniform_index(rng, i)]);
    if (idx.size() > kCvMaxPoints) idx.resize(kCvMaxPoints);
    const std::size_t folds = std::clamp<std::size_t>(policy.folds, 2, idx.size());

    std::vector<std::vector<double>> train(folds);
    std::vector<std::vector<std::size_t>> held(folds);
    for (std::size_t p = 0; p < idx.size(); ++p) {
        const std::size_t f = p % folds;
        held[f].push_back(idx[p]);
        for (std::size_t g = 0; g < folds; ++g)
            if (g != f) train[g].insert(train[g].end(), ds.point(idx[p]).begin(), ds.point(idx[p]).end());
    }

    const std::size_t grid = std::max<std::size_t>(policy.grid_size, 2);
    std::vector<double> scores(grid);
    std::vector<double> candidates(grid);
    for (std::size_t g = 0; g < grid; ++g)
        candidates[g] = policy.grid_lo *
                        std::pow(policy.grid_hi / policy.grid_lo,
                                 static_cast<double>(g) / static_cast<double>(grid - 1));
    parallel_for(grid, [&](std::size_t g) {
        double score = 0.0;
        for (std::size_t f = 0; f < folds; ++f) {
            KdeModel m(d, train[f], kernel, {candidates[g]}, reflect);
            for (std::size_t i : held[f]) score += std::log(std::max(m.density(ds.point(i)), 1e-300));
        }
        scores[g] = score;
    });
    std::size_t best = 0;
    for (std::size_t g = 1; g < grid; ++g)
        if (scores[g] > scores[best]) best = g;
    return candidates[best];
}

}  // namespace

KdeModel fit_kde(const LabeledDataset& ds, KernelType kernel, const BandwidthPolicy& policy,
                 bool reflect) {
    if (ds.size() < 2) throw Error(ErrorCode::DegenerateData, "KDE needs at least two points");
    std::vector<double> h;
    switch (policy.kind) {
        case BandwidthPolicyKind::fixed:
            h.assign(ds.dim(), policy.fixed_h);
            break;
        case BandwidthPolicyKind::rule_of_thumb:
            if (all_identical(ds))
                throw Error(ErrorCode::DegenerateData, "all points identical; bandwidth undefined");
            h = rule_of_thumb_bandwidth(ds);
            break;
        case BandwidthPolicyKind::cv_grid:
            if (all_identical(ds))
                throw Error(ErrorCode::DegenerateData, "all points identical; bandwidth undefined");
            h.assign(ds.dim(), cv_bandwidth(ds, kernel, policy, reflect));
            break;
    }
    KdeModel m(ds.dim(), ds.coords(), kernel, std::move(h), reflect);
    m.set_policy(policy.describe());
    return m;
}

// ---------------------------------------------------------------------------

BootstrapReplicates::BootstrapReplicates(std::size_t n, std::size_t replicates, std::uint64_t seed)
    : n_(n), b_(replicates), counts_(n * replicates, 0) {
    if (replicates < 2) throw Error(ErrorCode::InvalidArgument, "bootstrap needs B >= 2");
    if (n == 0) throw Error(ErrorCode::EmptyDataset, "bootstrap of an empty dataset");
    for (std::size_t b = 0; b < replicates; ++b) {
        Rng rng = make_rng(seed, stream::bootstrap, b);
        std::uint32_t* row = counts_.data() + b * n;
        for (std::size_t i = 0; i < n; ++i) ++row[uniform_index(rng, n)];
    }
}

double bootstrap_variance(const KdeModel& kde, const BootstrapReplicates& reps,
                          std::span<const double> x) {
    const std::size_t n = kde.size();
    if (reps.n() != n) throw Error(ErrorCode::DimensionMismatch, "replicates sized for another KDE");
    thread_local std::vector<double> k;
    k.resize(n);
    const bool outside = kde.reflect() && !in_unit_box(x);
    for (std::size_t j = 0; j < n; ++j) k[j] = outside ? 0.0 : kde.kernel_at(j, x);

    // Points with equal kernel values are summed as integer counts first, so
    // replicates of coincident points agree exactly.
    thread_local std::vector<std::size_t> order;
    order.resize(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return k[a] < k[b]; });

    const std::size_t B = reps.replicates();
    std::vector<double> values(B);
    for (std::size_t b = 0; b < B; ++b) {
        const auto c = reps.counts(b);
        double s = 0.0;
        for (std::size_t i = 0; i < n;) {
            const double kv = k[order[i]];
            std::uint64_t total = 0;
            for (; i < n && k[order[i]] == kv; ++i) total += c[order[i]];
            s += static_cast<double>(total) * kv;
        }
        values[b] = s / static_cast<double>(n);
    }
    // Shifted by the first replicate; equal replicates give exactly zero.
    double sd = 0.0, ss = 0.0;
    for (double v : values) {
        sd += v - values[0];
        ss += (v - values[0]) * (v - values[0]);
    }
    const double var = (ss - sd * sd / static_cast<double>(B)) / static_cast<double>(B - 1);
    return std::max(var, 0.0);
}

double bootstrap_variance(const LabeledDataset& ds, KernelType kernel,
                          const std::vector<double>& bandwidth, std::span<const double> x,
                          std::size_t replicates, std::uint64_t seed, bool reflect) {
    // Resample indices refer to a canonical (sorted) point order, so the
    // result does not depend on how the dataset happens to be ordered.
    const std::size_t d = ds.dim();
    std::vector<std::size_t> order(ds.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto pa = ds.point(a), pb = ds.point(b);
        return std::lexicographical_compare(pa.begin(), pa.end(), pb.begin(), pb.end());
    });
    std::vector<double> coords;
    coords.reserve(ds.coords().size());
    for (std::size_t i : order) coords.insert(coords.end(), ds.point(i).begin(), ds.point(i).end());
    const KdeModel kde(d, std::move(coords), kernel, bandwidth, reflect);
    return bootstrap_variance(kde, BootstrapReplicates(ds.size(), replicates, seed), x);
}

BootstrappedKde::BootstrappedKde(const KdeModel& kde, std::size_t replicates, std::uint64_t seed)
    : kde_(kde), reps_(kde.size(), replicates, seed) {}

double BootstrappedKde::density_variance(std::span<const double> x) const {
    return bootstrap_variance(kde_, reps_, x);
}

// ---------------------------------------------------------------------------

std::string_view to_string(CellOpMode m) {
    return m == CellOpMode::center_point ? "center_point" : "exact";
}

Estimate cell_op(const OpDensity& op, std::span<const double> center, double cell_volume) {
    return {op.density(center) * cell_volume,
            cell_volume * cell_volume * op.density_variance(center), op.estimate_method()};
}

Estimate cell_op_exact(const OpDensity& op, const Box& cell, std::span<const double> center,
                       double cell_volume) {
    return {op.box_mass(cell), cell_volume * cell_volume * op.density_variance(center),
            op.estimate_method()};
}

double riemann_mass(const OpDensity& op, std::size_t per_axis) {
    const std::size_t d = op.dim();
    std::size_t total = 1;
    for (std::size_t a = 0; a < d; ++a) total *= per_axis;
    const double step = 1.0 / static_cast<double>(per_axis);
    std::vector<double> partial(per_axis, 0.0);
    // One slab per first-axis index keeps the summation order fixed.
    parallel_for(per_axis, [&](std::size_t s) {
        std::vector<double> x(d);
        const std::size_t inner = total / per_axis;
        double acc = 0.0;
        for (std::size_t r = 0; r < inner; ++r) {
            std::size_t rem = r;
            x[0] = (static_cast<double>(s) + 0.5) * step;
            for (std::size_t a = d; a-- > 1;) {
                x[a] = (static_cast<double>(rem % per_axis) + 0.5) * step;
                rem /= per_axis;
            }
            acc += op.density(x);
        }
        partial[s] = acc;
    });
    return std::accumulate(partial.begin(), partial.end(), 0.0) * std::pow(step, static_cast<double>(d));
}

// ---------------------------------------------------------------------------

Box Ball::region() const {
    return Box::centered(center, radius).intersect(Box::unit(center.size()));
}

double SampleFrame::total_weight() const {
    double w = 0.0;
    for (const auto& b : balls) w += b.weight;
    return w;
}

void SampleFrame::validate() const {
    bool positive = false;
    for (const auto& b : balls) {
        if (b.center.size() != dim) throw Error(ErrorCode::DimensionMismatch, "ball dimension");
        if (!std::isfinite(b.weight) || b.weight < 0.0)
            throw Error(ErrorCode::InvalidArgument, "ball weights must be finite and non-negative");
        positive = positive || b.weight > 0.0;
    }
    if (!positive) throw Error(ErrorCode::InvalidArgument, "sample frame has no positive weight");
}

SampleFrame build_sample_frame(const LabeledDataset& ds, const OpDensity& op, double epsilon) {
    if (!(epsilon > 0.0)) throw Error(ErrorCode::InvalidArgument, "epsilon must be positive");
    if (op.dim() != ds.dim()) throw Error(ErrorCode::DimensionMismatch, "OP and dataset dimension");
    const double v = std::pow(epsilon, static_cast<double>(ds.dim()));
    SampleFrame frame;
    frame.dim = ds.dim();
    frame.balls.resize(ds.size());
    parallel_for(ds.size(), [&](std::size_t i) {
        auto& b = frame.balls[i];
        b.center.assign(ds.point(i).begin(), ds.point(i).end());
        b.radius = epsilon;
        b.weight = op.density(ds.point(i)) * v;
        b.label = ds.label(i);
    });
    return frame;
}

void save_frame_jsonl(const SampleFrame& frame, std::ostream& os) {
    for (const auto& b : frame.balls)
        os << nlohmann::json{{"center", b.center}, {"radius", b.radius}, {"weight", b.weight},
                             {"label", b.label}}
                  .dump()
           << '\n';
}

SampleFrame load_frame_jsonl(std::istream& is) {
    SampleFrame frame;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            Ball b;
            b.center = j.at("center").get<std::vector<double>>();
            b.radius = j.at("radius").get<double>();
            b.weight = j.at("weight").get<double>();
            b.label = j.at("label").get<ClassId>();
            if (frame.balls.empty()) frame.dim = b.center.size();
            frame.balls.push_back(std::move(b));
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::MalformedRow, std::string("sample frame line: ") + e.what());
        }
    }
    frame.validate();
    return frame;
}

}  // namespace mlrel
