#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "datasets.hpp"
#include "estimate.hpp"
#include "geometry.hpp"

namespace mlrel {

// A density over [0,1]^d approximating the operational profile.
class OpDensity {
public:
    virtual ~OpDensity() = default;
    virtual double density(std::span<const double> x) const = 0;
    // Integral of the density over box ∩ [0,1]^d.
    virtual double box_mass(const Box& box) const = 0;
    // Variance of density(x) as an estimator; 0 for known densities.
    virtual double density_variance(std::span<const double> x) const;
    // Provenance tag for cell OP estimates built from this density.
    virtual EstimateMethod estimate_method() const { return EstimateMethod::analytic; }
    virtual std::string name() const = 0;
    virtual std::size_t dim() const = 0;
};

class UniformDensity final : public OpDensity {
public:
    explicit UniformDensity(std::size_t dim) : dim_(dim) {}
    double density(std::span<const double> x) const override;
    double box_mass(const Box& box) const override;
    std::string name() const override { return "uniform"; }
    std::size_t dim() const override { return dim_; }

private:
    std::size_t dim_;
};

// The truncated-Gaussian mixture that sample_mixture draws from (before the
// label-margin rejection, which only thins the sample).
class MixtureDensity final : public OpDensity {
public:
    explicit MixtureDensity(MixtureSpec spec);
    double density(std::span<const double> x) const override;
    double box_mass(const Box& box) const override;
    std::string name() const override { return "mixture"; }
    std::size_t dim() const override { return spec_.dim(); }

private:
    MixtureSpec spec_;
    std::vector<double> norm_;  // per component: prod over axes of in-box mass
};

// ---------------------------------------------------------------------------
// Kernel density estimation

enum class KernelType { gaussian, exponential };

std::string_view to_string(KernelType k);
KernelType kernel_from_string(std::string_view s);

enum class BandwidthPolicyKind { fixed, rule_of_thumb, cv_grid };

struct BandwidthPolicy {
    BandwidthPolicyKind kind = BandwidthPolicyKind::rule_of_thumb;
    double fixed_h = 0.2;
    // cv_grid: log-spaced isotropic candidates, k-fold held-out likelihood.
    std::size_t grid_size = 25;
    double grid_lo = 0.005;
    double grid_hi = 1.0;
    std::size_t folds = 5;
    std::uint64_t seed = 0;

    static BandwidthPolicy fixed(double h);
    static BandwidthPolicy rule_of_thumb();
    static BandwidthPolicy cv_grid(std::uint64_t seed);
    // "fixed:0.2", "rot", "cv"
    static BandwidthPolicy parse(std::string_view s, std::uint64_t seed);

    std::string describe() const;
};

// Product-kernel KDE: density(x) = (1/n) sum_j prod_a K((x_a - X_ja)/h_a)/h_a.
// With reflection enabled each axis kernel is mirrored at 0 and 1.
class KdeModel final : public OpDensity {
public:
    KdeModel(std::size_t dim, std::vector<double> points, KernelType kernel,
             std::vector<double> bandwidth, bool reflect = false);

    double density(std::span<const double> x) const override;
    double box_mass(const Box& box) const override;
    EstimateMethod estimate_method() const override { return EstimateMethod::kde; }
    std::string name() const override { return "kde"; }
    std::size_t dim() const override { return dim_; }

    std::size_t size() const noexcept { return n_; }
    KernelType kernel() const noexcept { return kernel_; }
    const std::vector<double>& bandwidth() const noexcept { return h_; }
    bool reflect() const noexcept { return reflect_; }
    const std::vector<double>& points() const noexcept { return points_; }
    const std::string& policy() const noexcept { return policy_; }
    void set_policy(std::string p) { policy_ = std::move(p); }

    // Product kernel value of training point j at x (already divided by h).
    double kernel_at(std::size_t j, std::span<const double> x) const;

    // Density using per-point multiplicities in place of equal weights:
    // (1/sum(counts)) sum_j counts[j] * kernel_at(j, x).
    double weighted_density(std::span<const double> x, std::span<const std::uint32_t> counts) const;

    nlohmann::json to_json(const std::string& points_ref) const;
    static KdeModel from_json(const nlohmann::json& j, const LabeledDataset& ds);

private:
    std::size_t dim_;
    std::size_t n_;
    std::vector<double> points_;
    KernelType kernel_;
    std::vector<double> h_;
    bool reflect_;
    std::string policy_ = "fixed";
};

// Throws DegenerateData when n < 2, or when all points coincide and the
// policy is data-driven.
KdeModel fit_kde(const LabeledDataset& ds, KernelType kernel, const BandwidthPolicy& policy,
                 bool reflect = false);

// B resamples of size n drawn with replacement, stored as multiplicities.
// Resample b uses the stream derived from (seed, b).
class BootstrapReplicates {
public:
    BootstrapReplicates(std::size_t n, std::size_t replicates, std::uint64_t seed);

    std::size_t replicates() const noexcept { return b_; }
    std::size_t n() const noexcept { return n_; }
    std::span<const std::uint32_t> counts(std::size_t b) const {
        return {counts_.data() + b * n_, n_};
    }

private:
    std::size_t n_;
    std::size_t b_;
    std::vector<std::uint32_t> counts_;
};

// Sample variance (divisor B-1) of the B bootstrap KDE values at x.
double bootstrap_variance(const KdeModel& kde, const BootstrapReplicates& reps,
                          std::span<const double> x);

// Points are put in lexicographic order before resampling, which makes the
// value invariant to dataset order.
double bootstrap_variance(const LabeledDataset& ds, KernelType kernel,
                          const std::vector<double>& bandwidth, std::span<const double> x,
                          std::size_t replicates, std::uint64_t seed, bool reflect = false);

// KDE whose density_variance is the bootstrap variance.
class BootstrappedKde final : public OpDensity {
public:
    BootstrappedKde(const KdeModel& kde, std::size_t replicates, std::uint64_t seed);
    double density(std::span<const double> x) const override { return kde_.density(x); }
    double box_mass(const Box& box) const override { return kde_.box_mass(box); }
    double density_variance(std::span<const double> x) const override;
    EstimateMethod estimate_method() const override { return EstimateMethod::kde_bootstrap; }
    std::string name() const override { return "kde_bootstrap"; }
    std::size_t dim() const override { return kde_.dim(); }

    const KdeModel& kde() const noexcept { return kde_; }
    std::size_t replicates() const noexcept { return reps_.replicates(); }

private:
    const KdeModel& kde_;
    BootstrapReplicates reps_;
};

// ---------------------------------------------------------------------------
// Cell OP

enum class CellOpMode { center_point, exact };

std::string_view to_string(CellOpMode m);

// mean = density(center) * v; variance = v^2 * density_variance(center).
Estimate cell_op(const OpDensity& op, std::span<const double> center, double cell_volume);

// Same variance, but the mean is the density's exact mass over `cell`. Used
// to check the center-point rule.
Estimate cell_op_exact(const OpDensity& op, const Box& cell, std::span<const double> center,
                       double cell_volume);

// Riemann sum of the density over a grid of `per_axis`^d midpoints in [0,1]^d.
double riemann_mass(const OpDensity& op, std::size_t per_axis);

// ---------------------------------------------------------------------------
// Sample frame for the sampled mode

struct Ball {
    std::vector<double> center;
    double radius = 0.0;  // side length of the L-infinity box, as for cells
    double weight = 0.0;
    ClassId label = 0;

    Box region() const;  // centered box clipped to [0,1]^d
};

struct SampleFrame {
    std::size_t dim = 0;
    std::vector<Ball> balls;

    double total_weight() const;
    void validate() const;
};

// One ball per point, radius epsilon, weight = density(point) * epsilon^d.
SampleFrame build_sample_frame(const LabeledDataset& ds, const OpDensity& op, double epsilon);

void save_frame_jsonl(const SampleFrame& frame, std::ostream& os);
SampleFrame load_frame_jsonl(std::istream& is);

}  // namespace mlrel
