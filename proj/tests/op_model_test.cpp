#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <numeric>
#include <algorithm>
#include <random>
#include <sstream>

#include "mlrel/error.hpp"
#include "mlrel/op_model.hpp"
#include "mlrel/partition.hpp"
#include "mlrel/rng.hpp"
#include "test_support.hpp"

using namespace mlrel;
using mlrel::testing::make_dataset;

namespace {

double phi(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }

class ConstantDensity final : public OpDensity {
public:
    ConstantDensity(double value, double var) : value_(value), var_(var) {}
    double density(std::span<const double>) const override { return value_; }
    double box_mass(const Box& b) const override { return value_ * b.volume(); }
    double density_variance(std::span<const double>) const override { return var_; }
    std::string name() const override { return "constant"; }
    std::size_t dim() const override { return 2; }

private:
    double value_, var_;
};

LabeledDataset uniform_data(std::size_t n, std::uint64_t seed) {
    HalfplaneRule rule;
    rule.normal = {1.0, 0.0};
    rule.offset = 0.5;
    return generate_uniform(rule, 2, n, seed);
}

MixtureSpec two_bumps() {
    MixtureSpec s;
    s.components.push_back({{0.3, 0.4}, {0.1, 0.15}, 0.6});
    s.components.push_back({{0.8, 0.7}, {0.2, 0.05}, 0.4});
    s.label_rule.normal = {1.0, 0.0};
    s.label_rule.offset = 0.5;
    return s;
}

}  // namespace

TEST(Kde, HandComputedGaussianValue) {
    const auto ds = make_dataset(1, {{0.0}, {1.0}}, {0, 1});
    const auto kde = fit_kde(ds, KernelType::gaussian, BandwidthPolicy::fixed(1.0));
    const std::vector<double> x{0.5};
    EXPECT_NEAR(kde.density(x), 0.352065, 5e-7);
    EXPECT_NEAR(kde.density(x), 0.5 * 2.0 * phi(0.5), 1e-15);
}

TEST(Kde, HandComputedExponentialValue) {
    const auto ds = make_dataset(1, {{0.2}, {0.6}}, {0, 1});
    const auto kde = fit_kde(ds, KernelType::exponential, BandwidthPolicy::fixed(0.5));
    const std::vector<double> x{0.3};
    const double expected = 0.5 * (0.5 * std::exp(-0.1 / 0.5) / 0.5 + 0.5 * std::exp(-0.3 / 0.5) / 0.5);
    EXPECT_NEAR(kde.density(x), expected, 1e-15);
}

TEST(Kde, NonNegativeEverywhere) {
    const auto ds = generate_synthetic(two_bumps(), 300, 1);
    for (auto kernel : {KernelType::gaussian, KernelType::exponential}) {
        const auto kde = fit_kde(ds, kernel, BandwidthPolicy::fixed(0.05));
        Rng rng(3);
        std::vector<double> x(2);
        for (int i = 0; i < 1000; ++i) {
            x[0] = uniform01(rng);
            x[1] = uniform01(rng);
            EXPECT_GE(kde.density(x), 0.0);
        }
    }
}

TEST(Kde, RuleOfThumbBandwidth) {
    const auto ds = generate_synthetic(two_bumps(), 500, 2);
    const auto kde = fit_kde(ds, KernelType::gaussian, BandwidthPolicy::rule_of_thumb());
    const double n = 500.0;
    const double factor = std::pow(4.0 / (4.0 * n), 1.0 / 6.0);
    for (std::size_t a = 0; a < 2; ++a) {
        double mean = 0.0, ss = 0.0;
        for (std::size_t i = 0; i < ds.size(); ++i) mean += ds.point(i)[a] / n;
        for (std::size_t i = 0; i < ds.size(); ++i) ss += std::pow(ds.point(i)[a] - mean, 2);
        EXPECT_NEAR(kde.bandwidth()[a], std::sqrt(ss / (n - 1)) * factor, 1e-12);
    }
}

TEST(Kde, CrossValidatedBandwidthIsOnTheGrid) {
    const auto ds = generate_synthetic(two_bumps(), 600, 4);
    const auto kde = fit_kde(ds, KernelType::gaussian, BandwidthPolicy::cv_grid(7));
    const double h = kde.bandwidth()[0];
    EXPECT_GE(h, 0.005);
    EXPECT_LE(h, 0.3);
    EXPECT_EQ(kde.bandwidth()[1], h);
    // Reproducible from the seed.
    EXPECT_EQ(fit_kde(ds, KernelType::gaussian, BandwidthPolicy::cv_grid(7)).bandwidth(), kde.bandwidth());
}

TEST(Kde, DegenerateData) {
    const auto same = make_dataset(2, {{0.3, 0.3}, {0.3, 0.3}, {0.3, 0.3}}, {0, 0, 1});
    EXPECT_THROW(fit_kde(same, KernelType::gaussian, BandwidthPolicy::rule_of_thumb()), Error);
    EXPECT_THROW(fit_kde(same, KernelType::gaussian, BandwidthPolicy::cv_grid(1)), Error);
    EXPECT_NO_THROW(fit_kde(same, KernelType::gaussian, BandwidthPolicy::fixed(0.1)));
    const auto single = make_dataset(1, {{0.3}}, {0});
    EXPECT_THROW(fit_kde(single, KernelType::gaussian, BandwidthPolicy::fixed(0.1)), Error);
}

TEST(Kde, PolicyParsing) {
    EXPECT_EQ(BandwidthPolicy::parse("fixed:0.2", 0).kind, BandwidthPolicyKind::fixed);
    EXPECT_DOUBLE_EQ(BandwidthPolicy::parse("fixed:0.2", 0).fixed_h, 0.2);
    EXPECT_EQ(BandwidthPolicy::parse("rot", 0).kind, BandwidthPolicyKind::rule_of_thumb);
    EXPECT_EQ(BandwidthPolicy::parse("cv", 0).kind, BandwidthPolicyKind::cv_grid);
    EXPECT_THROW(BandwidthPolicy::parse("fixed:-1", 0), Error);
    EXPECT_THROW(BandwidthPolicy::parse("magic", 0), Error);
}

TEST(Kde, MassWithoutReflectionHasBoundaryDeficit) {
    const auto ds = uniform_data(400, 5);
    const auto kde = fit_kde(ds, KernelType::gaussian, BandwidthPolicy::fixed(0.1));
    const double mass = riemann_mass(kde, 400);
    EXPECT_LT(mass, 1.0);
    EXPECT_GT(mass, 0.7);
    EXPECT_NEAR(kde.box_mass(Box::unit(2)), mass, 1e-3);
}

TEST(Kde, ReflectionRestoresMass) {
    const auto ds = uniform_data(400, 5);
    // One image per face: the Laplace kernel loses about exp(-1/h) per axis.
    for (auto [kernel, tail] : {std::pair{KernelType::gaussian, 1e-9}, std::pair{KernelType::exponential, 1e-4}}) {
        const auto kde = fit_kde(ds, kernel, BandwidthPolicy::fixed(0.1), true);
        EXPECT_NEAR(riemann_mass(kde, 400), 1.0, 0.02);
        EXPECT_NEAR(kde.box_mass(Box::unit(2)), 1.0, tail);
    }
}

TEST(Kde, BoxMassMatchesRiemannSum) {
    const auto ds = generate_synthetic(two_bumps(), 200, 8);
    const auto kde = fit_kde(ds, KernelType::gaussian, BandwidthPolicy::fixed(0.07));
    const Box b{{0.2, 0.1}, {0.6, 0.5}};
    const int m = 400;
    double acc = 0.0;
    std::vector<double> x(2);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) {
            x[0] = 0.2 + (i + 0.5) * 0.4 / m;
            x[1] = 0.1 + (j + 0.5) * 0.4 / m;
            acc += kde.density(x);
        }
    EXPECT_NEAR(kde.box_mass(b), acc * 0.16 / (m * m), 1e-5);
}

TEST(Kde, JsonRoundTrip) {
    const auto ds = generate_synthetic(two_bumps(), 50, 8);
    const auto kde = fit_kde(ds, KernelType::exponential, BandwidthPolicy::fixed(0.07), true);
    const auto j = kde.to_json("train.csv");
    EXPECT_EQ(j.at("points_ref"), "train.csv");
    EXPECT_EQ(j.at("n"), 50);
    const auto back = KdeModel::from_json(j, ds);
    const std::vector<double> x{0.4, 0.6};
    EXPECT_EQ(back.density(x), kde.density(x));
}

TEST(Mixture, DensityIntegratesToOne) {
    const MixtureDensity m(two_bumps());
    EXPECT_NEAR(m.box_mass(Box::unit(2)), 1.0, 1e-12);
    EXPECT_NEAR(riemann_mass(m, 500), 1.0, 1e-4);
    const Box b{{0.1, 0.2}, {0.45, 0.55}};
    const int k = 500;
    double acc = 0.0;
    std::vector<double> x(2);
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j) {
            x[0] = 0.1 + (i + 0.5) * 0.35 / k;
            x[1] = 0.2 + (j + 0.5) * 0.35 / k;
            acc += m.density(x);
        }
    EXPECT_NEAR(m.box_mass(b), acc * 0.35 * 0.35 / (k * k), 1e-6);
}

TEST(Bootstrap, DegenerateDataHasZeroVariance) {
    const auto ds = make_dataset(2, {{0.3, 0.3}, {0.3, 0.3}, {0.3, 0.3}, {0.3, 0.3}}, {0, 0, 0, 1});
    const std::vector<double> x{0.35, 0.3};
    for (std::size_t B : {2, 10, 100})
        EXPECT_EQ(bootstrap_variance(ds, KernelType::gaussian, {0.1, 0.1}, x, B, 4), 0.0);
}

TEST(Bootstrap, TwoReplicatesByHand) {
    const auto ds = make_dataset(1, {{0.1}, {0.4}, {0.8}}, {0, 1, 0});
    const KdeModel kde(1, ds.coords(), KernelType::gaussian, {0.2});
    const BootstrapReplicates reps(3, 2, 99);
    const std::vector<double> x{0.5};
    // Two resample KDE values from the pinned multiplicities, computed directly.
    double values[2];
    for (std::size_t b = 0; b < 2; ++b) {
        const auto c = reps.counts(b);
        EXPECT_EQ(c[0] + c[1] + c[2], 3u);
        double s = 0.0;
        const double pts[3] = {0.1, 0.4, 0.8};
        for (int j = 0; j < 3; ++j) s += c[j] * phi((0.5 - pts[j]) / 0.2) / 0.2;
        values[b] = s / 3.0;
    }
    const double mean = 0.5 * (values[0] + values[1]);
    const double hand = (std::pow(values[0] - mean, 2) + std::pow(values[1] - mean, 2)) / 1.0;
    EXPECT_NEAR(bootstrap_variance(kde, reps, x), hand, 1e-15);
}

TEST(Bootstrap, InvariantToPointOrder) {
    const auto ds = generate_synthetic(two_bumps(), 80, 3);
    std::vector<std::size_t> perm(ds.size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::mt19937_64 gen(1);
    std::shuffle(perm.begin(), perm.end(), gen);
    std::vector<double> coords;
    std::vector<ClassId> labels;
    for (std::size_t i : perm) {
        coords.insert(coords.end(), ds.point(i).begin(), ds.point(i).end());
        labels.push_back(ds.label(i));
    }
    const LabeledDataset shuffled(2, coords, labels);
    const std::vector<double> x{0.35, 0.45};
    EXPECT_EQ(bootstrap_variance(ds, KernelType::gaussian, {0.1, 0.1}, x, 50, 12),
              bootstrap_variance(shuffled, KernelType::gaussian, {0.1, 0.1}, x, 50, 12));
}

TEST(Bootstrap, NonNegativeAndShrinksWithSampleSize) {
    const std::vector<double> x{0.5, 0.5};
    const auto small = uniform_data(50, 1);
    const auto large = uniform_data(2000, 1);
    const double vs = bootstrap_variance(small, KernelType::gaussian, {0.1, 0.1}, x, 100, 3);
    const double vl = bootstrap_variance(large, KernelType::gaussian, {0.1, 0.1}, x, 100, 3);
    EXPECT_GE(vs, 0.0);
    EXPECT_GE(vl, 0.0);
    EXPECT_LT(vl, vs);
}

TEST(Bootstrap, RequiresTwoReplicates) {
    EXPECT_THROW(BootstrapReplicates(5, 1, 0), Error);
}

TEST(CellOp, CenterPointRule) {
    const ConstantDensity d(2.5, 0.0);
    const std::vector<double> c{0.5, 0.5};
    const auto e = cell_op(d, c, 0.000016);
    EXPECT_NEAR(e.mean, 0.00004, 1e-18);
    EXPECT_EQ(e.variance, 0.0);
    const ConstantDensity noisy(2.5, 3.0);
    EXPECT_NEAR(cell_op(noisy, c, 0.01).variance, 3e-4, 1e-18);
    EXPECT_NEAR(cell_op(noisy, c, 0.02).mean, 2.0 * cell_op(noisy, c, 0.01).mean, 1e-18);
}

TEST(CellOp, BootstrappedKdeProvenance) {
    const auto ds = uniform_data(100, 2);
    const auto kde = fit_kde(ds, KernelType::gaussian, BandwidthPolicy::fixed(0.1));
    const BootstrappedKde boot(kde, 20, 5);
    const std::vector<double> c{0.5, 0.5};
    const auto e = cell_op(boot, c, 0.01);
    EXPECT_EQ(e.method, EstimateMethod::kde_bootstrap);
    EXPECT_GT(e.variance, 0.0);
    EXPECT_EQ(e.mean, kde.density(c) * 0.01);
}

TEST(CellOp, UniformKdeSumsToAboutOne) {
    const auto ds = uniform_data(1000, 6);
    const auto kde = fit_kde(ds, KernelType::gaussian, BandwidthPolicy::fixed(0.08), true);
    const auto spec = make_cell_spec(2, 0.01);
    double total = 0.0;
    for (std::uint64_t i = 0; i < spec.cell_count(); ++i)
        total += cell_op(kde, spec.center(spec.unlinear(i)), spec.cell_volume).mean;
    EXPECT_NEAR(total, 1.0, 0.02);
}

TEST(CellOp, ExactModeUsesBoxMass) {
    const MixtureDensity m(two_bumps());
    const auto spec = make_cell_spec(2, 0.1);
    double total = 0.0;
    for (std::uint64_t i = 0; i < spec.cell_count(); ++i) {
        const auto idx = spec.unlinear(i);
        total += cell_op_exact(m, spec.box(idx), spec.center(idx), spec.cell_volume).mean;
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST(SampleFrame, OneBallPerPoint) {
    const auto ds = make_dataset(2, {{0.2, 0.2}, {0.5, 0.5}, {0.5, 0.5}}, {0, 1, 1});
    const auto kde = fit_kde(ds, KernelType::gaussian, BandwidthPolicy::fixed(0.2));
    const auto frame = build_sample_frame(ds, kde, 0.01);
    ASSERT_EQ(frame.balls.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_GT(frame.balls[i].weight, 0.0);
        EXPECT_EQ(frame.balls[i].label, ds.label(i));
        EXPECT_NEAR(frame.balls[i].weight, kde.density(ds.point(i)) * 1e-4, 1e-18);
    }
    EXPECT_EQ(frame.balls[1].weight, frame.balls[2].weight);
    EXPECT_NO_THROW(frame.validate());
}

TEST(SampleFrame, RegionIsClippedCenteredBox) {
    Ball b;
    b.center = {0.0, 0.5};
    b.radius = 0.1;
    const auto r = b.region();
    EXPECT_DOUBLE_EQ(r.lo[0], 0.0);
    EXPECT_DOUBLE_EQ(r.hi[0], 0.05);
    EXPECT_DOUBLE_EQ(r.lo[1], 0.45);
    EXPECT_DOUBLE_EQ(r.hi[1], 0.55);
}

TEST(SampleFrame, JsonLinesRoundTrip) {
    const auto ds = generate_synthetic(two_bumps(), 20, 1);
    const auto frame = build_sample_frame(ds, MixtureDensity(two_bumps()), 0.02);
    std::stringstream ss;
    save_frame_jsonl(frame, ss);
    const auto back = load_frame_jsonl(ss);
    ASSERT_EQ(back.balls.size(), frame.balls.size());
    for (std::size_t i = 0; i < frame.balls.size(); ++i) {
        EXPECT_EQ(back.balls[i].center, frame.balls[i].center);
        EXPECT_EQ(back.balls[i].weight, frame.balls[i].weight);
        EXPECT_EQ(back.balls[i].label, frame.balls[i].label);
    }
}

TEST(SampleFrame, ValidationRejectsBadWeights) {
    SampleFrame f;
    f.dim = 1;
    f.balls.push_back({{0.5}, 0.1, 0.0, 0});
    EXPECT_THROW(f.validate(), Error);
    f.balls.push_back({{0.5}, 0.1, -1.0, 0});
    EXPECT_THROW(f.validate(), Error);
}
