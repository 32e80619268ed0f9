#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <random>

#include "mlrel/classifier.hpp"
#include "mlrel/error.hpp"
#include "mlrel/geometry.hpp"
#include "mlrel/rng.hpp"
#include "test_support.hpp"

using namespace mlrel;

namespace {

// Brute-force kNN: sort by (distance, index), majority vote, ties to the
// smallest class id.
ClassId brute_knn(const LabeledDataset& ds, std::span<const double> x, std::size_t k, bool linf) {
    std::vector<std::pair<double, std::size_t>> d;
    for (std::size_t i = 0; i < ds.size(); ++i)
        d.emplace_back(mlrel::testing::brute_distance(ds.point(i), x, linf), i);
    std::sort(d.begin(), d.end());
    std::map<ClassId, int> votes;
    for (std::size_t i = 0; i < std::min(k, d.size()); ++i) ++votes[ds.label(d[i].second)];
    ClassId best = votes.begin()->first;
    for (const auto& [label, count] : votes)
        if (count > votes[best]) best = label;
    return best;
}

OracleClassifier striped_oracle() {
    ErrorRegion band;
    band.box = {{0.4, 0.0}, {0.6, 1.0}};
    band.striped = true;
    band.stripe_axis = 1;
    band.period = 0.1;
    band.duty = 0.3;
    band.phase = 0.05;
    ErrorRegion corner;
    corner.box = {{0.0, 0.0}, {0.1, 0.2}};
    return OracleClassifier(2, ThresholdRule{0, 0.5, 0, 1}, {band, corner}, "test-oracle");
}

}  // namespace

TEST(Knn, MatchesBruteForce) {
    std::mt19937_64 gen(21);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 12; ++trial) {
        const std::size_t dim = 1 + trial % 3;
        const auto ds = mlrel::testing::random_dataset(gen, dim, 200 + trial * 30, 3);
        for (std::size_t k : {1, 3, 5}) {
            for (bool linf : {true, false}) {
                const KnnClassifier knn(ds, k, linf ? Metric::linf : Metric::l2);
                for (int q = 0; q < 100; ++q) {
                    std::vector<double> x(dim);
                    for (auto& v : x) v = u(gen);
                    EXPECT_EQ(knn.predict(x), brute_knn(ds, x, k, linf));
                }
            }
        }
    }
}

TEST(Knn, OneNearestNeighbourRecallsTrainingLabels) {
    std::mt19937_64 gen(4);
    const auto ds = mlrel::testing::random_dataset(gen, 2, 300, 2);
    const auto knn = train_knn(ds, 1);
    EXPECT_EQ(test_error(*knn, ds), 0.0);
}

TEST(Knn, BatchAgreesWithSingle) {
    std::mt19937_64 gen(6);
    const auto ds = mlrel::testing::random_dataset(gen, 2, 100, 2);
    const KnnClassifier knn(ds, 3);
    std::vector<double> xs(2 * 50);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (auto& v : xs) v = u(gen);
    std::vector<ClassId> out(50);
    knn.predict_batch(xs, out);
    for (std::size_t i = 0; i < 50; ++i)
        EXPECT_EQ(out[i], knn.predict(std::span<const double>(xs).subspan(2 * i, 2)));
}

TEST(Constant, PredictsItsLabel) {
    const ConstantClassifier c(3, 4);
    const std::vector<double> x{0.1, 0.2, 0.3};
    EXPECT_EQ(c.predict(x), 4);
    const auto ds = mlrel::testing::make_dataset(1, {{0.1}, {0.2}, {0.3}, {0.4}}, {4, 4, 1, 4});
    EXPECT_DOUBLE_EQ(test_error(ConstantClassifier(1, 4), ds), 0.25);
}

TEST(Oracle, FlipsTruthInsideRegions) {
    const auto o = striped_oracle();
    const std::vector<double> outside{0.3, 0.5};
    EXPECT_EQ(o.predict(outside), 0);
    EXPECT_FALSE(o.misclassified(outside));
    const std::vector<double> in_stripe{0.55, 0.06};  // frac((0.06-0.05)/0.1) = 0.1 < 0.3
    EXPECT_TRUE(o.misclassified(in_stripe));
    EXPECT_EQ(o.predict(in_stripe), 0);
    const std::vector<double> between{0.55, 0.12};  // frac = 0.7
    EXPECT_FALSE(o.misclassified(between));
    const std::vector<double> corner{0.05, 0.1};
    EXPECT_EQ(o.predict(corner), 1);
}

TEST(Oracle, StripeVolumeClosedForm) {
    const auto o = striped_oracle();
    // Band covers 10 full periods: 0.2 * 1.0 * 0.3, plus the corner 0.02.
    EXPECT_NEAR(o.misclassified_volume(Box::unit(2)), 0.06 + 0.02, 1e-12);
    // Query inside one stripe period, partly overlapping: y in [0.05, 0.10),
    // stripe set [0.05, 0.08) -> 0.03 * 0.1 wide in x.
    EXPECT_NEAR(o.misclassified_volume({{0.45, 0.05}, {0.55, 0.10}}), 0.1 * 0.03, 1e-12);
}

TEST(Oracle, VolumeAgreesWithMonteCarlo) {
    const auto o = striped_oracle();
    Rng rng(77);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 30; ++trial) {
        Box q{{0, 0}, {0, 0}};
        for (std::size_t a = 0; a < 2; ++a) {
            double x = uniform01(rng), y = uniform01(rng);
            q.lo[a] = std::min(x, y);
            q.hi[a] = std::max(x, y);
        }
        const double vol = q.volume();
        if (vol < 1e-3) continue;
        const int n = 20000;
        int hits = 0;
        std::vector<double> x(2);
        for (int i = 0; i < n; ++i) {
            sample_uniform(q, rng, x);
            hits += o.misclassified(x);
        }
        const double p = o.misclassified_volume(q) / vol;
        const double phat = static_cast<double>(hits) / n;
        const double sigma = std::sqrt(std::max(p * (1 - p), 1e-12) / n);
        EXPECT_LE(std::abs(phat - p), 3 * sigma + 1e-9) << "trial " << trial;
    }
}

TEST(Oracle, JsonRoundTrip) {
    const auto o = striped_oracle();
    const auto back = OracleClassifier::from_json(o.to_json());
    EXPECT_EQ(back.to_json(), o.to_json());
    EXPECT_NEAR(back.misclassified_volume(Box::unit(2)), o.misclassified_volume(Box::unit(2)), 0.0);
}

TEST(Oracle, RejectsOverlappingRegions) {
    ErrorRegion a, b;
    a.box = {{0.0, 0.0}, {0.5, 0.5}};
    b.box = {{0.4, 0.4}, {0.9, 0.9}};
    EXPECT_THROW(OracleClassifier(2, ThresholdRule{}, {a, b}), Error);
}

TEST(Subprocess, StreamsPredictionsFromChildProcess) {
    const SubprocessClassifier c("python3 -u -c \"import sys\nfor l in sys.stdin: print(0 if float(l.split(',')[0]) < 0.5 else 1)\"", 2);
    std::vector<double> xs;
    std::vector<ClassId> expected;
    Rng rng(5);
    for (int i = 0; i < 1500; ++i) {
        const double a = uniform01(rng), b = uniform01(rng);
        xs.push_back(a);
        xs.push_back(b);
        expected.push_back(a < 0.5 ? 0 : 1);
    }
    std::vector<ClassId> out(expected.size());
    c.predict_batch(xs, out);
    EXPECT_EQ(out, expected);
    const std::vector<double> one{0.9, 0.1};
    EXPECT_EQ(c.predict(one), 1);
}

TEST(Subprocess, BadAnswerIsAnError) {
    const SubprocessClassifier c("python3 -u -c \"import sys\nfor l in sys.stdin: print('cat')\"", 1);
    const std::vector<double> x{0.2};
    try {
        c.predict(x);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::SubprocessFailure);
    }
}
