#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "datasets.hpp"
#include "geometry.hpp"

namespace mlrel {

// A trained model M. predict must be deterministic and safe to call
// concurrently.
class Classifier {
public:
    virtual ~Classifier() = default;

    virtual ClassId predict(std::span<const double> x) const = 0;

    // xs holds out.size() points of dim() coordinates each, row-major.
    virtual void predict_batch(std::span<const double> xs, std::span<ClassId> out) const;

    virtual std::string name() const = 0;
    virtual std::size_t dim() const = 0;
};

class ConstantClassifier final : public Classifier {
public:
    ConstantClassifier(std::size_t dim, ClassId label) : dim_(dim), label_(label) {}

    ClassId predict(std::span<const double>) const override { return label_; }
    std::string name() const override { return "constant(" + std::to_string(label_) + ")"; }
    std::size_t dim() const override { return dim_; }

private:
    std::size_t dim_;
    ClassId label_;
};

// Exact k-nearest-neighbour majority vote over a k-d tree. Neighbour ties at
// equal distance go to the lower training index; vote ties go to the
// smallest class id.
class KnnClassifier final : public Classifier {
public:
    KnnClassifier(const LabeledDataset& ds, std::size_t k, Metric metric = Metric::linf);
    ~KnnClassifier() override;
    KnnClassifier(KnnClassifier&&) noexcept;
    KnnClassifier& operator=(KnnClassifier&&) noexcept;

    ClassId predict(std::span<const double> x) const override;
    std::string name() const override;
    std::size_t dim() const override { return dim_; }

    std::size_t k() const noexcept { return k_; }

    // Indices of the k nearest training points, nearest first.
    std::vector<std::size_t> neighbours(std::span<const double> x) const;

private:
    struct Tree;
    std::size_t dim_;
    std::size_t k_;
    Metric metric_;
    std::vector<ClassId> labels_;
    std::unique_ptr<Tree> tree_;
};

std::unique_ptr<KnnClassifier> train_knn(const LabeledDataset& ds, std::size_t k,
                                         Metric metric = Metric::linf);

// (1/n) * #{j : predict(x_j) != y_j}
double test_error(const Classifier& c, const LabeledDataset& ds);

// ---------------------------------------------------------------------------
// Oracle classifiers: ground truth and the misclassified region are known in
// closed form, so misclassified volume over any box is exact.

// Axis-aligned threshold rule: x[axis] < threshold -> below, else above.
struct ThresholdRule {
    std::size_t axis = 0;
    double threshold = 0.5;
    ClassId below = 0;
    ClassId above = 1;

    ClassId label(std::span<const double> x) const {
        return x[axis] < threshold ? below : above;
    }
};

// Box, optionally thinned to periodic stripes along one axis: a point is in
// the stripe set when frac((x[axis] - phase) / period) < duty.
struct ErrorRegion {
    Box box;
    bool striped = false;
    std::size_t stripe_axis = 0;
    double period = 1.0;
    double duty = 1.0;
    double phase = 0.0;

    bool contains(std::span<const double> x) const;
    double volume_within(const Box& query) const;
};

class OracleClassifier final : public Classifier {
public:
    // Regions must be pairwise disjoint (checked for boxes).
    OracleClassifier(std::size_t dim, ThresholdRule truth, std::vector<ErrorRegion> regions,
                     std::string name = "oracle");

    ClassId predict(std::span<const double> x) const override;
    std::string name() const override { return name_; }
    std::size_t dim() const override { return dim_; }

    ClassId truth(std::span<const double> x) const { return truth_.label(x); }
    bool misclassified(std::span<const double> x) const;

    // Exact volume of (misclassified region) ∩ query.
    double misclassified_volume(const Box& query) const;

    const ThresholdRule& truth_rule() const noexcept { return truth_; }
    const std::vector<ErrorRegion>& regions() const noexcept { return regions_; }

    static OracleClassifier from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;

private:
    std::size_t dim_;
    ThresholdRule truth_;
    std::vector<ErrorRegion> regions_;
    std::string name_;
};

OracleClassifier load_oracle(const std::filesystem::path& path);

// Wraps an external model as a child process: one line of d comma-separated
// floats per query on the child's stdin, one integer class id per line back on
// its stdout. The child must flush after every answer line.
class SubprocessClassifier final : public Classifier {
public:
    SubprocessClassifier(std::string command, std::size_t dim);
    ~SubprocessClassifier() override;
    SubprocessClassifier(const SubprocessClassifier&) = delete;
    SubprocessClassifier& operator=(const SubprocessClassifier&) = delete;

    ClassId predict(std::span<const double> x) const override;
    void predict_batch(std::span<const double> xs, std::span<ClassId> out) const override;
    std::string name() const override { return "subprocess(" + command_ + ")"; }
    std::size_t dim() const override { return dim_; }

private:
    void exchange(std::span<const double> xs, std::span<ClassId> out) const;

    std::string command_;
    std::size_t dim_;
    int pid_ = -1;
    int to_child_ = -1;
    int from_child_ = -1;
    mutable std::mutex mutex_;
    mutable std::string read_buffer_;
};

}  // namespace mlrel
