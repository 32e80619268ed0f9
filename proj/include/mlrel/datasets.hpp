#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

namespace mlrel {

using ClassId = int;

enum class Metric { linf, l2 };

std::string_view to_string(Metric m);
Metric metric_from_string(std::string_view s);

double distance(std::span<const double> a, std::span<const double> b, Metric metric);

// Points in [0,1]^d with dense integer class labels. Points are stored
// row-major in one flat buffer.
class LabeledDataset {
public:
    LabeledDataset() = default;

    // Validates the invariants and throws Error on violation.
    LabeledDataset(std::size_t dim, std::vector<double> coords, std::vector<ClassId> labels,
                   std::vector<std::string> class_names = {});

    std::size_t dim() const noexcept { return dim_; }
    std::size_t size() const noexcept { return labels_.size(); }
    bool empty() const noexcept { return labels_.empty(); }

    std::span<const double> point(std::size_t i) const {
        return {coords_.data() + i * dim_, dim_};
    }
    ClassId label(std::size_t i) const { return labels_[i]; }

    const std::vector<double>& coords() const noexcept { return coords_; }
    const std::vector<ClassId>& labels() const noexcept { return labels_; }
    const std::vector<std::string>& class_names() const noexcept { return class_names_; }

    // Sorted distinct labels.
    std::vector<ClassId> distinct_labels() const;

    bool operator==(const LabeledDataset&) const = default;

private:
    std::size_t dim_ = 0;
    std::vector<double> coords_;
    std::vector<ClassId> labels_;
    std::vector<std::string> class_names_;
};

enum class SeparationConvention { half_min_cross_distance, raw_min_cross_distance };

std::string_view to_string(SeparationConvention c);
SeparationConvention convention_from_string(std::string_view s);

struct RSeparation {
    double r_hat = 0.0;
    SeparationConvention convention = SeparationConvention::half_min_cross_distance;
    Metric metric = Metric::linf;
    std::pair<std::size_t, std::size_t> witness_pair{0, 0};
    // Unhalved distance between the witness points.
    double min_cross_distance = 0.0;
};

// Minimum cross-label distance (halved under the half convention). Uses a
// sort-and-sweep along the first axis; exact, with the witness pair chosen
// as the lexicographically smallest (i, j) among minimizers.
RSeparation estimate_r_separation(const LabeledDataset& ds,
                                  SeparationConvention convention = SeparationConvention::half_min_cross_distance,
                                  Metric metric = Metric::linf);

nlohmann::json to_json(const RSeparation& r);

// ---------------------------------------------------------------------------
// Synthetic data

struct MixtureComponent {
    std::vector<double> mean;
    std::vector<double> scale;  // per-axis standard deviation before truncation
    double weight = 0.0;
};

// Points with normal·x < offset get label 0, the rest label 1. Draws closer
// than `margin` (in units of |normal|-scaled distance) to the boundary are
// rejected, which opens a label gap and hence a positive r-separation.
struct HalfplaneRule {
    std::vector<double> normal;
    double offset = 0.0;
    double margin = 0.0;

    ClassId label(std::span<const double> x) const;
    double signed_distance(std::span<const double> x) const;
};

struct MixtureSpec {
    std::vector<MixtureComponent> components;
    HalfplaneRule label_rule;

    std::size_t dim() const { return components.empty() ? 0 : components.front().mean.size(); }

    // Throws InvalidMixture.
    void validate() const;

    static MixtureSpec from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

MixtureSpec load_mixture_spec(const std::filesystem::path& path);

struct SyntheticSample {
    LabeledDataset dataset;
    std::vector<std::size_t> component;  // source component per point
};

// n i.i.d. draws from the mixture of per-component truncated Gaussians on
// [0,1]^d (each component is truncated to the unit box, so component shares
// equal the weights), labeled by the half-plane rule. Reproducible from seed.
SyntheticSample sample_mixture(const MixtureSpec& spec, std::size_t n, std::uint64_t seed);

LabeledDataset generate_synthetic(const MixtureSpec& spec, std::size_t n, std::uint64_t seed);

// Uniform draws on [0,1]^d labeled by the rule, honoring its margin.
LabeledDataset generate_uniform(const HalfplaneRule& rule, std::size_t dim, std::size_t n,
                                std::uint64_t seed);

// ---------------------------------------------------------------------------
// CSV: header x1,...,xd,label; labels are non-negative integers.

LabeledDataset load_csv(const std::filesystem::path& path);
void save_csv(const LabeledDataset& ds, const std::filesystem::path& path);

}  // namespace mlrel
