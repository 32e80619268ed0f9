#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "classifier.hpp"
#include "datasets.hpp"
#include "geometry.hpp"

namespace mlrel {

using CellIndex = std::vector<std::uint32_t>;

// Equal cells of side epsilon (the L-infinity "radius") covering [0,1]^d.
struct CellSpec {
    std::size_t dim = 0;
    double epsilon = 0.0;
    std::vector<std::uint32_t> counts_per_axis;
    double cell_volume = 0.0;  // epsilon^d
    double total_cells = 0.0;  // product of counts; may exceed 2^64 in high d

    bool enumerable() const;  // total_cells fits the linear index range
    std::uint64_t cell_count() const;  // requires enumerable()

    CellIndex index_of(std::span<const double> x) const;
    std::vector<double> center(const CellIndex& idx) const;
    Box box(const CellIndex& idx) const;

    std::uint64_t linear(const CellIndex& idx) const;  // requires enumerable()
    CellIndex unlinear(std::uint64_t i) const;

    // Stable per-cell key for RNG stream derivation; the linear index when
    // enumerable, a hash of the coordinates otherwise.
    std::uint64_t key(const CellIndex& idx) const;

    std::string shape_string() const;  // "250x250"
};

enum class CellStatus { normal, empty, cross_boundary };

std::string_view to_string(CellStatus s);

struct VoteRecord {
    std::size_t samples = 0;
    std::map<ClassId, std::size_t> tally;
    bool tie = false;
};

struct Cell {
    CellIndex index;
    std::vector<double> center;
    CellStatus status = CellStatus::empty;
    // Set for normal cells and for empty cells once resolved.
    std::optional<ClassId> label;
    std::vector<std::size_t> members;
    std::optional<VoteRecord> vote;
};

class Partition {
public:
    Partition(CellSpec spec, const LabeledDataset& ds);

    const CellSpec& spec() const noexcept { return spec_; }

    // Cells holding at least one point, in index order.
    const std::map<CellIndex, std::vector<std::size_t>>& occupied() const noexcept {
        return occupied_;
    }

    // Materializes any cell; members are empty for unoccupied cells. Status is
    // left as computed by classify_cell against the partition's dataset.
    Cell cell(const CellIndex& idx) const;

    std::size_t cross_boundary_count() const noexcept { return cross_boundary_count_; }
    const std::vector<std::string>& warnings() const noexcept { return warnings_; }

private:
    CellSpec spec_;
    const LabeledDataset* ds_;
    std::map<CellIndex, std::vector<std::size_t>> occupied_;
    std::size_t cross_boundary_count_ = 0;
    std::vector<std::string> warnings_;
};

CellSpec make_cell_spec(std::size_t dim, double epsilon);

// Throws EpsilonTooLarge unless 0 < epsilon < rsep.r_hat. The partition keeps
// a reference to ds, which must outlive it.
Partition build_partition(const LabeledDataset& ds, const RSeparation& rsep, double epsilon);

struct CellClassification {
    CellStatus status = CellStatus::empty;
    std::optional<ClassId> label;
};

CellClassification classify_cell(const Cell& cell, const LabeledDataset& ds);

struct VoteOptions {
    std::size_t samples = 30;
    // Strict mode marks tied cells cross-boundary instead of picking the
    // smallest class id.
    bool strict_ties = false;
};

struct VoteResult {
    std::optional<ClassId> label;  // empty only for strict-mode ties
    VoteRecord record;
};

// Majority vote of the classifier over uniform draws in the cell. The RNG
// stream is derived from (seed, cell key).
VoteResult resolve_empty_label(const Cell& cell, const CellSpec& spec, const Classifier& c,
                               const VoteOptions& options, std::uint64_t seed);

nlohmann::json cell_report_json(const Cell& cell);

}  // namespace mlrel
