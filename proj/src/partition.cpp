#include "mlrel/partition.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "mlrel/error.hpp"
#include "mlrel/rng.hpp"

namespace mlrel {

CellSpec make_cell_spec(std::size_t dim, double epsilon) {
    if (dim == 0) throw Error(ErrorCode::DimensionMismatch, "dimension must be positive");
    if (!(epsilon > 0.0) || !std::isfinite(epsilon))
        throw Error(ErrorCode::InvalidArgument, "epsilon must be positive");
    CellSpec spec;
    spec.dim = dim;
    spec.epsilon = epsilon;
    // 1/0.004 evaluates to 250.00000000000003; the slack keeps it at 250.
    const double per_axis = std::max(1.0, std::ceil(1.0 / epsilon - 1e-9));
    if (per_axis > 4.0e9) throw Error(ErrorCode::InvalidArgument, "epsilon too small");
    spec.counts_per_axis.assign(dim, static_cast<std::uint32_t>(per_axis));
    spec.cell_volume = std::pow(epsilon, static_cast<double>(dim));
    spec.total_cells = std::pow(per_axis, static_cast<double>(dim));
    return spec;
}

bool CellSpec::enumerable() const { return total_cells < 9.0e18; }

std::uint64_t CellSpec::cell_count() const {
    std::uint64_t m = 1;
    for (auto c : counts_per_axis) m *= c;
    return m;
}

CellIndex CellSpec::index_of(std::span<const double> x) const {
    CellIndex idx(dim);
    for (std::size_t a = 0; a < dim; ++a) {
        const double f = std::floor(x[a] / epsilon);
        const double last = static_cast<double>(counts_per_axis[a] - 1);
        idx[a] = static_cast<std::uint32_t>(std::clamp(f, 0.0, last));
    }
    return idx;
}

std::vector<double> CellSpec::center(const CellIndex& idx) const {
    std::vector<double> c(dim);
    for (std::size_t a = 0; a < dim; ++a) c[a] = (static_cast<double>(idx[a]) + 0.5) * epsilon;
    return c;
}

Box CellSpec::box(const CellIndex& idx) const {
    Box b{std::vector<double>(dim), std::vector<double>(dim)};
    for (std::size_t a = 0; a < dim; ++a) {
        b.lo[a] = static_cast<double>(idx[a]) * epsilon;
        b.hi[a] = std::min(1.0, (static_cast<double>(idx[a]) + 1.0) * epsilon);
        if (idx[a] + 1 == counts_per_axis[a]) b.hi[a] = 1.0;
    }
    return b;
}

std::uint64_t CellSpec::linear(const CellIndex& idx) const {
    std::uint64_t i = 0;
    for (std::size_t a = 0; a < dim; ++a) i = i * counts_per_axis[a] + idx[a];
    return i;
}

CellIndex CellSpec::unlinear(std::uint64_t i) const {
    CellIndex idx(dim);
    for (std::size_t a = dim; a-- > 0;) {
        idx[a] = static_cast<std::uint32_t>(i % counts_per_axis[a]);
        i /= counts_per_axis[a];
    }
    return idx;
}

std::uint64_t CellSpec::key(const CellIndex& idx) const {
    if (enumerable()) return linear(idx);
    std::uint64_t h = 0x51ed270b27e5ULL;
    for (auto v : idx) h = mix64(h ^ v);
    return h;
}

std::string CellSpec::shape_string() const {
    std::string s;
    for (std::size_t a = 0; a < dim; ++a) {
        if (a) s += 'x';
        s += std::to_string(counts_per_axis[a]);
    }
    return s;
}

std::string_view to_string(CellStatus s) {
    switch (s) {
        case CellStatus::normal: return "normal";
        case CellStatus::empty: return "empty";
        case CellStatus::cross_boundary: return "cross_boundary";
    }
    return "unknown";
}

// ---------------------------------------------------------------------------

Partition::Partition(CellSpec spec, const LabeledDataset& ds) : spec_(std::move(spec)), ds_(&ds) {
    if (ds.dim() != spec_.dim)
        throw Error(ErrorCode::DimensionMismatch, "dataset and cell spec dimensions differ");
    for (std::size_t i = 0; i < ds.size(); ++i) occupied_[spec_.index_of(ds.point(i))].push_back(i);
    for (const auto& [idx, members] : occupied_) {
        Cell c;
        c.members = members;
        if (classify_cell(c, ds).status == CellStatus::cross_boundary) ++cross_boundary_count_;
    }
    if (cross_boundary_count_ > 0)
        warnings_.push_back(std::to_string(cross_boundary_count_) +
                            " cross-boundary cells: differently labeled points share a cell, so "
                            "the r-separation estimate is too large for this data");
}

Cell Partition::cell(const CellIndex& idx) const {
    Cell c;
    c.index = idx;
    c.center = spec_.center(idx);
    if (auto it = occupied_.find(idx); it != occupied_.end()) c.members = it->second;
    const auto cls = classify_cell(c, *ds_);
    c.status = cls.status;
    c.label = cls.label;
    return c;
}

Partition build_partition(const LabeledDataset& ds, const RSeparation& rsep, double epsilon) {
    if (!(epsilon > 0.0))
        throw Error(ErrorCode::InvalidArgument, "epsilon must be positive");
    if (!(epsilon < rsep.r_hat))
        throw Error(ErrorCode::EpsilonTooLarge, "epsilon " + std::to_string(epsilon) +
                                                    " is not below r_hat " +
                                                    std::to_string(rsep.r_hat));
    return Partition(make_cell_spec(ds.dim(), epsilon), ds);
}

CellClassification classify_cell(const Cell& cell, const LabeledDataset& ds) {
    if (cell.members.empty()) return {CellStatus::empty, std::nullopt};
    std::set<ClassId> labels;
    for (std::size_t i : cell.members) labels.insert(ds.label(i));
    if (labels.size() == 1) return {CellStatus::normal, *labels.begin()};
    return {CellStatus::cross_boundary, std::nullopt};
}

VoteResult resolve_empty_label(const Cell& cell, const CellSpec& spec, const Classifier& c,
                               const VoteOptions& options, std::uint64_t seed) {
    if (options.samples == 0) throw Error(ErrorCode::InvalidArgument, "vote needs s >= 1");
    const Box box = spec.box(cell.index);
    Rng rng = make_rng(seed, stream::empty_vote, spec.key(cell.index));
    std::vector<double> xs(options.samples * spec.dim);
    for (std::size_t s = 0; s < options.samples; ++s)
        sample_uniform(box, rng, std::span<double>(xs).subspan(s * spec.dim, spec.dim));
    std::vector<ClassId> predicted(options.samples);
    c.predict_batch(xs, predicted);

    VoteResult result;
    result.record.samples = options.samples;
    for (ClassId y : predicted) ++result.record.tally[y];
    std::size_t best = 0;
    for (const auto& [label, count] : result.record.tally) {
        if (count > best) {
            best = count;
            result.label = label;
            result.record.tie = false;
        } else if (count == best) {
            result.record.tie = true;
        }
    }
    if (result.record.tie && options.strict_ties) result.label.reset();
    return result;
}

nlohmann::json cell_report_json(const Cell& cell) {
    nlohmann::json j{{"index", cell.index},
                     {"status", to_string(cell.status)},
                     {"label", cell.label ? nlohmann::json(*cell.label) : nlohmann::json(nullptr)},
                     {"n_members", cell.members.size()}};
    if (cell.vote) {
        nlohmann::json tally = nlohmann::json::object();
        for (const auto& [label, count] : cell.vote->tally) tally[std::to_string(label)] = count;
        j["vote"] = {{"samples", cell.vote->samples}, {"tally", tally}, {"tie", cell.vote->tie}};
    }
    return j;
}

}  // namespace mlrel
