#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "assembly.hpp"
#include "classifier.hpp"
#include "datasets.hpp"
#include "fta.hpp"
#include "op_model.hpp"
#include "partition.hpp"

namespace mlrel {

// Where a dataset comes from: a CSV file, the mixture generator, or uniform
// draws labeled by a half-plane rule.
struct DataSource {
    enum class Kind { csv, mixture, uniform } kind = Kind::csv;
    std::filesystem::path csv;
    std::optional<MixtureSpec> mixture;
    HalfplaneRule rule;  // uniform generator
    std::size_t dim = 2;
    std::size_t n = 0;
    std::optional<std::uint64_t> seed;  // generators only

    static DataSource from_json(const nlohmann::json& j, const std::filesystem::path& base);
    LabeledDataset load() const;
    std::string describe() const;
};

struct ModelSpec {
    enum class Kind { knn, oracle, subprocess } kind = Kind::knn;
    std::size_t k = 1;
    std::optional<OracleClassifier> oracle;
    std::string command;

    static ModelSpec from_json(const nlohmann::json& j, const std::filesystem::path& base);
    // "knn:3", "oracle:path.json", "cmd:python3 model.py"
    static ModelSpec parse(std::string_view s);
    std::unique_ptr<Classifier> build(const LabeledDataset& train, Metric metric) const;
};

struct OpSpec {
    enum class Kind { kde, mixture, uniform } kind = Kind::kde;
    KernelType kernel = KernelType::gaussian;
    BandwidthPolicy bandwidth = BandwidthPolicy::rule_of_thumb();
    bool reflect = false;
    std::size_t bootstrap = 100;
    CellOpMode cell_mode = CellOpMode::center_point;
    std::optional<MixtureSpec> mixture;

    static OpSpec from_json(const nlohmann::json& j, const std::filesystem::path& base,
                            std::uint64_t seed);
};

enum class RunMode { full, sampled, k_grid };

struct RunConfig {
    std::string name = "run";
    std::optional<DataSource> data;
    std::optional<DataSource> test_data;
    // Sampled mode: dataset for the frame; defaults to `data`.
    std::optional<DataSource> frame_data;
    std::optional<ModelSpec> model;
    std::optional<double> epsilon;
    double epsilon_fraction = 0.99;  // epsilon = fraction * r_hat when unset
    SeparationConvention convention = SeparationConvention::half_min_cross_distance;
    Metric metric = Metric::linf;
    OpSpec op;
    std::size_t n_s = 1000;
    VoteOptions vote;
    RunMode mode = RunMode::full;
    std::size_t k = 0;
    std::vector<std::size_t> k_grid;
    std::vector<double> alphas{0.025};
    std::optional<std::uint64_t> seed;
    std::size_t threads = 0;
    // Maximum cells a full-partition run will enumerate.
    double max_cells = 5.0e7;

    static RunConfig from_json(const nlohmann::json& j, const std::filesystem::path& base = {});
    static RunConfig load(const std::filesystem::path& path);
    // Throws InvalidArgument for missing seed, data or model and for
    // inconsistent mode settings; IoError for missing files.
    void validate() const;
    std::uint64_t require_seed() const;
};

// A config file holding one run, or {"runs": [...]} with several.
std::vector<RunConfig> load_run_list(const std::filesystem::path& path);

nlohmann::json cmd_rseparation(const RunConfig& cfg);

struct AssessOutput {
    ReliabilityResult result;
    std::vector<nlohmann::json> cell_report;  // one object per cell / drawn ball
    std::vector<ReliabilityResult> convergence;  // k_grid mode
    RSeparation rsep;
    double epsilon = 0.0;
    std::string cells;  // "250x250" or "k=..."
    double cell_count = 0.0;
    double seconds = 0.0;
    std::size_t evaluated_cells = 0;
    double train_error = -1.0;
    double test_error = -1.0;

    nlohmann::json result_json() const;
    std::string cell_report_jsonl() const;
};

AssessOutput cmd_assess(const RunConfig& cfg);

// Columns: name,train_error,test_error,r_separation,epsilon,cells,acu,
// pmi_mean,pmi_var,ub_975,seconds_per_cell. Numbers at 6 significant digits;
// seconds_per_cell is left blank unless with_timing.
std::string table_header();
std::string cmd_reproduce_table(const RunConfig& cfg, bool with_timing = false);

struct FtaOptions {
    double sensitivity_delta = 1e-4;
    std::optional<double> te_target;
    fta::AllocationPolicy policy = fta::AllocationPolicy::uniform_scaling;
    std::vector<std::string> subset;
    std::optional<fta::EventChain> chain;
};

struct FtaReport {
    fta::TopEventProbability te;
    std::string summary;            // human report
    std::string sensitivity_csv;    // be,probability,sensitivity
    std::string allocation_csv;     // be,current,allocated
    nlohmann::json to_json() const;
    std::optional<fta::Allocation> allocation;
};

FtaReport cmd_fta(const fta::FaultTree& tree, const FtaOptions& options);

// %.6g
std::string format6(double v);

}  // namespace mlrel
