// Command-line front end: rsep, assess, table, fta, gen.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mlrel/error.hpp"
#include "mlrel/fta.hpp"
#include "mlrel/parallel.hpp"
#include "mlrel/pipeline.hpp"

namespace {

using namespace mlrel;

// Flags shared by rsep, assess and table; each overrides the config file.
struct RunFlags {
    std::string config;
    std::string data;
    std::string test_data;
    std::string frame_data;
    std::string mixture;
    std::size_t n = 0;
    std::string model;
    std::optional<double> epsilon;
    std::optional<double> epsilon_fraction;
    std::string convention;
    std::string metric;
    std::string op;
    std::string kernel;
    std::string bandwidth;
    bool reflect = false;
    std::optional<std::size_t> bootstrap;
    std::string cell_mode;
    std::optional<std::size_t> n_s;
    std::optional<std::size_t> vote_samples;
    bool strict_ties = false;
    std::string mode;
    std::optional<std::size_t> k;
    std::vector<std::size_t> k_grid;
    std::vector<double> alphas;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> threads;
    std::optional<double> max_cells;

    void attach(CLI::App* app) {
        app->add_option("--config", config, "JSON run config");
        app->add_option("--data", data, "training data CSV");
        app->add_option("--test-data", test_data, "test data CSV");
        app->add_option("--frame-data", frame_data, "sample-frame data CSV (sampled modes)");
        app->add_option("--mixture", mixture, "generate training data from this mixture spec");
        app->add_option("--n", n, "points to generate with --mixture");
        app->add_option("--model", model, "knn:K | oracle:FILE | cmd:COMMAND");
        app->add_option("--epsilon", epsilon, "cell side; default fraction * r_hat");
        app->add_option("--epsilon-fraction", epsilon_fraction, "epsilon as a fraction of r_hat");
        app->add_option("--convention", convention, "r-separation convention: half | raw");
        app->add_option("--metric", metric, "linf | l2");
        app->add_option("--op", op, "kde | mixture | uniform");
        app->add_option("--kernel", kernel, "gaussian | exponential");
        app->add_option("--bandwidth", bandwidth, "rot | cv | fixed:H");
        app->add_flag("--reflect", reflect, "reflect the KDE at the unit-box faces");
        app->add_option("--bootstrap", bootstrap, "bootstrap replicates (0 disables)");
        app->add_option("--cell-op", cell_mode, "center_point | exact");
        app->add_option("--n-s", n_s, "SMC samples per cell");
        app->add_option("--vote-samples", vote_samples, "classifier votes per empty cell");
        app->add_flag("--strict-ties", strict_ties, "tied empty cells become cross-boundary");
        app->add_option("--mode", mode, "full | sampled | k_grid");
        app->add_option("--k", k, "balls drawn in sampled mode");
        app->add_option("--k-grid", k_grid, "ascending k values")->delimiter(',');
        app->add_option("--alpha", alphas, "bound levels alpha (repeatable)");
        app->add_option("--seed", seed, "master seed");
        app->add_option("--threads", threads, "worker threads");
        app->add_option("--max-cells", max_cells, "largest partition a full run enumerates");
    }

    RunConfig apply(RunConfig cfg) const {
        if (seed) cfg.seed = *seed;
        const auto csv_source = [](const std::string& p) {
            DataSource s;
            s.kind = DataSource::Kind::csv;
            s.csv = p;
            return s;
        };
        if (!data.empty()) cfg.data = csv_source(data);
        if (!mixture.empty()) {
            DataSource s;
            s.kind = DataSource::Kind::mixture;
            s.mixture = load_mixture_spec(mixture);
            s.dim = s.mixture->dim();
            s.n = n;
            if (cfg.seed) s.seed = derive_seed(*cfg.seed, 0x2001, 0);
            cfg.data = s;
        }
        if (!test_data.empty()) cfg.test_data = csv_source(test_data);
        if (!frame_data.empty()) cfg.frame_data = csv_source(frame_data);
        if (!model.empty()) cfg.model = ModelSpec::parse(model);
        if (epsilon) cfg.epsilon = *epsilon;
        if (epsilon_fraction) cfg.epsilon_fraction = *epsilon_fraction;
        if (!convention.empty()) cfg.convention = convention_from_string(convention);
        if (!metric.empty()) cfg.metric = metric_from_string(metric);
        if (!op.empty()) {
            if (op == "kde") cfg.op.kind = OpSpec::Kind::kde;
            else if (op == "uniform") cfg.op.kind = OpSpec::Kind::uniform;
            else if (op == "mixture") {
                cfg.op.kind = OpSpec::Kind::mixture;
                if (!cfg.op.mixture && cfg.data && cfg.data->mixture) cfg.op.mixture = cfg.data->mixture;
            } else {
                throw Error(ErrorCode::InvalidArgument, "unknown OP '" + op + "'");
            }
        }
        if (!kernel.empty()) cfg.op.kernel = kernel_from_string(kernel);
        if (!bandwidth.empty()) cfg.op.bandwidth = BandwidthPolicy::parse(bandwidth, cfg.seed.value_or(0));
        if (reflect) cfg.op.reflect = true;
        if (bootstrap) cfg.op.bootstrap = *bootstrap;
        if (!cell_mode.empty()) {
            if (cell_mode == "center_point") cfg.op.cell_mode = CellOpMode::center_point;
            else if (cell_mode == "exact") cfg.op.cell_mode = CellOpMode::exact;
            else throw Error(ErrorCode::InvalidArgument, "unknown cell OP mode '" + cell_mode + "'");
        }
        if (n_s) cfg.n_s = *n_s;
        if (vote_samples) cfg.vote.samples = *vote_samples;
        if (strict_ties) cfg.vote.strict_ties = true;
        if (!mode.empty()) {
            if (mode == "full") cfg.mode = RunMode::full;
            else if (mode == "sampled") cfg.mode = RunMode::sampled;
            else if (mode == "k_grid") cfg.mode = RunMode::k_grid;
            else throw Error(ErrorCode::InvalidArgument, "unknown mode '" + mode + "'");
        }
        if (k) cfg.k = *k;
        if (!k_grid.empty()) cfg.k_grid = k_grid;
        if (!alphas.empty()) cfg.alphas = alphas;
        if (threads) cfg.threads = *threads;
        if (max_cells) cfg.max_cells = *max_cells;
        return cfg;
    }

    std::vector<RunConfig> configs() const {
        std::vector<RunConfig> list;
        if (config.empty()) list.emplace_back();
        else list = load_run_list(config);
        for (auto& c : list) c = apply(std::move(c));
        return list;
    }
};

void write_text(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
    out << text;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Operational reliability assessment of classifiers and fault-tree analysis"};
    app.require_subcommand(1);

    RunFlags rsep_flags, assess_flags, table_flags;
    std::string out_path, cells_path, convergence_path;
    bool timing = false;

    auto* rsep = app.add_subcommand("rsep", "estimate the r-separation of a dataset");
    rsep_flags.attach(rsep);
    rsep->add_option("--out", out_path, "output JSON (default stdout)");

    auto* assess = app.add_subcommand("assess", "assess pmi and ACU of a model");
    assess_flags.attach(assess);
    assess->add_option("--out", out_path, "result JSON (default stdout)");
    assess->add_option("--cells", cells_path, "per-cell report, JSON lines");
    assess->add_option("--convergence-csv", convergence_path, "k-convergence table (k_grid mode)");

    auto* table = app.add_subcommand("table", "one summary CSV row per configured run");
    table_flags.attach(table);
    table->add_option("--out", out_path, "output CSV (default stdout)");
    table->add_flag("--timing", timing, "fill the seconds_per_cell column");

    std::string tree_path, chain_path, policy = "uniform", fta_json;
    std::vector<std::string> subset;
    std::optional<double> target;
    double delta = 1e-4;
    auto* fta_cmd = app.add_subcommand("fta", "fault-tree evaluation, sensitivity and allocation");
    fta_cmd->add_option("--tree", tree_path, "fault-tree JSON")->required();
    fta_cmd->add_option("--chain", chain_path, "event chain JSON to check against the tree");
    fta_cmd->add_option("--target", target, "top-event probability to allocate");
    fta_cmd->add_option("--policy", policy, "uniform | subset");
    fta_cmd->add_option("--subset", subset, "basic events scaled under the subset policy")->delimiter(',');
    fta_cmd->add_option("--delta", delta, "finite-difference step for sensitivities");
    fta_cmd->add_option("--json", fta_json, "write a JSON summary here");
    fta_cmd->add_option("--out", out_path, "write the CSV tables here (default stdout)");

    std::string gen_mixture, gen_out;
    std::size_t gen_n = 0, gen_dim = 2;
    std::uint64_t gen_seed = 0;
    std::vector<double> gen_normal;
    double gen_offset = 0.5, gen_margin = 0.0;
    auto* gen = app.add_subcommand("gen", "generate a labeled dataset as CSV");
    gen->add_option("--mixture", gen_mixture, "mixture spec JSON (otherwise uniform draws)");
    gen->add_option("--n", gen_n, "points")->required();
    gen->add_option("--seed", gen_seed, "seed")->required();
    gen->add_option("--dim", gen_dim, "dimension for uniform draws");
    gen->add_option("--normal", gen_normal, "half-plane normal for uniform draws")->delimiter(',');
    gen->add_option("--offset", gen_offset, "half-plane offset for uniform draws");
    gen->add_option("--margin", gen_margin, "label gap for uniform draws");
    gen->add_option("--out", gen_out, "output CSV")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (rsep->parsed()) {
            for (const auto& cfg : rsep_flags.configs())
                write_text(out_path, cmd_rseparation(cfg).dump(2) + "\n");
        } else if (assess->parsed()) {
            auto list = assess_flags.configs();
            if (list.size() != 1) throw Error(ErrorCode::InvalidArgument, "assess takes a single run");
            const auto& cfg = list.front();
            if (cfg.threads) set_default_thread_count(cfg.threads);
            const auto result = cmd_assess(cfg);
            write_text(out_path, result.result_json().dump(2) + "\n");
            if (!cells_path.empty()) write_text(cells_path, result.cell_report_jsonl());
            if (!convergence_path.empty()) {
                if (result.convergence.empty())
                    throw Error(ErrorCode::InvalidArgument, "--convergence-csv needs --mode k_grid");
                write_text(convergence_path, k_convergence_csv(result.convergence));
            }
            std::fprintf(stderr, "%zu cells in %.3f s\n", result.evaluated_cells, result.seconds);
        } else if (table->parsed()) {
            std::string csv = table_header();
            for (const auto& cfg : table_flags.configs()) {
                if (cfg.threads) set_default_thread_count(cfg.threads);
                csv += cmd_reproduce_table(cfg, timing);
            }
            write_text(out_path, csv);
        } else if (fta_cmd->parsed()) {
            const auto tree = fta::load_fault_tree(tree_path);
            FtaOptions opt;
            opt.sensitivity_delta = delta;
            opt.te_target = target;
            if (policy == "uniform") opt.policy = fta::AllocationPolicy::uniform_scaling;
            else if (policy == "subset") opt.policy = fta::AllocationPolicy::fixed_subset;
            else throw Error(ErrorCode::InvalidArgument, "unknown policy '" + policy + "'");
            opt.subset = subset;
            if (!chain_path.empty()) {
                std::ifstream in(chain_path);
                if (!in) throw Error(ErrorCode::IoError, "cannot open " + chain_path);
                opt.chain = fta::chain_from_json(nlohmann::json::parse(in));
            }
            const auto rep = cmd_fta(tree, opt);
            std::cerr << rep.summary;
            std::string csv = "te,method\n" + format6(rep.te.probability) + ',' +
                              std::string(fta::to_string(rep.te.method)) + "\n\n" + rep.sensitivity_csv;
            if (rep.allocation) csv += "\n" + rep.allocation_csv;
            write_text(out_path, csv);
            if (!fta_json.empty()) write_text(fta_json, rep.to_json().dump(2) + "\n");
        } else if (gen->parsed()) {
            LabeledDataset ds;
            if (!gen_mixture.empty()) {
                ds = generate_synthetic(load_mixture_spec(gen_mixture), gen_n, gen_seed);
            } else {
                HalfplaneRule rule;
                rule.normal = gen_normal.empty() ? std::vector<double>(gen_dim, 0.0) : gen_normal;
                if (gen_normal.empty()) rule.normal[0] = 1.0;
                rule.offset = gen_offset;
                rule.margin = gen_margin;
                ds = generate_uniform(rule, gen_dim, gen_n, gen_seed);
            }
            save_csv(ds, gen_out);
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
