#include "mlrel/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "mlrel/error.hpp"
#include "mlrel/parallel.hpp"
#include "mlrel/rng.hpp"
#include "mlrel/robustness.hpp"

namespace mlrel {

namespace {

// Stream tags for generator seeds filled in from the run seed.
constexpr std::uint64_t kDataSeedTag = 0x2001;

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    std::filesystem::path path(p);
    if (path.is_relative() && !base.empty()) return base / path;
    return path;
}

nlohmann::json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::InvalidArgument, path.string() + ": " + e.what());
    }
}

// An inline object, or a path (relative to base) to a JSON file.
nlohmann::json inline_or_file(const nlohmann::json& j, const std::filesystem::path& base) {
    if (j.is_string()) return read_json(resolve(base, j.get<std::string>()));
    return j;
}

HalfplaneRule rule_from_json(const nlohmann::json& j) {
    HalfplaneRule r;
    r.normal = j.at("normal").get<std::vector<double>>();
    r.offset = j.at("offset").get<double>();
    r.margin = j.value("margin", 0.0);
    return r;
}

void require_file(const std::filesystem::path& p) {
    if (!std::filesystem::exists(p)) throw Error(ErrorCode::IoError, "missing file " + p.string());
}

}  // namespace

std::string format6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

// ---------------------------------------------------------------------------

DataSource DataSource::from_json(const nlohmann::json& j, const std::filesystem::path& base) {
    DataSource s;
    try {
        if (j.is_string()) {
            s.kind = Kind::csv;
            s.csv = resolve(base, j.get<std::string>());
            return s;
        }
        const std::string type = j.value("type", j.contains("path") ? "csv" : "mixture");
        if (type == "csv") {
            s.kind = Kind::csv;
            s.csv = resolve(base, j.at("path").get<std::string>());
        } else if (type == "mixture") {
            s.kind = Kind::mixture;
            s.mixture = MixtureSpec::from_json(inline_or_file(j.at("spec"), base));
            s.mixture->validate();
            s.dim = s.mixture->dim();
            s.n = j.at("n").get<std::size_t>();
        } else if (type == "uniform") {
            s.kind = Kind::uniform;
            s.rule = rule_from_json(j.at("rule"));
            s.dim = j.value("dim", s.rule.normal.size());
            s.n = j.at("n").get<std::size_t>();
        } else {
            throw Error(ErrorCode::InvalidArgument, "unknown data source type '" + type + "'");
        }
        if (j.contains("seed")) s.seed = j.at("seed").get<std::uint64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::InvalidArgument, std::string("data source: ") + e.what());
    }
    return s;
}

LabeledDataset DataSource::load() const {
    if (kind == Kind::csv) return load_csv(csv);
    if (!seed) throw Error(ErrorCode::InvalidArgument, "generated data needs a seed");
    if (kind == Kind::mixture) return generate_synthetic(*mixture, n, *seed);
    return generate_uniform(rule, dim, n, *seed);
}

std::string DataSource::describe() const {
    switch (kind) {
        case Kind::csv: return "csv:" + csv.string();
        case Kind::mixture: return "mixture(n=" + std::to_string(n) + ")";
        case Kind::uniform: return "uniform(n=" + std::to_string(n) + ")";
    }
    return "?";
}

// ---------------------------------------------------------------------------

ModelSpec ModelSpec::parse(std::string_view s) {
    ModelSpec m;
    const auto colon = s.find(':');
    const std::string head(s.substr(0, colon));
    const std::string tail = colon == std::string_view::npos ? "" : std::string(s.substr(colon + 1));
    if (head == "knn") {
        m.kind = Kind::knn;
        if (!tail.empty()) {
            try {
                m.k = std::stoul(tail);
            } catch (const std::exception&) {
                throw Error(ErrorCode::InvalidArgument, "bad k in model '" + std::string(s) + "'");
            }
        }
    } else if (head == "oracle") {
        m.kind = Kind::oracle;
        m.oracle = load_oracle(tail);
    } else if (head == "cmd") {
        m.kind = Kind::subprocess;
        m.command = tail;
    } else {
        throw Error(ErrorCode::InvalidArgument, "unknown model '" + std::string(s) + "'");
    }
    if (m.kind == Kind::knn && m.k == 0) throw Error(ErrorCode::InvalidArgument, "knn needs k >= 1");
    if (m.kind == Kind::subprocess && m.command.empty())
        throw Error(ErrorCode::InvalidArgument, "empty model command");
    return m;
}

ModelSpec ModelSpec::from_json(const nlohmann::json& j, const std::filesystem::path& base) {
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s.rfind("oracle:", 0) == 0)
            return parse("oracle:" + resolve(base, s.substr(7)).string());
        return parse(s);
    }
    ModelSpec m;
    try {
        const std::string type = j.at("type").get<std::string>();
        if (type == "knn") {
            m.kind = Kind::knn;
            m.k = j.value("k", std::size_t{1});
            if (m.k == 0) throw Error(ErrorCode::InvalidArgument, "knn needs k >= 1");
        } else if (type == "oracle") {
            m.kind = Kind::oracle;
            m.oracle = OracleClassifier::from_json(inline_or_file(j.at("spec"), base));
        } else if (type == "subprocess") {
            m.kind = Kind::subprocess;
            m.command = j.at("command").get<std::string>();
        } else {
            throw Error(ErrorCode::InvalidArgument, "unknown model type '" + type + "'");
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::InvalidArgument, std::string("model: ") + e.what());
    }
    return m;
}

std::unique_ptr<Classifier> ModelSpec::build(const LabeledDataset& train, Metric metric) const {
    switch (kind) {
        case Kind::knn: return train_knn(train, k, metric);
        case Kind::oracle:
            if (oracle->dim() != train.dim())
                throw Error(ErrorCode::DimensionMismatch, "oracle and data dimensions differ");
            return std::make_unique<OracleClassifier>(*oracle);
        case Kind::subprocess: return std::make_unique<SubprocessClassifier>(command, train.dim());
    }
    throw Error(ErrorCode::InvalidArgument, "unknown model kind");
}

// ---------------------------------------------------------------------------

OpSpec OpSpec::from_json(const nlohmann::json& j, const std::filesystem::path& base,
                         std::uint64_t seed) {
    OpSpec o;
    try {
        const std::string type = j.value("type", "kde");
        if (type == "kde") {
            o.kind = Kind::kde;
        } else if (type == "mixture") {
            o.kind = Kind::mixture;
            if (j.contains("spec")) o.mixture = MixtureSpec::from_json(inline_or_file(j.at("spec"), base));
        } else if (type == "uniform") {
            o.kind = Kind::uniform;
        } else {
            throw Error(ErrorCode::InvalidArgument, "unknown OP type '" + type + "'");
        }
        if (j.contains("kernel")) o.kernel = kernel_from_string(j.at("kernel").get<std::string>());
        if (j.contains("bandwidth")) {
            const auto& b = j.at("bandwidth");
            o.bandwidth = b.is_number() ? BandwidthPolicy::fixed(b.get<double>())
                                        : BandwidthPolicy::parse(b.get<std::string>(), seed);
        }
        o.reflect = j.value("reflect", false);
        o.bootstrap = j.value("bootstrap", std::size_t{100});
        if (j.contains("cell_mode")) {
            const auto m = j.at("cell_mode").get<std::string>();
            if (m == "center_point") o.cell_mode = CellOpMode::center_point;
            else if (m == "exact") o.cell_mode = CellOpMode::exact;
            else throw Error(ErrorCode::InvalidArgument, "unknown cell_mode '" + m + "'");
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::InvalidArgument, std::string("op: ") + e.what());
    }
    return o;
}

// ---------------------------------------------------------------------------

RunConfig RunConfig::from_json(const nlohmann::json& j, const std::filesystem::path& base) {
    RunConfig c;
    try {
        if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
        c.name = j.value("name", c.name);
        if (j.contains("data")) c.data = DataSource::from_json(j.at("data"), base);
        if (j.contains("test_data")) c.test_data = DataSource::from_json(j.at("test_data"), base);
        if (j.contains("frame_data")) c.frame_data = DataSource::from_json(j.at("frame_data"), base);
        if (j.contains("model")) c.model = ModelSpec::from_json(j.at("model"), base);
        if (j.contains("epsilon")) {
            const auto& e = j.at("epsilon");
            if (!(e.is_string() && e.get<std::string>() == "auto")) c.epsilon = e.get<double>();
        }
        c.epsilon_fraction = j.value("epsilon_fraction", c.epsilon_fraction);
        if (j.contains("convention"))
            c.convention = convention_from_string(j.at("convention").get<std::string>());
        if (j.contains("metric")) c.metric = metric_from_string(j.at("metric").get<std::string>());
        if (j.contains("op")) c.op = OpSpec::from_json(j.at("op"), base, c.seed.value_or(0));
        c.n_s = j.value("n_s", c.n_s);
        if (j.contains("vote")) {
            c.vote.samples = j.at("vote").value("samples", c.vote.samples);
            c.vote.strict_ties = j.at("vote").value("strict_ties", c.vote.strict_ties);
        }
        if (j.contains("mode")) {
            const auto m = j.at("mode").get<std::string>();
            if (m == "full") c.mode = RunMode::full;
            else if (m == "sampled") c.mode = RunMode::sampled;
            else if (m == "k_grid") c.mode = RunMode::k_grid;
            else throw Error(ErrorCode::InvalidArgument, "unknown mode '" + m + "'");
        }
        c.k = j.value("k", c.k);
        if (j.contains("k_grid")) c.k_grid = j.at("k_grid").get<std::vector<std::size_t>>();
        if (j.contains("alphas")) c.alphas = j.at("alphas").get<std::vector<double>>();
        c.threads = j.value("threads", c.threads);
        c.max_cells = j.value("max_cells", c.max_cells);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::InvalidArgument, std::string("config: ") + e.what());
    }

    // Generated data without its own seed draws from the run seed.
    if (c.seed) {
        std::uint64_t slot = 0;
        for (auto* src : {&c.data, &c.test_data, &c.frame_data}) {
            if (*src && (*src)->kind != DataSource::Kind::csv && !(*src)->seed)
                (*src)->seed = derive_seed(*c.seed, kDataSeedTag, slot);
            ++slot;
        }
    }
    // A mixture OP without its own spec is the data's generating mixture.
    if (c.op.kind == OpSpec::Kind::mixture && !c.op.mixture && c.data && c.data->mixture)
        c.op.mixture = c.data->mixture;
    return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
    return from_json(read_json(path), path.parent_path());
}

std::vector<RunConfig> load_run_list(const std::filesystem::path& path) {
    const auto j = read_json(path);
    std::vector<RunConfig> out;
    if (j.contains("runs")) {
        for (const auto& r : j.at("runs")) {
            // Top-level keys act as defaults for every run.
            nlohmann::json merged = j;
            merged.erase("runs");
            merged.update(r);
            out.push_back(RunConfig::from_json(merged, path.parent_path()));
        }
    } else {
        out.push_back(RunConfig::from_json(j, path.parent_path()));
    }
    return out;
}

std::uint64_t RunConfig::require_seed() const {
    if (!seed) throw Error(ErrorCode::InvalidArgument, "a seed is required");
    return *seed;
}

void RunConfig::validate() const {
    require_seed();
    if (!data) throw Error(ErrorCode::InvalidArgument, "no dataset configured");
    if (!model) throw Error(ErrorCode::InvalidArgument, "no model configured");
    for (const auto* src : {&data, &test_data, &frame_data})
        if (*src && (*src)->kind == DataSource::Kind::csv) require_file((*src)->csv);
    if (epsilon && !(*epsilon > 0.0)) throw Error(ErrorCode::InvalidArgument, "epsilon must be positive");
    if (!(epsilon_fraction > 0.0 && epsilon_fraction <= 1.0))
        throw Error(ErrorCode::InvalidArgument, "epsilon_fraction must lie in (0, 1]");
    if (n_s < 2) throw Error(ErrorCode::InvalidArgument, "n_s must be at least 2");
    if (vote.samples < 1) throw Error(ErrorCode::InvalidArgument, "vote samples must be at least 1");
    for (double a : alphas)
        if (!(a > 0.0 && a < 1.0)) throw Error(ErrorCode::InvalidArgument, "alpha must lie in (0, 1)");
    if (op.kind == OpSpec::Kind::mixture && !op.mixture)
        throw Error(ErrorCode::InvalidArgument, "mixture OP needs a mixture spec");
    if (op.kind == OpSpec::Kind::kde && op.bootstrap == 1)
        throw Error(ErrorCode::InvalidArgument, "bootstrap needs B >= 2 (or 0 to disable)");
    if (mode == RunMode::sampled && k < 2) throw Error(ErrorCode::KTooSmall, "sampled mode needs k >= 2");
    if (mode == RunMode::k_grid) {
        if (k_grid.empty()) throw Error(ErrorCode::InvalidArgument, "empty k grid");
        for (std::size_t i = 0; i < k_grid.size(); ++i) {
            if (k_grid[i] < 2) throw Error(ErrorCode::KTooSmall, "every k must be >= 2");
            if (i > 0 && k_grid[i] <= k_grid[i - 1])
                throw Error(ErrorCode::InvalidArgument, "k grid must be strictly ascending");
        }
    }
}

// ---------------------------------------------------------------------------

nlohmann::json cmd_rseparation(const RunConfig& cfg) {
    if (!cfg.data) throw Error(ErrorCode::InvalidArgument, "no dataset configured");
    const auto ds = cfg.data->load();
    const auto r = estimate_r_separation(ds, cfg.convention, cfg.metric);
    auto j = to_json(r);
    j["n"] = ds.size();
    j["dim"] = ds.dim();
    j["data"] = cfg.data->describe();
    return j;
}

namespace {

struct OpBundle {
    std::unique_ptr<KdeModel> kde;
    std::unique_ptr<OpDensity> op;  // what cells query
    nlohmann::json description;
};

OpBundle build_op(const OpSpec& spec, const LabeledDataset& train, std::uint64_t seed) {
    OpBundle b;
    switch (spec.kind) {
        case OpSpec::Kind::uniform:
            b.op = std::make_unique<UniformDensity>(train.dim());
            b.description = {{"type", "uniform"}};
            break;
        case OpSpec::Kind::mixture:
            if (spec.mixture->dim() != train.dim())
                throw Error(ErrorCode::DimensionMismatch, "mixture OP and data dimensions differ");
            b.op = std::make_unique<MixtureDensity>(*spec.mixture);
            b.description = {{"type", "mixture"}, {"components", spec.mixture->components.size()}};
            break;
        case OpSpec::Kind::kde:
            b.kde = std::make_unique<KdeModel>(fit_kde(train, spec.kernel, spec.bandwidth, spec.reflect));
            b.description = b.kde->to_json("data");
            b.description["bootstrap"] = spec.bootstrap;
            if (spec.bootstrap >= 2)
                b.op = std::make_unique<BootstrappedKde>(*b.kde, spec.bootstrap,
                                                         derive_seed(seed, stream::bootstrap));
            break;
    }
    b.description["cell_mode"] = to_string(spec.cell_mode);
    return b;
}

const OpDensity& op_of(const OpBundle& b) { return b.op ? *b.op : *b.kde; }

double resolve_epsilon(const RunConfig& cfg, const RSeparation& rsep) {
    return cfg.epsilon ? *cfg.epsilon : cfg.epsilon_fraction * rsep.r_hat;
}

void set_status(std::vector<AssumptionEntry>& list, int id, AssumptionStatus s, std::string note) {
    for (auto& a : list)
        if (a.id == id) {
            a.status = s;
            if (!note.empty()) a.note = std::move(note);
        }
}

struct CellOutcome {
    CellEstimate estimate;
    CellStatus status = CellStatus::empty;
    std::optional<ClassId> label;
    std::size_t n_members = 0;
    std::optional<VoteRecord> vote;
    bool resolved_empty = false;
};

void run_full(const RunConfig& cfg, const LabeledDataset& train, const Classifier& model,
              const OpBundle& op_bundle, AssessOutput& out) {
    const std::uint64_t seed = cfg.require_seed();
    const Partition part = build_partition(train, out.rsep, out.epsilon);
    const CellSpec& spec = part.spec();
    out.cells = spec.shape_string();
    out.cell_count = spec.total_cells;
    if (!spec.enumerable() || spec.total_cells > cfg.max_cells)
        throw Error(ErrorCode::InvalidArgument,
                    "partition of " + format6(spec.total_cells) +
                        " cells exceeds max_cells; use the sampled mode");
    const std::uint64_t m = spec.cell_count();
    const OpDensity& op = op_of(op_bundle);

    std::vector<CellOutcome> cells(m);
    SmcEstimator smc;
    parallel_for(
        m,
        [&](std::size_t i) {
            const Cell cell = part.cell(spec.unlinear(i));
            CellOutcome& o = cells[i];
            o.status = cell.status;
            o.label = cell.label;
            o.n_members = cell.members.size();
            if (cell.status == CellStatus::empty) {
                auto vote = resolve_empty_label(cell, spec, model, cfg.vote, seed);
                o.vote = vote.record;
                o.resolved_empty = true;
                if (vote.label) o.label = vote.label;
                else o.status = CellStatus::cross_boundary;
            }
            if (o.status == CellStatus::cross_boundary) {
                o.estimate.lambda = {1.0, 0.0, EstimateMethod::assigned};
            } else {
                CellRobustnessQuery q;
                q.region = spec.box(cell.index);
                q.ground_truth = *o.label;
                q.classifier = &model;
                q.samples = cfg.n_s;
                q.seed = derive_seed(seed, stream::smc, spec.key(cell.index));
                o.estimate.lambda = smc.estimate(q);
            }
            o.estimate.op = cfg.op.cell_mode == CellOpMode::exact
                                ? cell_op_exact(op, spec.box(cell.index), cell.center, spec.cell_volume)
                                : cell_op(op, cell.center, spec.cell_volume);
        },
        cfg.threads);

    std::vector<CellEstimate> estimates;
    std::vector<Estimate> lambdas;
    estimates.reserve(m);
    lambdas.reserve(m);
    std::size_t n_empty = 0, n_cross = 0, n_tied = 0;
    for (std::size_t i = 0; i < m; ++i) {
        const auto& o = cells[i];
        estimates.push_back(o.estimate);
        lambdas.push_back(o.estimate.lambda);
        if (o.resolved_empty) ++n_empty;
        if (o.status == CellStatus::cross_boundary) ++n_cross;
        if (o.vote && o.vote->tie) ++n_tied;
    }
    out.evaluated_cells = m;

    ReliabilityResult& r = out.result;
    r.mode = AssessmentMode::full_partition;
    r.seed = seed;
    r.pmi = assemble_full(estimates);
    r.acu = acu(lambdas, AcuMode::full_partition);
    r.assumptions = default_assumptions();
    set_status(r.assumptions, 3,
               part.cross_boundary_count() > 0 ? AssumptionStatus::violated : AssumptionStatus::holds,
               part.cross_boundary_count() > 0
                   ? std::to_string(part.cross_boundary_count()) +
                         " occupied cells hold several labels; their unastuteness is set to 1"
                   : "");
    if (n_empty > 0)
        set_status(r.assumptions, 4, AssumptionStatus::flagged,
                   std::to_string(n_empty) + " empty cells took their label from model votes");
    set_status(r.assumptions, 7, AssumptionStatus::not_applicable, "");
    for (const auto& w : part.warnings()) r.diagnostics.push_back(w);
    if (n_tied > 0)
        r.diagnostics.push_back(std::to_string(n_tied) + " empty-cell votes were tied");
    r.diagnostics.push_back(std::to_string(n_cross) + " cells assigned unastuteness 1");

    out.cell_report.reserve(m);
    for (std::size_t i = 0; i < m; ++i) {
        const auto& o = cells[i];
        nlohmann::json j{{"index", spec.unlinear(i)},
                         {"status", to_string(o.status)},
                         {"label", o.label ? nlohmann::json(*o.label) : nlohmann::json(nullptr)},
                         {"n_members", o.n_members},
                         {"op_mean", o.estimate.op.mean},
                         {"op_var", o.estimate.op.variance},
                         {"lambda_mean", o.estimate.lambda.mean},
                         {"lambda_var", o.estimate.lambda.variance},
                         {"method", to_string(o.estimate.lambda.method)},
                         {"n_s", o.estimate.lambda.method == EstimateMethod::smc ? cfg.n_s : 0}};
        if (o.resolved_empty) {
            j["empty_resolved"] = true;
            nlohmann::json tally = nlohmann::json::object();
            for (const auto& [label, count] : o.vote->tally) tally[std::to_string(label)] = count;
            j["vote"] = {{"samples", o.vote->samples}, {"tally", tally}, {"tie", o.vote->tie}};
        }
        out.cell_report.push_back(std::move(j));
    }
}

void report_draws(const SampleFrame& frame, std::span<const std::size_t> draws,
                  std::span<const Estimate> lambdas, std::size_t n_s, AssessOutput& out) {
    for (std::size_t i = 0; i < draws.size(); ++i) {
        const Ball& b = frame.balls[draws[i]];
        out.cell_report.push_back({{"draw", i},
                                   {"ball", draws[i]},
                                   {"center", b.center},
                                   {"label", b.label},
                                   {"weight", b.weight},
                                   {"lambda_mean", lambdas[i].mean},
                                   {"lambda_var", lambdas[i].variance},
                                   {"method", to_string(lambdas[i].method)},
                                   {"n_s", n_s}});
    }
}

void run_sampled(const RunConfig& cfg, const LabeledDataset& train, const Classifier& model,
                 const OpBundle& op_bundle, AssessOutput& out) {
    const std::uint64_t seed = cfg.require_seed();
    const LabeledDataset frame_ds = cfg.frame_data ? cfg.frame_data->load() : train;
    if (frame_ds.dim() != train.dim())
        throw Error(ErrorCode::DimensionMismatch, "frame data and training data dimensions differ");
    const SampleFrame frame = build_sample_frame(frame_ds, op_of(op_bundle), out.epsilon);
    out.cell_count = static_cast<double>(frame.balls.size());

    if (cfg.mode == RunMode::k_grid) {
        out.convergence = k_convergence(frame, model, cfg.k_grid, seed, cfg.n_s, cfg.alphas, cfg.threads);
        out.result = out.convergence.back();
        out.cells = "k=" + std::to_string(out.result.k);
        out.evaluated_cells = out.result.k;
        // Same draws and ball seeds as the last row, so the report matches it.
        const auto draws = draw_balls(frame.balls.size(), out.result.k, seed);
        SmcEstimator smc;
        BallLambdaCache cache(frame, model, smc, cfg.n_s, seed);
        report_draws(frame, draws, cache.lambdas(draws, cfg.threads), cfg.n_s, out);
        return;
    }

    const auto draws = draw_balls(frame.balls.size(), cfg.k, seed);
    SmcEstimator smc;
    BallLambdaCache cache(frame, model, smc, cfg.n_s, seed);
    const auto lambdas = cache.lambdas(draws, cfg.threads);
    std::vector<double> ones(draws.size(), 1.0), means(draws.size());
    for (std::size_t i = 0; i < draws.size(); ++i) means[i] = lambdas[i].mean;
    const auto pmi = assemble_sampled(frame, draws, lambdas);
    const auto flat = assemble_sampled(ones, means);

    ReliabilityResult& r = out.result;
    r.mode = AssessmentMode::sampled;
    r.k = cfg.k;
    r.seed = seed;
    r.pmi = pmi.estimate;
    r.acu = flat.estimate;
    r.assumptions = default_assumptions();
    set_status(r.assumptions, 6, AssumptionStatus::not_applicable, "");
    if (pmi.variance_clamped)
        r.diagnostics.push_back("pmi variance was negative from round-off and set to 0");
    if (flat.variance_clamped)
        r.diagnostics.push_back("ACU variance was negative from round-off and set to 0");
    out.cells = "k=" + std::to_string(cfg.k);
    out.evaluated_cells = cfg.k;

    report_draws(frame, draws, lambdas, cfg.n_s, out);
}

}  // namespace

AssessOutput cmd_assess(const RunConfig& cfg) {
    cfg.validate();
    const auto start = std::chrono::steady_clock::now();
    const std::uint64_t seed = cfg.require_seed();

    AssessOutput out;
    const LabeledDataset train = cfg.data->load();
    out.rsep = estimate_r_separation(train, cfg.convention, cfg.metric);
    out.epsilon = resolve_epsilon(cfg, out.rsep);

    const auto model = cfg.model->build(train, cfg.metric);
    out.train_error = test_error(*model, train);
    if (cfg.test_data) out.test_error = test_error(*model, cfg.test_data->load());

    const OpBundle op = build_op(cfg.op, train, seed);
    if (cfg.mode == RunMode::full) run_full(cfg, train, *model, op, out);
    else run_sampled(cfg, train, *model, op, out);

    std::vector<double> alphas = cfg.alphas;
    if (std::find(alphas.begin(), alphas.end(), 0.025) == alphas.end()) alphas.push_back(0.025);
    out.result.add_bounds(alphas);
    out.result.diagnostics.push_back("op: " + op.description.dump());
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
}

nlohmann::json AssessOutput::result_json() const {
    auto j = result.to_json();
    j["r_separation"] = to_json(rsep);
    j["epsilon"] = epsilon;
    j["cells"] = cells;
    j["cell_count"] = cell_count;
    j["evaluated_cells"] = evaluated_cells;
    j["train_error"] = train_error;
    j["test_error"] = test_error >= 0.0 ? nlohmann::json(test_error) : nlohmann::json(nullptr);
    return j;
}

std::string AssessOutput::cell_report_jsonl() const {
    std::string out;
    for (const auto& j : cell_report) {
        out += j.dump();
        out += '\n';
    }
    return out;
}

std::string table_header() {
    return "name,train_error,test_error,r_separation,epsilon,cells,acu,pmi_mean,pmi_var,ub_975,"
           "seconds_per_cell\n";
}

std::string cmd_reproduce_table(const RunConfig& cfg, bool with_timing) {
    const auto out = cmd_assess(cfg);
    const auto& r = out.result;
    std::string row = cfg.name;
    row += ',' + format6(out.train_error);
    row += ',' + (out.test_error >= 0.0 ? format6(out.test_error) : std::string());
    row += ',' + format6(out.rsep.r_hat);
    row += ',' + format6(out.epsilon);
    row += ',' + out.cells;
    row += ',' + format6(r.acu.mean);
    row += ',' + format6(r.pmi.mean);
    row += ',' + format6(r.pmi.variance);
    row += ',' + format6(r.pmi_ub.at(confidence_key(0.025)).value);
    row += ',';
    if (with_timing && out.evaluated_cells > 0)
        row += format6(out.seconds / static_cast<double>(out.evaluated_cells));
    row += '\n';
    return row;
}

// ---------------------------------------------------------------------------

nlohmann::json FtaReport::to_json() const {
    nlohmann::json j{{"te", te.probability}, {"method", fta::to_string(te.method)}};
    if (allocation)
        j["allocation"] = {{"scale", allocation->scale},
                           {"te", allocation->te},
                           {"be_prob", allocation->be_prob}};
    return j;
}

FtaReport cmd_fta(const fta::FaultTree& tree, const FtaOptions& options) {
    FtaReport rep;
    if (options.chain) fta::chain_to_path(*options.chain, tree);
    rep.te = fta::evaluate_te(tree);

    std::ostringstream summary;
    summary << "top event " << tree.top() << ": P = " << format6(rep.te.probability) << " ("
            << fta::to_string(rep.te.method) << ")\n";
    const auto repeated = tree.repeated_basic_events();
    summary << "basic events: " << tree.basic_events().size() << ", repeated: " << repeated.size()
            << "\n";
    summary << "assumption: basic events are mutually independent\n";
    if (options.chain) {
        summary << "event chain valid:";
        for (const auto& id : *options.chain) summary << ' ' << id;
        summary << '\n';
    }

    rep.sensitivity_csv = "be,probability,sensitivity\n";
    for (const auto& id : tree.basic_events()) {
        const double p = tree.be_prob().at(id);
        // Shrink the step near the ends of [0, 1] so p +/- delta stays valid.
        const double delta = std::min({options.sensitivity_delta, p, 1.0 - p});
        std::string s;
        if (delta > 0.0) s = format6(fta::sensitivity(tree, id, delta));
        rep.sensitivity_csv += id + ',' + format6(p) + ',' + s + '\n';
    }

    if (options.te_target) {
        rep.allocation = fta::allocate_budget(tree, *options.te_target, options.policy, options.subset);
        rep.allocation_csv = "be,current,allocated\n";
        for (const auto& [id, p] : tree.be_prob())
            rep.allocation_csv += id + ',' + format6(p) + ',' + format6(rep.allocation->be_prob.at(id)) + '\n';
        summary << "allocation: scale " << format6(rep.allocation->scale) << " gives P(top) = "
                << format6(rep.allocation->te) << " for target " << format6(*options.te_target) << '\n';
    }
    rep.summary = summary.str();
    return rep;
}

}  // namespace mlrel
