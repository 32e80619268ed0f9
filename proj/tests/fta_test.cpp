#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>

#include "mlrel/error.hpp"
#include "mlrel/fta.hpp"

using namespace mlrel;
using namespace mlrel::fta;

namespace {

FaultTree two_input(Gate g, double pa, double pb) {
    return FaultTree({{"TE", EventKind::top, g, {"A", "B"}}, {"A", EventKind::basic, Gate::or_gate, {}},
                      {"B", EventKind::basic, Gate::or_gate, {}}},
                     {{"A", pa}, {"B", pb}});
}

ErrorCode code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no error thrown";
    return ErrorCode::InvalidArgument;
}

// Exhaustive sum over all 2^n basic-event outcomes.
double enumerate_te(const FaultTree& tree) {
    std::vector<std::string> bes;
    for (const auto& e : tree.events())
        if (e.kind == EventKind::basic) bes.push_back(e.id);
    const std::size_t n = bes.size();
    double total = 0.0;
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) {
        std::map<std::string, bool> state;
        double w = 1.0;
        for (std::size_t i = 0; i < n; ++i) {
            const bool up = (mask >> i) & 1U;
            state[bes[i]] = up;
            const double p = tree.be_prob().at(bes[i]);
            w *= up ? p : 1.0 - p;
        }
        std::function<bool(const std::string&)> occurs = [&](const std::string& id) {
            const Event& e = tree.event(id);
            if (e.kind == EventKind::basic) return state.at(id);
            if (e.gate == Gate::and_gate) {
                for (const auto& c : e.children)
                    if (!occurs(c)) return false;
                return true;
            }
            for (const auto& c : e.children)
                if (occurs(c)) return true;
            return false;
        };
        if (occurs(tree.top())) total += w;
    }
    return total;
}

FaultTree random_tree(std::mt19937_64& gen, bool allow_sharing) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const std::size_t n_be = 1 + gen() % 12;
    const std::size_t n_ie = gen() % 7;
    std::vector<Event> events;
    std::map<std::string, double> probs;
    std::vector<std::string> pool;
    for (std::size_t i = 0; i < n_be; ++i) {
        const std::string id = "B" + std::to_string(i);
        events.push_back({id, EventKind::basic, Gate::or_gate, {}});
        probs[id] = u(gen);
        pool.push_back(id);
    }
    std::vector<std::string> unused = pool;
    const auto make_gate = [&](const std::string& id, EventKind kind) {
        Event e{id, kind, gen() % 2 ? Gate::and_gate : Gate::or_gate, {}};
        const std::size_t k = 1 + gen() % 3;
        for (std::size_t c = 0; c < k; ++c) {
            std::string child;
            if (!allow_sharing) {
                if (unused.empty()) break;
                const std::size_t at = gen() % unused.size();
                child = unused[at];
                unused.erase(unused.begin() + static_cast<std::ptrdiff_t>(at));
            } else {
                child = pool[gen() % pool.size()];
            }
            e.children.push_back(child);
        }
        if (e.children.empty()) e.children.push_back(pool.front());
        return e;
    };
    for (std::size_t i = 0; i < n_ie; ++i) {
        const std::string id = "G" + std::to_string(i);
        events.push_back(make_gate(id, EventKind::intermediate));
        pool.push_back(id);
        if (!allow_sharing) unused.push_back(id);
    }
    auto top = make_gate("TOP", EventKind::top);
    if (!allow_sharing)
        for (const auto& id : unused) top.children.push_back(id);
    events.push_back(top);
    return FaultTree(events, probs);
}

}  // namespace

TEST(EvaluateTe, TwoInputGates) {
    const auto or_te = evaluate_te(two_input(Gate::or_gate, 0.1, 0.2));
    EXPECT_NEAR(or_te.probability, 0.28, 1e-15);
    EXPECT_EQ(or_te.method, EvalMethod::gate_arithmetic);
    EXPECT_NEAR(evaluate_te(two_input(Gate::and_gate, 0.1, 0.2)).probability, 0.02, 1e-15);
}

TEST(EvaluateTe, RepeatedEventUsesFactoring) {
    // TE = OR(AND(A, B), AND(A, C)): A is shared.
    const FaultTree t({{"TE", EventKind::top, Gate::or_gate, {"G1", "G2"}},
                       {"G1", EventKind::intermediate, Gate::and_gate, {"A", "B"}},
                       {"G2", EventKind::intermediate, Gate::and_gate, {"A", "C"}},
                       {"A", EventKind::basic, Gate::or_gate, {}},
                       {"B", EventKind::basic, Gate::or_gate, {}},
                       {"C", EventKind::basic, Gate::or_gate, {}}},
                      {{"A", 0.5}, {"B", 0.2}, {"C", 0.4}});
    const auto te = evaluate_te(t);
    EXPECT_EQ(te.method, EvalMethod::exact_factoring);
    EXPECT_NEAR(te.probability, 0.5 * (1 - 0.8 * 0.6), 1e-15);
    EXPECT_NEAR(te.probability, enumerate_te(t), 1e-15);
    EXPECT_EQ(t.repeated_basic_events(), std::vector<std::string>{"A"});
    const auto cuts = minimal_cut_sets(t);
    ASSERT_EQ(cuts.size(), 2u);
    EXPECT_EQ(cuts[0], (std::set<std::string>{"A", "B"}));
    EXPECT_EQ(cuts[1], (std::set<std::string>{"A", "C"}));
}

TEST(EvaluateTe, MatchesEnumerationOnRandomTrees) {
    std::mt19937_64 gen(1234);
    for (int trial = 0; trial < 300; ++trial) {
        const auto t = random_tree(gen, trial % 3 != 0);
        EXPECT_NEAR(evaluate_te(t).probability, enumerate_te(t), 1e-12) << t.to_json().dump();
    }
}

TEST(EvaluateTe, MonotoneInEveryBasicEvent) {
    std::mt19937_64 gen(77);
    for (int trial = 0; trial < 100; ++trial) {
        const auto t = random_tree(gen, true);
        const double base = evaluate_te(t).probability;
        for (const auto& id : t.basic_events()) {
            const double p = t.be_prob().at(id);
            const double up = evaluate_te(t.with_probabilities({{id, std::min(1.0, p + 0.1)}})).probability;
            EXPECT_GE(up, base - 1e-15);
        }
    }
}

TEST(EvaluateTe, CutSetFallbacks) {
    // 21 basic events, each reached through two gates.
    std::vector<Event> ev;
    std::map<std::string, double> probs;
    std::vector<std::string> bes;
    for (int i = 0; i < 21; ++i) {
        const std::string id = "X" + std::to_string(i);
        ev.push_back({id, EventKind::basic, Gate::or_gate, {}});
        probs[id] = 0.01 * (i + 1);
        bes.push_back(id);
    }
    ev.push_back({"Y", EventKind::basic, Gate::or_gate, {}});
    probs["Y"] = 0.5;

    // Single minimal cut set (all X): inclusion-exclusion.
    auto and_tree = ev;
    and_tree.push_back({"G1", EventKind::intermediate, Gate::and_gate, bes});
    auto with_y = bes;
    with_y.push_back("Y");
    and_tree.push_back({"G2", EventKind::intermediate, Gate::and_gate, with_y});
    and_tree.push_back({"TE", EventKind::top, Gate::or_gate, {"G1", "G2"}});
    const FaultTree t1(and_tree, probs);
    double prod = 1.0;
    for (int i = 0; i < 21; ++i) prod *= 0.01 * (i + 1);
    const auto r1 = evaluate_te(t1);
    EXPECT_EQ(r1.method, EvalMethod::mcs_inclusion_exclusion);
    EXPECT_NEAR(r1.probability, prod, 1e-30);

    // 21 singleton cut sets: the rare-event upper bound, exact here.
    auto or_tree = ev;
    or_tree.push_back({"G1", EventKind::intermediate, Gate::or_gate, bes});
    or_tree.push_back({"G2", EventKind::intermediate, Gate::or_gate, bes});
    or_tree.push_back({"TE", EventKind::top, Gate::and_gate, {"G1", "G2"}});
    const FaultTree t2(or_tree, probs);
    double q = 1.0;
    for (int i = 0; i < 21; ++i) q *= 1.0 - 0.01 * (i + 1);
    const auto r2 = evaluate_te(t2);
    EXPECT_EQ(r2.method, EvalMethod::mcs_upper_bound);
    EXPECT_NEAR(r2.probability, 1.0 - q, 1e-12);
}

TEST(EvaluateTe, UnboundBasicEvent) {
    const FaultTree t({{"TE", EventKind::top, Gate::or_gate, {"A", "B"}},
                       {"A", EventKind::basic, Gate::or_gate, {}},
                       {"B", EventKind::basic, Gate::or_gate, {}}},
                      {{"A", 0.1}});
    EXPECT_EQ(code_of([&] { evaluate_te(t); }), ErrorCode::UnboundBE);
}

TEST(FaultTreeValidation, StructuralErrors) {
    const Event a{"A", EventKind::basic, Gate::or_gate, {}};
    EXPECT_EQ(code_of([&] {
                  FaultTree({{"T", EventKind::top, Gate::or_gate, {"G"}},
                             {"G", EventKind::intermediate, Gate::or_gate, {"H"}},
                             {"H", EventKind::intermediate, Gate::and_gate, {"G", "A"}}, a},
                            {{"A", 0.1}});
              }),
              ErrorCode::CyclicTree);
    EXPECT_EQ(code_of([&] { FaultTree({{"T", EventKind::top, Gate::or_gate, {"Z"}}, a}, {}); }),
              ErrorCode::UnknownEvent);
    EXPECT_EQ(code_of([&] {
                  FaultTree({{"T", EventKind::top, Gate::or_gate, {"A"}},
                             {"U", EventKind::top, Gate::or_gate, {"A"}}, a},
                            {});
              }),
              ErrorCode::InvalidTree);
    EXPECT_EQ(code_of([&] { FaultTree({{"T", EventKind::top, Gate::or_gate, {}}, a}, {}); }),
              ErrorCode::InvalidTree);
    EXPECT_EQ(code_of([&] { FaultTree({a}, {}); }), ErrorCode::InvalidTree);
    EXPECT_EQ(code_of([&] { FaultTree({{"T", EventKind::top, Gate::or_gate, {"A"}}, a}, {{"A", 1.5}}); }),
              ErrorCode::ProbabilityOutOfRange);
}

TEST(FaultTreeJson, RoundTripAndShippedExample) {
    const auto t = load_fault_tree(MLREL_DATA_DIR "/fault_tree.json");
    EXPECT_EQ(t.top(), "TE");
    const auto back = FaultTree::from_json(t.to_json());
    EXPECT_EQ(back.to_json(), t.to_json());
    EXPECT_NEAR(evaluate_te(t).probability, enumerate_te(t), 1e-15);
}

TEST(Sensitivity, TwoInputGates) {
    EXPECT_NEAR(sensitivity(two_input(Gate::or_gate, 0.1, 0.2), "A", 0.01), 0.8, 1e-6);
    EXPECT_NEAR(sensitivity(two_input(Gate::and_gate, 0.1, 0.2), "A", 0.01), 0.2, 1e-6);
}

TEST(Sensitivity, Errors) {
    const auto t = two_input(Gate::or_gate, 0.1, 0.2);
    EXPECT_EQ(code_of([&] { sensitivity(t, "Q", 0.01); }), ErrorCode::UnknownEvent);
    EXPECT_EQ(code_of([&] { sensitivity(t, "A", 0.2); }), ErrorCode::ProbabilityOutOfRange);
}

TEST(Sensitivity, MatchesExactPartialDerivative) {
    // TE is multilinear in each p, so dTE/dp = TE(p=1) - TE(p=0).
    std::mt19937_64 gen(5);
    for (int trial = 0; trial < 100; ++trial) {
        const auto t = random_tree(gen, true);
        for (const auto& id : t.basic_events()) {
            const double p = t.be_prob().at(id);
            const double delta = std::min({1e-3, p, 1.0 - p});
            if (delta <= 1e-9) continue;
            const double exact = enumerate_te(t.with_probabilities({{id, 1.0}})) -
                                 enumerate_te(t.with_probabilities({{id, 0.0}}));
            EXPECT_NEAR(sensitivity(t, id, delta), exact, 1e-6);
        }
    }
}

TEST(Allocate, AlreadyAtTarget) {
    const auto a = allocate_budget(two_input(Gate::or_gate, 0.1, 0.2), 0.28, AllocationPolicy::uniform_scaling);
    EXPECT_EQ(a.scale, 1.0);
    EXPECT_EQ(a.be_prob.at("A"), 0.1);
    EXPECT_EQ(a.be_prob.at("B"), 0.2);
    const auto b = allocate_budget(two_input(Gate::or_gate, 0.1, 0.1), 0.19, AllocationPolicy::uniform_scaling);
    EXPECT_EQ(b.scale, 1.0);
}

TEST(Allocate, InfeasibleTargets) {
    const auto t = two_input(Gate::and_gate, 0.3, 0.4);
    // Only A scales: TE ranges over [0, 0.4].
    EXPECT_EQ(code_of([&] { allocate_budget(t, 0.5, AllocationPolicy::fixed_subset, {"A"}); }),
              ErrorCode::Infeasible);
    const auto orr = two_input(Gate::or_gate, 0.3, 0.4);
    // Only A scales: TE never drops below P(B) = 0.4.
    EXPECT_EQ(code_of([&] { allocate_budget(orr, 0.2, AllocationPolicy::fixed_subset, {"A"}); }),
              ErrorCode::Infeasible);
}

TEST(Allocate, HitsTargetOnRandomTrees) {
    std::mt19937_64 gen(99);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int solved = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const auto t = random_tree(gen, true);
        const double te = evaluate_te(t).probability;
        if (te <= 1e-6 || te >= 1 - 1e-6) continue;
        const double target = te * (0.05 + 0.9 * u(gen));
        const auto a = allocate_budget(t, target, AllocationPolicy::uniform_scaling);
        const double got = evaluate_te(t.with_probabilities(a.be_prob)).probability;
        EXPECT_LE(got, target);
        EXPECT_GE(got, target * (1 - 1e-6));
        EXPECT_EQ(got, a.te);
        ++solved;
    }
    EXPECT_GT(solved, 100);
}

TEST(Allocate, FixedSubsetLeavesOthersAlone) {
    const auto t = two_input(Gate::or_gate, 0.3, 0.1);
    const auto a = allocate_budget(t, 0.2, AllocationPolicy::fixed_subset, {"A"});
    EXPECT_EQ(a.be_prob.at("B"), 0.1);
    EXPECT_LT(a.be_prob.at("A"), 0.3);
    const double te = 1 - (1 - a.be_prob.at("A")) * 0.9;
    EXPECT_LE(te, 0.2);
    EXPECT_GE(te, 0.2 * (1 - 1e-6));
}

TEST(Chains, ShippedPathIsValid) {
    const auto t = load_fault_tree(MLREL_DATA_DIR "/fault_tree.json");
    const EventChain chain{"BE-0-1", "IE-1-1", "IE-2-2", "IE-3-2", "TE"};
    EXPECT_NO_THROW(chain_to_path(chain, t));
    const auto parsed = chain_from_json(nlohmann::json::parse(R"(["BE-0-1","IE-1-1","IE-2-2","IE-3-2","TE"])"));
    EXPECT_EQ(parsed, chain);
}

TEST(Chains, InvalidPaths) {
    const auto t = load_fault_tree(MLREL_DATA_DIR "/fault_tree.json");
    const EventChain reversed{"TE", "IE-3-2", "IE-2-2", "IE-1-1", "BE-0-1"};
    EXPECT_EQ(code_of([&] { chain_to_path(reversed, t); }), ErrorCode::PathNotInTree);
    const EventChain skipping{"BE-0-1", "IE-1-1", "IE-3-2", "TE"};
    EXPECT_EQ(code_of([&] { chain_to_path(skipping, t); }), ErrorCode::PathNotInTree);
    const EventChain unknown{"BE-9", "TE"};
    EXPECT_EQ(code_of([&] { chain_to_path(unknown, t); }), ErrorCode::PathNotInTree);
}
