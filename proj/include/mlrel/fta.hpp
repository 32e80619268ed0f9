#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace mlrel::fta {

enum class EventKind { basic, intermediate, top };
enum class Gate { and_gate, or_gate };

std::string_view to_string(EventKind k);
std::string_view to_string(Gate g);

struct Event {
    std::string id;
    EventKind kind = EventKind::basic;
    Gate gate = Gate::or_gate;  // IE / TE only
    std::vector<std::string> children;
};

// A fault tree over mutually independent basic events. The structure is a DAG
// rooted at the single top event; subtrees and basic events may be shared.
class FaultTree {
public:
    // Validates structure; throws InvalidTree, CyclicTree, UnknownEvent,
    // ProbabilityOutOfRange.
    FaultTree(std::vector<Event> events, std::map<std::string, double> be_prob);

    const std::string& top() const noexcept { return top_; }
    const Event& event(const std::string& id) const;
    bool contains(const std::string& id) const { return index_.count(id) != 0; }
    const std::vector<Event>& events() const noexcept { return events_; }
    const std::map<std::string, double>& be_prob() const noexcept { return be_prob_; }

    // Basic events reachable from the top event, sorted by id.
    std::vector<std::string> basic_events() const;

    // Basic events reachable from the top by more than one path.
    std::vector<std::string> repeated_basic_events() const;

    FaultTree with_probabilities(const std::map<std::string, double>& probs) const;

    static FaultTree from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;

private:
    std::vector<Event> events_;
    std::map<std::string, std::size_t> index_;
    std::map<std::string, double> be_prob_;
    std::string top_;
};

FaultTree load_fault_tree(const std::filesystem::path& path);

enum class EvalMethod { gate_arithmetic, exact_factoring, mcs_inclusion_exclusion, mcs_upper_bound };

std::string_view to_string(EvalMethod m);

struct TopEventProbability {
    double probability = 0.0;
    EvalMethod method = EvalMethod::gate_arithmetic;
};

// Factoring limit on repeated basic events before falling back to cut sets.
inline constexpr std::size_t kMaxFactoredEvents = 20;

// Plain gate arithmetic when no basic event is repeated; otherwise exact
// Shannon factoring on the repeated events (up to kMaxFactoredEvents), and
// minimal cut sets beyond that. Throws UnboundBE.
TopEventProbability evaluate_te(const FaultTree& tree);

// Minimal cut sets of the top event, each a sorted set of basic-event ids.
std::vector<std::set<std::string>> minimal_cut_sets(const FaultTree& tree);

// Central difference (TE(p+d) - TE(p-d)) / 2d. Throws UnknownEvent,
// ProbabilityOutOfRange.
double sensitivity(const FaultTree& tree, const std::string& be_id, double delta);

enum class AllocationPolicy { uniform_scaling, fixed_subset };

struct Allocation {
    std::map<std::string, double> be_prob;
    double scale = 1.0;
    double te = 0.0;
};

// Scales the selected basic events' probabilities by a common factor found by
// bisection so that TE lands in [target (1 - 1e-6), target]. Throws
// Infeasible when no factor in [0, min 1/p] reaches the target.
Allocation allocate_budget(const FaultTree& tree, double te_target, AllocationPolicy policy,
                           const std::vector<std::string>& subset = {});

// Chain from cause (a basic event) to consequence (the top event).
using EventChain = std::vector<std::string>;

// Verifies the chain is a leaf-to-root path; throws PathNotInTree.
void chain_to_path(const EventChain& chain, const FaultTree& tree);

EventChain chain_from_json(const nlohmann::json& j);

}  // namespace mlrel::fta
