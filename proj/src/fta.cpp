#include "mlrel/fta.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>

#include "mlrel/error.hpp"

namespace mlrel::fta {

std::string_view to_string(EventKind k) {
    switch (k) {
        case EventKind::basic: return "BE";
        case EventKind::intermediate: return "IE";
        case EventKind::top: return "TE";
    }
    return "?";
}

std::string_view to_string(Gate g) { return g == Gate::and_gate ? "AND" : "OR"; }

std::string_view to_string(EvalMethod m) {
    switch (m) {
        case EvalMethod::gate_arithmetic: return "gate_arithmetic";
        case EvalMethod::exact_factoring: return "exact_factoring";
        case EvalMethod::mcs_inclusion_exclusion: return "mcs_inclusion_exclusion";
        case EvalMethod::mcs_upper_bound: return "mcs_upper_bound";
    }
    return "?";
}

namespace {

void check_probability(const std::string& id, double p) {
    if (!(p >= 0.0 && p <= 1.0))
        throw Error(ErrorCode::ProbabilityOutOfRange,
                    "probability of '" + id + "' is outside [0, 1]");
}

EventKind parse_kind(const std::string& s) {
    if (s == "BE" || s == "basic") return EventKind::basic;
    if (s == "IE" || s == "intermediate") return EventKind::intermediate;
    if (s == "TE" || s == "top") return EventKind::top;
    throw Error(ErrorCode::InvalidTree, "unknown event kind '" + s + "'");
}

Gate parse_gate(const std::string& s) {
    if (s == "AND" || s == "and") return Gate::and_gate;
    if (s == "OR" || s == "or") return Gate::or_gate;
    throw Error(ErrorCode::InvalidTree, "unknown gate '" + s + "'");
}

}  // namespace

FaultTree::FaultTree(std::vector<Event> events, std::map<std::string, double> be_prob)
    : events_(std::move(events)), be_prob_(std::move(be_prob)) {
    for (std::size_t i = 0; i < events_.size(); ++i) {
        const Event& e = events_[i];
        if (e.id.empty()) throw Error(ErrorCode::InvalidTree, "event with empty id");
        if (!index_.emplace(e.id, i).second)
            throw Error(ErrorCode::InvalidTree, "duplicate event id '" + e.id + "'");
        if (e.kind == EventKind::top) {
            if (!top_.empty()) throw Error(ErrorCode::InvalidTree, "more than one top event");
            top_ = e.id;
        }
    }
    if (top_.empty()) throw Error(ErrorCode::InvalidTree, "no top event");
    for (const Event& e : events_) {
        if (e.kind == EventKind::basic && !e.children.empty())
            throw Error(ErrorCode::InvalidTree, "basic event '" + e.id + "' has children");
        if (e.kind != EventKind::basic && e.children.empty())
            throw Error(ErrorCode::InvalidTree, "gate event '" + e.id + "' has no children");
        for (const auto& c : e.children) {
            auto it = index_.find(c);
            if (it == index_.end())
                throw Error(ErrorCode::UnknownEvent, "'" + e.id + "' references unknown '" + c + "'");
            if (events_[it->second].kind == EventKind::top)
                throw Error(ErrorCode::InvalidTree, "top event used as a child of '" + e.id + "'");
        }
    }
    for (const auto& [id, p] : be_prob_) {
        auto it = index_.find(id);
        if (it == index_.end())
            throw Error(ErrorCode::UnknownEvent, "probability given for unknown event '" + id + "'");
        if (events_[it->second].kind != EventKind::basic)
            throw Error(ErrorCode::InvalidTree, "probability given for gate event '" + id + "'");
        check_probability(id, p);
    }

    // 0 = unvisited, 1 = on stack, 2 = done
    std::vector<int> state(events_.size(), 0);
    std::function<void(std::size_t)> visit = [&](std::size_t i) {
        state[i] = 1;
        for (const auto& c : events_[i].children) {
            const std::size_t j = index_.at(c);
            if (state[j] == 1)
                throw Error(ErrorCode::CyclicTree, "cycle through '" + events_[j].id + "'");
            if (state[j] == 0) visit(j);
        }
        state[i] = 2;
    };
    for (std::size_t i = 0; i < events_.size(); ++i)
        if (state[i] == 0) visit(i);
}

const Event& FaultTree::event(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw Error(ErrorCode::UnknownEvent, "unknown event '" + id + "'");
    return events_[it->second];
}

namespace {

// Number of distinct paths from the top to each event, saturating at 2.
std::map<std::string, int> path_counts(const FaultTree& tree) {
    std::map<std::string, int> order_pos;
    std::vector<std::string> topo;
    std::set<std::string> seen;
    std::function<void(const std::string&)> dfs = [&](const std::string& id) {
        seen.insert(id);
        for (const auto& c : tree.event(id).children)
            if (!seen.count(c)) dfs(c);
        topo.push_back(id);
    };
    dfs(tree.top());
    std::reverse(topo.begin(), topo.end());  // parents before children
    std::map<std::string, int> count;
    count[tree.top()] = 1;
    for (const auto& id : topo)
        for (const auto& c : tree.event(id).children) count[c] = std::min(2, count[c] + count[id]);
    return count;
}

}  // namespace

std::vector<std::string> FaultTree::basic_events() const {
    std::vector<std::string> out;
    for (const auto& [id, n] : path_counts(*this))
        if (event(id).kind == EventKind::basic) out.push_back(id);
    return out;
}

std::vector<std::string> FaultTree::repeated_basic_events() const {
    std::vector<std::string> out;
    for (const auto& [id, n] : path_counts(*this))
        if (n > 1 && event(id).kind == EventKind::basic) out.push_back(id);
    return out;
}

FaultTree FaultTree::with_probabilities(const std::map<std::string, double>& probs) const {
    auto merged = be_prob_;
    for (const auto& [id, p] : probs) merged[id] = p;
    return FaultTree(events_, merged);
}

FaultTree FaultTree::from_json(const nlohmann::json& j) {
    try {
        std::vector<Event> events;
        for (const auto& je : j.at("events")) {
            Event e;
            e.id = je.at("id").get<std::string>();
            e.kind = parse_kind(je.at("kind").get<std::string>());
            if (je.contains("gate")) e.gate = parse_gate(je.at("gate").get<std::string>());
            else if (e.kind != EventKind::basic)
                throw Error(ErrorCode::InvalidTree, "gate event '" + e.id + "' has no gate");
            if (je.contains("children")) e.children = je.at("children").get<std::vector<std::string>>();
            events.push_back(std::move(e));
        }
        std::map<std::string, double> probs;
        if (j.contains("be_prob")) probs = j.at("be_prob").get<std::map<std::string, double>>();
        FaultTree tree(std::move(events), std::move(probs));
        if (j.contains("te") && j.at("te").get<std::string>() != tree.top())
            throw Error(ErrorCode::InvalidTree, "'te' does not name the top event");
        return tree;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::InvalidTree, std::string("malformed fault tree: ") + e.what());
    }
}

nlohmann::json FaultTree::to_json() const {
    nlohmann::json events = nlohmann::json::array();
    for (const auto& e : events_) {
        nlohmann::json je{{"id", e.id}, {"kind", to_string(e.kind)}};
        if (e.kind != EventKind::basic) {
            je["gate"] = to_string(e.gate);
            je["children"] = e.children;
        }
        events.push_back(std::move(je));
    }
    return {{"events", events}, {"be_prob", be_prob_}, {"te", top_}};
}

FaultTree load_fault_tree(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::InvalidTree, path.string() + ": " + e.what());
    }
    return FaultTree::from_json(j);
}

namespace {

// Gate arithmetic with BE probabilities taken from `p` (overrides first).
class GateEvaluator {
public:
    GateEvaluator(const FaultTree& tree, const std::map<std::string, double>& overrides)
        : tree_(tree), overrides_(overrides) {}

    double operator()(const std::string& id) {
        if (auto it = memo_.find(id); it != memo_.end()) return it->second;
        const Event& e = tree_.event(id);
        double v;
        if (e.kind == EventKind::basic) {
            if (auto o = overrides_.find(id); o != overrides_.end()) {
                v = o->second;
            } else {
                auto b = tree_.be_prob().find(id);
                if (b == tree_.be_prob().end())
                    throw Error(ErrorCode::UnboundBE, "basic event '" + id + "' has no probability");
                v = b->second;
            }
        } else if (e.gate == Gate::and_gate) {
            v = 1.0;
            for (const auto& c : e.children) v *= (*this)(c);
        } else {
            double q = 1.0;
            for (const auto& c : e.children) q *= 1.0 - (*this)(c);
            v = 1.0 - q;
        }
        memo_[id] = v;
        return v;
    }

private:
    const FaultTree& tree_;
    const std::map<std::string, double>& overrides_;
    std::map<std::string, double> memo_;
};

double be_probability(const FaultTree& tree, const std::string& id) {
    auto it = tree.be_prob().find(id);
    if (it == tree.be_prob().end())
        throw Error(ErrorCode::UnboundBE, "basic event '" + id + "' has no probability");
    return it->second;
}

std::vector<std::set<std::string>> minimize(std::vector<std::set<std::string>> sets) {
    std::sort(sets.begin(), sets.end(), [](const auto& a, const auto& b) {
        return a.size() != b.size() ? a.size() < b.size() : a < b;
    });
    sets.erase(std::unique(sets.begin(), sets.end()), sets.end());
    std::vector<std::set<std::string>> out;
    for (auto& s : sets) {
        bool dominated = false;
        for (const auto& m : out)
            if (std::includes(s.begin(), s.end(), m.begin(), m.end())) {
                dominated = true;
                break;
            }
        if (!dominated) out.push_back(std::move(s));
    }
    std::sort(out.begin(), out.end());
    return out;
}

double cut_set_probability(const FaultTree& tree, const std::set<std::string>& cut) {
    double p = 1.0;
    for (const auto& id : cut) p *= be_probability(tree, id);
    return p;
}

}  // namespace

std::vector<std::set<std::string>> minimal_cut_sets(const FaultTree& tree) {
    std::map<std::string, std::vector<std::set<std::string>>> memo;
    std::function<const std::vector<std::set<std::string>>&(const std::string&)> cuts =
        [&](const std::string& id) -> const std::vector<std::set<std::string>>& {
        if (auto it = memo.find(id); it != memo.end()) return it->second;
        const Event& e = tree.event(id);
        std::vector<std::set<std::string>> result;
        if (e.kind == EventKind::basic) {
            result.push_back({id});
        } else if (e.gate == Gate::or_gate) {
            for (const auto& c : e.children) {
                const auto& sub = cuts(c);
                result.insert(result.end(), sub.begin(), sub.end());
            }
        } else {
            result.push_back({});
            for (const auto& c : e.children) {
                const auto& sub = cuts(c);
                std::vector<std::set<std::string>> next;
                for (const auto& a : result)
                    for (const auto& b : sub) {
                        auto u = a;
                        u.insert(b.begin(), b.end());
                        next.push_back(std::move(u));
                    }
                result = minimize(std::move(next));
            }
        }
        return memo[id] = minimize(std::move(result));
    };
    return cuts(tree.top());
}

TopEventProbability evaluate_te(const FaultTree& tree) {
    for (const auto& id : tree.basic_events()) be_probability(tree, id);
    const auto repeated = tree.repeated_basic_events();
    const std::map<std::string, double> none;
    if (repeated.empty()) return {GateEvaluator(tree, none)(tree.top()), EvalMethod::gate_arithmetic};

    if (repeated.size() <= kMaxFactoredEvents) {
        // Conditioning on every repeated event leaves each remaining event on a
        // single path, where gate arithmetic is exact.
        const std::size_t r = repeated.size();
        double total = 0.0;
        std::map<std::string, double> fixed;
        for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << r); ++mask) {
            double weight = 1.0;
            for (std::size_t i = 0; i < r; ++i) {
                const bool up = (mask >> i) & 1U;
                const double p = be_probability(tree, repeated[i]);
                weight *= up ? p : 1.0 - p;
                fixed[repeated[i]] = up ? 1.0 : 0.0;
            }
            if (weight == 0.0) continue;
            total += weight * GateEvaluator(tree, fixed)(tree.top());
        }
        return {std::clamp(total, 0.0, 1.0), EvalMethod::exact_factoring};
    }

    const auto cuts = minimal_cut_sets(tree);
    if (cuts.size() <= kMaxFactoredEvents) {
        double total = 0.0;
        const std::size_t m = cuts.size();
        for (std::uint64_t mask = 1; mask < (std::uint64_t{1} << m); ++mask) {
            std::set<std::string> u;
            int bits = 0;
            for (std::size_t i = 0; i < m; ++i)
                if ((mask >> i) & 1U) {
                    u.insert(cuts[i].begin(), cuts[i].end());
                    ++bits;
                }
            const double p = cut_set_probability(tree, u);
            total += (bits % 2 == 1) ? p : -p;
        }
        return {std::clamp(total, 0.0, 1.0), EvalMethod::mcs_inclusion_exclusion};
    }
    double q = 1.0;
    for (const auto& c : cuts) q *= 1.0 - cut_set_probability(tree, c);
    return {std::clamp(1.0 - q, 0.0, 1.0), EvalMethod::mcs_upper_bound};
}

double sensitivity(const FaultTree& tree, const std::string& be_id, double delta) {
    const Event& e = tree.event(be_id);
    if (e.kind != EventKind::basic)
        throw Error(ErrorCode::UnknownEvent, "'" + be_id + "' is not a basic event");
    if (!(delta > 0.0)) throw Error(ErrorCode::InvalidArgument, "delta must be positive");
    const double p = be_probability(tree, be_id);
    if (p - delta < 0.0 || p + delta > 1.0)
        throw Error(ErrorCode::ProbabilityOutOfRange,
                    "p +/- delta leaves [0, 1] for '" + be_id + "'");
    const double up = evaluate_te(tree.with_probabilities({{be_id, p + delta}})).probability;
    const double down = evaluate_te(tree.with_probabilities({{be_id, p - delta}})).probability;
    return (up - down) / (2.0 * delta);
}

Allocation allocate_budget(const FaultTree& tree, double te_target, AllocationPolicy policy,
                           const std::vector<std::string>& subset) {
    if (!(te_target > 0.0 && te_target < 1.0))
        throw Error(ErrorCode::InvalidArgument, "target must lie in (0, 1)");
    std::vector<std::string> scaled;
    if (policy == AllocationPolicy::uniform_scaling) {
        scaled = tree.basic_events();
    } else {
        if (subset.empty()) throw Error(ErrorCode::InvalidArgument, "fixed_subset needs events");
        for (const auto& id : subset) {
            if (tree.event(id).kind != EventKind::basic)
                throw Error(ErrorCode::UnknownEvent, "'" + id + "' is not a basic event");
            scaled.push_back(id);
        }
    }
    std::map<std::string, double> base;
    double s_max = std::numeric_limits<double>::infinity();
    for (const auto& id : scaled) {
        const double p = be_probability(tree, id);
        base[id] = p;
        if (p > 0.0) s_max = std::min(s_max, 1.0 / p);
    }
    const auto probs_at = [&](double s) {
        std::map<std::string, double> out;
        for (const auto& [id, p] : base) out[id] = std::min(1.0, p * s);
        return out;
    };
    const auto te_at = [&](double s) { return evaluate_te(tree.with_probabilities(probs_at(s))).probability; };
    const double lo_target = te_target * (1.0 - 1e-6);
    // Round-off slack so a tree already at the target is accepted as is.
    const double hi_target = te_target * (1.0 + 1e-12);
    const auto accept = [&](double s) {
        Allocation a;
        a.scale = s;
        a.be_prob = tree.with_probabilities(probs_at(s)).be_prob();
        a.te = te_at(s);
        return a;
    };

    if (!std::isfinite(s_max)) {
        const double te = te_at(1.0);
        if (te >= lo_target && te <= hi_target) return accept(1.0);
        throw Error(ErrorCode::Infeasible, "scaled events all have probability 0");
    }
    const double te_one = te_at(1.0);
    if (te_one >= lo_target && te_one <= hi_target) return accept(1.0);
    if (te_at(0.0) > hi_target)
        throw Error(ErrorCode::Infeasible, "target is below the top-event probability at scale 0");
    if (te_at(s_max) < lo_target)
        throw Error(ErrorCode::Infeasible, "target is above the top-event probability at full scale");

    double lo = 0.0, hi = s_max;
    for (int iter = 0; iter < 200; ++iter) {
        const double mid = 0.5 * (lo + hi);
        const double te = te_at(mid);
        if (te >= lo_target && te <= te_target) return accept(mid);
        if (te < lo_target) lo = mid;
        else hi = mid;
        if (hi - lo < 1e-9 * std::max(1.0, hi)) break;
    }
    const double te_lo = te_at(lo);
    if (te_lo >= lo_target && te_lo <= te_target) return accept(lo);
    throw Error(ErrorCode::Infeasible, "bisection did not reach the target window");
}

void chain_to_path(const EventChain& chain, const FaultTree& tree) {
    if (chain.size() < 2) throw Error(ErrorCode::PathNotInTree, "chain needs a cause and the top event");
    for (const auto& id : chain)
        if (!tree.contains(id)) throw Error(ErrorCode::PathNotInTree, "'" + id + "' is not in the tree");
    if (tree.event(chain.front()).kind != EventKind::basic)
        throw Error(ErrorCode::PathNotInTree, "chain does not start at a basic event");
    if (chain.back() != tree.top())
        throw Error(ErrorCode::PathNotInTree, "chain does not end at the top event");
    for (std::size_t i = 0; i + 1 < chain.size(); ++i) {
        const auto& kids = tree.event(chain[i + 1]).children;
        if (std::find(kids.begin(), kids.end(), chain[i]) == kids.end())
            throw Error(ErrorCode::PathNotInTree,
                        "'" + chain[i] + "' is not a child of '" + chain[i + 1] + "'");
    }
}

EventChain chain_from_json(const nlohmann::json& j) {
    try {
        if (j.is_object()) return j.at("chain").get<EventChain>();
        return j.get<EventChain>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::InvalidArgument, std::string("malformed event chain: ") + e.what());
    }
}

}  // namespace mlrel::fta
