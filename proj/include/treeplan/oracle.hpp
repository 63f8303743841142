#pragma once

#include "treeplan/gridhouse.hpp"

#include "json.hpp"

#include <functional>
#include <unordered_map>

namespace treeplan {

/// Exhaustive closure of hidden states reachable from a task's initial
/// state. Node identity is the canonical hidden-state key (step counter
/// stripped), so the closure is finite and independent of the episode cap.
struct StateGraph {
    struct Edge {
        Action action;
        int target = -1;
    };
    struct Node {
        std::string key;
        EnvSnapshot snap;
        bool terminal = false;  // goal predicate holds
        TaskStatus eval = TaskStatus::Incomplete;
        std::vector<Edge> edges;  // lexicographic by action text; empty when terminal
    };

    TaskSpec spec;
    std::vector<Node> nodes;  // nodes[0] is the initial state
    std::unordered_map<std::string, int> index;

    nlohmann::json to_json() const;
};

/// Breadth-first closure. Throws when the closure exceeds node_cap, naming
/// the node and frontier counts. GridHouse only.
StateGraph build_graph(const GridHouse& env, const TaskSpec& spec, size_t node_cap = 100000);

struct PlanResult {
    std::vector<Action> plan;
    double value = 0.0;
    bool solvable = false;
};

/// Value iteration to a 1e-12 fixpoint plus shortest-path extraction. For a
/// solvable task the plan is the lexicographically-first shortest path to a
/// completed terminal and value = gamma^len. Unsolvable tasks report the best
/// reachable outcome: max over states of gamma^dist * r_o at that state.
PlanResult optimal_plan(const StateGraph& graph, double gamma);

/// Start-node edges that begin some optimal plan (used for search
/// calibration; matching any of them counts as optimal).
std::vector<Action> optimal_first_actions(const StateGraph& graph, double gamma);

/// Probability vector over `node.edges` for a state reached after `depth`
/// steps. Oracle evaluation is exact for policies that are Markov in
/// (hidden state, depth); adapt history-feature-free featurized policies by
/// scoring them on a synthetic depth-0 state.
using OraclePolicy = std::function<std::vector<double>(const StateGraph::Node& node, int depth)>;

/// Exact expected discounted r_o per graph node by backward induction over
/// the finite horizon. Returns values at depth 0; index 0 is the start state.
std::vector<double> evaluate_policy(const StateGraph& graph, const OraclePolicy& policy,
                                    int horizon, double gamma);

/// Independent legal-move enumeration: every syntactically possible action
/// over the layout's ids, kept iff stepping it from the snapshot reports
/// Feedback::Ok. Cross-checks the env's candidate lists.
std::vector<Action> oracle_legal_actions(const GridHouse& env, const EnvSnapshot& snap);

}  // namespace treeplan
