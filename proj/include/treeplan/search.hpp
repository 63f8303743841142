#pragma once

#include "treeplan/env.hpp"
#include "treeplan/policy.hpp"
#include "treeplan/state.hpp"

#include "json.hpp"

#include <span>

namespace treeplan {

struct SearchConfig {
    double c_puct = 1.25;
    int width = 3;         // max children per expansion
    int d_max = 10;        // max tree / rollout depth
    int simulations = 3;   // rollouts per newly created child
    int budget = 200;      // selection passes
    double gamma = 0.95;
    double tau_expand = 0.5;  // critic gate: expand iff score > tau
    bool stochastic_expand = false;
    uint64_t seed = 0;

    void validate() const;
};

struct SearchEdge {
    Action action;
    double prior = 0.0;
    double q = 0.0;
    int n = 0;
    int child = -1;  // node index, -1 until materialized
};

struct SearchNode {
    AgentState state;
    EnvSnapshot snap;
    std::vector<Action> candidates;
    int depth = 0;
    int parent = -1;
    int n = 0;
    double v = 0.0;   // running mean of returns through this node (diagnostic)
    int v_count = 0;  // backups folded into v (root's creation visit is not one)
    bool terminal = false;
    bool suppressed = false;  // critic closed the expansion gate here
    std::optional<Outcome> outcome;
    /// Leaf value reused on re-visits: r_o for terminals, the single rollout
    /// return for suppressed leaves.
    std::optional<double> leaf_value;
    std::vector<SearchEdge> edges;

    bool is_leaf() const { return edges.empty(); }
};

struct SearchStats {
    int expansions = 0;
    int rollouts = 0;
    int terminal_hits = 0;
    int suppressions = 0;
};

struct SearchTree {
    TaskSpec task;
    SearchConfig config;
    std::vector<SearchNode> nodes;  // nodes[0] is the root
    SearchStats stats;

    SearchNode& root() { return nodes.at(0); }
    const SearchNode& root() const { return nodes.at(0); }
};

/// Index of the edge maximizing Q + c * prior * sqrt(N(s)) / (1 + N(s,a)).
/// Ties break to the lowest index.
size_t puct_select(const SearchNode& node, double c_puct);

struct PathStep {
    int node;
    size_t edge;
};

/// Propagate a return up a root-to-leaf path. `leaf_return` is measured from
/// the leaf's perspective; each level up multiplies by gamma. Q(s,a) tracks
/// the mean of returns seen from the child side of the edge.
void backup(SearchTree& tree, std::span<const PathStep> path, int leaf_index,
            double leaf_return, double gamma);

/// Greedy rollout from the node's snapshot until terminal or depth d_max;
/// returns gamma^k * r_o.
double simulate(SearchTree& tree, int node_index, PolicyProvider& policy, Env& env,
                const SearchConfig& config, const Summarizer& summarizer = identity_summary);

/// Create up to config.width edges on a leaf (policy top-probability actions,
/// or seeded sampling without replacement in stochastic mode), materializing
/// child nodes through the environment. Caller has checked the critic gate.
std::vector<size_t> expand(SearchTree& tree, int node_index, PolicyProvider& policy, Env& env,
                           const SearchConfig& config, Rng& rng, const Summarizer& summarizer);

/// Full four-phase search from a fresh episode.
SearchTree run_search(const TaskSpec& spec, PolicyProvider& policy, Critic& critic, Env& env,
                      const SearchConfig& config,
                      const Summarizer& summarizer = identity_summary);

struct SearchRoot {
    AgentState state;
    std::vector<Action> candidates;
    bool terminal = false;
    std::optional<Outcome> outcome;
};

/// Same search, but rooted at the environment's current state (the env must
/// already sit at `root.state`). Used for act-after-search evaluation.
SearchTree run_search_rooted(const TaskSpec& spec, const SearchRoot& root, PolicyProvider& policy,
                             Critic& critic, Env& env, const SearchConfig& config,
                             const Summarizer& summarizer = identity_summary);

/// Root action by visit count; ties by Q, then by edge index.
Action best_root_action(const SearchTree& tree);

/// Serializable dump: input contract for dataset extraction and golden tests.
/// Per-node context renders use the given template.
nlohmann::json tree_to_json(const SearchTree& tree, const PromptTemplate& tpl);

nlohmann::json search_config_to_json(const SearchConfig& c);
SearchConfig search_config_from_json(const nlohmann::json& j);

}  // namespace treeplan
