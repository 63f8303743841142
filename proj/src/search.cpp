#include "treeplan/search.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace treeplan {

using nlohmann::json;

void SearchConfig::validate() const {
    if (width < 1) throw ValidationError("search.width must be >= 1");
    if (budget < 1) throw ValidationError("search.budget must be >= 1");
    if (d_max < 1) throw ValidationError("search.d_max must be >= 1");
    if (simulations < 1) throw ValidationError("search.simulations must be >= 1");
    if (!(gamma > 0.0 && gamma <= 1.0)) throw ValidationError("search.gamma must be in (0, 1]");
    if (!(tau_expand >= 0.0 && tau_expand <= 1.0))
        throw ValidationError("search.tau_expand must be in [0, 1]");
    if (c_puct < 0.0) throw ValidationError("search.c_puct must be >= 0");
}

size_t puct_select(const SearchNode& node, double c_puct) {
    if (node.edges.empty()) throw ValidationError("puct_select: node has no edges");
    const double sqrt_n = std::sqrt(static_cast<double>(node.n));
    size_t best = 0;
    double best_score = -HUGE_VAL;
    for (size_t i = 0; i < node.edges.size(); i++) {
        const SearchEdge& e = node.edges[i];
        const double score = e.q + c_puct * e.prior * sqrt_n / (1.0 + e.n);
        if (score > best_score) {
            best_score = score;
            best = i;
        }
    }
    return best;
}

namespace {

void bump_node(SearchNode& node, double value_from_node) {
    node.n += 1;
    node.v_count += 1;
    node.v += (value_from_node - node.v) / node.v_count;
}

}  // namespace

void backup(SearchTree& tree, std::span<const PathStep> path, int leaf_index,
            double leaf_return, double gamma) {
    if (path.empty()) throw ValidationError("backup: empty path");
    if (path.back().node < 0) throw ValidationError("backup: bad path");

    double g = leaf_return;
    bump_node(tree.nodes.at(static_cast<size_t>(leaf_index)), g);
    for (auto it = path.rbegin(); it != path.rend(); ++it) {
        SearchEdge& e = tree.nodes.at(static_cast<size_t>(it->node)).edges.at(it->edge);
        e.n += 1;
        e.q += (g - e.q) / e.n;
        g *= gamma;
        bump_node(tree.nodes.at(static_cast<size_t>(it->node)), g);
    }
}

double simulate(SearchTree& tree, int node_index, PolicyProvider& policy, Env& env,
                const SearchConfig& config, const Summarizer& summarizer) {
    const SearchNode& node = tree.nodes.at(static_cast<size_t>(node_index));
    if (node.terminal) {
        return outcome_reward(*node.outcome);
    }
    const int root_depth = tree.root().depth;
    env.restore(node.snap);
    AgentState s = node.state;
    std::vector<Action> candidates = node.candidates;
    int k = 0;
    std::optional<Outcome> final;
    while (s.depth() - root_depth < config.d_max && !candidates.empty()) {
        auto dist = policy.distribution(s, candidates);
        size_t best = 0;
        for (size_t i = 1; i < dist.probabilities.size(); i++) {
            if (dist.probabilities[i] > dist.probabilities[best]) best = i;
        }
        StepResult res = env.step(dist.actions[best]);
        k++;
        s = advance(s, dist.actions[best], res.obs, summarizer);
        candidates = res.candidates;
        if (res.terminal) {
            final = res.outcome;
            break;
        }
    }
    if (!final) final = env.evaluate_outcome();  // truncated rollout
    tree.stats.rollouts++;
    return std::pow(config.gamma, k) * outcome_reward(*final);
}

std::vector<size_t> expand(SearchTree& tree, int node_index, PolicyProvider& policy, Env& env,
                           const SearchConfig& config, Rng& rng, const Summarizer& summarizer) {
    {
        const SearchNode& node = tree.nodes.at(static_cast<size_t>(node_index));
        if (node.terminal) throw ValidationError("expand: terminal node");
        if (!node.is_leaf()) throw ValidationError("expand: node already expanded");
        if (node.candidates.empty()) throw ValidationError("expand: no candidate actions");
    }

    ActionDistribution dist;
    {
        const SearchNode& node = tree.nodes[static_cast<size_t>(node_index)];
        dist = policy.distribution(node.state, node.candidates);
    }
    const size_t width = std::min<size_t>(static_cast<size_t>(config.width), dist.actions.size());

    std::vector<size_t> chosen;
    if (!config.stochastic_expand) {
        std::vector<size_t> order(dist.actions.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
            return dist.probabilities[a] > dist.probabilities[b];
        });
        chosen.assign(order.begin(), order.begin() + static_cast<long>(width));
    } else {
        // sampling without replacement, proportional to probability
        std::vector<size_t> pool(dist.actions.size());
        std::iota(pool.begin(), pool.end(), 0);
        std::vector<double> mass(dist.probabilities);
        for (size_t pick = 0; pick < width; pick++) {
            double total = 0.0;
            for (size_t i : pool) total += mass[i];
            double r = rng.uniform01() * total;
            size_t taken = pool.size() - 1;
            double acc = 0.0;
            for (size_t idx = 0; idx < pool.size(); idx++) {
                acc += mass[pool[idx]];
                if (r < acc) {
                    taken = idx;
                    break;
                }
            }
            chosen.push_back(pool[taken]);
            pool.erase(pool.begin() + static_cast<long>(taken));
        }
    }

    double prior_sum = 0.0;
    for (size_t i : chosen) prior_sum += dist.probabilities[i];

    std::vector<size_t> new_edges;
    for (size_t i : chosen) {
        const Action action = dist.actions[i];
        const double prior = prior_sum > 0.0 ? dist.probabilities[i] / prior_sum
                                             : 1.0 / static_cast<double>(chosen.size());

        env.restore(tree.nodes[static_cast<size_t>(node_index)].snap);
        StepResult res = env.step(action);

        SearchNode child;
        child.state = advance(tree.nodes[static_cast<size_t>(node_index)].state, action, res.obs,
                              summarizer);
        child.snap = env.snapshot();
        child.candidates = res.candidates;
        child.depth = tree.nodes[static_cast<size_t>(node_index)].depth + 1;
        child.parent = node_index;
        child.terminal = res.terminal;
        child.outcome = res.outcome;
        if (child.terminal) child.leaf_value = outcome_reward(*res.outcome);

        const int child_index = static_cast<int>(tree.nodes.size());
        tree.nodes.push_back(std::move(child));

        SearchEdge edge;
        edge.action = action;
        edge.prior = prior;
        edge.child = child_index;
        SearchNode& node = tree.nodes[static_cast<size_t>(node_index)];
        node.edges.push_back(std::move(edge));
        new_edges.push_back(node.edges.size() - 1);
    }
    tree.stats.expansions++;
    return new_edges;
}

SearchTree run_search(const TaskSpec& spec, PolicyProvider& policy, Critic& critic, Env& env,
                      const SearchConfig& config, const Summarizer& summarizer) {
    StepResult res = env.reset(spec);
    SearchRoot root;
    root.state = init_state(spec.instruction, res.obs);
    root.candidates = std::move(res.candidates);
    root.terminal = res.terminal;
    root.outcome = res.outcome;
    return run_search_rooted(spec, root, policy, critic, env, config, summarizer);
}

SearchTree run_search_rooted(const TaskSpec& spec, const SearchRoot& root_info,
                             PolicyProvider& policy, Critic& critic, Env& env,
                             const SearchConfig& config, const Summarizer& summarizer) {
    config.validate();

    SearchTree tree;
    tree.task = spec;
    tree.config = config;

    SearchNode root;
    root.state = root_info.state;
    root.snap = env.snapshot();
    root.candidates = root_info.candidates;
    root.depth = root_info.state.depth();
    root.n = 1;  // sqrt(N) >= 1 so priors drive the first selection
    root.terminal = root_info.terminal;
    root.outcome = root_info.outcome;
    if (root.terminal) root.leaf_value = outcome_reward(*root.outcome);
    tree.nodes.push_back(std::move(root));
    if (tree.root().terminal) return tree;

    Rng rng(config.seed);
    std::vector<PathStep> path;

    for (int pass = 0; pass < config.budget; pass++) {
        path.clear();
        int cur = 0;
        while (!tree.nodes[static_cast<size_t>(cur)].is_leaf()) {
            size_t e = puct_select(tree.nodes[static_cast<size_t>(cur)], config.c_puct);
            path.push_back({cur, e});
            cur = tree.nodes[static_cast<size_t>(cur)].edges[e].child;
        }

        SearchNode& leaf = tree.nodes[static_cast<size_t>(cur)];
        if (leaf.terminal || leaf.suppressed) {
            if (leaf.terminal) tree.stats.terminal_hits++;
            const double value = *leaf.leaf_value;
            if (path.empty())
                bump_node(leaf, value);
            else
                backup(tree, path, cur, value, config.gamma);
            continue;
        }

        const int rel_depth = leaf.depth - tree.root().depth;
        const bool gate_open = critic.score(leaf.state, rel_depth).value > config.tau_expand &&
                               rel_depth < config.d_max && !leaf.candidates.empty();
        if (!gate_open) {
            leaf.suppressed = true;
            tree.stats.suppressions++;
            const double value = simulate(tree, cur, policy, env, config, summarizer);
            SearchNode& node = tree.nodes[static_cast<size_t>(cur)];
            node.leaf_value = value;
            if (path.empty())
                bump_node(node, value);
            else
                backup(tree, path, cur, value, config.gamma);
            continue;
        }

        const std::vector<size_t> new_edges =
            expand(tree, cur, policy, env, config, rng, summarizer);
        for (size_t e : new_edges) {
            const int child = tree.nodes[static_cast<size_t>(cur)].edges[e].child;
            std::vector<PathStep> child_path = path;
            child_path.push_back({cur, e});
            for (int sim = 0; sim < config.simulations; sim++) {
                const double value = simulate(tree, child, policy, env, config, summarizer);
                backup(tree, child_path, child, value, config.gamma);
            }
        }
    }
    return tree;
}

Action best_root_action(const SearchTree& tree) {
    const SearchNode& root = tree.root();
    if (root.edges.empty()) throw ValidationError("best_root_action: root has no edges");
    size_t best = 0;
    for (size_t i = 1; i < root.edges.size(); i++) {
        const SearchEdge& e = root.edges[i];
        const SearchEdge& b = root.edges[best];
        if (e.n > b.n || (e.n == b.n && e.q > b.q)) best = i;
    }
    return root.edges[best].action;
}

json search_config_to_json(const SearchConfig& c) {
    return json{{"c_puct", c.c_puct},
                {"width", c.width},
                {"d_max", c.d_max},
                {"simulations", c.simulations},
                {"budget", c.budget},
                {"gamma", c.gamma},
                {"tau_expand", c.tau_expand},
                {"stochastic_expand", c.stochastic_expand},
                {"seed", c.seed}};
}

SearchConfig search_config_from_json(const json& j) {
    SearchConfig c;
    c.c_puct = j.value("c_puct", c.c_puct);
    c.width = j.value("width", c.width);
    c.d_max = j.value("d_max", c.d_max);
    c.simulations = j.value("simulations", c.simulations);
    c.budget = j.value("budget", c.budget);
    c.gamma = j.value("gamma", c.gamma);
    c.tau_expand = j.value("tau_expand", c.tau_expand);
    c.stochastic_expand = j.value("stochastic_expand", c.stochastic_expand);
    c.seed = j.value("seed", c.seed);
    return c;
}

json tree_to_json(const SearchTree& tree, const PromptTemplate& tpl) {
    json nodes = json::array();
    for (size_t i = 0; i < tree.nodes.size(); i++) {
        const SearchNode& n = tree.nodes[i];
        json edges = json::array();
        for (const auto& e : n.edges) {
            edges.push_back({{"action", e.action.text()},
                             {"prior", e.prior},
                             {"q", e.q},
                             {"n", e.n},
                             {"child", e.child}});
        }
        json jn{{"id", i},
                {"parent", n.parent},
                {"depth", n.depth},
                {"key", n.state.key().hex()},
                {"obs", n.state.current_observation.text},
                {"context", tpl.render(n.state, n.candidates)},
                {"n", n.n},
                {"v", n.v},
                {"terminal", n.terminal},
                {"suppressed", n.suppressed},
                {"edges", std::move(edges)}};
        json cands = json::array();
        for (const auto& c : n.candidates) cands.push_back(c.text());
        jn["candidates"] = std::move(cands);
        if (n.outcome) {
            jn["outcome"] = {{"status", to_string(n.outcome->status)},
                             {"steps_used", n.outcome->steps_used}};
        }
        nodes.push_back(std::move(jn));
    }
    return json{{"format_version", 1},
                {"task",
                 {{"family", to_string(tree.task.family)},
                  {"instruction", tree.task.instruction},
                  {"layout", tree.task.layout_id},
                  {"seed", tree.task.seed}}},
                {"config", search_config_to_json(tree.config)},
                {"stats",
                 {{"expansions", tree.stats.expansions},
                  {"rollouts", tree.stats.rollouts},
                  {"terminal_hits", tree.stats.terminal_hits},
                  {"suppressions", tree.stats.suppressions}}},
                {"nodes", std::move(nodes)}};
}

}  // namespace treeplan
