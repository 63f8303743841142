#include "treeplan/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

namespace treeplan {

using nlohmann::json;

namespace {

constexpr int kUncappedEpisode = 1 << 28;

double status_reward(TaskStatus s) {
    return outcome_reward(Outcome{s, 0});
}

/// Lexicographically-first shortest path from node 0 to any goal node
/// (or to `target` when >= 0). Returns edge choices per visited node.
struct BfsResult {
    std::vector<int> dist;    // from start, -1 unreachable
    std::vector<int> parent;  // node index
    std::vector<int> parent_edge;
};

BfsResult bfs_from_start(const StateGraph& g) {
    BfsResult r;
    r.dist.assign(g.nodes.size(), -1);
    r.parent.assign(g.nodes.size(), -1);
    r.parent_edge.assign(g.nodes.size(), -1);
    std::deque<int> queue;
    r.dist[0] = 0;
    queue.push_back(0);
    while (!queue.empty()) {
        int cur = queue.front();
        queue.pop_front();
        const auto& edges = g.nodes[static_cast<size_t>(cur)].edges;
        for (size_t e = 0; e < edges.size(); e++) {
            int next = edges[e].target;
            if (r.dist[static_cast<size_t>(next)] < 0) {
                r.dist[static_cast<size_t>(next)] = r.dist[static_cast<size_t>(cur)] + 1;
                r.parent[static_cast<size_t>(next)] = cur;
                r.parent_edge[static_cast<size_t>(next)] = static_cast<int>(e);
                queue.push_back(next);
            }
        }
    }
    return r;
}

std::vector<Action> path_to(const StateGraph& g, const BfsResult& bfs, int target) {
    std::vector<Action> plan;
    for (int cur = target; cur != 0; cur = bfs.parent[static_cast<size_t>(cur)]) {
        const int pe = bfs.parent_edge[static_cast<size_t>(cur)];
        plan.push_back(g.nodes[static_cast<size_t>(bfs.parent[static_cast<size_t>(cur)])]
                           .edges[static_cast<size_t>(pe)]
                           .action);
    }
    std::reverse(plan.begin(), plan.end());
    return plan;
}

std::vector<double> value_iteration(const StateGraph& g, double gamma) {
    std::vector<double> v(g.nodes.size(), 0.0);
    for (size_t i = 0; i < g.nodes.size(); i++) {
        if (g.nodes[i].terminal) v[i] = 1.0;
    }
    for (int sweep = 0; sweep < 1 << 20; sweep++) {
        double residual = 0.0;
        for (size_t i = 0; i < g.nodes.size(); i++) {
            if (g.nodes[i].terminal) continue;
            double best = 0.0;
            for (const auto& e : g.nodes[i].edges) {
                best = std::max(best, gamma * v[static_cast<size_t>(e.target)]);
            }
            residual = std::max(residual, std::abs(best - v[i]));
            v[i] = best;
        }
        if (residual < 1e-12) break;
    }
    return v;
}

}  // namespace

StateGraph build_graph(const GridHouse& env, const TaskSpec& spec, size_t node_cap) {
    // Private uncapped session: closures are over hidden states, not step
    // counts, so the episode cap must not truncate the frontier.
    GridHouse sim(env.registry(), kUncappedEpisode);
    StateGraph g;
    g.spec = spec;

    StepResult res = sim.reset(spec);

    auto add_node = [&](const EnvSnapshot& snap) {
        sim.restore(snap);
        StateGraph::Node node;
        node.key = sim.canonical_key();
        auto it = g.index.find(node.key);
        if (it != g.index.end()) return it->second;
        node.snap = snap;
        Outcome eval = sim.evaluate_outcome();
        node.eval = eval.status;
        node.terminal = eval.status == TaskStatus::Completed;
        int id = static_cast<int>(g.nodes.size());
        g.nodes.push_back(std::move(node));
        g.index.emplace(g.nodes.back().key, id);
        return id;
    };

    add_node(sim.snapshot());
    std::deque<int> frontier{0};
    while (!frontier.empty()) {
        const int cur = frontier.front();
        frontier.pop_front();
        if (g.nodes[static_cast<size_t>(cur)].terminal) continue;

        const EnvSnapshot snap = g.nodes[static_cast<size_t>(cur)].snap;
        sim.restore(snap);
        const std::vector<Action> candidates = sim.candidate_actions();
        for (const Action& a : candidates) {
            sim.restore(snap);
            sim.step(a);
            const int before = static_cast<int>(g.nodes.size());
            const int target = add_node(sim.snapshot());
            if (g.nodes.size() > node_cap) {
                throw RuntimeError("state graph for " + spec.id() + " exceeds node cap " +
                                   std::to_string(node_cap) + " (frontier " +
                                   std::to_string(frontier.size()) + " nodes pending)");
            }
            if (target == before) frontier.push_back(target);
            g.nodes[static_cast<size_t>(cur)].edges.push_back({a, target});
        }
    }
    return g;
}

PlanResult optimal_plan(const StateGraph& graph, double gamma) {
    if (graph.nodes.empty()) throw ValidationError("optimal_plan: empty graph");
    const std::vector<double> v = value_iteration(graph, gamma);
    const BfsResult bfs = bfs_from_start(graph);

    int best_goal = -1;
    for (size_t i = 0; i < graph.nodes.size(); i++) {
        if (!graph.nodes[i].terminal || bfs.dist[i] < 0) continue;
        if (best_goal < 0 || bfs.dist[i] < bfs.dist[static_cast<size_t>(best_goal)])
            best_goal = static_cast<int>(i);
    }

    PlanResult out;
    if (best_goal >= 0) {
        out.solvable = true;
        out.plan = path_to(graph, bfs, best_goal);
        out.value = std::pow(gamma, out.plan.size());
        // Value iteration and BFS must agree on the start value.
        if (std::abs(out.value - v[0]) > 1e-9)
            throw RuntimeError("optimal_plan: value iteration disagrees with shortest path");
        return out;
    }

    // Unsolvable: best reachable outcome.
    double best_value = 0.0;
    int best_node = 0;
    for (size_t i = 0; i < graph.nodes.size(); i++) {
        if (bfs.dist[i] < 0) continue;
        const double value = std::pow(gamma, bfs.dist[i]) * status_reward(graph.nodes[i].eval);
        if (value > best_value + 1e-15) {
            best_value = value;
            best_node = static_cast<int>(i);
        }
    }
    out.solvable = false;
    out.value = best_value;
    out.plan = path_to(graph, bfs, best_node);
    return out;
}

std::vector<Action> optimal_first_actions(const StateGraph& graph, double gamma) {
    PlanResult plan = optimal_plan(graph, gamma);
    if (!plan.solvable || plan.plan.empty()) return {};

    // dist-to-goal via reverse BFS from all goal nodes
    std::vector<std::vector<int>> rev(graph.nodes.size());
    for (size_t i = 0; i < graph.nodes.size(); i++) {
        for (const auto& e : graph.nodes[i].edges)
            rev[static_cast<size_t>(e.target)].push_back(static_cast<int>(i));
    }
    std::vector<int> dist(graph.nodes.size(), -1);
    std::deque<int> queue;
    for (size_t i = 0; i < graph.nodes.size(); i++) {
        if (graph.nodes[i].terminal) {
            dist[i] = 0;
            queue.push_back(static_cast<int>(i));
        }
    }
    while (!queue.empty()) {
        int cur = queue.front();
        queue.pop_front();
        for (int prev : rev[static_cast<size_t>(cur)]) {
            if (dist[static_cast<size_t>(prev)] < 0) {
                dist[static_cast<size_t>(prev)] = dist[static_cast<size_t>(cur)] + 1;
                queue.push_back(prev);
            }
        }
    }

    (void)gamma;
    std::vector<Action> out;
    const int d0 = dist[0];
    for (const auto& e : graph.nodes[0].edges) {
        if (dist[static_cast<size_t>(e.target)] == d0 - 1) out.push_back(e.action);
    }
    return out;
}

std::vector<double> evaluate_policy(const StateGraph& graph, const OraclePolicy& policy,
                                    int horizon, double gamma) {
    if (horizon < 0) throw ValidationError("evaluate_policy: negative horizon");
    std::vector<double> next(graph.nodes.size());
    for (size_t i = 0; i < graph.nodes.size(); i++) {
        next[i] = status_reward(graph.nodes[i].eval);  // truncation value
    }
    std::vector<double> cur(graph.nodes.size());
    for (int k = horizon - 1; k >= 0; k--) {
        for (size_t i = 0; i < graph.nodes.size(); i++) {
            const auto& node = graph.nodes[i];
            if (node.terminal) {
                cur[i] = 1.0;
                continue;
            }
            if (node.edges.empty()) {
                cur[i] = status_reward(node.eval);
                continue;
            }
            const std::vector<double> probs = policy(node, k);
            if (probs.size() != node.edges.size())
                throw ValidationError("evaluate_policy: policy returned " +
                                      std::to_string(probs.size()) + " probabilities for " +
                                      std::to_string(node.edges.size()) + " edges");
            double value = 0.0;
            for (size_t e = 0; e < node.edges.size(); e++) {
                value += probs[e] * gamma * next[static_cast<size_t>(node.edges[e].target)];
            }
            cur[i] = value;
        }
        std::swap(cur, next);
    }
    return next;
}

std::vector<Action> oracle_legal_actions(const GridHouse& env, const EnvSnapshot& snap) {
    GridHouse sim(env.registry(), kUncappedEpisode);
    sim.restore(snap);
    const Layout& layout = sim.registry().require(sim.task().layout_id);

    std::vector<Action> universe;
    for (const auto& r : layout.receptacles) {
        universe.push_back({Verb::Goto, r.id, ""});
        universe.push_back({Verb::Open, r.id, ""});
        universe.push_back({Verb::Close, r.id, ""});
        universe.push_back({Verb::Examine, r.id, ""});
        universe.push_back({Verb::Use, r.id, ""});
    }
    for (const auto& o : layout.objects) {
        universe.push_back({Verb::Examine, o.id, ""});
        universe.push_back({Verb::Use, o.id, ""});
        for (const auto& r : layout.receptacles) {
            universe.push_back({Verb::Take, o.id, r.id});
            universe.push_back({Verb::Put, o.id, r.id});
            universe.push_back({Verb::Clean, o.id, r.id});
            universe.push_back({Verb::Heat, o.id, r.id});
            universe.push_back({Verb::Cool, o.id, r.id});
        }
    }

    std::vector<Action> legal;
    for (const Action& a : universe) {
        sim.restore(snap);
        StepResult res = sim.step(a);
        if (res.obs.feedback == Feedback::Ok) legal.push_back(a);
    }
    std::sort(legal.begin(), legal.end(), action_text_less);
    legal.erase(std::unique(legal.begin(), legal.end()), legal.end());
    return legal;
}

json StateGraph::to_json() const {
    json nodes_json = json::array();
    for (const auto& n : nodes) {
        json edges = json::array();
        for (const auto& e : n.edges) {
            edges.push_back({{"action", e.action.text()}, {"target", e.target}});
        }
        nodes_json.push_back({{"key", n.key},
                              {"terminal", n.terminal},
                              {"eval", to_string(n.eval)},
                              {"edges", std::move(edges)}});
    }
    return json{{"task",
                 {{"family", to_string(spec.family)},
                  {"instruction", spec.instruction},
                  {"layout", spec.layout_id},
                  {"seed", spec.seed}}},
                {"nodes", std::move(nodes_json)}};
}

}  // namespace treeplan
