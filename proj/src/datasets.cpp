#include "treeplan/datasets.hpp"

#include <algorithm>
#include <set>
#include <sstream>
#include <unordered_set>

namespace treeplan {

using nlohmann::json;

TaskSpec Trajectory::task() const {
    return TaskSpec{family, instruction, task_seed, layout_id};
}

json Trajectory::to_json() const {
    json steps_json = json::array();
    for (const auto& s : steps) {
        steps_json.push_back({{"context", s.context},
                              {"action", s.action},
                              {"summary", s.summary},
                              {"candidates", s.candidates}});
    }
    return json{{"v", kDatasetFormatVersion},
                {"instruction", instruction},
                {"ids",
                 {{"family", to_string(family)},
                  {"layout", layout_id},
                  {"seed", task_seed},
                  {"tree", tree_id}}},
                {"steps", std::move(steps_json)},
                {"reward", final_reward},
                {"source", source}};
}

Trajectory Trajectory::from_json(const json& j) {
    const int v = j.at("v").get<int>();
    if (v != kDatasetFormatVersion)
        throw DataError("trajectory format version " + std::to_string(v) + ", expected " +
                        std::to_string(kDatasetFormatVersion));
    Trajectory t;
    t.instruction = j.at("instruction").get<std::string>();
    t.family = task_family_from_string(j.at("ids").at("family").get<std::string>());
    t.layout_id = j.at("ids").at("layout").get<std::string>();
    t.task_seed = j.at("ids").at("seed").get<uint64_t>();
    t.tree_id = j.at("ids").at("tree").get<std::string>();
    for (const auto& sj : j.at("steps")) {
        TrajectoryStep s;
        s.context = sj.at("context").get<std::string>();
        s.action = sj.at("action").get<std::string>();
        s.summary = sj.at("summary").get<std::string>();
        s.candidates = sj.at("candidates").get<std::vector<std::string>>();
        t.steps.push_back(std::move(s));
    }
    t.final_reward = j.at("reward").get<double>();
    t.source = j.at("source").get<std::string>();
    return t;
}

Hash128 Trajectory::dedup_hash() const {
    std::string buf = std::string(to_string(family)) + "|" + layout_id + "|" +
                      std::to_string(task_seed) + "|" + instruction + "|";
    for (const auto& s : steps) {
        buf += s.action;
        buf += ';';
    }
    return hash128(buf);
}

json PreferencePair::to_json() const {
    return json{{"v", kDatasetFormatVersion},
                {"instruction", instruction},
                {"context", context},
                {"history", history},
                {"winner", winner},
                {"loser", loser},
                {"q_w", q_w},
                {"q_l", q_l},
                {"n_w", n_w},
                {"n_l", n_l},
                {"candidates", candidates},
                {"ids", {{"tree", tree_id}}}};
}

PreferencePair PreferencePair::from_json(const json& j) {
    const int v = j.at("v").get<int>();
    if (v != kDatasetFormatVersion)
        throw DataError("preference pair format version " + std::to_string(v) + ", expected " +
                        std::to_string(kDatasetFormatVersion));
    PreferencePair p;
    p.instruction = j.at("instruction").get<std::string>();
    p.context = j.at("context").get<std::string>();
    p.history = j.at("history").get<std::vector<std::string>>();
    p.winner = j.at("winner").get<std::string>();
    p.loser = j.at("loser").get<std::string>();
    p.q_w = j.at("q_w").get<double>();
    p.q_l = j.at("q_l").get<double>();
    p.n_w = j.at("n_w").get<int>();
    p.n_l = j.at("n_l").get<int>();
    p.candidates = j.at("candidates").get<std::vector<std::string>>();
    p.tree_id = j.at("ids").at("tree").get<std::string>();
    return p;
}

Hash128 PreferencePair::dedup_hash() const {
    std::string buf = instruction + "|" + context + "|" + winner + "|" + loser;
    return hash128(buf);
}

namespace {

TaskSpec task_from_dump(const json& dump) {
    const json& t = dump.at("task");
    TaskSpec spec;
    spec.family = task_family_from_string(t.at("family").get<std::string>());
    spec.instruction = t.at("instruction").get<std::string>();
    spec.layout_id = t.at("layout").get<std::string>();
    spec.seed = t.at("seed").get<uint64_t>();
    return spec;
}

std::string tree_id_of(const json& dump) { return hash128(dump.dump()).hex(); }

std::vector<std::string> actions_to(const json& nodes, int node_id) {
    std::vector<std::string> actions;
    int cur = node_id;
    while (true) {
        const json& node = nodes.at(static_cast<size_t>(cur));
        const int parent = node.at("parent").get<int>();
        if (parent < 0) break;
        const json& pnode = nodes.at(static_cast<size_t>(parent));
        for (const auto& e : pnode.at("edges")) {
            if (e.at("child").get<int>() == cur) {
                actions.push_back(e.at("action").get<std::string>());
                break;
            }
        }
        cur = parent;
    }
    std::reverse(actions.begin(), actions.end());
    return actions;
}

}  // namespace

std::vector<Trajectory> extract_success(const json& tree_dump) {
    const TaskSpec spec = task_from_dump(tree_dump);
    const std::string tree_id = tree_id_of(tree_dump);
    const json& nodes = tree_dump.at("nodes");

    std::vector<Trajectory> out;
    std::set<std::string> seen;
    for (size_t i = 0; i < nodes.size(); i++) {
        const json& node = nodes[i];
        if (!node.at("terminal").get<bool>()) continue;
        if (!node.contains("outcome")) continue;
        if (node.at("outcome").at("status").get<std::string>() != "completed") continue;

        Trajectory t;
        t.instruction = spec.instruction;
        t.family = spec.family;
        t.layout_id = spec.layout_id;
        t.task_seed = spec.seed;
        t.tree_id = tree_id;
        t.final_reward = 1.0;
        t.source = "search";

        // walk up to the root collecting (parent node, edge, child node)
        std::vector<int> path_nodes;
        for (int cur = static_cast<int>(i); cur >= 0;
             cur = nodes.at(static_cast<size_t>(cur)).at("parent").get<int>()) {
            path_nodes.push_back(cur);
        }
        std::reverse(path_nodes.begin(), path_nodes.end());
        std::string key;
        for (size_t s = 0; s + 1 < path_nodes.size(); s++) {
            const json& parent = nodes.at(static_cast<size_t>(path_nodes[s]));
            const json& child = nodes.at(static_cast<size_t>(path_nodes[s + 1]));
            TrajectoryStep step;
            for (const auto& e : parent.at("edges")) {
                if (e.at("child").get<int>() == path_nodes[s + 1]) {
                    step.action = e.at("action").get<std::string>();
                    break;
                }
            }
            step.context = parent.at("context").get<std::string>();
            step.summary = child.at("obs").get<std::string>();
            step.candidates = parent.at("candidates").get<std::vector<std::string>>();
            key += step.action;
            key += ';';
            t.steps.push_back(std::move(step));
        }
        if (t.steps.empty()) continue;  // a terminal root carries no actions
        if (!seen.insert(key).second) continue;
        out.push_back(std::move(t));
    }
    return out;
}

std::vector<PreferencePair> extract_preferences(const json& tree_dump, double epsilon, int n_min,
                                                int per_node_cap) {
    if (epsilon < 0) throw ValidationError("extract_preferences: epsilon must be >= 0");
    if (n_min < 0) throw ValidationError("extract_preferences: n_min must be >= 0");
    const TaskSpec spec = task_from_dump(tree_dump);
    const std::string tree_id = tree_id_of(tree_dump);
    const json& nodes = tree_dump.at("nodes");

    std::vector<PreferencePair> out;
    for (size_t i = 0; i < nodes.size(); i++) {
        const json& node = nodes[i];
        const json& edges = node.at("edges");
        if (edges.size() < 2) continue;

        struct Cand {
            double gap;
            size_t w, l;
        };
        std::vector<Cand> cands;
        for (size_t w = 0; w < edges.size(); w++) {
            for (size_t l = 0; l < edges.size(); l++) {
                if (w == l) continue;
                const double qw = edges[w].at("q").get<double>();
                const double ql = edges[l].at("q").get<double>();
                const int nw = edges[w].at("n").get<int>();
                const int nl = edges[l].at("n").get<int>();
                if (nw < n_min || nl < n_min) continue;
                if (qw - ql > epsilon) cands.push_back({qw - ql, w, l});
            }
        }
        std::stable_sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
            if (a.gap != b.gap) return a.gap > b.gap;
            if (a.w != b.w) return a.w < b.w;
            return a.l < b.l;
        });
        if (per_node_cap >= 0 && cands.size() > static_cast<size_t>(per_node_cap))
            cands.resize(static_cast<size_t>(per_node_cap));

        for (const Cand& c : cands) {
            PreferencePair p;
            p.instruction = spec.instruction;
            p.context = node.at("context").get<std::string>();
            p.history = actions_to(nodes, static_cast<int>(i));
            p.winner = edges[c.w].at("action").get<std::string>();
            p.loser = edges[c.l].at("action").get<std::string>();
            p.q_w = edges[c.w].at("q").get<double>();
            p.q_l = edges[c.l].at("q").get<double>();
            p.n_w = edges[c.w].at("n").get<int>();
            p.n_l = edges[c.l].at("n").get<int>();
            p.candidates = node.at("candidates").get<std::vector<std::string>>();
            p.tree_id = tree_id;
            out.push_back(std::move(p));
        }
    }
    return out;
}

json DatasetManifest::to_json() const {
    return json{{"count", count},
                {"config_hash", config_hash},
                {"tree_ids", tree_ids},
                {"created_at", created_at},
                {"format_version", format_version}};
}

DatasetManifest DatasetManifest::from_json(const json& j) {
    DatasetManifest m;
    m.count = j.at("count").get<size_t>();
    m.config_hash = j.at("config_hash").get<std::string>();
    m.tree_ids = j.at("tree_ids").get<std::vector<std::string>>();
    m.created_at = j.at("created_at").get<int64_t>();
    m.format_version = j.at("format_version").get<int>();
    return m;
}

std::string manifest_path_for(const std::string& dataset_path) {
    return dataset_path + ".manifest.json";
}

namespace {

template <typename T>
DatasetManifest write_jsonl_impl(const std::vector<T>& items, const std::string& path,
                                 const std::string& config_hash) {
    std::string body;
    std::set<std::string> tree_ids;
    for (const auto& item : items) {
        body += item.to_json().dump();
        body += '\n';
        if (!item.tree_id.empty()) tree_ids.insert(item.tree_id);
    }
    write_text_file_atomic(path, body);

    DatasetManifest m;
    m.count = items.size();
    m.config_hash = config_hash;
    m.tree_ids.assign(tree_ids.begin(), tree_ids.end());
    m.created_at = manifest_timestamp();
    write_text_file_atomic(manifest_path_for(path), m.to_json().dump(2) + "\n");
    return m;
}

template <typename T>
std::vector<T> read_jsonl_impl(const std::string& path) {
    const std::string content = read_text_file(path);
    std::vector<T> out;
    size_t line_no = 0;
    size_t pos = 0;
    while (pos < content.size()) {
        size_t nl = content.find('\n', pos);
        line_no++;
        if (nl == std::string::npos) {
            throw DataError(path + ":" + std::to_string(line_no) +
                            ": truncated final line (missing newline)");
        }
        const std::string line = content.substr(pos, nl - pos);
        pos = nl + 1;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw DataError(path + ":" + std::to_string(line_no) + ": parse error: " + e.what());
        }
        try {
            out.push_back(T::from_json(j));
        } catch (const json::exception& e) {
            throw DataError(path + ":" + std::to_string(line_no) + ": bad record: " + e.what());
        }
    }
    return out;
}

template <typename T>
std::vector<T> merge_impl(const std::vector<T>& existing, const std::vector<T>& fresh,
                          size_t cap) {
    std::vector<T> out;
    std::unordered_set<std::string> seen;
    auto push = [&](const T& item) {
        if (out.size() >= cap) return;
        if (seen.insert(item.dedup_hash().hex()).second) out.push_back(item);
    };
    for (const auto& item : fresh) push(item);
    for (const auto& item : existing) push(item);
    return out;
}

}  // namespace

DatasetManifest write_trajectories(const std::vector<Trajectory>& items, const std::string& path,
                                   const std::string& config_hash) {
    return write_jsonl_impl(items, path, config_hash);
}

std::vector<Trajectory> read_trajectories(const std::string& path) {
    return read_jsonl_impl<Trajectory>(path);
}

DatasetManifest write_pairs(const std::vector<PreferencePair>& items, const std::string& path,
                            const std::string& config_hash) {
    return write_jsonl_impl(items, path, config_hash);
}

std::vector<PreferencePair> read_pairs(const std::string& path) {
    return read_jsonl_impl<PreferencePair>(path);
}

std::vector<Trajectory> merge_buffers(const std::vector<Trajectory>& existing,
                                      const std::vector<Trajectory>& fresh, size_t cap) {
    return merge_impl(existing, fresh, cap);
}

std::vector<PreferencePair> merge_pairs(const std::vector<PreferencePair>& existing,
                                        const std::vector<PreferencePair>& fresh, size_t cap) {
    return merge_impl(existing, fresh, cap);
}

Outcome replay_trajectory(Env& env, const Trajectory& t, const Summarizer& summarizer) {
    StepResult res = env.reset(t.task());
    for (size_t i = 0; i < t.steps.size(); i++) {
        const auto action = Action::parse(t.steps[i].action);
        if (!action)
            throw DataError("trajectory step " + std::to_string(i + 1) + ": unparseable action " +
                            t.steps[i].action);
        res = env.step(*action);
        const std::string summary = summarizer(res.obs);
        if (summary != t.steps[i].summary)
            throw DataError("trajectory step " + std::to_string(i + 1) + ": replay divergence: " +
                            summary + " != " + t.steps[i].summary);
        if (res.terminal && i + 1 < t.steps.size())
            throw DataError("trajectory step " + std::to_string(i + 1) +
                            ": terminal before recorded end");
    }
    if (res.terminal) return *res.outcome;
    return env.evaluate_outcome();
}

Trajectory trajectory_from_actions(Env& env, const TaskSpec& spec,
                                   const std::vector<Action>& actions, const PromptTemplate& tpl,
                                   const std::string& source, const Summarizer& summarizer) {
    StepResult res = env.reset(spec);
    AgentState state = init_state(spec.instruction, res.obs);

    Trajectory t;
    t.instruction = spec.instruction;
    t.family = spec.family;
    t.layout_id = spec.layout_id;
    t.task_seed = spec.seed;
    t.source = source;

    for (const Action& a : actions) {
        TrajectoryStep step;
        step.context = tpl.render(state, res.candidates);
        step.action = a.text();
        for (const auto& c : res.candidates) step.candidates.push_back(c.text());
        res = env.step(a);
        step.summary = summarizer(res.obs);
        state = advance(state, a, res.obs, summarizer);
        t.steps.push_back(std::move(step));
        if (res.terminal) break;
    }
    t.final_reward = res.terminal ? outcome_reward(*res.outcome)
                                  : outcome_reward(env.evaluate_outcome());
    return t;
}

}  // namespace treeplan
