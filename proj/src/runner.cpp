#include "treeplan/runner.hpp"

#include "treeplan/oracle.hpp"

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

namespace treeplan {

using nlohmann::json;
namespace fs = std::filesystem;

void DatasetConfig::validate() const {
    if (epsilon < 0.0) throw ValidationError("datasets.epsilon must be >= 0");
    if (n_min < 0) throw ValidationError("datasets.n_min must be >= 0");
    if (buffer_cap < 1) throw ValidationError("datasets.buffer_cap must be >= 1");
}

void SuiteConfig::validate() const {
    if (layouts.empty()) throw ValidationError("suite.layouts must be non-empty");
    for (uint64_t s : train_seeds) {
        for (uint64_t e : eval_seeds) {
            if (s == e)
                throw ValidationError("suite.train_seeds and suite.eval_seeds overlap at " +
                                      std::to_string(s));
        }
    }
}

void RunConfig::validate() const {
    if (out_dir.empty()) throw ValidationError("out_dir must be non-empty");
    if (episode_cap < 1) throw ValidationError("episode_cap must be >= 1");
    if (workers < 1) throw ValidationError("workers must be >= 1");
    if (template_name != "text" && template_name != "json" && !file_exists(template_name))
        throw ValidationError("template must be a builtin name or an existing file: " +
                              template_name);
    search.validate();
    train.validate();
    datasets.validate();
    suite.validate();
    if (eval.search_budget < 1) throw ValidationError("eval.search_budget must be >= 1");
}

json RunConfig::to_json() const {
    return json{{"seed", seed},
                {"out_dir", out_dir},
                {"episode_cap", episode_cap},
                {"layout_registry", layout_registry},
                {"template", template_name},
                {"policy_endpoint", policy_endpoint},
                {"workers", workers},
                {"search", search_config_to_json(search)},
                {"train", train_config_to_json(train)},
                {"datasets",
                 {{"epsilon", datasets.epsilon},
                  {"n_min", datasets.n_min},
                  {"pair_cap_per_node", datasets.pair_cap_per_node},
                  {"buffer_cap", datasets.buffer_cap},
                  {"fresh_only", datasets.fresh_only}}},
                {"suite",
                 {{"layouts", suite.layouts},
                  {"families", suite.families},
                  {"train_seeds", suite.train_seeds},
                  {"eval_seeds", suite.eval_seeds}}},
                {"eval",
                 {{"with_search", eval.with_search}, {"search_budget", eval.search_budget}}}};
}

RunConfig RunConfig::from_json(const json& j) {
    RunConfig c = defaults();
    c.seed = j.value("seed", c.seed);
    c.out_dir = j.value("out_dir", c.out_dir);
    c.episode_cap = j.value("episode_cap", c.episode_cap);
    c.layout_registry = j.value("layout_registry", c.layout_registry);
    c.template_name = j.value("template", c.template_name);
    c.policy_endpoint = j.value("policy_endpoint", c.policy_endpoint);
    c.workers = j.value("workers", c.workers);
    if (j.contains("search")) c.search = search_config_from_json(j.at("search"));
    if (j.contains("train")) c.train = train_config_from_json(j.at("train"));
    if (j.contains("datasets")) {
        const json& d = j.at("datasets");
        c.datasets.epsilon = d.value("epsilon", c.datasets.epsilon);
        c.datasets.n_min = d.value("n_min", c.datasets.n_min);
        c.datasets.pair_cap_per_node = d.value("pair_cap_per_node", c.datasets.pair_cap_per_node);
        c.datasets.buffer_cap = d.value("buffer_cap", c.datasets.buffer_cap);
        c.datasets.fresh_only = d.value("fresh_only", c.datasets.fresh_only);
    }
    if (j.contains("suite")) {
        const json& s = j.at("suite");
        c.suite.layouts = s.value("layouts", c.suite.layouts);
        c.suite.families = s.value("families", c.suite.families);
        c.suite.train_seeds = s.value("train_seeds", c.suite.train_seeds);
        c.suite.eval_seeds = s.value("eval_seeds", c.suite.eval_seeds);
    }
    if (j.contains("eval")) {
        const json& e = j.at("eval");
        c.eval.with_search = e.value("with_search", c.eval.with_search);
        c.eval.search_budget = e.value("search_budget", c.eval.search_budget);
    }
    return c;
}

RunConfig RunConfig::defaults() {
    RunConfig c;
    c.suite.layouts = {"house_s", "house_s_two"};
    c.suite.families = {};  // all supported
    c.suite.train_seeds = {1, 2, 3, 4};
    c.suite.eval_seeds = {101, 102, 103, 104};
    return c;
}

RunConfig RunConfig::load(const std::string& path, const std::string& extra_override) {
    json j = json::object();
    if (!path.empty()) {
        try {
            j = json::parse(read_text_file(path));
        } catch (const json::parse_error& e) {
            throw ValidationError("config " + path + ": invalid JSON: " + e.what());
        }
    }
    if (const char* env_override = std::getenv("TREEPLAN_OVERRIDE")) {
        try {
            j.merge_patch(json::parse(env_override));
        } catch (const json::parse_error& e) {
            throw ValidationError(std::string("TREEPLAN_OVERRIDE: invalid JSON: ") + e.what());
        }
    }
    if (!extra_override.empty()) {
        try {
            j.merge_patch(json::parse(extra_override));
        } catch (const json::parse_error& e) {
            throw ValidationError(std::string("--override: invalid JSON: ") + e.what());
        }
    }
    RunConfig c = from_json(j);
    c.validate();
    return c;
}

std::string RunConfig::hash() const { return hash128(to_json().dump()).hex(); }

void Checkpoint::save(const std::string& path) const {
    json weights = json::object();
    for (uint32_t i = 0; i < params.weights.size(); i++) {
        if (params.weights[i] != 0.0) weights[params.space->name(i)] = params.weights[i];
    }
    const json j{{"format_version", 1},
                 {"config_hash", config_hash},
                 {"feature_map", params.version},
                 {"phase", phase},
                 {"iteration", iteration},
                 {"weights", std::move(weights)}};
    write_text_file_atomic(path, j.dump(2) + "\n");
}

Checkpoint Checkpoint::load(const std::string& path) {
    json j;
    try {
        j = json::parse(read_text_file(path));
    } catch (const json::parse_error& e) {
        throw DataError("checkpoint " + path + ": invalid JSON: " + e.what());
    }
    if (j.at("format_version").get<int>() != 1)
        throw DataError("checkpoint " + path + ": unsupported format version");
    Checkpoint c;
    c.params = PolicyParams::zeros();
    c.params.version = j.at("feature_map").get<std::string>();
    c.config_hash = j.at("config_hash").get<std::string>();
    c.phase = j.at("phase").get<std::string>();
    c.iteration = j.at("iteration").get<int>();
    for (const auto& [name, w] : j.at("weights").items()) {
        const uint32_t fid = c.params.space->intern(name);
        c.params.sync_dimension();
        c.params.weights[fid] = w.get<double>();
    }
    return c;
}

json EvalReport::to_json() const {
    json fams = json::object();
    for (const auto& [name, row] : per_family) {
        fams[name] = {{"episodes", row.episodes},
                      {"success_rate", row.success_rate},
                      {"mean_steps", row.mean_steps}};
    }
    return json{{"per_family", std::move(fams)},
                {"episodes", episodes},
                {"success_rate", success_rate},
                {"mean_steps", mean_steps},
                {"with_search", with_search}};
}

EvalReport EvalReport::from_json(const json& j) {
    EvalReport r;
    for (const auto& [name, row] : j.at("per_family").items()) {
        FamilyRow fr;
        fr.episodes = row.at("episodes").get<int>();
        fr.success_rate = row.at("success_rate").get<double>();
        fr.mean_steps = row.at("mean_steps").get<double>();
        r.per_family[name] = fr;
    }
    r.episodes = j.at("episodes").get<int>();
    r.success_rate = j.at("success_rate").get<double>();
    r.mean_steps = j.at("mean_steps").get<double>();
    r.with_search = j.at("with_search").get<bool>();
    return r;
}

Runner::Runner(RunConfig config) : config_(std::move(config)) {
    config_.validate();
    registry_ = config_.layout_registry.empty() ? LayoutRegistry::builtin()
                                                : LayoutRegistry::load(config_.layout_registry);
    ensure_dir(config_.out_dir);
}

GridHouse Runner::make_env() const { return GridHouse(registry_, config_.episode_cap); }

PromptTemplate Runner::make_template() const {
    if (config_.template_name == "text" || config_.template_name == "json")
        return PromptTemplate::builtin(config_.template_name);
    return PromptTemplate::load(config_.template_name);
}

std::vector<TaskSpec> Runner::expand_suite(const std::vector<uint64_t>& seeds) const {
    std::vector<TaskFamily> families;
    if (config_.suite.families.empty()) {
        families = all_task_families();
    } else {
        for (const auto& f : config_.suite.families) families.push_back(task_family_from_string(f));
    }
    std::vector<TaskSpec> tasks;
    for (uint64_t seed : seeds) {
        for (TaskFamily family : families) {
            for (const auto& layout_id : config_.suite.layouts) {
                const Layout& layout = registry_.require(layout_id);
                if (!layout.supports(family)) continue;
                tasks.push_back(make_task(registry_, family, layout_id, seed));
            }
        }
    }
    return tasks;
}

std::vector<TaskSpec> Runner::train_tasks() const { return expand_suite(config_.suite.train_seeds); }

std::vector<TaskSpec> Runner::eval_tasks() const { return expand_suite(config_.suite.eval_seeds); }

TaskSpec Runner::resolve_task(const std::string& task_ref) const {
    if (task_ref.find('/') == std::string::npos) {
        const auto tasks = train_tasks();
        size_t index = 0;
        try {
            index = std::stoul(task_ref);
        } catch (const std::exception&) {
            throw ValidationError("bad task reference: " + task_ref);
        }
        if (index >= tasks.size())
            throw ValidationError("task index " + task_ref + " out of range (suite has " +
                                  std::to_string(tasks.size()) + " tasks)");
        return tasks[index];
    }
    const auto first = task_ref.find('/');
    const auto second = task_ref.find('/', first + 1);
    if (second == std::string::npos)
        throw ValidationError("bad task reference (expected family/layout/seed): " + task_ref);
    const TaskFamily family = task_family_from_string(task_ref.substr(0, first));
    const std::string layout = task_ref.substr(first + 1, second - first - 1);
    uint64_t seed = 0;
    try {
        seed = std::stoull(task_ref.substr(second + 1));
    } catch (const std::exception&) {
        throw ValidationError("bad seed in task reference: " + task_ref);
    }
    return make_task(registry_, family, layout, seed);
}

IterationConfig Runner::iteration_config() const {
    IterationConfig cfg;
    cfg.search = config_.search;
    cfg.train = config_.train;
    cfg.pref_epsilon = config_.datasets.epsilon;
    cfg.pref_n_min = config_.datasets.n_min;
    cfg.pair_cap_per_node = config_.datasets.pair_cap_per_node;
    cfg.buffer_cap = config_.datasets.buffer_cap;
    cfg.tpl = make_template();
    return cfg;
}

std::string Runner::latest_checkpoint_path() const {
    return config_.out_dir + "/checkpoints/latest.json";
}

Checkpoint Runner::load_checkpoint_or_init(const std::string& path) const {
    if (!path.empty() && file_exists(path)) {
        Checkpoint c = Checkpoint::load(path);
        if (c.config_hash != config_.hash())
            throw ValidationError("checkpoint " + path + " was produced under config hash " +
                                  c.config_hash + ", current config hash is " + config_.hash());
        return c;
    }
    Checkpoint c;
    c.params = PolicyParams::zeros();
    c.config_hash = config_.hash();
    c.phase = "init";
    return c;
}

void Runner::save_checkpoint(const Checkpoint& c, const std::string& name) const {
    ensure_dir(config_.out_dir + "/checkpoints");
    const std::string path = config_.out_dir + "/checkpoints/" + name + ".json";
    c.save(path);
    c.save(latest_checkpoint_path());
}

namespace {

std::string sanitize_id(const std::string& id) {
    std::string out = id;
    for (char& ch : out) {
        if (ch == '/') ch = '_';
    }
    return out;
}

struct EpisodeStats {
    std::map<std::string, std::vector<EvalEpisode>> by_family;

    void add(const EvalEpisode& ep) { by_family[to_string(ep.task.family)].push_back(ep); }

    EvalReport report(bool with_search) const {
        EvalReport r;
        r.with_search = with_search;
        double successes = 0.0;
        double steps = 0.0;
        for (const auto& [family, eps] : by_family) {
            EvalReport::FamilyRow row;
            row.episodes = static_cast<int>(eps.size());
            for (const auto& ep : eps) {
                row.success_rate += ep.success ? 1.0 : 0.0;
                row.mean_steps += ep.steps;
            }
            successes += row.success_rate;
            steps += row.mean_steps;
            row.success_rate /= row.episodes;
            row.mean_steps /= row.episodes;
            r.per_family[family] = row;
            r.episodes += row.episodes;
        }
        if (r.episodes > 0) {
            r.success_rate = successes / r.episodes;
            r.mean_steps = steps / r.episodes;
        }
        return r;
    }
};

/// Run fn(i) for i in [0, n) over `workers` threads; fn must write only to
/// its own index slot so results are order-independent.
void parallel_for(size_t n, int workers, const std::function<void(size_t)>& fn) {
    if (workers <= 1 || n <= 1) {
        for (size_t i = 0; i < n; i++) fn(i);
        return;
    }
    std::atomic<size_t> next{0};
    std::vector<std::thread> pool;
    const int use = std::min<int>(workers, static_cast<int>(n));
    pool.reserve(static_cast<size_t>(use));
    for (int w = 0; w < use; w++) {
        pool.emplace_back([&] {
            while (true) {
                const size_t i = next.fetch_add(1);
                if (i >= n) return;
                fn(i);
            }
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace

json Runner::cmd_search(const std::string& task_ref) {
    const TaskSpec task = resolve_task(task_ref);
    GridHouse env = make_env();
    HeuristicCritic critic(config_.search.d_max);
    const PromptTemplate tpl = make_template();

    Checkpoint ckpt = load_checkpoint_or_init(
        file_exists(latest_checkpoint_path()) ? latest_checkpoint_path() : "");
    FeaturizedPolicy policy(ckpt.params);

    const SearchTree tree = run_search(task, policy, critic, env, config_.search);
    const json dump = tree_to_json(tree, tpl);

    ensure_dir(config_.out_dir + "/trees");
    const std::string path =
        config_.out_dir + "/trees/" + sanitize_id(task.id()) + ".tree.json";
    write_text_file_atomic(path, dump.dump() + "\n");

    int completed_leaves = 0;
    for (const auto& node : dump.at("nodes")) {
        if (node.at("terminal").get<bool>() && node.contains("outcome") &&
            node.at("outcome").at("status").get<std::string>() == "completed")
            completed_leaves++;
    }
    const json manifest{{"config_hash", config_.hash()},
                        {"created_at", manifest_timestamp()},
                        {"task", task.id()},
                        {"nodes", dump.at("nodes").size()},
                        {"completed_leaves", completed_leaves}};
    write_text_file_atomic(path + ".manifest.json", manifest.dump(2) + "\n");

    return json{{"path", path},
                {"task", task.id()},
                {"nodes", dump.at("nodes").size()},
                {"completed_leaves", completed_leaves},
                {"expansions", tree.stats.expansions},
                {"rollouts", tree.stats.rollouts}};
}

json Runner::cmd_collect() {
    const auto tasks = train_tasks();
    if (tasks.empty()) throw ValidationError("suite expands to zero tasks");
    const PromptTemplate tpl = make_template();
    HeuristicCritic critic(config_.search.d_max);

    Checkpoint ckpt = load_checkpoint_or_init(
        file_exists(latest_checkpoint_path()) ? latest_checkpoint_path() : "");

    struct TaskYield {
        std::vector<Trajectory> trajectories;
        std::vector<PreferencePair> pairs;
    };
    std::vector<TaskYield> yields(tasks.size());

    parallel_for(tasks.size(), config_.workers, [&](size_t i) {
        GridHouse env = make_env();
        FeaturizedPolicy policy(ckpt.params);
        SearchConfig search = config_.search;
        search.seed = hash128("collect|" + std::to_string(config_.seed) + "|" +
                              std::to_string(i))
                          .lo;
        const SearchTree tree = run_search(tasks[i], policy, critic, env, search);
        const json dump = tree_to_json(tree, tpl);
        yields[i].trajectories = extract_success(dump);
        yields[i].pairs = extract_preferences(dump, config_.datasets.epsilon,
                                              config_.datasets.n_min,
                                              config_.datasets.pair_cap_per_node);
    });

    std::vector<Trajectory> fresh_trajectories;
    std::vector<PreferencePair> fresh_pairs;
    json per_task = json::array();
    for (size_t i = 0; i < tasks.size(); i++) {
        per_task.push_back(json{{"task", tasks[i].id()},
                                {"trajectories", yields[i].trajectories.size()},
                                {"pairs", yields[i].pairs.size()}});
        for (auto& t : yields[i].trajectories) fresh_trajectories.push_back(std::move(t));
        for (auto& p : yields[i].pairs) fresh_pairs.push_back(std::move(p));
    }

    ensure_dir(config_.out_dir + "/datasets");
    const std::string buffer_path = config_.out_dir + "/datasets/buffer.jsonl";
    const std::string pairs_path = config_.out_dir + "/datasets/pairs.jsonl";

    std::vector<Trajectory> existing_buffer;
    std::vector<PreferencePair> existing_pairs;
    if (!config_.datasets.fresh_only) {
        if (file_exists(buffer_path)) existing_buffer = read_trajectories(buffer_path);
        if (file_exists(pairs_path)) existing_pairs = read_pairs(pairs_path);
    }
    const auto merged_buffer =
        merge_buffers(existing_buffer, fresh_trajectories, config_.datasets.buffer_cap);
    const auto merged_pairs = merge_pairs(existing_pairs, fresh_pairs, config_.datasets.buffer_cap);

    if (merged_buffer.empty())
        std::cerr << "[treeplan] collect: no successful trajectories across the suite\n";

    write_trajectories(merged_buffer, buffer_path, config_.hash());
    write_pairs(merged_pairs, pairs_path, config_.hash());

    return json{{"tasks", tasks.size()},
                {"new_trajectories", fresh_trajectories.size()},
                {"new_pairs", fresh_pairs.size()},
                {"buffer", buffer_path},
                {"buffer_size", merged_buffer.size()},
                {"pairs", pairs_path},
                {"pair_count", merged_pairs.size()},
                {"per_task", std::move(per_task)}};
}

json Runner::cmd_warmup(const std::string& expert_ref) {
    const PromptTemplate tpl = make_template();
    std::vector<Trajectory> expert;
    std::string expert_path = expert_ref;
    if (expert_ref.rfind("oracle:", 0) == 0) {
        const size_t count = std::stoul(expert_ref.substr(7));
        GridHouse env = make_env();
        expert = generate_expert_trajectories(*this, env, count, tpl);
        ensure_dir(config_.out_dir + "/datasets");
        expert_path = config_.out_dir + "/datasets/expert.jsonl";
        write_trajectories(expert, expert_path, config_.hash());
    } else {
        expert = read_trajectories(expert_ref);
    }

    Checkpoint ckpt = load_checkpoint_or_init("");
    std::vector<double> curve;
    ckpt.params = warmup_expert(std::move(ckpt.params), expert, config_.train, &curve);
    ckpt.phase = "warmup";
    save_checkpoint(ckpt, "warmup");

    return json{{"expert", expert_path},
                {"expert_count", expert.size()},
                {"checkpoint", config_.out_dir + "/checkpoints/warmup.json"},
                {"final_loss", curve.empty() ? 0.0 : curve.back()}};
}

json Runner::cmd_train(const std::string& phase) {
    if (phase != "sft" && phase != "dpo")
        throw ValidationError("unknown training phase: " + phase + " (expected sft or dpo)");
    Checkpoint ckpt = load_checkpoint_or_init(latest_checkpoint_path());

    const std::string buffer_path = config_.out_dir + "/datasets/buffer.jsonl";
    const std::string pairs_path = config_.out_dir + "/datasets/pairs.jsonl";
    PhaseResult result;
    if (phase == "sft") {
        if (!file_exists(buffer_path)) throw DataError("missing dataset: " + buffer_path);
        const auto buffer = read_trajectories(buffer_path);
        if (buffer.empty()) throw DataError("empty success buffer: " + buffer_path);
        result = train_phase(std::move(ckpt.params), buffer, {}, config_.train, LossKind::Sft);
    } else {
        if (!file_exists(pairs_path)) throw DataError("missing dataset: " + pairs_path);
        const auto pairs = read_pairs(pairs_path);
        if (pairs.empty()) throw DataError("empty preference set: " + pairs_path);
        const PolicyParams reference = ckpt.params;
        result = train_phase(std::move(ckpt.params), {}, pairs, config_.train, LossKind::Dpo,
                             &reference);
    }
    ckpt.params = std::move(result.params);
    ckpt.phase = phase;
    save_checkpoint(ckpt, phase);

    return json{{"phase", phase},
                {"checkpoint", config_.out_dir + "/checkpoints/" + phase + ".json"},
                {"epochs", result.epoch_losses.size()},
                {"final_loss", result.epoch_losses.back()},
                {"loss_curve", result.epoch_losses}};
}

json Runner::cmd_loop(int iterations) {
    if (iterations < 1) throw ValidationError("loop iterations must be >= 1");
    const auto tasks = train_tasks();
    const auto held_out = eval_tasks();
    if (tasks.empty()) throw ValidationError("suite expands to zero tasks");

    // Resume from the newest iteration checkpoint, else warmup, else zeros.
    int start = 0;
    Checkpoint ckpt;
    for (int i = iterations - 1; i >= 0; i--) {
        const std::string path =
            config_.out_dir + "/checkpoints/iter_" + std::to_string(i) + ".json";
        if (file_exists(path)) {
            ckpt = load_checkpoint_or_init(path);
            start = i + 1;
            break;
        }
    }
    if (start == 0) {
        const std::string warmup_path = config_.out_dir + "/checkpoints/warmup.json";
        ckpt = load_checkpoint_or_init(file_exists(warmup_path) ? warmup_path : "");
    }

    GridHouse env = make_env();
    HeuristicCritic critic(config_.search.d_max);
    IterationConfig iter_cfg = iteration_config();

    const std::string buffer_path = config_.out_dir + "/datasets/buffer.jsonl";
    const std::string pairs_path = config_.out_dir + "/datasets/pairs.jsonl";
    std::vector<Trajectory> buffer;
    std::vector<PreferencePair> pairs;
    if (!config_.datasets.fresh_only && start > 0) {
        if (file_exists(buffer_path)) buffer = read_trajectories(buffer_path);
        if (file_exists(pairs_path)) pairs = read_pairs(pairs_path);
    }

    json reports = json::array();
    for (int i = start; i < iterations; i++) {
        SearchConfig search = config_.search;
        search.seed = config_.seed;
        IterationConfig cfg = iter_cfg;
        cfg.search = search;
        if (config_.datasets.fresh_only) {
            buffer.clear();
            pairs.clear();
        }
        IterationResult result = run_iteration(std::move(ckpt.params), tasks, held_out, env,
                                               critic, cfg, std::move(buffer), std::move(pairs), i);
        ckpt.params = std::move(result.params);
        buffer = std::move(result.buffer);
        pairs = std::move(result.pairs);

        ensure_dir(config_.out_dir + "/datasets");
        write_trajectories(buffer, buffer_path, config_.hash());
        write_pairs(pairs, pairs_path, config_.hash());

        ckpt.phase = "iter_" + std::to_string(i);
        ckpt.iteration = i;
        save_checkpoint(ckpt, ckpt.phase);

        const json report = result.report.to_json();
        reports.push_back(report);
        std::ofstream log(config_.out_dir + "/run_log.jsonl", std::ios::app);
        log << report.dump() << "\n";
    }

    return json{{"iterations", iterations},
                {"resumed_at", start},
                {"checkpoint", latest_checkpoint_path()},
                {"reports", std::move(reports)}};
}

json Runner::cmd_eval(const std::string& checkpoint_path) {
    Checkpoint ckpt = load_checkpoint_or_init(checkpoint_path);
    const auto tasks = eval_tasks();
    if (tasks.empty()) throw ValidationError("suite expands to zero eval tasks");

    std::vector<EvalEpisode> episodes(tasks.size());
    parallel_for(tasks.size(), config_.workers, [&](size_t i) {
        GridHouse env = make_env();
        if (config_.eval.with_search) {
            HeuristicCritic critic(config_.search.d_max);
            SearchConfig search = config_.search;
            search.budget = config_.eval.search_budget;
            episodes[i] = run_search_episode(env, tasks[i], ckpt.params, critic, search);
        } else {
            episodes[i] = run_greedy_episode(env, tasks[i], ckpt.params);
        }
    });

    EpisodeStats stats;
    for (const auto& ep : episodes) stats.add(ep);
    const EvalReport report = stats.report(config_.eval.with_search);

    ensure_dir(config_.out_dir + "/reports");
    const std::string name =
        checkpoint_path.empty() ? "eval" : "eval_" + fs::path(checkpoint_path).stem().string();
    const std::string path = config_.out_dir + "/reports/" + name + ".json";
    json out = report.to_json();
    out["config_hash"] = config_.hash();
    out["checkpoint"] = checkpoint_path;
    write_text_file_atomic(path, out.dump(2) + "\n");

    json summary = report.to_json();
    summary["path"] = path;
    return summary;
}

std::vector<Trajectory> generate_expert_trajectories(const Runner& runner, GridHouse& env,
                                                     size_t count, const PromptTemplate& tpl) {
    std::vector<Trajectory> out;
    const auto tasks = runner.train_tasks();
    for (const auto& task : tasks) {
        if (out.size() >= count) break;
        StateGraph graph = build_graph(env, task);
        PlanResult plan = optimal_plan(graph, runner.config().search.gamma);
        if (!plan.solvable) continue;
        Trajectory t = trajectory_from_actions(env, task, plan.plan, tpl, "expert");
        if (t.final_reward != 1.0)
            throw RuntimeError("oracle plan for " + task.id() + " does not complete the task");
        out.push_back(std::move(t));
    }
    return out;
}

}  // namespace treeplan
