#pragma once

#include "treeplan/gridhouse.hpp"
#include "treeplan/training.hpp"

#include "json.hpp"

namespace treeplan {

struct DatasetConfig {
    double epsilon = 0.1;  // preference margin
    int n_min = 2;         // visit floor for both pair sides
    int pair_cap_per_node = 6;
    size_t buffer_cap = 4096;
    bool fresh_only = false;  // drop accumulated buffers each iteration

    void validate() const;
};

struct SuiteConfig {
    std::vector<std::string> layouts;
    std::vector<std::string> families;  // empty = all
    std::vector<uint64_t> train_seeds;
    std::vector<uint64_t> eval_seeds;

    void validate() const;
};

struct EvalConfig {
    bool with_search = false;
    int search_budget = 50;
};

struct RunConfig {
    uint64_t seed = 1;
    std::string out_dir = "treeplan_out";
    int episode_cap = 30;
    std::string layout_registry;  // path; empty = builtin
    std::string template_name = "text";
    std::string policy_endpoint;  // host:port; empty = featurized policy
    int workers = 1;
    SearchConfig search;
    TrainConfig train;
    DatasetConfig datasets;
    SuiteConfig suite;
    EvalConfig eval;

    void validate() const;
    nlohmann::json to_json() const;
    static RunConfig from_json(const nlohmann::json& j);
    /// Read a config file, then apply the TREEPLAN_OVERRIDE env var and the
    /// extra override (both JSON merge patches).
    static RunConfig load(const std::string& path, const std::string& extra_override = "");
    static RunConfig defaults();

    /// Hash of the resolved config; stamped into every artifact manifest.
    std::string hash() const;
};

struct Checkpoint {
    PolicyParams params;
    std::string config_hash;
    std::string phase;  // "init" | "warmup" | "sft" | "dpo" | "iter_<k>"
    int iteration = -1;

    void save(const std::string& path) const;
    static Checkpoint load(const std::string& path);
};

struct EvalReport {
    struct FamilyRow {
        int episodes = 0;
        double success_rate = 0.0;
        double mean_steps = 0.0;
    };
    std::map<std::string, FamilyRow> per_family;
    int episodes = 0;
    double success_rate = 0.0;
    double mean_steps = 0.0;
    bool with_search = false;

    nlohmann::json to_json() const;
    static EvalReport from_json(const nlohmann::json& j);
};

/// Orchestration behind the CLI subcommands. Owns nothing mutable besides
/// the output directory contents; every command is deterministic given the
/// config.
class Runner {
public:
    explicit Runner(RunConfig config);

    const RunConfig& config() const { return config_; }
    nlohmann::json dump_config() const { return config_.to_json(); }

    std::vector<TaskSpec> train_tasks() const;
    std::vector<TaskSpec> eval_tasks() const;

    /// task_ref: an index into the train suite or "family/layout/seed".
    nlohmann::json cmd_search(const std::string& task_ref);
    nlohmann::json cmd_collect();
    /// expert_ref: path to an expert JSONL file, or "oracle:N" to generate
    /// N solutions with the brute-force planner.
    nlohmann::json cmd_warmup(const std::string& expert_ref);
    nlohmann::json cmd_train(const std::string& phase);  // "sft" | "dpo"
    nlohmann::json cmd_loop(int iterations);
    nlohmann::json cmd_eval(const std::string& checkpoint_path);

    std::string latest_checkpoint_path() const;

private:
    GridHouse make_env() const;
    PromptTemplate make_template() const;
    TaskSpec resolve_task(const std::string& task_ref) const;
    Checkpoint load_checkpoint_or_init(const std::string& path) const;
    void save_checkpoint(const Checkpoint& c, const std::string& name) const;
    std::vector<TaskSpec> expand_suite(const std::vector<uint64_t>& seeds) const;
    IterationConfig iteration_config() const;

    RunConfig config_;
    LayoutRegistry registry_;
};

/// Generate expert trajectories with the oracle planner over the first
/// `count` train-suite tasks (solvable ones only).
std::vector<Trajectory> generate_expert_trajectories(const Runner& runner, GridHouse& env,
                                                     size_t count, const PromptTemplate& tpl);

}  // namespace treeplan
