#pragma once

#include "treeplan/env.hpp"
#include "treeplan/state.hpp"
#include "treeplan/util.hpp"

#include "json.hpp"

#include <string>
#include <vector>

namespace treeplan {

constexpr int kDatasetFormatVersion = 1;

struct TrajectoryStep {
    std::string context;  // policy conditioning text before the action
    std::string action;   // canonical action text
    std::string summary;  // summary of the observation the action produced
    std::vector<std::string> candidates;  // candidate set the action was chosen from
};

struct Trajectory {
    std::string instruction;
    TaskFamily family = TaskFamily::PickPlace;
    std::string layout_id;
    uint64_t task_seed = 0;
    std::string tree_id;  // hash of the originating tree dump; empty for expert data
    std::vector<TrajectoryStep> steps;
    double final_reward = 0.0;
    std::string source = "search";  // "search" | "expert"

    TaskSpec task() const;
    nlohmann::json to_json() const;
    static Trajectory from_json(const nlohmann::json& j);
    /// Identity for dedup: task fields + action sequence.
    Hash128 dedup_hash() const;
};

struct PreferencePair {
    std::string instruction;
    std::string context;                 // render of the branching state
    std::vector<std::string> history;    // action texts leading to that state
    std::string winner;
    std::string loser;
    double q_w = 0.0;
    double q_l = 0.0;
    int n_w = 0;
    int n_l = 0;
    std::vector<std::string> candidates;
    std::string tree_id;

    nlohmann::json to_json() const;
    static PreferencePair from_json(const nlohmann::json& j);
    Hash128 dedup_hash() const;
};

/// One trajectory per distinct root-to-terminal path with reward 1,
/// deduplicated by action sequence, in node-id order.
std::vector<Trajectory> extract_success(const nlohmann::json& tree_dump);

/// Every ordered edge pair at a branching node with q_w - q_l > epsilon and
/// both visit counts >= n_min; at most per_node_cap pairs per node, widest
/// margins first.
std::vector<PreferencePair> extract_preferences(const nlohmann::json& tree_dump, double epsilon,
                                                int n_min, int per_node_cap = 6);

struct DatasetManifest {
    size_t count = 0;
    std::string config_hash;
    std::vector<std::string> tree_ids;
    int64_t created_at = 0;
    int format_version = kDatasetFormatVersion;

    nlohmann::json to_json() const;
    static DatasetManifest from_json(const nlohmann::json& j);
};

std::string manifest_path_for(const std::string& dataset_path);

DatasetManifest write_trajectories(const std::vector<Trajectory>& items, const std::string& path,
                                   const std::string& config_hash);
std::vector<Trajectory> read_trajectories(const std::string& path);
DatasetManifest write_pairs(const std::vector<PreferencePair>& items, const std::string& path,
                            const std::string& config_hash);
std::vector<PreferencePair> read_pairs(const std::string& path);

/// Newest-first merge with dedup: `fresh` wins over `existing`, truncated to
/// cap. Idempotent.
std::vector<Trajectory> merge_buffers(const std::vector<Trajectory>& existing,
                                      const std::vector<Trajectory>& fresh, size_t cap);
std::vector<PreferencePair> merge_pairs(const std::vector<PreferencePair>& existing,
                                        const std::vector<PreferencePair>& fresh, size_t cap);

/// Replay the trajectory's actions from reset and compare each resulting
/// observation summary against the recorded one; throws DataError on any
/// divergence. Returns the terminal outcome (or the standing evaluation if
/// the replay ends non-terminal).
Outcome replay_trajectory(Env& env, const Trajectory& t,
                          const Summarizer& summarizer = identity_summary);

/// Build a trajectory by driving `actions` through the environment.
Trajectory trajectory_from_actions(Env& env, const TaskSpec& spec,
                                   const std::vector<Action>& actions, const PromptTemplate& tpl,
                                   const std::string& source,
                                   const Summarizer& summarizer = identity_summary);

}  // namespace treeplan
