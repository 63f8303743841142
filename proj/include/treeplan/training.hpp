#pragma once

#include "treeplan/datasets.hpp"
#include "treeplan/policy.hpp"
#include "treeplan/search.hpp"

#include <span>

namespace treeplan {

struct TrainConfig {
    double beta = 0.5;  // DPO temperature
    double learning_rate = 0.5;
    int epochs_sft = 40;
    int epochs_dpo = 20;
    int batch_size = 8;
    double grad_clip = 5.0;
    uint64_t seed = 0;

    void validate() const;
};

nlohmann::json train_config_to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j);

/// A trajectory compiled against a feature space: per step, the feature ids
/// of every candidate and the index of the chosen action.
struct SftItem {
    struct Step {
        std::vector<std::vector<uint32_t>> cand_feats;
        size_t action_index = 0;
    };
    std::vector<Step> steps;
};

struct DpoItem {
    std::vector<std::vector<uint32_t>> cand_feats;
    size_t winner_index = 0;
    size_t loser_index = 0;
};

/// Interns all features (growing the space) and validates that recorded
/// actions sit inside their recorded candidate sets.
std::vector<SftItem> compile_sft(FeatureSpace& space, std::span<const Trajectory> trajectories);
std::vector<DpoItem> compile_dpo(FeatureSpace& space, std::span<const PreferencePair> pairs);

/// Mean over trajectories of the per-trajectory action NLL.
double sft_loss(const PolicyParams& params, std::span<const Trajectory> trajectories);
/// Analytic gradient of sft_loss, dimension == feature space size.
std::vector<double> sft_grad(const PolicyParams& params, std::span<const Trajectory> trajectories);

/// Mean over pairs of -log sigmoid(beta * (log-ratio(winner) - log-ratio(loser))).
double dpo_loss(const PolicyParams& params, const PolicyParams& ref,
                std::span<const PreferencePair> pairs, double beta);
std::vector<double> dpo_grad(const PolicyParams& params, const PolicyParams& ref,
                             std::span<const PreferencePair> pairs, double beta);

enum class LossKind { Sft, Dpo };

struct PhaseResult {
    PolicyParams params;
    std::vector<double> epoch_losses;  // full-data mean loss after each epoch
};

/// Mini-batch gradient descent with gradient-norm clipping and a seeded
/// shuffle. `ref` is required for LossKind::Dpo and frozen for the whole
/// phase.
PhaseResult train_phase(PolicyParams params, std::span<const Trajectory> trajectories,
                        std::span<const PreferencePair> pairs, const TrainConfig& config,
                        LossKind kind, const PolicyParams* ref = nullptr);

/// SFT over expert-source trajectories; no-op with a warning when empty.
PolicyParams warmup_expert(PolicyParams params, const std::vector<Trajectory>& expert,
                           const TrainConfig& config, std::vector<double>* curve = nullptr);

struct EvalEpisode {
    TaskSpec task;
    bool success = false;
    int steps = 0;
    double reward = 0.0;
};

/// Greedy rollout (no search) until terminal or the episode cap.
EvalEpisode run_greedy_episode(Env& env, const TaskSpec& spec, const PolicyParams& params,
                               const Summarizer& summarizer = identity_summary);

/// Act-after-search: run a fresh search from the live state each step and
/// play the best root action.
EvalEpisode run_search_episode(Env& env, const TaskSpec& spec, const PolicyParams& params,
                               Critic& critic, const SearchConfig& search,
                               const Summarizer& summarizer = identity_summary);

struct IterationConfig {
    SearchConfig search;
    TrainConfig train;
    double pref_epsilon = 0.1;
    int pref_n_min = 2;
    int pair_cap_per_node = 6;
    size_t buffer_cap = 4096;
    bool skip_sft = false;  // ablation: drop fine-tuning on search successes
    bool skip_dpo = false;  // ablation: drop preference optimization
    PromptTemplate tpl = PromptTemplate::builtin_text();
};

struct IterationReport {
    int iteration = 0;
    size_t new_trajectories = 0;
    size_t new_pairs = 0;
    size_t buffer_size = 0;
    size_t pair_count = 0;
    double mean_sft_loss = 0.0;  // final epoch
    double mean_dpo_loss = 0.0;
    double eval_success = 0.0;
    double eval_mean_steps = 0.0;
    bool no_op = false;

    nlohmann::json to_json() const;
};

struct IterationResult {
    PolicyParams params;
    IterationReport report;
    std::vector<Trajectory> buffer;     // merged success buffer after this iteration
    std::vector<PreferencePair> pairs;  // merged preference set
};

/// One pass of the outer loop: search every task, extract and merge
/// datasets, SFT on the buffer, snapshot the reference, DPO on the pairs,
/// then evaluate greedily on the held-out tasks.
IterationResult run_iteration(PolicyParams params, const std::vector<TaskSpec>& train_tasks,
                              const std::vector<TaskSpec>& eval_tasks, Env& env, Critic& critic,
                              const IterationConfig& cfg, std::vector<Trajectory> carry_buffer,
                              std::vector<PreferencePair> carry_pairs, int iteration_index);

}  // namespace treeplan
