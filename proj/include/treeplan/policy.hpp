#pragma once

#include "treeplan/state.hpp"

#include <memory>
#include <span>
#include <unordered_map>

namespace treeplan {

/// Maps feature names to dense indices. Grows append-only, in the order
/// features are first seen, so index assignment is deterministic for a
/// deterministic data stream. Shared between a live policy and its frozen
/// reference snapshot; weights beyond a snapshot's length read as zero.
class FeatureSpace {
public:
    uint32_t intern(const std::string& name);
    const std::string& name(uint32_t id) const;
    size_t size() const { return names_.size(); }
    std::optional<uint32_t> find(const std::string& name) const;

private:
    std::vector<std::string> names_;
    std::unordered_map<std::string, uint32_t> index_;
};

/// Trainable weights of the featurized softmax policy.
struct PolicyParams {
    std::shared_ptr<FeatureSpace> space;
    std::vector<double> weights;
    std::string version = "fmap-v1";

    static PolicyParams zeros();
    double weight(uint32_t fid) const { return fid < weights.size() ? weights[fid] : 0.0; }
    /// Extend the weight vector with zeros to cover the whole space.
    void sync_dimension();
};

/// Indicator feature ids for one (state, action) pair.
std::vector<std::string> feature_names(const AgentState& s, const Action& a);
/// Same features, interned. The hot path used by scoring and training.
void featurize(FeatureSpace& space, const AgentState& s, const Action& a,
               std::vector<uint32_t>& out);

struct ActionDistribution {
    std::vector<Action> actions;
    std::vector<double> probabilities;
};

ActionDistribution action_distribution(const PolicyParams& params, const AgentState& s,
                                       const std::vector<Action>& candidates);
double log_prob(const PolicyParams& params, const AgentState& s, const Action& a,
                const std::vector<Action>& candidates);
Action greedy_action(const PolicyParams& params, const AgentState& s,
                     const std::vector<Action>& candidates);

/// Softmax over precomputed per-candidate logits, max-stabilized.
std::vector<double> softmax(std::span<const double> logits);

struct CriticScore {
    double value = 0.0;  // in [0, 1]
};

class Critic {
public:
    virtual ~Critic() = default;
    /// `search_depth` is the node's depth below the search root (equal to
    /// s.depth() for searches started from a fresh episode).
    virtual CriticScore score(const AgentState& s, int search_depth) = 0;
};

/// Stand-in for a learned confidence model. Penalizes revisited situations
/// (current observation already appears among the history summaries) and
/// depth: score = 1 - repeat - 0.5 * search_depth / d_max, clamped to
/// [0, 1]. Hits exactly the default expansion threshold 0.5 at depth d_max.
class HeuristicCritic : public Critic {
public:
    explicit HeuristicCritic(int d_max) : d_max_(d_max) {}
    CriticScore score(const AgentState& s, int search_depth) override;

private:
    int d_max_;
};

/// Action source for the search. The featurized policy and the remote model
/// adapter both implement this.
class PolicyProvider {
public:
    virtual ~PolicyProvider() = default;
    virtual ActionDistribution distribution(const AgentState& s,
                                            const std::vector<Action>& candidates) = 0;
};

class FeaturizedPolicy : public PolicyProvider {
public:
    explicit FeaturizedPolicy(PolicyParams params) : params_(std::move(params)) {}
    ActionDistribution distribution(const AgentState& s,
                                    const std::vector<Action>& candidates) override {
        return action_distribution(params_, s, candidates);
    }
    const PolicyParams& params() const { return params_; }

private:
    PolicyParams params_;
};

}  // namespace treeplan
