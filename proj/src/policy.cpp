#include "treeplan/policy.hpp"

#include "treeplan/layout.hpp"

#include <algorithm>
#include <cmath>

namespace treeplan {

uint32_t FeatureSpace::intern(const std::string& name) {
    auto it = index_.find(name);
    if (it != index_.end()) return it->second;
    uint32_t id = static_cast<uint32_t>(names_.size());
    names_.push_back(name);
    index_.emplace(name, id);
    return id;
}

const std::string& FeatureSpace::name(uint32_t id) const {
    if (id >= names_.size()) throw ValidationError("feature id out of range");
    return names_[id];
}

std::optional<uint32_t> FeatureSpace::find(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

PolicyParams PolicyParams::zeros() {
    PolicyParams p;
    p.space = std::make_shared<FeatureSpace>();
    return p;
}

void PolicyParams::sync_dimension() {
    if (!space) throw ValidationError("policy params have no feature space");
    weights.resize(space->size(), 0.0);
}

namespace {

std::string object_type_of(const std::string& id) {
    auto pos = id.rfind('_');
    return pos == std::string::npos ? id : id.substr(0, pos);
}

// The featurizer is instruction- and history-conditioned only; observations
// enter the policy through the candidate mask, not through features.
template <typename Emit>
void emit_features(const GoalInfo& goal, const AgentState& s, const Action& a, Emit&& emit) {
    const std::string verb = to_string(a.verb);

    emit("verb=" + verb);
    emit("vo=" + verb + ":" + a.object);

    if (!goal.object_type.empty() && object_type_of(a.object) == goal.object_type) {
        emit("goalobj:" + verb);
    }
    const std::string recep_of_action = a.verb == Verb::Goto ? a.object : a.receptacle;
    if (!goal.receptacle.empty() && !recep_of_action.empty() &&
        receptacle_kind_of(recep_of_action) == goal.receptacle) {
        emit("goalrecep:" + verb);
    }

    // Required-process match: e.g. "heat"/"goto microwave_1" for a task whose
    // instruction asks for a hot object.
    const GoalInfo::Process proc = goal.process;
    if (proc != GoalInfo::Process::None) {
        bool verb_match = (proc == GoalInfo::Process::Clean && a.verb == Verb::Clean) ||
                          (proc == GoalInfo::Process::Heat && a.verb == Verb::Heat) ||
                          (proc == GoalInfo::Process::Cool && a.verb == Verb::Cool) ||
                          (proc == GoalInfo::Process::Light && a.verb == Verb::Use);
        if (verb_match) emit("proc=" + verb);
        if (a.verb == Verb::Goto && processor_of_kind(receptacle_kind_of(a.object)) == proc) {
            emit("procgoto");
        }
    }

    int bucket = std::min(s.depth(), 12) / 3;
    emit("depth=" + std::to_string(bucket));

    if (!s.history.empty()) {
        if (s.history.back().action == a) emit("repeat");
        if (a.verb == Verb::Goto) {
            for (const auto& h : s.history) {
                if (h.action.verb == Verb::Goto && h.action.object == a.object) {
                    emit("revisit");
                    break;
                }
            }
        }
    }
}

}  // namespace

std::vector<std::string> feature_names(const AgentState& s, const Action& a) {
    std::vector<std::string> out;
    const GoalInfo goal = GoalInfo::parse(s.instruction);
    emit_features(goal, s, a, [&](std::string name) { out.push_back(std::move(name)); });
    return out;
}

void featurize(FeatureSpace& space, const AgentState& s, const Action& a,
               std::vector<uint32_t>& out) {
    out.clear();
    const GoalInfo goal = GoalInfo::parse(s.instruction);
    emit_features(goal, s, a, [&](const std::string& name) { out.push_back(space.intern(name)); });
}

std::vector<double> softmax(std::span<const double> logits) {
    double mx = -HUGE_VAL;
    for (double v : logits) mx = std::max(mx, v);
    std::vector<double> out(logits.size());
    double z = 0.0;
    for (size_t i = 0; i < logits.size(); i++) {
        out[i] = std::exp(logits[i] - mx);
        z += out[i];
    }
    for (double& v : out) v /= z;
    return out;
}

ActionDistribution action_distribution(const PolicyParams& params, const AgentState& s,
                                       const std::vector<Action>& candidates) {
    if (candidates.empty()) throw ValidationError("action_distribution: empty candidate set");
    if (!params.space) throw ValidationError("policy params have no feature space");

    // find() only: scoring must not grow the space, so concurrent read-only
    // evaluation over shared params is safe.
    const GoalInfo goal = GoalInfo::parse(s.instruction);
    std::vector<double> logits(candidates.size());
    for (size_t i = 0; i < candidates.size(); i++) {
        double dot = 0.0;
        emit_features(goal, s, candidates[i], [&](const std::string& name) {
            if (auto fid = params.space->find(name)) dot += params.weight(*fid);
        });
        logits[i] = dot;
    }
    ActionDistribution dist;
    dist.actions = candidates;
    dist.probabilities = softmax(logits);
    return dist;
}

double log_prob(const PolicyParams& params, const AgentState& s, const Action& a,
                const std::vector<Action>& candidates) {
    auto dist = action_distribution(params, s, candidates);
    for (size_t i = 0; i < dist.actions.size(); i++) {
        if (dist.actions[i] == a) return std::log(dist.probabilities[i]);
    }
    throw ValidationError("log_prob: action not in candidate set: " + a.text());
}

Action greedy_action(const PolicyParams& params, const AgentState& s,
                     const std::vector<Action>& candidates) {
    auto dist = action_distribution(params, s, candidates);
    size_t best = 0;
    for (size_t i = 1; i < dist.probabilities.size(); i++) {
        if (dist.probabilities[i] > dist.probabilities[best]) best = i;
    }
    return dist.actions[best];
}

CriticScore HeuristicCritic::score(const AgentState& s, int search_depth) {
    double penalty = 0.0;
    for (const auto& h : s.history) {
        if (h.summary == s.current_observation.text) {
            penalty = 1.0;
            break;
        }
    }
    double value = 1.0 - penalty - 0.5 * static_cast<double>(search_depth) / d_max_;
    return CriticScore{std::clamp(value, 0.0, 1.0)};
}

}  // namespace treeplan
