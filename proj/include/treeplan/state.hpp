#pragma once

#include "treeplan/env.hpp"
#include "treeplan/util.hpp"

#include <functional>
#include <map>
#include <string>
#include <vector>

namespace treeplan {

struct HistoryStep {
    Action action;
    std::string summary;  // compressed text of the observation the action retired
};

/// Selective history representation: compact summaries for past steps, the
/// full observation only for the current one. Immutable value type; advance
/// returns a new state.
struct AgentState {
    std::string instruction;
    std::vector<HistoryStep> history;
    Observation current_observation;

    int depth() const { return static_cast<int>(history.size()); }
    /// 128-bit identity over (instruction, history, current observation).
    Hash128 key() const;
};

AgentState init_state(std::string instruction, Observation o0);

using Summarizer = std::function<std::string(const Observation&)>;

/// Default for text environments: observations are already compact.
std::string identity_summary(const Observation& obs);

/// New state with (a, summarizer(old observation)) appended and the current
/// observation replaced. The input state is untouched.
AgentState advance(const AgentState& s, const Action& a, Observation next,
                   const Summarizer& summarizer);

/// Text template with {instruction} / {history} / {observation} /
/// {candidates} placeholders. History renders as one line per step,
/// "> <action> => <summary>".
class PromptTemplate {
public:
    static PromptTemplate from_string(std::string name, std::string text);
    static PromptTemplate load(const std::string& path);

    /// The two built-ins: "text" expects a bare action name back; "json"
    /// expects {"what_you_see": ..., "action": ...}.
    static PromptTemplate builtin_text();
    static PromptTemplate builtin_json();
    static PromptTemplate builtin(const std::string& name);

    const std::string& name() const { return name_; }
    std::string render(const AgentState& s, const std::vector<Action>& candidates) const;

private:
    std::string name_;
    std::string text_;
};

}  // namespace treeplan
