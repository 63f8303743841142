#pragma once

#include "treeplan/gridhouse.hpp"
#include "treeplan/net.hpp"
#include "treeplan/policy.hpp"

namespace treeplan {

/// Serves GridHouse sessions over the env wire protocol: newline-delimited
/// JSON, one session per connection.
///
///   {"type":"reset","task":{family,instruction,layout,seed}}
///   {"type":"step","action":"<canonical action text>"}
///   {"type":"eval"}
/// ->
///   {"type":"result","obs":{...},"candidates":[...],"terminal":b,"outcome":{...}?}
///   {"type":"error","message":"..."}
class EnvWireServer {
public:
    EnvWireServer(LayoutRegistry registry, int episode_cap = 30);

    std::string endpoint() const { return server_.endpoint(); }
    void stop() { server_.stop(); }

private:
    LayoutRegistry registry_;
    int episode_cap_;
    LineServer server_;
};

struct RemoteEnvCounters {
    int reset_messages = 0;
    int step_messages = 0;
    int eval_messages = 0;
};

/// Env adapter over the wire protocol. External environments need not
/// support snapshots: a snapshot is the action prefix plus the recorded
/// observation transcript, and restore replays the prefix from reset,
/// verifying each observation against the transcript.
class RemoteEnv : public Env {
public:
    explicit RemoteEnv(std::string endpoint);

    StepResult reset(const TaskSpec& spec) override;
    StepResult step(const Action& action) override;
    EnvSnapshot snapshot() const override;
    void restore(const EnvSnapshot& snap) override;
    Outcome evaluate_outcome() const override;
    std::unique_ptr<Env> clone() const override;

    const RemoteEnvCounters& counters() const { return counters_; }

private:
    LineChannel& channel();
    StepResult round_trip(const std::string& request);

    std::string endpoint_;
    std::unique_ptr<LineChannel> channel_;
    mutable RemoteEnvCounters counters_;

    bool active_ = false;
    TaskSpec spec_;
    std::vector<std::string> prefix_;      // canonical action texts
    std::vector<std::string> transcript_;  // obs text per position (0 = reset)
    bool terminal_ = false;
    std::optional<Outcome> outcome_;
};

struct RemotePolicyCounters {
    int transport_errors = 0;
    int parse_errors = 0;
    int non_candidate = 0;
    int retries = 0;
    int fallbacks = 0;
};

enum class RemotePolicyMode { Sample, Score };

/// Model endpoint adapter. Protocol, newline-delimited JSON:
///   {"type":"completion","context":"...","candidates":[...],"mode":"sample"|"score"}
/// ->
///   {"type":"result","text":"..."} or {"type":"result","scores":[...]}
///
/// Sample mode accepts either a bare candidate action or a JSON object with
/// "action" (and optionally "what_you_see", captured as the step summary).
/// Unusable replies are retried up to max_retries, then fall back to a
/// uniform distribution.
class RemotePolicy : public PolicyProvider {
public:
    RemotePolicy(std::string endpoint, PromptTemplate tpl,
                 RemotePolicyMode mode = RemotePolicyMode::Sample, int max_retries = 2);

    ActionDistribution distribution(const AgentState& s,
                                    const std::vector<Action>& candidates) override;

    /// Summary text from the last JSON-shaped reply, if any.
    const std::optional<std::string>& last_summary() const { return last_summary_; }
    const RemotePolicyCounters& counters() const { return counters_; }

private:
    LineChannel& channel();

    std::string endpoint_;
    PromptTemplate tpl_;
    RemotePolicyMode mode_;
    int max_retries_;
    std::unique_ptr<LineChannel> channel_;
    std::optional<std::string> last_summary_;
    RemotePolicyCounters counters_;
};

}  // namespace treeplan
