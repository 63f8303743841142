#pragma once

#include "treeplan/errors.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace treeplan {

enum class TaskFamily {
    PickPlace,
    CleanPlace,
    HeatPlace,
    CoolPlace,
    LookInLight,
    PickTwoPlace,
};

const char* to_string(TaskFamily f);
TaskFamily task_family_from_string(const std::string& s);
std::vector<TaskFamily> all_task_families();

struct TaskSpec {
    TaskFamily family = TaskFamily::PickPlace;
    std::string instruction;
    uint64_t seed = 0;
    std::string layout_id;

    /// "family/layout/seed" — used as the task id in configs and manifests.
    std::string id() const;
};

enum class Verb { Goto, Open, Close, Take, Put, Clean, Heat, Cool, Examine, Use };

const char* to_string(Verb v);

/// One agent action. Canonical text form is `verb object [receptacle]`
/// with single spaces, e.g. "take pan_1 countertop_1" or "goto table_1".
/// Rendering and parsing are bijective over valid actions.
struct Action {
    Verb verb = Verb::Goto;
    std::string object;
    std::string receptacle;  // empty when the verb takes no receptacle

    std::string text() const;
    static std::optional<Action> parse(std::string_view s);

    bool operator==(const Action&) const = default;
};

/// Candidate lists are ordered lexicographically over this.
inline bool action_text_less(const Action& a, const Action& b) { return a.text() < b.text(); }

enum class Feedback { Ok, InvalidAction, NothingHappens };

const char* to_string(Feedback f);

struct Observation {
    std::string text;
    std::vector<std::string> visible_objects;
    Feedback feedback = Feedback::Ok;
};

enum class TaskStatus { Completed, Partial, Incomplete };

const char* to_string(TaskStatus s);
TaskStatus task_status_from_string(const std::string& s);

struct Outcome {
    TaskStatus status = TaskStatus::Incomplete;
    int steps_used = 0;
};

/// Terminal-only reward: completed -> 1, partial -> 0.5, incomplete -> 0.
double outcome_reward(const Outcome& o);

/// Opaque serialized capture of hidden environment state. Restoring a
/// snapshot and replaying the same actions reproduces the same observations.
struct EnvSnapshot {
    std::string payload;
};

struct StepResult {
    Observation obs;
    std::vector<Action> candidates;
    bool terminal = false;
    std::optional<Outcome> outcome;
};

/// A single environment session. Not thread-safe; clone() gives an
/// independent session over the same layout registry.
class Env {
public:
    virtual ~Env() = default;

    virtual StepResult reset(const TaskSpec& spec) = 0;
    virtual StepResult step(const Action& action) = 0;

    virtual EnvSnapshot snapshot() const = 0;
    virtual void restore(const EnvSnapshot& snap) = 0;

    /// Goal-predicate evaluation at the current (possibly non-terminal)
    /// state; used when rollouts are truncated at the depth cap.
    virtual Outcome evaluate_outcome() const = 0;

    virtual std::unique_ptr<Env> clone() const = 0;
};

/// Structured reading of a task instruction, e.g.
/// "put a clean pan in countertop_1" -> {object_type: pan, receptacle:
/// countertop_1, process: Clean, count: 1}. Drives goal-match policy
/// features and goal construction.
struct GoalInfo {
    enum class Process { None, Clean, Heat, Cool, Light };

    std::string object_type;
    std::string receptacle;  // empty for LookInLight
    Process process = Process::None;
    int count = 1;

    static GoalInfo parse(const std::string& instruction);
};

std::string render_instruction(TaskFamily family, const std::string& object_type,
                               const std::string& receptacle);

}  // namespace treeplan
