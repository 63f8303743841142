#include "treeplan/env.hpp"

#include "treeplan/util.hpp"

namespace treeplan {

const char* to_string(TaskFamily f) {
    switch (f) {
        case TaskFamily::PickPlace: return "pick_place";
        case TaskFamily::CleanPlace: return "clean_place";
        case TaskFamily::HeatPlace: return "heat_place";
        case TaskFamily::CoolPlace: return "cool_place";
        case TaskFamily::LookInLight: return "look_in_light";
        case TaskFamily::PickTwoPlace: return "pick_two_place";
    }
    return "?";
}

TaskFamily task_family_from_string(const std::string& s) {
    for (TaskFamily f : all_task_families()) {
        if (s == to_string(f)) return f;
    }
    throw ValidationError("unknown task family: " + s);
}

std::vector<TaskFamily> all_task_families() {
    return {TaskFamily::PickPlace,   TaskFamily::CleanPlace,  TaskFamily::HeatPlace,
            TaskFamily::CoolPlace,   TaskFamily::LookInLight, TaskFamily::PickTwoPlace};
}

std::string TaskSpec::id() const {
    return std::string(to_string(family)) + "/" + layout_id + "/" + std::to_string(seed);
}

const char* to_string(Verb v) {
    switch (v) {
        case Verb::Goto: return "goto";
        case Verb::Open: return "open";
        case Verb::Close: return "close";
        case Verb::Take: return "take";
        case Verb::Put: return "put";
        case Verb::Clean: return "clean";
        case Verb::Heat: return "heat";
        case Verb::Cool: return "cool";
        case Verb::Examine: return "examine";
        case Verb::Use: return "use";
    }
    return "?";
}

namespace {

std::optional<Verb> verb_from_string(std::string_view s) {
    static const std::pair<const char*, Verb> table[] = {
        {"goto", Verb::Goto},   {"open", Verb::Open},       {"close", Verb::Close},
        {"take", Verb::Take},   {"put", Verb::Put},         {"clean", Verb::Clean},
        {"heat", Verb::Heat},   {"cool", Verb::Cool},       {"examine", Verb::Examine},
        {"use", Verb::Use},
    };
    for (const auto& [name, v] : table) {
        if (s == name) return v;
    }
    return std::nullopt;
}

bool verb_takes_receptacle(Verb v) {
    switch (v) {
        case Verb::Take:
        case Verb::Put:
        case Verb::Clean:
        case Verb::Heat:
        case Verb::Cool:
            return true;
        default:
            return false;
    }
}

}  // namespace

std::string Action::text() const {
    std::string out = to_string(verb);
    out += ' ';
    out += object;
    if (!receptacle.empty()) {
        out += ' ';
        out += receptacle;
    }
    return out;
}

std::optional<Action> Action::parse(std::string_view s) {
    auto parts = split_ws(s);
    if (parts.size() < 2 || parts.size() > 3) return std::nullopt;
    auto verb = verb_from_string(parts[0]);
    if (!verb) return std::nullopt;
    Action a;
    a.verb = *verb;
    a.object = parts[1];
    if (parts.size() == 3) {
        if (!verb_takes_receptacle(*verb)) return std::nullopt;
        a.receptacle = parts[2];
    } else if (verb_takes_receptacle(*verb)) {
        return std::nullopt;
    }
    return a;
}

const char* to_string(Feedback f) {
    switch (f) {
        case Feedback::Ok: return "ok";
        case Feedback::InvalidAction: return "invalid_action";
        case Feedback::NothingHappens: return "nothing_happens";
    }
    return "?";
}

const char* to_string(TaskStatus s) {
    switch (s) {
        case TaskStatus::Completed: return "completed";
        case TaskStatus::Partial: return "partial";
        case TaskStatus::Incomplete: return "incomplete";
    }
    return "?";
}

TaskStatus task_status_from_string(const std::string& s) {
    if (s == "completed") return TaskStatus::Completed;
    if (s == "partial") return TaskStatus::Partial;
    if (s == "incomplete") return TaskStatus::Incomplete;
    throw DataError("unknown task status: " + s);
}

double outcome_reward(const Outcome& o) {
    switch (o.status) {
        case TaskStatus::Completed: return 1.0;
        case TaskStatus::Partial: return 0.5;
        case TaskStatus::Incomplete: return 0.0;
    }
    return 0.0;
}

std::string render_instruction(TaskFamily family, const std::string& object_type,
                               const std::string& receptacle) {
    switch (family) {
        case TaskFamily::PickPlace:
            return "put a " + object_type + " in " + receptacle;
        case TaskFamily::CleanPlace:
            return "put a clean " + object_type + " in " + receptacle;
        case TaskFamily::HeatPlace:
            return "put a hot " + object_type + " in " + receptacle;
        case TaskFamily::CoolPlace:
            return "put a cool " + object_type + " in " + receptacle;
        case TaskFamily::LookInLight:
            return "examine the " + object_type + " with the desklamp";
        case TaskFamily::PickTwoPlace:
            return "put two " + object_type + " in " + receptacle;
    }
    return "";
}

GoalInfo GoalInfo::parse(const std::string& instruction) {
    auto words = split_ws(instruction);
    GoalInfo g;
    if (words.size() >= 5 && words[0] == "examine" && words[1] == "the" &&
        words[3] == "with") {
        g.object_type = words[2];
        g.process = Process::Light;
        return g;
    }
    // "put a [adj] <obj> in <recep>" / "put two <obj> in <recep>"
    if (words.size() >= 5 && words[0] == "put") {
        size_t i = 1;
        if (words[i] == "two") {
            g.count = 2;
            i++;
        } else if (words[i] == "a" || words[i] == "an" || words[i] == "the") {
            i++;
        }
        if (i < words.size()) {
            if (words[i] == "clean") { g.process = Process::Clean; i++; }
            else if (words[i] == "hot") { g.process = Process::Heat; i++; }
            else if (words[i] == "cool" || words[i] == "cold") { g.process = Process::Cool; i++; }
        }
        if (i < words.size()) {
            g.object_type = words[i];
            i++;
        }
        if (i < words.size() && (words[i] == "in" || words[i] == "on")) i++;
        if (i < words.size()) g.receptacle = words[i];
    }
    return g;
}

}  // namespace treeplan
