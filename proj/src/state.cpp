#include "treeplan/state.hpp"

namespace treeplan {

Hash128 AgentState::key() const {
    std::string buf;
    buf.reserve(256);
    buf += instruction;
    buf += '\x1f';
    for (const auto& h : history) {
        buf += h.action.text();
        buf += '\x1e';
        buf += h.summary;
        buf += '\x1f';
    }
    buf += '\x1d';
    buf += current_observation.text;
    return hash128(buf);
}

AgentState init_state(std::string instruction, Observation o0) {
    AgentState s;
    s.instruction = std::move(instruction);
    s.current_observation = std::move(o0);
    return s;
}

std::string identity_summary(const Observation& obs) { return obs.text; }

AgentState advance(const AgentState& s, const Action& a, Observation next,
                   const Summarizer& summarizer) {
    AgentState out = s;
    out.history.push_back({a, summarizer(s.current_observation)});
    out.current_observation = std::move(next);
    return out;
}

namespace {

const char* kTextTemplate =
    "You are an AI robot agent in an interactive environment. Your goal is to accomplish the "
    "given task through a series of actions. Follow these guidelines:\n"
    "- Carefully analyze the task requirements. Break down complex tasks into smaller, "
    "manageable steps and create a mental plan before acting\n"
    "- Be persistent in searching for required objects. When searching for objects, use common "
    "sense to predict likely locations, then systematically explore those areas\n"
    "- For tasks involving multiple objects, keep a mental count of how many you've collected "
    "or placed\n"
    "- Avoid repeating the same action consecutively. If an action doesn't work, explore other "
    "objects or locations\n"
    "- Your response must be exactly one action name chosen strictly from provided candidate "
    "actions\n"
    "\n"
    "Task: {instruction}\n"
    "History:\n"
    "{history}"
    "Current observation: {observation}\n"
    "Candidate actions: {candidates}\n";

const char* kJsonTemplate =
    "You are an AI robot agent in an interactive environment. Your goal is to accomplish the "
    "given task through a series of actions. Follow these guidelines:\n"
    "- Carefully analyze the task requirements. When searching for objects, use common sense "
    "to predict likely locations\n"
    "- For tasks involving multiple objects, keep a mental count of collected or placed items\n"
    "- Respond only with a JSON object containing:\n"
    "  - \"what_you_see\": your detailed observation\n"
    "  - \"action\": one action name\n"
    "\n"
    "Task: {instruction}\n"
    "History:\n"
    "{history}"
    "Current observation: {observation}\n"
    "Candidate actions: {candidates}\n";

}  // namespace

PromptTemplate PromptTemplate::from_string(std::string name, std::string text) {
    PromptTemplate t;
    t.name_ = std::move(name);
    t.text_ = std::move(text);
    return t;
}

PromptTemplate PromptTemplate::load(const std::string& path) {
    return from_string(path, read_text_file(path));
}

PromptTemplate PromptTemplate::builtin_text() { return from_string("text", kTextTemplate); }

PromptTemplate PromptTemplate::builtin_json() { return from_string("json", kJsonTemplate); }

PromptTemplate PromptTemplate::builtin(const std::string& name) {
    if (name == "text") return builtin_text();
    if (name == "json") return builtin_json();
    throw ValidationError("unknown builtin template: " + name + " (expected text or json)");
}

std::string PromptTemplate::render(const AgentState& s,
                                   const std::vector<Action>& candidates) const {
    std::string history;
    for (const auto& h : s.history) {
        history += "> " + h.action.text() + " => " + h.summary + "\n";
    }
    std::vector<std::string> cand_texts;
    cand_texts.reserve(candidates.size());
    for (const auto& c : candidates) cand_texts.push_back(c.text());

    std::string out;
    out.reserve(text_.size() + history.size() + 128);
    for (size_t i = 0; i < text_.size();) {
        if (text_[i] == '{') {
            size_t close = text_.find('}', i);
            if (close == std::string::npos)
                throw ValidationError("template " + name_ + ": unterminated placeholder");
            std::string key = text_.substr(i + 1, close - i - 1);
            if (key == "instruction")
                out += s.instruction;
            else if (key == "history")
                out += history;
            else if (key == "observation")
                out += s.current_observation.text;
            else if (key == "candidates")
                out += join(cand_texts, " | ");
            else
                throw ValidationError("template " + name_ + ": unbound placeholder {" + key + "}");
            i = close + 1;
        } else {
            out += text_[i];
            i++;
        }
    }
    return out;
}

}  // namespace treeplan
