#include "treeplan/remote.hpp"

#include "json.hpp"

#include <iostream>

namespace treeplan {

using nlohmann::json;

namespace {

json step_result_to_json(const StepResult& res) {
    json obs{{"text", res.obs.text},
             {"visible_objects", res.obs.visible_objects},
             {"feedback", to_string(res.obs.feedback)}};
    json cands = json::array();
    for (const auto& c : res.candidates) cands.push_back(c.text());
    json j{{"type", "result"},
           {"obs", std::move(obs)},
           {"candidates", std::move(cands)},
           {"terminal", res.terminal}};
    if (res.outcome) {
        j["outcome"] = {{"status", to_string(res.outcome->status)},
                        {"steps_used", res.outcome->steps_used}};
    }
    return j;
}

StepResult step_result_from_json(const json& j) {
    StepResult res;
    res.obs.text = j.at("obs").at("text").get<std::string>();
    res.obs.visible_objects = j.at("obs").at("visible_objects").get<std::vector<std::string>>();
    const std::string fb = j.at("obs").at("feedback").get<std::string>();
    res.obs.feedback = fb == "ok"             ? Feedback::Ok
                       : fb == "invalid_action" ? Feedback::InvalidAction
                                                : Feedback::NothingHappens;
    for (const auto& c : j.at("candidates")) {
        auto a = Action::parse(c.get<std::string>());
        if (!a) throw ProtocolError("peer sent unparseable candidate: " + c.get<std::string>());
        res.candidates.push_back(*a);
    }
    res.terminal = j.at("terminal").get<bool>();
    if (j.contains("outcome")) {
        Outcome out;
        out.status = task_status_from_string(j.at("outcome").at("status").get<std::string>());
        out.steps_used = j.at("outcome").at("steps_used").get<int>();
        res.outcome = out;
    }
    return res;
}

json task_to_json(const TaskSpec& spec) {
    return json{{"family", to_string(spec.family)},
                {"instruction", spec.instruction},
                {"layout", spec.layout_id},
                {"seed", spec.seed}};
}

TaskSpec task_from_json(const json& j) {
    TaskSpec spec;
    spec.family = task_family_from_string(j.at("family").get<std::string>());
    spec.instruction = j.at("instruction").get<std::string>();
    spec.layout_id = j.at("layout").get<std::string>();
    spec.seed = j.at("seed").get<uint64_t>();
    return spec;
}

}  // namespace

EnvWireServer::EnvWireServer(LayoutRegistry registry, int episode_cap)
    : registry_(std::move(registry)),
      episode_cap_(episode_cap),
      server_([this]() -> LineServer::SessionHandler {
          auto env = std::make_shared<GridHouse>(registry_, episode_cap_);
          return [env](const std::string& line) -> std::optional<std::string> {
              json reply;
              try {
                  const json req = json::parse(line);
                  const std::string type = req.at("type").get<std::string>();
                  if (type == "reset") {
                      reply = step_result_to_json(env->reset(task_from_json(req.at("task"))));
                  } else if (type == "step") {
                      const std::string text = req.at("action").get<std::string>();
                      auto action = Action::parse(text);
                      if (!action) throw ProtocolError("unparseable action: " + text);
                      reply = step_result_to_json(env->step(*action));
                  } else if (type == "eval") {
                      const Outcome out = env->evaluate_outcome();
                      reply = json{{"type", "result"},
                                   {"outcome",
                                    {{"status", to_string(out.status)},
                                     {"steps_used", out.steps_used}}}};
                  } else {
                      throw ProtocolError("unknown message type: " + type);
                  }
              } catch (const json::exception& e) {
                  reply = json{{"type", "error"}, {"message", std::string("bad message: ") + e.what()}};
              } catch (const Error& e) {
                  reply = json{{"type", "error"}, {"message", e.what()}};
              }
              return reply.dump();
          };
      }) {}

RemoteEnv::RemoteEnv(std::string endpoint) : endpoint_(std::move(endpoint)) {}

LineChannel& RemoteEnv::channel() {
    if (!channel_) channel_ = tcp_connect(endpoint_);
    return *channel_;
}

StepResult RemoteEnv::round_trip(const std::string& request) {
    channel().write_line(request);
    auto line = channel().read_line();
    if (!line) throw ProtocolError("env endpoint closed the connection: " + endpoint_);
    json j;
    try {
        j = json::parse(*line);
    } catch (const json::parse_error& e) {
        throw ProtocolError(std::string("malformed env message: ") + e.what());
    }
    const std::string type = j.value("type", "");
    if (type == "error") throw ProtocolError("env error: " + j.value("message", "unknown"));
    if (type != "result") throw ProtocolError("unexpected env message type: " + type);
    return step_result_from_json(j);
}

StepResult RemoteEnv::reset(const TaskSpec& spec) {
    counters_.reset_messages++;
    StepResult res = round_trip(json{{"type", "reset"}, {"task", task_to_json(spec)}}.dump());
    active_ = true;
    spec_ = spec;
    prefix_.clear();
    transcript_ = {res.obs.text};
    terminal_ = res.terminal;
    outcome_ = res.outcome;
    return res;
}

StepResult RemoteEnv::step(const Action& action) {
    if (!active_) throw ProtocolError("no active episode; call reset first");
    if (terminal_) throw ProtocolError("step after terminal state");
    counters_.step_messages++;
    StepResult res = round_trip(json{{"type", "step"}, {"action", action.text()}}.dump());
    prefix_.push_back(action.text());
    transcript_.push_back(res.obs.text);
    terminal_ = res.terminal;
    outcome_ = res.outcome;
    return res;
}

EnvSnapshot RemoteEnv::snapshot() const {
    if (!active_) throw ProtocolError("no active episode; call reset first");
    json j{{"kind", "replay"},
           {"task", task_to_json(spec_)},
           {"prefix", prefix_},
           {"transcript", transcript_},
           {"terminal", terminal_}};
    if (outcome_) {
        j["outcome"] = {{"status", to_string(outcome_->status)},
                        {"steps_used", outcome_->steps_used}};
    }
    return EnvSnapshot{j.dump()};
}

void RemoteEnv::restore(const EnvSnapshot& snap) {
    json j;
    try {
        j = json::parse(snap.payload);
    } catch (const json::parse_error& e) {
        throw DataError(std::string("snapshot: invalid payload: ") + e.what());
    }
    if (j.value("kind", "") != "replay")
        throw ValidationError("snapshot was not produced by a replay-based session");

    const TaskSpec spec = task_from_json(j.at("task"));
    const auto prefix = j.at("prefix").get<std::vector<std::string>>();
    const auto transcript = j.at("transcript").get<std::vector<std::string>>();

    counters_.reset_messages++;
    StepResult res = round_trip(json{{"type", "reset"}, {"task", task_to_json(spec)}}.dump());
    if (!transcript.empty() && res.obs.text != transcript[0])
        throw ProtocolError("replay divergence at reset: expected \"" + transcript[0] +
                            "\", got \"" + res.obs.text + "\"");
    for (size_t i = 0; i < prefix.size(); i++) {
        auto action = Action::parse(prefix[i]);
        if (!action) throw DataError("snapshot contains unparseable action: " + prefix[i]);
        counters_.step_messages++;
        res = round_trip(json{{"type", "step"}, {"action", prefix[i]}}.dump());
        if (i + 1 < transcript.size() && res.obs.text != transcript[i + 1])
            throw ProtocolError("replay divergence at step " + std::to_string(i + 1) +
                                ": expected \"" + transcript[i + 1] + "\", got \"" + res.obs.text +
                                "\"");
    }
    active_ = true;
    spec_ = spec;
    prefix_ = prefix;
    transcript_ = transcript;
    terminal_ = res.terminal;
    outcome_ = res.outcome;
}

Outcome RemoteEnv::evaluate_outcome() const {
    if (!active_) throw ProtocolError("no active episode; call reset first");
    counters_.eval_messages++;
    auto* self = const_cast<RemoteEnv*>(this);
    self->channel().write_line(json{{"type", "eval"}}.dump());
    auto line = self->channel().read_line();
    if (!line) throw ProtocolError("env endpoint closed the connection: " + endpoint_);
    const json j = json::parse(*line);
    if (j.value("type", "") == "error")
        throw ProtocolError("env error: " + j.value("message", "unknown"));
    Outcome out;
    out.status = task_status_from_string(j.at("outcome").at("status").get<std::string>());
    out.steps_used = j.at("outcome").at("steps_used").get<int>();
    return out;
}

std::unique_ptr<Env> RemoteEnv::clone() const {
    auto copy = std::make_unique<RemoteEnv>(endpoint_);
    if (active_) copy->restore(snapshot());
    return copy;
}

RemotePolicy::RemotePolicy(std::string endpoint, PromptTemplate tpl, RemotePolicyMode mode,
                           int max_retries)
    : endpoint_(std::move(endpoint)),
      tpl_(std::move(tpl)),
      mode_(mode),
      max_retries_(max_retries) {}

LineChannel& RemotePolicy::channel() {
    if (!channel_) channel_ = tcp_connect(endpoint_);
    return *channel_;
}

ActionDistribution RemotePolicy::distribution(const AgentState& s,
                                              const std::vector<Action>& candidates) {
    if (candidates.empty()) throw ValidationError("remote policy: empty candidate set");
    const std::string context = tpl_.render(s, candidates);
    json cands = json::array();
    for (const auto& c : candidates) cands.push_back(c.text());
    const std::string request =
        json{{"type", "completion"},
             {"context", context},
             {"candidates", cands},
             {"mode", mode_ == RemotePolicyMode::Score ? "score" : "sample"}}
            .dump();

    last_summary_.reset();
    ActionDistribution dist;
    dist.actions = candidates;
    dist.probabilities.assign(candidates.size(), 0.0);

    for (int attempt = 0; attempt <= max_retries_; attempt++) {
        if (attempt > 0) counters_.retries++;
        std::optional<std::string> line;
        try {
            channel().write_line(request);
            line = channel().read_line();
        } catch (const Error&) {
            counters_.transport_errors++;
            channel_.reset();  // reconnect on the next attempt
            continue;
        }
        if (!line) {
            counters_.transport_errors++;
            channel_.reset();
            continue;
        }
        json j;
        try {
            j = json::parse(*line);
        } catch (const json::parse_error&) {
            counters_.parse_errors++;
            continue;
        }
        if (j.value("type", "") != "result") {
            counters_.parse_errors++;
            continue;
        }

        if (mode_ == RemotePolicyMode::Score && j.contains("scores")) {
            std::vector<double> scores;
            try {
                scores = j.at("scores").get<std::vector<double>>();
            } catch (const json::exception&) {
                counters_.parse_errors++;
                continue;
            }
            if (scores.size() != candidates.size()) {
                counters_.parse_errors++;
                continue;
            }
            dist.probabilities = softmax(scores);
            return dist;
        }

        std::string text = j.value("text", "");
        std::string summary;
        // JSON-shaped reply: {"what_you_see": ..., "action": ...}
        if (json inner = json::parse(text, nullptr, false); inner.is_object() &&
                                                            inner.contains("action")) {
            summary = inner.value("what_you_see", "");
            text = inner.value("action", "");
        }
        while (!text.empty() && (text.front() == ' ' || text.front() == '\n')) text.erase(0, 1);
        while (!text.empty() && (text.back() == ' ' || text.back() == '\n')) text.pop_back();

        bool matched = false;
        for (size_t i = 0; i < candidates.size(); i++) {
            if (candidates[i].text() == text) {
                dist.probabilities[i] = 1.0;
                matched = true;
                break;
            }
        }
        if (!matched) {
            if (text.empty())
                counters_.parse_errors++;
            else
                counters_.non_candidate++;
            continue;
        }
        if (!summary.empty()) last_summary_ = summary;
        return dist;
    }

    counters_.fallbacks++;
    std::cerr << "[treeplan] remote policy: falling back to uniform after " << max_retries_
              << " retries\n";
    dist.probabilities.assign(candidates.size(), 1.0 / static_cast<double>(candidates.size()));
    return dist;
}

}  // namespace treeplan
