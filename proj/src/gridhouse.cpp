#include "treeplan/gridhouse.hpp"

#include "treeplan/util.hpp"

#include <algorithm>
#include <cstdlib>
#include <string_view>

namespace treeplan {

namespace {

GoalInfo::Process required_process(TaskFamily f) {
    switch (f) {
        case TaskFamily::CleanPlace: return GoalInfo::Process::Clean;
        case TaskFamily::HeatPlace: return GoalInfo::Process::Heat;
        case TaskFamily::CoolPlace: return GoalInfo::Process::Cool;
        case TaskFamily::LookInLight: return GoalInfo::Process::Light;
        default: return GoalInfo::Process::None;
    }
}

}  // namespace

GridHouse::GridHouse(LayoutRegistry registry, int episode_cap)
    : registry_(std::move(registry)), episode_cap_(episode_cap) {
    if (episode_cap_ < 1) throw ValidationError("episode cap must be >= 1");
}

const TaskSpec& GridHouse::task() const {
    require_active();
    return spec_;
}

void GridHouse::require_active() const {
    if (!active_) throw ProtocolError("no active episode; call reset first");
}

GridHouse::ObjState* GridHouse::find_object(const std::string& id) {
    for (auto& o : world_.objects) {
        if (o.id == id) return &o;
    }
    return nullptr;
}

const GridHouse::ObjState* GridHouse::find_object(const std::string& id) const {
    return const_cast<GridHouse*>(this)->find_object(id);
}

bool GridHouse::receptacle_accessible(const ReceptacleDef& r) const {
    if (!r.openable) return true;
    auto it = world_.open_state.find(r.id);
    return it != world_.open_state.end() && it->second;
}

bool GridHouse::object_visible(const ObjState& o) const {
    if (o.loc == "agent") return true;
    if (o.loc != world_.agent_loc) return false;
    const ReceptacleDef* r = layout_->find_receptacle(o.loc);
    return r && receptacle_accessible(*r);
}

const GridHouse::ObjState* GridHouse::held_object() const {
    for (const auto& o : world_.objects) {
        if (o.loc == "agent") return &o;
    }
    return nullptr;
}

bool GridHouse::goal_satisfied() const {
    const TaskFamily f = spec_.family;
    if (f == TaskFamily::LookInLight) {
        const ObjState* held = held_object();
        if (!held || held->type != goal_.object_type) return false;
        for (const auto& o : world_.objects) {
            if (o.lamp && o.lit && o.loc == world_.agent_loc && !world_.agent_loc.empty())
                return true;
        }
        return false;
    }
    const GoalInfo::Process proc = required_process(f);
    int placed = 0;
    for (const auto& o : world_.objects) {
        if (o.type != goal_.object_type) continue;
        if (o.loc == "agent" || o.loc.empty()) continue;
        if (receptacle_kind_of(o.loc) != goal_.receptacle_kind) continue;
        if (proc == GoalInfo::Process::Clean && !o.clean) continue;
        if (proc == GoalInfo::Process::Heat && o.temp != Temp::Hot) continue;
        if (proc == GoalInfo::Process::Cool && o.temp != Temp::Cold) continue;
        placed++;
    }
    return placed >= goal_.count;
}

bool GridHouse::goal_partial() const {
    const TaskFamily f = spec_.family;
    if (f == TaskFamily::PickTwoPlace) {
        int placed = 0;
        for (const auto& o : world_.objects) {
            if (o.type == goal_.object_type && o.loc != "agent" && !o.loc.empty() &&
                receptacle_kind_of(o.loc) == goal_.receptacle_kind)
                placed++;
        }
        return placed == 1;
    }
    const ObjState* held = held_object();
    if (held && held->type == goal_.object_type) return true;
    const GoalInfo::Process proc = required_process(f);
    if (proc == GoalInfo::Process::Clean || proc == GoalInfo::Process::Heat ||
        proc == GoalInfo::Process::Cool) {
        for (const auto& o : world_.objects) {
            if (o.type != goal_.object_type) continue;
            const bool processed = (proc == GoalInfo::Process::Clean && o.clean) ||
                                   (proc == GoalInfo::Process::Heat && o.temp == Temp::Hot) ||
                                   (proc == GoalInfo::Process::Cool && o.temp == Temp::Cold);
            if (processed) return true;
        }
    }
    return false;
}

Outcome GridHouse::evaluate_outcome() const {
    require_active();
    Outcome out;
    out.steps_used = world_.steps;
    if (goal_satisfied())
        out.status = TaskStatus::Completed;
    else if (goal_partial())
        out.status = TaskStatus::Partial;
    else
        out.status = TaskStatus::Incomplete;
    return out;
}

std::string GridHouse::contents_clause(const std::string& rid) const {
    const ReceptacleDef* r = layout_->find_receptacle(rid);
    if (r->openable && !receptacle_accessible(*r)) {
        return " The " + rid + " is closed.";
    }
    std::vector<std::string> here;
    for (const auto& o : world_.objects) {
        if (o.loc == rid) here.push_back(o.id);
    }
    std::sort(here.begin(), here.end());
    const char* prep = r->openable ? " In the " : " On the ";
    if (here.empty()) return prep + rid + ", you see nothing.";
    return prep + rid + ", you see: " + join(here, ", ") + ".";
}

std::vector<Action> GridHouse::candidate_actions() const {
    require_active();
    std::vector<Action> out;
    if (world_.terminal) return out;

    for (const auto& r : layout_->receptacles) {
        if (r.id != world_.agent_loc) out.push_back({Verb::Goto, r.id, ""});
    }
    const ObjState* held = held_object();
    if (!world_.agent_loc.empty()) {
        const ReceptacleDef* at = layout_->find_receptacle(world_.agent_loc);
        if (at->openable) {
            if (receptacle_accessible(*at))
                out.push_back({Verb::Close, at->id, ""});
            else
                out.push_back({Verb::Open, at->id, ""});
        }
        const bool accessible = receptacle_accessible(*at);
        if (accessible) {
            for (const auto& o : world_.objects) {
                if (o.loc != at->id) continue;
                out.push_back({Verb::Examine, o.id, ""});
                if (o.portable && !held) out.push_back({Verb::Take, o.id, at->id});
                if (o.lamp) out.push_back({Verb::Use, o.id, ""});
            }
            if (held) {
                out.push_back({Verb::Put, held->id, at->id});
                const GoalInfo::Process proc = processor_of_kind(at->kind);
                if (held->processable) {
                    if (proc == GoalInfo::Process::Clean && !held->clean)
                        out.push_back({Verb::Clean, held->id, at->id});
                    if (proc == GoalInfo::Process::Heat && held->temp != Temp::Hot)
                        out.push_back({Verb::Heat, held->id, at->id});
                    if (proc == GoalInfo::Process::Cool && held->temp != Temp::Cold)
                        out.push_back({Verb::Cool, held->id, at->id});
                }
            }
        }
    }
    if (held) out.push_back({Verb::Examine, held->id, ""});

    // sort by canonical text with cached renders
    std::vector<std::pair<std::string, size_t>> keyed;
    keyed.reserve(out.size());
    for (size_t i = 0; i < out.size(); i++) keyed.emplace_back(out[i].text(), i);
    std::sort(keyed.begin(), keyed.end());
    std::vector<Action> sorted;
    sorted.reserve(out.size());
    for (const auto& [text, i] : keyed) sorted.push_back(std::move(out[i]));
    return sorted;
}

Observation GridHouse::observe_after(const Action& a, bool legal, bool invalid) const {
    Observation obs;
    if (invalid) {
        obs.text = "Nothing happens.";
        obs.feedback = Feedback::InvalidAction;
    } else if (!legal) {
        obs.text = "Nothing happens.";
        obs.feedback = Feedback::NothingHappens;
    } else {
        switch (a.verb) {
            case Verb::Goto:
                obs.text = "You arrive at " + a.object + "." + contents_clause(a.object);
                break;
            case Verb::Open:
                obs.text = "You open the " + a.object + "." + contents_clause(a.object);
                break;
            case Verb::Close:
                obs.text = "You close the " + a.object + ".";
                break;
            case Verb::Take:
                obs.text = "You pick up the " + a.object + " from the " + a.receptacle + ".";
                break;
            case Verb::Put:
                obs.text = "You put the " + a.object + " in the " + a.receptacle + ".";
                break;
            case Verb::Clean:
                obs.text = "You clean the " + a.object + " using the " + a.receptacle + ".";
                break;
            case Verb::Heat:
                obs.text = "You heat the " + a.object + " using the " + a.receptacle + ".";
                break;
            case Verb::Cool:
                obs.text = "You cool the " + a.object + " using the " + a.receptacle + ".";
                break;
            case Verb::Examine: {
                const ObjState* o = find_object(a.object);
                std::string detail;
                if (o->lamp) {
                    detail = o->lit ? " It is on." : " It is off.";
                } else {
                    std::vector<std::string> attrs;
                    if (o->clean) attrs.push_back("clean");
                    if (o->temp == Temp::Hot) attrs.push_back("hot");
                    if (o->temp == Temp::Cold) attrs.push_back("cold");
                    detail = attrs.empty() ? " It looks ordinary."
                                           : " It is " + join(attrs, " and ") + ".";
                }
                obs.text = "You look at the " + a.object + "." + detail;
                break;
            }
            case Verb::Use: {
                const ObjState* o = find_object(a.object);
                obs.text = (o->lit ? "You turn on the " : "You turn off the ") + a.object + ".";
                break;
            }
        }
    }
    for (const auto& o : world_.objects) {
        if (object_visible(o)) obs.visible_objects.push_back(o.id);
    }
    std::sort(obs.visible_objects.begin(), obs.visible_objects.end());
    return obs;
}

StepResult GridHouse::make_result(Observation obs) {
    StepResult res;
    res.obs = std::move(obs);
    if (goal_satisfied() || world_.steps >= episode_cap_) {
        world_.terminal = true;
        world_.final_outcome = evaluate_outcome();
    }
    res.terminal = world_.terminal;
    res.outcome = world_.final_outcome;
    res.candidates = candidate_actions();
    return res;
}

void GridHouse::seed_placement() {
    std::string tag = spec_.layout_id + "|" + to_string(spec_.family) + "|" +
                      std::to_string(spec_.seed) + "|placement";
    Rng rng(hash128(tag).lo);
    const auto& spawn = layout_->spawn_receptacles;
    for (int attempt = 0; attempt < 64; attempt++) {
        for (auto& o : world_.objects) {
            const ObjectDef* def = layout_->find_object(o.id);
            o.loc = def->portable ? spawn[rng.uniform(spawn.size())] : def->at;
        }
        if (!goal_satisfied()) return;
    }
    // Place every goal-type object away from goal receptacles.
    for (auto& o : world_.objects) {
        if (o.type != goal_.object_type) continue;
        for (const auto& s : spawn) {
            if (receptacle_kind_of(s) != goal_.receptacle_kind) {
                o.loc = s;
                break;
            }
        }
    }
    if (goal_satisfied())
        throw ValidationError("layout " + layout_->id + ": cannot seed a non-terminal start for " +
                              spec_.instruction);
}

StepResult GridHouse::reset(const TaskSpec& spec) {
    if (spec.instruction.empty()) throw ValidationError("task instruction must be non-empty");
    const Layout& layout = registry_.require(spec.layout_id);

    GoalInfo parsed = GoalInfo::parse(spec.instruction);
    if (parsed.object_type.empty())
        throw ValidationError("cannot parse instruction: " + spec.instruction);
    if (parsed.process != required_process(spec.family))
        throw ValidationError("instruction does not match family " +
                              std::string(to_string(spec.family)) + ": " + spec.instruction);

    layout_ = &layout;
    spec_ = spec;
    goal_.object_type = parsed.object_type;
    goal_.receptacle_kind = parsed.receptacle;
    goal_.count = parsed.count;

    int instances = 0;
    for (const auto& o : layout.objects) {
        if (o.type == goal_.object_type && o.portable) instances++;
    }
    if (instances < goal_.count)
        throw ValidationError("layout " + layout.id + " has no " +
                              std::to_string(goal_.count) + "x portable " + goal_.object_type);
    if (spec.family != TaskFamily::LookInLight && !layout.has_receptacle_kind(goal_.receptacle_kind))
        throw ValidationError("layout " + layout.id + " has no receptacle of kind " +
                              goal_.receptacle_kind);

    world_ = World{};
    for (const auto& o : layout.objects) {
        ObjState s;
        s.id = o.id;
        s.type = o.type;
        s.portable = o.portable;
        s.processable = o.processable;
        s.lamp = o.lamp;
        world_.objects.push_back(s);
    }
    std::sort(world_.objects.begin(), world_.objects.end(),
              [](const ObjState& a, const ObjState& b) { return a.id < b.id; });
    for (const auto& r : layout.receptacles) {
        if (r.openable) world_.open_state[r.id] = false;
    }
    active_ = true;
    seed_placement();

    Observation obs;
    std::vector<std::string> recs;
    for (const auto& r : layout.receptacles) recs.push_back(r.id);
    std::sort(recs.begin(), recs.end());
    obs.text = "You are in the middle of the room. Looking around, you see: " +
               join(recs, ", ") + ".";
    for (const auto& o : world_.objects) {
        if (object_visible(o)) obs.visible_objects.push_back(o.id);
    }
    return make_result(std::move(obs));
}

StepResult GridHouse::step(const Action& a) {
    require_active();
    if (world_.terminal) throw ProtocolError("step after terminal state");

    world_.steps++;

    // Unknown ids are invalid; known ids with an inapplicable move are no-ops.
    bool invalid = false;
    const bool object_is_receptacle = layout_->find_receptacle(a.object) != nullptr;
    if (a.verb == Verb::Goto || a.verb == Verb::Open || a.verb == Verb::Close) {
        invalid = !object_is_receptacle;
    } else {
        invalid = find_object(a.object) == nullptr && !object_is_receptacle;
    }
    if (!invalid && !a.receptacle.empty() && !layout_->find_receptacle(a.receptacle))
        invalid = true;

    bool legal = false;
    if (!invalid) {
        ObjState* obj = find_object(a.object);
        const ReceptacleDef* at =
            world_.agent_loc.empty() ? nullptr : layout_->find_receptacle(world_.agent_loc);
        const ObjState* held = held_object();
        switch (a.verb) {
            case Verb::Goto:
                legal = a.object != world_.agent_loc;
                if (legal) world_.agent_loc = a.object;
                break;
            case Verb::Open:
                legal = at && at->id == a.object && at->openable && !world_.open_state[at->id];
                if (legal) world_.open_state[at->id] = true;
                break;
            case Verb::Close:
                legal = at && at->id == a.object && at->openable && world_.open_state[at->id];
                if (legal) world_.open_state[at->id] = false;
                break;
            case Verb::Take:
                legal = obj && obj->portable && !held && at && a.receptacle == at->id &&
                        obj->loc == at->id && receptacle_accessible(*at);
                if (legal) obj->loc = "agent";
                break;
            case Verb::Put:
                legal = obj && obj->loc == "agent" && at && a.receptacle == at->id &&
                        receptacle_accessible(*at);
                if (legal) obj->loc = at->id;
                break;
            case Verb::Clean:
                legal = obj && obj->loc == "agent" && obj->processable && !obj->clean && at &&
                        a.receptacle == at->id && at->kind == "sinkbasin";
                if (legal) obj->clean = true;
                break;
            case Verb::Heat:
                legal = obj && obj->loc == "agent" && obj->processable && obj->temp != Temp::Hot &&
                        at && a.receptacle == at->id && at->kind == "microwave";
                if (legal) obj->temp = Temp::Hot;
                break;
            case Verb::Cool:
                legal = obj && obj->loc == "agent" && obj->processable && obj->temp != Temp::Cold &&
                        at && a.receptacle == at->id && at->kind == "fridge";
                if (legal) obj->temp = Temp::Cold;
                break;
            case Verb::Examine:
                legal = obj && object_visible(*obj);
                break;
            case Verb::Use:
                legal = obj && obj->lamp && object_visible(*obj) && obj->loc != "agent";
                if (legal) obj->lit = !obj->lit;
                break;
        }
    }

    return make_result(observe_after(a, legal, invalid));
}

// Snapshot payload: '\x1e'-separated sections, ';'-separated entries,
// ','-separated fields. Compact and cheap to parse; snapshot/restore sit on
// the search hot path.
namespace {

constexpr char kSec = '\x1e';

std::vector<std::string_view> split_on(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    size_t start = 0;
    while (start <= s.size()) {
        size_t pos = s.find(sep, start);
        if (pos == std::string_view::npos) {
            out.push_back(s.substr(start));
            break;
        }
        out.push_back(s.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

}  // namespace

EnvSnapshot GridHouse::snapshot() const {
    require_active();
    std::string p;
    p.reserve(256);
    p += "gh1";
    p += kSec;
    p += layout_->id;
    p += kSec;
    p += to_string(spec_.family);
    p += kSec;
    p += std::to_string(spec_.seed);
    p += kSec;
    p += spec_.instruction;
    p += kSec;
    p += world_.agent_loc;
    p += kSec;
    p += std::to_string(world_.steps);
    p += kSec;
    p += world_.terminal ? '1' : '0';
    p += kSec;
    if (world_.final_outcome) {
        p += to_string(world_.final_outcome->status);
        p += ',';
        p += std::to_string(world_.final_outcome->steps_used);
    } else {
        p += '-';
    }
    p += kSec;
    for (const auto& o : world_.objects) {
        p += o.id;
        p += ',';
        p += o.loc;
        p += ',';
        p += o.clean ? '1' : '0';
        p += ',';
        p += std::to_string(static_cast<int>(o.temp));
        p += ',';
        p += o.lit ? '1' : '0';
        p += ';';
    }
    p += kSec;
    for (const auto& [id, open] : world_.open_state) {
        p += id;
        p += ',';
        p += open ? '1' : '0';
        p += ';';
    }
    return EnvSnapshot{std::move(p)};
}

void GridHouse::restore(const EnvSnapshot& snap) {
    const auto sections = split_on(snap.payload, kSec);
    if (sections.size() != 11 || sections[0] != "gh1")
        throw DataError("snapshot: unrecognized payload");
    const std::string layout_id(sections[1]);
    const Layout& layout = registry_.require(layout_id);
    if (active_ && layout_->id != layout_id)
        throw ValidationError("cross-layout restore: session uses " + layout_->id +
                              ", snapshot is for " + layout_id);

    TaskSpec spec;
    spec.family = task_family_from_string(std::string(sections[2]));
    spec.seed = std::strtoull(std::string(sections[3]).c_str(), nullptr, 10);
    spec.instruction = std::string(sections[4]);
    spec.layout_id = layout_id;

    layout_ = &layout;
    spec_ = spec;
    GoalInfo parsed = GoalInfo::parse(spec.instruction);
    goal_.object_type = parsed.object_type;
    goal_.receptacle_kind = parsed.receptacle;
    goal_.count = parsed.count;

    world_ = World{};
    world_.agent_loc = std::string(sections[5]);
    world_.steps = std::atoi(std::string(sections[6]).c_str());
    world_.terminal = sections[7] == "1";
    if (sections[8] != "-") {
        const auto fields = split_on(sections[8], ',');
        Outcome out;
        out.status = task_status_from_string(std::string(fields.at(0)));
        out.steps_used = std::atoi(std::string(fields.at(1)).c_str());
        world_.final_outcome = out;
    }
    for (const auto entry : split_on(sections[9], ';')) {
        if (entry.empty()) continue;
        const auto fields = split_on(entry, ',');
        if (fields.size() != 5) throw DataError("snapshot: bad object entry");
        const ObjectDef* def = layout.find_object(std::string(fields[0]));
        if (!def)
            throw DataError("snapshot references unknown object " + std::string(fields[0]));
        ObjState s;
        s.id = def->id;
        s.type = def->type;
        s.portable = def->portable;
        s.processable = def->processable;
        s.lamp = def->lamp;
        s.loc = std::string(fields[1]);
        s.clean = fields[2] == "1";
        s.temp = static_cast<Temp>(std::atoi(std::string(fields[3]).c_str()));
        s.lit = fields[4] == "1";
        world_.objects.push_back(std::move(s));
    }
    world_.open_state.clear();
    for (const auto entry : split_on(sections[10], ';')) {
        if (entry.empty()) continue;
        const auto fields = split_on(entry, ',');
        if (fields.size() != 2) throw DataError("snapshot: bad open entry");
        world_.open_state[std::string(fields[0])] = fields[1] == "1";
    }
    active_ = true;
}

std::string GridHouse::canonical_key() const {
    require_active();
    std::string key;
    key.reserve(128);
    key += world_.agent_loc;
    key += kSec;
    for (const auto& o : world_.objects) {
        key += o.loc;
        key += ',';
        key += o.clean ? '1' : '0';
        key += std::to_string(static_cast<int>(o.temp));
        key += o.lit ? '1' : '0';
        key += ';';
    }
    key += kSec;
    for (const auto& [id, open] : world_.open_state) {
        key += open ? '1' : '0';
    }
    return key;
}

std::unique_ptr<Env> GridHouse::clone() const {
    auto copy = std::make_unique<GridHouse>(registry_, episode_cap_);
    if (active_) {
        copy->restore(snapshot());
    }
    return copy;
}

}  // namespace treeplan
