#include "treeplan/layout.hpp"

#include "treeplan/util.hpp"

#include "json.hpp"

#include <algorithm>
#include <set>

namespace treeplan {

using nlohmann::json;

const ReceptacleDef* Layout::find_receptacle(const std::string& rid) const {
    for (const auto& r : receptacles) {
        if (r.id == rid) return &r;
    }
    return nullptr;
}

const ObjectDef* Layout::find_object(const std::string& oid) const {
    for (const auto& o : objects) {
        if (o.id == oid) return &o;
    }
    return nullptr;
}

bool Layout::has_receptacle_kind(const std::string& kind) const {
    return std::any_of(receptacles.begin(), receptacles.end(),
                       [&](const ReceptacleDef& r) { return r.kind == kind; });
}

bool Layout::has_lamp() const {
    return std::any_of(objects.begin(), objects.end(), [](const ObjectDef& o) { return o.lamp; });
}

std::vector<std::string> Layout::target_types(TaskFamily family) const {
    std::set<std::string> types;
    auto portable_types = [&](bool need_processable) {
        std::set<std::string> out;
        for (const auto& o : objects) {
            if (o.portable && (!need_processable || o.processable)) out.insert(o.type);
        }
        return out;
    };
    switch (family) {
        case TaskFamily::PickPlace:
            types = portable_types(false);
            break;
        case TaskFamily::CleanPlace:
            if (has_receptacle_kind("sinkbasin")) types = portable_types(true);
            break;
        case TaskFamily::HeatPlace:
            if (has_receptacle_kind("microwave")) types = portable_types(true);
            break;
        case TaskFamily::CoolPlace:
            if (has_receptacle_kind("fridge")) types = portable_types(true);
            break;
        case TaskFamily::LookInLight:
            if (has_lamp()) types = portable_types(false);
            break;
        case TaskFamily::PickTwoPlace: {
            std::map<std::string, int> counts;
            for (const auto& o : objects) {
                if (o.portable) counts[o.type]++;
            }
            for (const auto& [t, n] : counts) {
                if (n >= 2) types.insert(t);
            }
            break;
        }
    }
    // Families that place the object need at least one goal receptacle.
    if (family != TaskFamily::LookInLight && goal_receptacles.empty()) types.clear();
    return {types.begin(), types.end()};
}

void Layout::validate() const {
    if (receptacles.empty()) throw ValidationError("layout " + id + ": no receptacles");
    std::set<std::string> ids;
    for (const auto& r : receptacles) {
        if (!ids.insert(r.id).second)
            throw ValidationError("layout " + id + ": duplicate receptacle " + r.id);
        if (receptacle_kind_of(r.id) != r.kind)
            throw ValidationError("layout " + id + ": receptacle id " + r.id +
                                  " does not match kind " + r.kind);
    }
    for (const auto& o : objects) {
        if (!ids.insert(o.id).second)
            throw ValidationError("layout " + id + ": duplicate id " + o.id);
        if (!o.portable) {
            if (o.at.empty() || !find_receptacle(o.at))
                throw ValidationError("layout " + id + ": static object " + o.id +
                                      " has no valid location");
        }
    }
    for (const auto& g : goal_receptacles) {
        if (!find_receptacle(g))
            throw ValidationError("layout " + id + ": unknown goal receptacle " + g);
    }
    if (spawn_receptacles.empty())
        throw ValidationError("layout " + id + ": no spawn receptacles");
    for (const auto& s : spawn_receptacles) {
        if (!find_receptacle(s))
            throw ValidationError("layout " + id + ": unknown spawn receptacle " + s);
    }
}

std::string receptacle_kind_of(const std::string& receptacle_id) {
    auto pos = receptacle_id.rfind('_');
    if (pos == std::string::npos) return receptacle_id;
    return receptacle_id.substr(0, pos);
}

GoalInfo::Process processor_of_kind(const std::string& kind) {
    if (kind == "sinkbasin") return GoalInfo::Process::Clean;
    if (kind == "microwave") return GoalInfo::Process::Heat;
    if (kind == "fridge") return GoalInfo::Process::Cool;
    return GoalInfo::Process::None;
}

namespace {

Layout layout_from_json(const std::string& id, const json& j) {
    Layout l;
    l.id = id;
    for (const auto& r : j.at("receptacles")) {
        ReceptacleDef d;
        d.id = r.at("id").get<std::string>();
        d.kind = r.value("kind", receptacle_kind_of(d.id));
        d.openable = r.value("openable", false);
        l.receptacles.push_back(d);
    }
    for (const auto& o : j.at("objects")) {
        ObjectDef d;
        d.id = o.at("id").get<std::string>();
        d.type = o.value("type", receptacle_kind_of(d.id));
        d.portable = o.value("portable", false);
        d.processable = o.value("processable", false);
        d.lamp = o.value("lamp", false);
        d.at = o.value("at", std::string());
        l.objects.push_back(d);
    }
    l.goal_receptacles = j.at("goal_receptacles").get<std::vector<std::string>>();
    l.spawn_receptacles = j.at("spawn_receptacles").get<std::vector<std::string>>();
    l.validate();
    return l;
}

}  // namespace

LayoutRegistry LayoutRegistry::from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("layout registry: invalid JSON: ") + e.what());
    }
    LayoutRegistry reg;
    reg.version = j.at("version").get<int>();
    if (reg.version != 1)
        throw ValidationError("layout registry: unsupported version " +
                              std::to_string(reg.version));
    for (const auto& [id, lj] : j.at("layouts").items()) {
        reg.layouts.emplace(id, layout_from_json(id, lj));
    }
    return reg;
}

LayoutRegistry LayoutRegistry::load(const std::string& path) {
    return from_json_text(read_text_file(path));
}

const Layout& LayoutRegistry::require(const std::string& layout_id) const {
    auto it = layouts.find(layout_id);
    if (it == layouts.end()) throw ValidationError("unknown layout_id: " + layout_id);
    return it->second;
}

namespace {

// Keep in sync with data/layouts.json.
const char* kBuiltinRegistry = R"JSON({
  "version": 1,
  "layouts": {
    "house_xs": {
      "receptacles": [
        {"id": "countertop_1", "kind": "countertop"},
        {"id": "sinkbasin_1", "kind": "sinkbasin"},
        {"id": "microwave_1", "kind": "microwave"},
        {"id": "fridge_1", "kind": "fridge"},
        {"id": "table_1", "kind": "table"}
      ],
      "objects": [
        {"id": "pan_1", "type": "pan", "portable": true, "processable": true},
        {"id": "mug_1", "type": "mug", "portable": true},
        {"id": "desklamp_1", "type": "desklamp", "lamp": true, "at": "table_1"},
        {"id": "book_1", "type": "book", "at": "countertop_1"},
        {"id": "statue_1", "type": "statue", "at": "table_1"},
        {"id": "plant_1", "type": "plant", "at": "countertop_1"}
      ],
      "goal_receptacles": ["countertop_1", "table_1"],
      "spawn_receptacles": ["countertop_1", "sinkbasin_1", "table_1"]
    },
    "house_xs_two": {
      "receptacles": [
        {"id": "countertop_1", "kind": "countertop"},
        {"id": "shelf_1", "kind": "shelf"},
        {"id": "table_1", "kind": "table"},
        {"id": "sidetable_1", "kind": "sidetable"}
      ],
      "objects": [
        {"id": "mug_1", "type": "mug", "portable": true},
        {"id": "mug_2", "type": "mug", "portable": true},
        {"id": "desklamp_1", "type": "desklamp", "lamp": true, "at": "sidetable_1"},
        {"id": "book_1", "type": "book", "at": "shelf_1"},
        {"id": "statue_1", "type": "statue", "at": "table_1"},
        {"id": "vase_1", "type": "vase", "at": "shelf_1"}
      ],
      "goal_receptacles": ["table_1", "shelf_1"],
      "spawn_receptacles": ["countertop_1", "shelf_1", "table_1"]
    },
    "house_s": {
      "receptacles": [
        {"id": "countertop_1", "kind": "countertop"},
        {"id": "sinkbasin_1", "kind": "sinkbasin"},
        {"id": "microwave_1", "kind": "microwave"},
        {"id": "fridge_1", "kind": "fridge"},
        {"id": "cabinet_1", "kind": "cabinet", "openable": true},
        {"id": "table_1", "kind": "table"}
      ],
      "objects": [
        {"id": "pan_1", "type": "pan", "portable": true, "processable": true},
        {"id": "apple_1", "type": "apple", "portable": true},
        {"id": "mug_1", "type": "mug", "portable": true},
        {"id": "desklamp_1", "type": "desklamp", "lamp": true, "at": "table_1"},
        {"id": "book_1", "type": "book", "at": "table_1"},
        {"id": "statue_1", "type": "statue", "at": "countertop_1"},
        {"id": "vase_1", "type": "vase", "at": "cabinet_1"},
        {"id": "plant_1", "type": "plant", "at": "countertop_1"}
      ],
      "goal_receptacles": ["countertop_1", "table_1"],
      "spawn_receptacles": ["countertop_1", "sinkbasin_1", "cabinet_1", "table_1"]
    },
    "house_s_two": {
      "receptacles": [
        {"id": "countertop_1", "kind": "countertop"},
        {"id": "shelf_1", "kind": "shelf"},
        {"id": "cabinet_1", "kind": "cabinet", "openable": true},
        {"id": "table_1", "kind": "table"},
        {"id": "sidetable_1", "kind": "sidetable"}
      ],
      "objects": [
        {"id": "mug_1", "type": "mug", "portable": true},
        {"id": "mug_2", "type": "mug", "portable": true},
        {"id": "desklamp_1", "type": "desklamp", "lamp": true, "at": "sidetable_1"},
        {"id": "book_1", "type": "book", "at": "shelf_1"},
        {"id": "statue_1", "type": "statue", "at": "sidetable_1"},
        {"id": "vase_1", "type": "vase", "at": "table_1"}
      ],
      "goal_receptacles": ["table_1", "shelf_1"],
      "spawn_receptacles": ["countertop_1", "shelf_1", "cabinet_1", "table_1"]
    },
    "house_m": {
      "receptacles": [
        {"id": "countertop_1", "kind": "countertop"},
        {"id": "countertop_2", "kind": "countertop"},
        {"id": "sinkbasin_1", "kind": "sinkbasin"},
        {"id": "microwave_1", "kind": "microwave"},
        {"id": "fridge_1", "kind": "fridge"},
        {"id": "cabinet_1", "kind": "cabinet", "openable": true},
        {"id": "table_1", "kind": "table"},
        {"id": "sidetable_1", "kind": "sidetable"}
      ],
      "objects": [
        {"id": "pan_1", "type": "pan", "portable": true, "processable": true},
        {"id": "pot_1", "type": "pot", "portable": true, "processable": true},
        {"id": "apple_1", "type": "apple", "portable": true},
        {"id": "mug_1", "type": "mug", "portable": true},
        {"id": "mug_2", "type": "mug", "portable": true},
        {"id": "desklamp_1", "type": "desklamp", "lamp": true, "at": "sidetable_1"},
        {"id": "book_1", "type": "book", "at": "table_1"},
        {"id": "statue_1", "type": "statue", "at": "countertop_2"},
        {"id": "vase_1", "type": "vase", "at": "cabinet_1"},
        {"id": "plant_1", "type": "plant", "at": "countertop_1"},
        {"id": "cd_1", "type": "cd", "at": "sidetable_1"},
        {"id": "keychain_1", "type": "keychain", "at": "table_1"}
      ],
      "goal_receptacles": ["countertop_1", "countertop_2", "table_1", "sidetable_1"],
      "spawn_receptacles": ["countertop_1", "countertop_2", "sinkbasin_1", "cabinet_1", "table_1", "sidetable_1"]
    }
  }
})JSON";

}  // namespace

LayoutRegistry LayoutRegistry::builtin() { return from_json_text(kBuiltinRegistry); }

TaskSpec make_task(const LayoutRegistry& reg, TaskFamily family, const std::string& layout_id,
                   uint64_t seed) {
    const Layout& layout = reg.require(layout_id);
    auto targets = layout.target_types(family);
    if (targets.empty())
        throw ValidationError("layout " + layout_id + " does not support family " +
                              to_string(family));

    std::string tag = layout_id + "|" + to_string(family) + "|" + std::to_string(seed);
    Rng rng(hash128(tag).lo);

    TaskSpec spec;
    spec.family = family;
    spec.seed = seed;
    spec.layout_id = layout_id;

    const std::string target = targets[rng.uniform(targets.size())];
    std::string goal_kind;
    if (family != TaskFamily::LookInLight) {
        std::set<std::string> kinds;
        for (const auto& g : layout.goal_receptacles) kinds.insert(receptacle_kind_of(g));
        std::vector<std::string> kind_list(kinds.begin(), kinds.end());
        goal_kind = kind_list[rng.uniform(kind_list.size())];
    }
    spec.instruction = render_instruction(family, target, goal_kind);
    return spec;
}

}  // namespace treeplan
