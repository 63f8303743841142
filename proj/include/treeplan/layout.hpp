#pragma once

#include "treeplan/env.hpp"

#include <map>
#include <string>
#include <vector>

namespace treeplan {

/// Receptacle ids follow the convention `<kind>_<n>` (countertop_1,
/// sinkbasin_2, ...). The kind determines processing capabilities:
/// sinkbasin cleans, microwave heats, fridge cools.
struct ReceptacleDef {
    std::string id;
    std::string kind;
    bool openable = false;
};

struct ObjectDef {
    std::string id;
    std::string type;
    bool portable = false;
    bool processable = false;  // can be cleaned / heated / cooled
    bool lamp = false;
    std::string at;  // fixed location for static objects; ignored for portable ones
};

struct Layout {
    std::string id;
    std::vector<ReceptacleDef> receptacles;
    std::vector<ObjectDef> objects;
    std::vector<std::string> goal_receptacles;   // eligible "put ... in X" goals
    std::vector<std::string> spawn_receptacles;  // where portable objects start

    const ReceptacleDef* find_receptacle(const std::string& id) const;
    const ObjectDef* find_object(const std::string& id) const;
    bool has_receptacle_kind(const std::string& kind) const;
    bool has_lamp() const;

    /// Object types usable as the goal target for a family, lexicographic.
    /// Empty when the layout cannot host the family.
    std::vector<std::string> target_types(TaskFamily family) const;
    bool supports(TaskFamily family) const { return !target_types(family).empty(); }

    void validate() const;
};

std::string receptacle_kind_of(const std::string& receptacle_id);
/// sinkbasin -> Clean, microwave -> Heat, fridge -> Cool, else None.
GoalInfo::Process processor_of_kind(const std::string& kind);

struct LayoutRegistry {
    int version = 0;
    std::map<std::string, Layout> layouts;

    static LayoutRegistry from_json_text(const std::string& text);
    static LayoutRegistry load(const std::string& path);
    /// Compiled-in default registry (same content as data/layouts.json).
    static LayoutRegistry builtin();

    const Layout& require(const std::string& layout_id) const;
};

/// Render a seeded task for a layout: picks the target object type and goal
/// receptacle kind deterministically and renders the canonical instruction.
TaskSpec make_task(const LayoutRegistry& reg, TaskFamily family, const std::string& layout_id,
                   uint64_t seed);

}  // namespace treeplan
