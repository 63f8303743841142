#pragma once

#include "treeplan/env.hpp"
#include "treeplan/layout.hpp"

#include <map>

namespace treeplan {

/// Deterministic text household simulator. One instance is one session;
/// clone() before sharing across workers.
class GridHouse : public Env {
public:
    explicit GridHouse(LayoutRegistry registry, int episode_cap = 30);

    StepResult reset(const TaskSpec& spec) override;
    StepResult step(const Action& action) override;

    EnvSnapshot snapshot() const override;
    void restore(const EnvSnapshot& snap) override;
    Outcome evaluate_outcome() const override;
    std::unique_ptr<Env> clone() const override;

    /// Hidden-state identity with the step counter stripped; used by the
    /// oracle to deduplicate graph nodes.
    std::string canonical_key() const;

    /// All actions whose step() would report Feedback::Ok, lexicographic.
    std::vector<Action> candidate_actions() const;

    const LayoutRegistry& registry() const { return registry_; }
    int episode_cap() const { return episode_cap_; }
    const TaskSpec& task() const;
    int steps_taken() const { return world_.steps; }

private:
    enum class Temp { None, Hot, Cold };

    struct ObjState {
        std::string id;
        std::string type;
        std::string loc;  // receptacle id or "agent"
        bool clean = false;
        Temp temp = Temp::None;
        bool lit = false;
        // mirrors of the layout definition, kept here so snapshots are
        // self-contained
        bool portable = false;
        bool processable = false;
        bool lamp = false;
    };

    struct World {
        std::string agent_loc;  // empty = middle of the room
        std::vector<ObjState> objects;
        std::map<std::string, bool> open_state;
        int steps = 0;
        bool terminal = false;
        std::optional<Outcome> final_outcome;
    };

    struct Goal {
        std::string object_type;
        std::string receptacle_kind;  // empty for LookInLight
        int count = 1;
    };

    void require_active() const;
    ObjState* find_object(const std::string& id);
    const ObjState* find_object(const std::string& id) const;
    bool receptacle_accessible(const ReceptacleDef& r) const;
    bool object_visible(const ObjState& o) const;
    const ObjState* held_object() const;
    bool goal_satisfied() const;
    bool goal_partial() const;
    std::string contents_clause(const std::string& receptacle_id) const;
    Observation observe_after(const Action& a, bool legal, bool invalid) const;
    StepResult make_result(Observation obs);
    void seed_placement();

    LayoutRegistry registry_;
    int episode_cap_;
    bool active_ = false;
    const Layout* layout_ = nullptr;
    TaskSpec spec_;
    Goal goal_;
    World world_;
};

}  // namespace treeplan
