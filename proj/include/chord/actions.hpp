#pragma once
// Atomic-action specifications used to compose task-graph edges. These are
// plain data; the simulator gives them semantics.

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "chord/geometry.hpp"

namespace chord {

enum class ActionKind {
    Drive,
    Grasp,
    OpenGripper,
    CloseGripper,
    MoveToObj,
    MoveToTarget,
    MoveByOffset,
    RotateEef,
    Place,
    Back,
};

struct AtomicAction {
    ActionKind kind = ActionKind::Back;
    std::string robot;           // arm id; empty for drive
    std::string object;          // grasp, move_to_obj
    double pre_grasp_dis = 0.10; // grasp approach clearance
    Vec3 offset;                 // move_to_obj / move_by_offset (dx,dy,dz)
    Vec3 target;                 // move_to_target / place (x,y,z or x,y + z_offset)
    double z_offset = 0.0;       // place
    double angle = 0.0;          // rotate_eef, radians
    Vec3 axis{1, 0, 0};          // rotate_eef world axis
    int sample_num = 20;         // gripper actuation steps
    double width = -1.0;         // open_gripper target width; <0 = full open
    // drive sub-actions (either may be null)
    std::shared_ptr<AtomicAction> left;
    std::shared_ptr<AtomicAction> right;

    // True for actions that move an end-effector; gripper actuation and
    // no-ops are excluded. Drive counts when any sub-action does.
    bool is_motion() const;
};

AtomicAction parse_action(const nlohmann::json& j);
nlohmann::json action_to_json(const AtomicAction& a);

std::string action_name(ActionKind kind);

}  // namespace chord
