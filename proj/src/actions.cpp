#include "chord/actions.hpp"

#include "chord/errors.hpp"

namespace chord {

bool AtomicAction::is_motion() const {
    switch (kind) {
        case ActionKind::OpenGripper:
        case ActionKind::CloseGripper:
            return false;
        case ActionKind::Drive:
            return (left && left->is_motion()) || (right && right->is_motion());
        default:
            return true;
    }
}

std::string action_name(ActionKind kind) {
    switch (kind) {
        case ActionKind::Drive: return "drive";
        case ActionKind::Grasp: return "grasp";
        case ActionKind::OpenGripper: return "open_gripper";
        case ActionKind::CloseGripper: return "close_gripper";
        case ActionKind::MoveToObj: return "move_to_obj";
        case ActionKind::MoveToTarget: return "move_to_target";
        case ActionKind::MoveByOffset: return "move_by_offset";
        case ActionKind::RotateEef: return "rotate_eef";
        case ActionKind::Place: return "place";
        case ActionKind::Back: return "back";
    }
    return "";
}

namespace {

std::string need_string(const nlohmann::json& j, const char* key, const std::string& ctx) {
    if (!j.contains(key) || !j.at(key).is_string())
        throw SchemaViolation(ctx + " needs string field \"" + key + "\"");
    return j.at(key).get<std::string>();
}

}  // namespace

AtomicAction parse_action(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("action"))
        throw SchemaViolation("atomic action must be an object with an \"action\" field");
    std::string name = j.at("action").get<std::string>();

    AtomicAction a;
    if (name == "drive") {
        a.kind = ActionKind::Drive;
        if (j.contains("left") && !j.at("left").is_null())
            a.left = std::make_shared<AtomicAction>(parse_action(j.at("left")));
        if (j.contains("right") && !j.at("right").is_null())
            a.right = std::make_shared<AtomicAction>(parse_action(j.at("right")));
        if (!a.left && !a.right)
            throw SchemaViolation("drive needs at least one of left/right");
        if ((a.left && a.left->kind == ActionKind::Drive) ||
            (a.right && a.right->kind == ActionKind::Drive))
            throw SchemaViolation("drive sub-actions cannot nest");
        return a;
    }

    a.robot = need_string(j, "robot", name);
    if (a.robot != "left" && a.robot != "right")
        throw SchemaViolation("unknown robot arm: " + a.robot);

    if (name == "grasp") {
        a.kind = ActionKind::Grasp;
        a.object = need_string(j, "object", name);
        a.pre_grasp_dis = j.value("pre_grasp_dis", 0.10);
        if (a.pre_grasp_dis <= 0.0) throw SchemaViolation("pre_grasp_dis must be positive");
    } else if (name == "open_gripper") {
        a.kind = ActionKind::OpenGripper;
        a.sample_num = j.value("sample_num", 20);
        a.width = j.value("width", -1.0);
    } else if (name == "close_gripper") {
        a.kind = ActionKind::CloseGripper;
        a.sample_num = j.value("sample_num", 20);
    } else if (name == "move_to_obj") {
        a.kind = ActionKind::MoveToObj;
        a.object = need_string(j, "object", name);
        a.offset = {j.value("x_offset", 0.0), j.value("y_offset", 0.0), j.value("z_offset", 0.0)};
    } else if (name == "move_to_target") {
        a.kind = ActionKind::MoveToTarget;
        if (!j.contains("x") || !j.contains("y") || !j.contains("z"))
            throw SchemaViolation("move_to_target needs x, y, z");
        a.target = {j.at("x").get<double>(), j.at("y").get<double>(), j.at("z").get<double>()};
    } else if (name == "move_by_offset") {
        a.kind = ActionKind::MoveByOffset;
        a.offset = {j.value("dx", 0.0), j.value("dy", 0.0), j.value("dz", 0.0)};
    } else if (name == "rotate_eef") {
        a.kind = ActionKind::RotateEef;
        if (!j.contains("angle")) throw SchemaViolation("rotate_eef needs angle");
        a.angle = j.at("angle").get<double>();
        if (j.contains("axis")) a.axis = j.at("axis").get<Vec3>();
        if (a.axis.norm() <= 0.0) throw SchemaViolation("rotate_eef axis must be nonzero");
    } else if (name == "place") {
        a.kind = ActionKind::Place;
        if (!j.contains("x") || !j.contains("y"))
            throw SchemaViolation("place needs x, y");
        a.target = {j.at("x").get<double>(), j.at("y").get<double>(), 0.0};
        a.z_offset = j.value("z_offset", 0.0);
        a.sample_num = j.value("sample_num", 20);
    } else if (name == "back") {
        a.kind = ActionKind::Back;
    } else {
        throw SchemaViolation("unknown atomic action: " + name);
    }
    if (j.contains("sample_num") && j.at("sample_num").get<int>() < 1)
        throw SchemaViolation("sample_num must be >= 1");
    return a;
}

nlohmann::json action_to_json(const AtomicAction& a) {
    nlohmann::json j;
    j["action"] = action_name(a.kind);
    if (a.kind == ActionKind::Drive) {
        j["left"] = a.left ? action_to_json(*a.left) : nlohmann::json(nullptr);
        j["right"] = a.right ? action_to_json(*a.right) : nlohmann::json(nullptr);
        return j;
    }
    j["robot"] = a.robot;
    switch (a.kind) {
        case ActionKind::Grasp:
            j["object"] = a.object;
            j["pre_grasp_dis"] = a.pre_grasp_dis;
            break;
        case ActionKind::OpenGripper:
            j["sample_num"] = a.sample_num;
            if (a.width >= 0.0) j["width"] = a.width;
            break;
        case ActionKind::CloseGripper:
            j["sample_num"] = a.sample_num;
            break;
        case ActionKind::MoveToObj:
            j["object"] = a.object;
            j["x_offset"] = a.offset.x;
            j["y_offset"] = a.offset.y;
            j["z_offset"] = a.offset.z;
            break;
        case ActionKind::MoveToTarget:
            j["x"] = a.target.x;
            j["y"] = a.target.y;
            j["z"] = a.target.z;
            break;
        case ActionKind::MoveByOffset:
            j["dx"] = a.offset.x;
            j["dy"] = a.offset.y;
            j["dz"] = a.offset.z;
            break;
        case ActionKind::RotateEef:
            j["angle"] = a.angle;
            j["axis"] = a.axis;
            break;
        case ActionKind::Place:
            j["x"] = a.target.x;
            j["y"] = a.target.y;
            j["z_offset"] = a.z_offset;
            j["sample_num"] = a.sample_num;
            break;
        case ActionKind::Back:
            break;
        default:
            break;
    }
    return j;
}

}  // namespace chord
