#pragma once
// Desk-scale kinematic world: rigid objects, grippers with attachment,
// the atomic-action library, disturbance injection, and a settle rule in
// place of dynamics. Object poses are ground truth behind the perception
// oracle.

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "chord/actions.hpp"
#include "chord/features.hpp"
#include "chord/graph.hpp"
#include "chord/solvers.hpp"

namespace chord {

// Attachment and event-model constants.
inline constexpr double kAttachTolerance = 0.02;   // m, centroid-to-gripper for close
inline constexpr double kReleaseSlack = 0.005;     // m, opening beyond grasp width releases
inline constexpr double kDropJitter = 0.03;        // m, uniform xy scatter of dropped objects
inline constexpr double kLyingThreshold = M_PI / 4.0;  // settle tips objects past this
inline constexpr double kPourAngle = 1.745;        // rad (~100 deg) of axis inversion
inline constexpr double kPourLateral = 0.06;       // m, pour-over alignment

struct ObjectShape {
    enum class Kind { Box, Cylinder };
    Kind kind = Kind::Box;
    Vec3 box_extents{0.04, 0.04, 0.04};  // full extents
    double radius = 0.03;
    double height = 0.2;
    std::vector<Vec3> points;  // canonical body-frame surface samples

    static ObjectShape box(const Vec3& extents, int point_target = 96);
    static ObjectShape cylinder(double radius, double height, int point_target = 120);
};

struct RigidObject {
    std::string id;
    ObjectShape shape;
    Pose pose;
    std::optional<std::string> attached_to;  // holding arm
    Vec3 upright_axis{0, 0, 1};              // body frame
    double grasp_width = 0.0;                // 0 = not graspable
    bool randomize_pose = true;

    Vec3 world_upright() const { return pose.orientation.rotate(upright_axis).normalized(); }
    // Uprightness deviation in [0, pi/2], sign-insensitive.
    double tilt_angle() const {
        return std::acos(std::min(1.0, std::abs(world_upright().dot(Vec3{0, 0, 1}))));
    }
    // Signed inversion angle in [0, pi]; exceeds pi/2 when upside down.
    double inversion_angle() const {
        return std::acos(std::clamp(world_upright().dot(Vec3{0, 0, 1}), -1.0, 1.0));
    }
    double bottom_z() const;
    Vec3 centroid() const;
};

struct Gripper {
    static constexpr double kMaxWidth = 0.10;
    std::string arm;
    Pose pose;
    double width = 0.08;
    std::optional<std::string> held;
    Pose grasp_transform;  // gripper frame -> object frame while held
};

struct WorldEvent {
    std::uint64_t step = 0;
    std::string kind;
    std::string object;
    std::string detail;
};

struct WorldState {
    std::map<std::string, RigidObject> objects;
    std::map<std::string, Gripper> grippers;
    double table_z = 0.0;
    std::uint64_t step = 0;
    std::vector<WorldEvent> events;

    RigidObject& object(const std::string& id);            // throws UnknownObject
    const RigidObject& object(const std::string& id) const;
    Gripper& gripper(const std::string& arm);
    const Gripper& gripper(const std::string& arm) const;

    RobotState robot_state() const;
    void log(std::string kind, std::string object, std::string detail = "");
};

// Scene description parsed from the task file.
struct SceneSpec {
    double table_z = 0.0;
    WorkspaceModel workspace;
    std::vector<Aabb> static_obstacles;
    struct ObjectSpec {
        std::string id;
        ObjectShape shape;
        Pose pose;
        Vec3 upright_axis{0, 0, 1};
        double grasp_width = 0.0;
        bool randomize_pose = true;
    };
    std::vector<ObjectSpec> objects;
};

SceneSpec parse_scene(const nlohmann::json& j);
nlohmann::json scene_to_json(const SceneSpec& s);
WorldState make_world(const SceneSpec& scene);

struct ScheduledEvent {
    enum class Kind { Drop, Shift, Tilt };
    Kind kind = Kind::Drop;
    std::optional<std::uint64_t> at_step;  // world step index
    std::optional<int> at_action;          // global atomic-action index
    std::string object;
    Vec3 delta;          // shift
    double angle = 0.0;  // tilt
    Vec3 axis{0, 1, 0};  // tilt axis, horizontal
};

struct DisturbanceModel {
    enum class Mode { None, Bernoulli, Scheduled };
    Mode mode = Mode::None;
    double drop_probability = 0.0;
    std::vector<ScheduledEvent> events;
};

DisturbanceModel parse_disturbance(const nlohmann::json& j);
nlohmann::json disturbance_to_json(const DisturbanceModel& d);

// Per-episode disturbance bookkeeping: which scheduled events fired and
// how many Bernoulli draws were taken.
struct DisturbanceState {
    DisturbanceModel model;
    std::set<std::size_t> applied;
    int action_index = 0;      // global atomic-action counter
    int eligible_draws = 0;    // held-object motion actions seen
    int drops_fired = 0;
};

// Applies a manual perturbation. Drop on an unheld object is a logged
// no-op. Shift detaches a held object before translating. All three
// re-settle table contact.
void inject(WorldState& world, const ScheduledEvent& event);

// Rests every unattached object's lowest point on the table and tips
// objects leaning past 45 degrees into a lying orientation.
void settle(WorldState& world);

// Low-level control-step primitives; each advances the world by one step.
// Held objects track the gripper rigidly; width steps handle release.
void step_pose(WorldState& world, const std::string& arm, const Pose& pose);
void step_width(WorldState& world, const std::string& arm, double width);
void step_noop(WorldState& world);

// Fires pending scheduled events bound to the current world step.
void apply_scheduled(WorldState& world, DisturbanceState& disturbance);

// Everything atomic-action execution needs besides the world.
struct MotionContext {
    const WorkspaceModel* workspace = nullptr;
    const CollisionField* field = nullptr;
    SolverConfig solver;
    std::vector<Detector> path_constraints;  // active edge C_path
    // Latest perception for target resolution and constraint prediction.
    std::function<PerceptionOutput()> sense;
};

// Single-stepping interpreter for one atomic action. Each step() issues
// exactly one control command (one world step). Drive actions interleave
// their sub-actions round-robin.
class ActionCursor {
  public:
    ActionCursor(WorldState& world, const AtomicAction& action, const MotionContext& ctx,
                 DisturbanceState& disturbance, std::mt19937_64& rng);
    ~ActionCursor();
    ActionCursor(ActionCursor&&) noexcept;
    ActionCursor& operator=(ActionCursor&&) noexcept;

    bool done() const;
    // Issues one control command; returns true if a disturbance fired.
    bool step();

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// Runs one atomic action to completion. Returns control steps taken.
std::uint64_t execute_atomic(WorldState& world, const AtomicAction& action,
                             const MotionContext& ctx, DisturbanceState& disturbance,
                             std::mt19937_64& rng);

// Ground-truth success check: terminal sub-goal constraints evaluated on a
// noiseless feature extraction.
bool check_success(const WorldState& world, const Node& terminal, double tol = 1e-3);

}  // namespace chord
