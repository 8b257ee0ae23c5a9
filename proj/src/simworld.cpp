#include "chord/simworld.hpp"

#include <algorithm>
#include <cmath>

namespace chord {

// ---------------------------------------------------------------------------
// Shapes

ObjectShape ObjectShape::box(const Vec3& extents, int point_target) {
    ObjectShape s;
    s.kind = Kind::Box;
    s.box_extents = extents;
    int k = std::max(3, static_cast<int>(std::ceil(std::cbrt(static_cast<double>(point_target)))));
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j)
            for (int l = 0; l < k; ++l) {
                auto frac = [&](int v) { return (v + 0.5) / k - 0.5; };
                s.points.push_back(
                    {frac(i) * extents.x, frac(j) * extents.y, frac(l) * extents.z});
            }
    return s;
}

ObjectShape ObjectShape::cylinder(double radius, double height, int point_target) {
    ObjectShape s;
    s.kind = Kind::Cylinder;
    s.radius = radius;
    s.height = height;
    constexpr int kPerRing = 12;
    int levels = std::max(4, point_target / kPerRing);
    for (int i = 0; i < levels; ++i) {
        double z = -0.5 * height + height * i / (levels - 1.0);
        for (int a = 0; a < kPerRing; ++a) {
            double th = 2.0 * M_PI * a / kPerRing;
            s.points.push_back({radius * std::cos(th), radius * std::sin(th), z});
        }
    }
    s.points.push_back({0, 0, -0.5 * height});
    s.points.push_back({0, 0, 0.5 * height});
    return s;
}

double RigidObject::bottom_z() const {
    double z = std::numeric_limits<double>::infinity();
    for (const auto& p : shape.points) z = std::min(z, pose.apply(p).z);
    return z;
}

Vec3 RigidObject::centroid() const {
    Vec3 sum;
    for (const auto& p : shape.points) sum += pose.apply(p);
    return sum / static_cast<double>(shape.points.size());
}

// ---------------------------------------------------------------------------
// World state

RigidObject& WorldState::object(const std::string& id) {
    auto it = objects.find(id);
    if (it == objects.end()) throw UnknownObject("unknown object: " + id);
    return it->second;
}
const RigidObject& WorldState::object(const std::string& id) const {
    auto it = objects.find(id);
    if (it == objects.end()) throw UnknownObject("unknown object: " + id);
    return it->second;
}
Gripper& WorldState::gripper(const std::string& arm) {
    auto it = grippers.find(arm);
    if (it == grippers.end()) throw UnknownObject("unknown arm: " + arm);
    return it->second;
}
const Gripper& WorldState::gripper(const std::string& arm) const {
    auto it = grippers.find(arm);
    if (it == grippers.end()) throw UnknownObject("unknown arm: " + arm);
    return it->second;
}

RobotState WorldState::robot_state() const {
    RobotState xi;
    for (const auto& [arm, g] : grippers) {
        xi.eef[arm] = g.pose;
        xi.gripper[arm] = GripperState{g.width, g.held.has_value() || g.width < 1e-3};
    }
    return xi;
}

void WorldState::log(std::string kind, std::string object, std::string detail) {
    events.push_back({step, std::move(kind), std::move(object), std::move(detail)});
}

// ---------------------------------------------------------------------------
// Scene parsing

SceneSpec parse_scene(const nlohmann::json& j) {
    SceneSpec s;
    s.table_z = j.value("table_height", 0.0);
    if (!j.contains("workspaces")) throw SchemaViolation("scene needs \"workspaces\"");
    for (const auto& [arm, box] : j.at("workspaces").items()) {
        if (arm != "left" && arm != "right")
            throw SchemaViolation("unknown workspace arm: " + arm);
        s.workspace.reach[arm] = box.get<Aabb>();
    }
    if (j.contains("home"))
        for (const auto& [arm, pose] : j.at("home").items())
            s.workspace.home[arm] = pose.get<Pose>();
    for (const auto& arm : {"left", "right"})
        if (s.workspace.reach.count(arm) && !s.workspace.home.count(arm)) {
            Pose p;
            p.position = s.workspace.reach.at(arm).center();
            p.position.z = s.workspace.reach.at(arm).max.z - 0.05;
            s.workspace.home[arm] = p;
        }
    if (j.contains("static_obstacles"))
        for (const auto& b : j.at("static_obstacles")) s.static_obstacles.push_back(b.get<Aabb>());

    for (const auto& oj : j.value("objects", nlohmann::json::array())) {
        SceneSpec::ObjectSpec o;
        o.id = oj.at("id").get<std::string>();
        const auto& sj = oj.at("shape");
        std::string kind = sj.at("kind").get<std::string>();
        int pts = sj.value("points", 120);
        if (kind == "cylinder") {
            o.shape = ObjectShape::cylinder(sj.at("radius").get<double>(),
                                            sj.at("height").get<double>(), pts);
        } else if (kind == "box") {
            o.shape = ObjectShape::box(sj.at("extents").get<Vec3>(), pts);
        } else {
            throw SchemaViolation("unknown shape kind: " + kind);
        }
        o.pose = oj.at("pose").get<Pose>();
        if (oj.contains("upright_axis")) o.upright_axis = oj.at("upright_axis").get<Vec3>().normalized();
        o.grasp_width = oj.value("grasp_width", 0.0);
        if (o.grasp_width < 0.0 || o.grasp_width > Gripper::kMaxWidth)
            throw SchemaViolation("grasp_width outside [0, 0.10] on object " + o.id);
        o.randomize_pose = oj.value("randomize_pose", o.grasp_width > 0.0);
        s.objects.push_back(std::move(o));
    }
    return s;
}

nlohmann::json scene_to_json(const SceneSpec& s) {
    nlohmann::json j;
    j["table_height"] = s.table_z;
    nlohmann::json ws = nlohmann::json::object();
    for (const auto& [arm, box] : s.workspace.reach) ws[arm] = box;
    j["workspaces"] = ws;
    nlohmann::json home = nlohmann::json::object();
    for (const auto& [arm, pose] : s.workspace.home) home[arm] = pose;
    j["home"] = home;
    auto obstacles = nlohmann::json::array();
    for (const auto& b : s.static_obstacles) obstacles.push_back(b);
    j["static_obstacles"] = obstacles;
    auto objs = nlohmann::json::array();
    for (const auto& o : s.objects) {
        nlohmann::json oj{{"id", o.id}, {"pose", o.pose}, {"upright_axis", o.upright_axis},
                          {"grasp_width", o.grasp_width}, {"randomize_pose", o.randomize_pose}};
        if (o.shape.kind == ObjectShape::Kind::Cylinder)
            oj["shape"] = {{"kind", "cylinder"}, {"radius", o.shape.radius},
                           {"height", o.shape.height},
                           {"points", static_cast<int>(o.shape.points.size())}};
        else
            oj["shape"] = {{"kind", "box"}, {"extents", o.shape.box_extents},
                           {"points", static_cast<int>(o.shape.points.size())}};
        objs.push_back(std::move(oj));
    }
    j["objects"] = objs;
    return j;
}

WorldState make_world(const SceneSpec& scene) {
    WorldState w;
    w.table_z = scene.table_z;
    for (const auto& os : scene.objects) {
        RigidObject o;
        o.id = os.id;
        o.shape = os.shape;
        o.pose = os.pose;
        o.upright_axis = os.upright_axis;
        o.grasp_width = os.grasp_width;
        o.randomize_pose = os.randomize_pose;
        w.objects.emplace(o.id, std::move(o));
    }
    for (const auto& [arm, home] : scene.workspace.home) {
        Gripper g;
        g.arm = arm;
        g.pose = home;
        g.width = 0.08;
        w.grippers.emplace(arm, std::move(g));
    }
    settle(w);
    return w;
}

// ---------------------------------------------------------------------------
// Disturbances

DisturbanceModel parse_disturbance(const nlohmann::json& j) {
    DisturbanceModel d;
    std::string mode = j.value("mode", "none");
    if (mode == "none") {
        d.mode = DisturbanceModel::Mode::None;
    } else if (mode == "bernoulli") {
        d.mode = DisturbanceModel::Mode::Bernoulli;
        d.drop_probability = j.value("p", 0.0);
        if (d.drop_probability < 0.0 || d.drop_probability > 1.0)
            throw SchemaViolation("drop probability outside [0,1]");
    } else if (mode == "scheduled") {
        d.mode = DisturbanceModel::Mode::Scheduled;
        for (const auto& ej : j.value("events", nlohmann::json::array())) {
            ScheduledEvent e;
            std::string kind = ej.at("kind").get<std::string>();
            if (kind == "drop") e.kind = ScheduledEvent::Kind::Drop;
            else if (kind == "shift") e.kind = ScheduledEvent::Kind::Shift;
            else if (kind == "tilt") e.kind = ScheduledEvent::Kind::Tilt;
            else throw SchemaViolation("unknown scheduled event kind: " + kind);
            if (ej.contains("at_step")) e.at_step = ej.at("at_step").get<std::uint64_t>();
            if (ej.contains("at_action")) {
                int a = ej.at("at_action").get<int>();
                if (a < 0) throw SchemaViolation("at_action must be nonnegative");
                e.at_action = a;
            }
            if (!e.at_step && !e.at_action)
                throw SchemaViolation("scheduled event needs at_step or at_action");
            e.object = ej.value("object", "");
            if (ej.contains("delta")) e.delta = ej.at("delta").get<Vec3>();
            e.angle = ej.value("angle", 0.0);
            if (ej.contains("axis")) e.axis = ej.at("axis").get<Vec3>();
            d.events.push_back(std::move(e));
        }
    } else {
        throw SchemaViolation("unknown disturbance mode: " + mode);
    }
    return d;
}

nlohmann::json disturbance_to_json(const DisturbanceModel& d) {
    nlohmann::json j;
    switch (d.mode) {
        case DisturbanceModel::Mode::None: j["mode"] = "none"; break;
        case DisturbanceModel::Mode::Bernoulli:
            j["mode"] = "bernoulli";
            j["p"] = d.drop_probability;
            break;
        case DisturbanceModel::Mode::Scheduled: {
            j["mode"] = "scheduled";
            auto arr = nlohmann::json::array();
            for (const auto& e : d.events) {
                nlohmann::json ej;
                ej["kind"] = e.kind == ScheduledEvent::Kind::Drop    ? "drop"
                             : e.kind == ScheduledEvent::Kind::Shift ? "shift"
                                                                     : "tilt";
                if (e.at_step) ej["at_step"] = *e.at_step;
                if (e.at_action) ej["at_action"] = *e.at_action;
                if (!e.object.empty()) ej["object"] = e.object;
                if (e.kind == ScheduledEvent::Kind::Shift) ej["delta"] = e.delta;
                if (e.kind == ScheduledEvent::Kind::Tilt) {
                    ej["angle"] = e.angle;
                    ej["axis"] = e.axis;
                }
                arr.push_back(std::move(ej));
            }
            j["events"] = arr;
            break;
        }
    }
    return j;
}

namespace {

void detach(WorldState& world, const std::string& object_id) {
    RigidObject& o = world.object(object_id);
    if (!o.attached_to) return;
    world.gripper(*o.attached_to).held.reset();
    o.attached_to.reset();
}

void settle_object(WorldState& world, RigidObject& o) {
    if (o.attached_to) return;
    if (o.tilt_angle() > kLyingThreshold) {
        Vec3 u = o.world_upright();
        Vec3 flat{u.x, u.y, 0.0};
        if (flat.norm() < 1e-9) flat = {1.0, 0.0, 0.0};
        Quat fix = rotation_between(u, flat.normalized());
        o.pose.orientation = (fix * o.pose.orientation).normalized();
    }
    o.pose.position.z -= o.bottom_z() - world.table_z;
}

}  // namespace

void settle(WorldState& world) {
    for (auto& [id, o] : world.objects) settle_object(world, o);
}

void inject(WorldState& world, const ScheduledEvent& event) {
    switch (event.kind) {
        case ScheduledEvent::Kind::Drop: {
            RigidObject& o = world.object(event.object);
            if (!o.attached_to) {
                world.log("drop_ignored", event.object, "object not held");
                return;
            }
            detach(world, event.object);
            settle_object(world, o);
            world.log("drop", event.object, "scheduled");
            return;
        }
        case ScheduledEvent::Kind::Shift: {
            RigidObject& o = world.object(event.object);
            if (o.attached_to) detach(world, event.object);
            o.pose.position += event.delta;
            settle_object(world, o);
            world.log("shift", event.object, "scheduled");
            return;
        }
        case ScheduledEvent::Kind::Tilt: {
            RigidObject& o = world.object(event.object);
            if (o.attached_to) detach(world, event.object);
            Vec3 axis{event.axis.x, event.axis.y, 0.0};  // horizontal axis
            if (axis.norm() < 1e-9) axis = {0.0, 1.0, 0.0};
            Quat rot = Quat::from_axis_angle(axis, event.angle);
            Vec3 c = o.centroid();
            o.pose.orientation = (rot * o.pose.orientation).normalized();
            o.pose.position = c + rot.rotate(o.pose.position - c);
            settle_object(world, o);
            world.log("tilt", event.object, "scheduled");
            return;
        }
    }
}

// ---------------------------------------------------------------------------
// Control-step primitives

namespace {

bool has_event(const WorldState& w, const std::string& kind, const std::string& object,
               const std::string& detail) {
    for (const auto& e : w.events)
        if (e.kind == kind && e.object == object && e.detail == detail) return true;
    return false;
}

// Detects pour-over: a held object inverted past the pour angle while
// laterally aligned above another object. Logged once per pair.
void check_pour(WorldState& world) {
    for (auto& [arm, g] : world.grippers) {
        if (!g.held) continue;
        RigidObject& o = world.object(*g.held);
        if (o.inversion_angle() < kPourAngle) continue;
        Vec3 oc = o.centroid();
        for (auto& [cid, c] : world.objects) {
            if (cid == o.id) continue;
            Vec3 cc = c.centroid();
            double lateral = std::hypot(oc.x - cc.x, oc.y - cc.y);
            if (lateral <= kPourLateral && cc.z < oc.z && !has_event(world, "poured", o.id, cid))
                world.log("poured", o.id, cid);
        }
    }
}

void sync_attachment(WorldState& world, Gripper& g) {
    if (!g.held) return;
    RigidObject& o = world.object(*g.held);
    o.pose = g.pose.compose(g.grasp_transform);
}

}  // namespace

void step_pose(WorldState& world, const std::string& arm, const Pose& pose) {
    Gripper& g = world.gripper(arm);
    g.pose = pose;
    sync_attachment(world, g);
    ++world.step;
    check_pour(world);
}

void step_width(WorldState& world, const std::string& arm, double width) {
    Gripper& g = world.gripper(arm);
    g.width = std::clamp(width, 0.0, Gripper::kMaxWidth);
    if (g.held) {
        RigidObject& o = world.object(*g.held);
        if (g.width > o.grasp_width + kReleaseSlack) {
            detach(world, o.id);
            settle_object(world, o);
            world.log("released", o.id, arm);
        }
    }
    ++world.step;
}

void step_noop(WorldState& world) { ++world.step; }

void apply_scheduled(WorldState& world, DisturbanceState& disturbance) {
    if (disturbance.model.mode != DisturbanceModel::Mode::Scheduled) return;
    for (std::size_t i = 0; i < disturbance.model.events.size(); ++i) {
        const auto& e = disturbance.model.events[i];
        if (e.at_step && *e.at_step == world.step && !disturbance.applied.count(i)) {
            disturbance.applied.insert(i);
            inject(world, e);
        }
    }
}

// ---------------------------------------------------------------------------
// Action cursor

namespace {

struct Phase {
    enum class Kind { Move, Rotate, Actuate, AttachClose };
    Kind kind = Kind::Move;
    // Move
    Pose target;
    // Rotate
    Quat rot_from, rot_to;
    int rot_steps = 0, rot_done = 0;
    // Actuate / AttachClose
    double width_from = 0.0, width_to = 0.0;
    int act_steps = 0, act_done = 0;
    std::string attach_candidate;
    double start_width = 0.0;
    // Move bookkeeping
    std::vector<Pose> plan;
    std::size_t plan_next = 1;
    int executed_in_plan = 0;
    double last_replan_err = std::numeric_limits<double>::infinity();
};

Vec3 sensed_centroid(const PerceptionOutput& x, const std::string& id) {
    auto it = x.objects.find(id);
    if (it == x.objects.end() || !it->second.centroid)
        throw UnknownObject("object not visible for targeting: " + id);
    return *it->second.centroid;
}

// Single-arm action state machine. Phases resolve lazily so targets track
// the latest perception.
class ArmProgram {
  public:
    ArmProgram(WorldState& world, const AtomicAction& action, const MotionContext& ctx,
               DisturbanceState& dist, std::mt19937_64& rng)
        : world_(world), action_(action), ctx_(ctx), dist_(dist), rng_(rng) {
        arm_ = action.robot;
        maybe_draw_drop();
    }

    const std::string& arm() const { return arm_; }

    bool done() {
        ensure_phase();
        return !phase_ && phase_index_ >= phase_count();
    }

    // Executes one control step; returns true when a drop fired on it.
    bool step() {
        ensure_phase();
        if (!phase_) {
            step_noop(world_);
            return false;
        }
        step_in_action_++;
        run_phase_step();
        bool disturbed = maybe_fire_drop();
        return disturbed;
    }

  private:
    WorldState& world_;
    AtomicAction action_;
    const MotionContext& ctx_;
    DisturbanceState& dist_;
    std::mt19937_64& rng_;
    std::string arm_;
    std::optional<Phase> phase_;
    int phase_index_ = 0;
    int step_in_action_ = 0;
    int drop_step_ = 0;  // 0 = no drop drawn
    std::string drop_object_;

    Gripper& gripper() { return world_.gripper(arm_); }

    const Aabb& box() const { return ctx_.workspace->box(arm_); }

    Vec3 clip(const Vec3& p) const { return box().clamp(p); }

    double step_limit() const { return ctx_.solver.translation_step; }
    double rot_limit() const { return ctx_.solver.rotation_step; }

    void maybe_draw_drop() {
        if (dist_.model.mode != DisturbanceModel::Mode::Bernoulli) return;
        if (!action_.is_motion()) return;
        Gripper& g = gripper();
        if (!g.held) return;
        ++dist_.eligible_draws;
        std::bernoulli_distribution fire(dist_.model.drop_probability);
        if (!fire(rng_)) return;
        int planned = std::max(1, estimate_steps());
        std::uniform_int_distribution<int> at(1, planned);
        drop_step_ = at(rng_);
        drop_object_ = *g.held;
    }

    bool maybe_fire_drop() {
        if (drop_step_ == 0 || step_in_action_ != drop_step_) return false;
        drop_step_ = 0;
        RigidObject& o = world_.object(drop_object_);
        if (!o.attached_to || *o.attached_to != arm_) return false;
        detach(world_, o.id);
        std::uniform_real_distribution<double> jitter(-kDropJitter, kDropJitter);
        o.pose.position.x += jitter(rng_);
        o.pose.position.y += jitter(rng_);
        settle_object(world_, o);
        ++dist_.drops_fired;
        world_.log("drop", o.id, "bernoulli");
        return true;
    }

    // Planned control steps of this action, from current geometry. Exact
    // for straight-line motion in an obstacle-free scene.
    int estimate_steps() {
        const Gripper& g = world_.gripper(arm_);
        auto move_steps = [&](const Vec3& from, const Vec3& to) {
            return static_cast<int>(std::ceil((to - from).norm() / step_limit() - 1e-12));
        };
        switch (action_.kind) {
            case ActionKind::MoveToObj: {
                Vec3 t = clip(world_.object(action_.object).centroid() + action_.offset);
                return move_steps(g.pose.position, t);
            }
            case ActionKind::MoveToTarget:
                return move_steps(g.pose.position, clip(action_.target));
            case ActionKind::MoveByOffset:
                return move_steps(g.pose.position, clip(g.pose.position + action_.offset));
            case ActionKind::RotateEef:
                return static_cast<int>(
                    std::ceil(std::abs(action_.angle) / rot_limit() - 1e-12));
            case ActionKind::Place: {
                if (!g.held) return 1;
                const RigidObject& o = world_.object(*g.held);
                double lift = o.centroid().z - o.bottom_z();
                Vec3 t = clip({action_.target.x, action_.target.y,
                               world_.table_z + lift + action_.z_offset +
                                   (g.pose.position.z - o.centroid().z)});
                return move_steps(g.pose.position, t) + action_.sample_num;
            }
            case ActionKind::Back: {
                const Pose& home = ctx_.workspace->home_pose(arm_);
                int tr = move_steps(g.pose.position, home.position);
                int ro = static_cast<int>(
                    std::ceil(g.pose.orientation.angle_to(home.orientation) / rot_limit() - 1e-12));
                return std::max(tr, ro);
            }
            case ActionKind::Grasp: {
                const RigidObject& o = world_.object(action_.object);
                Vec3 c = o.centroid();
                int total = move_steps(g.pose.position, clip(c + Vec3{0, 0, action_.pre_grasp_dis}));
                total += move_steps(clip(c + Vec3{0, 0, action_.pre_grasp_dis}), clip(c));
                total += 2 * 20;  // open + close actuation
                return total;
            }
            default:
                return action_.sample_num;
        }
    }

    int phase_count() {
        build_all_phases();
        return static_cast<int>(specs_.size());
    }

    // Phase specs are built once, but each phase's concrete targets resolve
    // at activation time against the latest perception.
    struct PhaseSpec {
        std::function<std::optional<Phase>(ArmProgram&)> resolve;
    };
    std::vector<PhaseSpec> specs_;
    bool specs_built_ = false;

    void ensure_phase() {
        build_all_phases();
        while (!phase_ && phase_index_ < static_cast<int>(specs_.size())) {
            auto p = specs_[phase_index_].resolve(*this);
            ++phase_index_;
            if (p) phase_ = std::move(p);
        }
        if (phase_ && phase_finished(*phase_)) {
            phase_.reset();
            ensure_phase();
        }
    }

    bool phase_finished(const Phase& p) {
        switch (p.kind) {
            case Phase::Kind::Move: {
                const Gripper& g = world_.gripper(arm_);
                return (g.pose.position - p.target.position).norm() <= 1e-7 &&
                       g.pose.orientation.angle_to(p.target.orientation) <= 1e-6;
            }
            case Phase::Kind::Rotate:
                return p.rot_done >= p.rot_steps;
            case Phase::Kind::Actuate:
            case Phase::Kind::AttachClose:
                return p.act_done >= p.act_steps;
        }
        return true;
    }

    Phase make_move(const Pose& target) {
        Phase p;
        p.kind = Phase::Kind::Move;
        p.target = target;
        p.target.position = clip(target.position);
        return p;
    }

    Phase make_rotate(const Quat& to) {
        const Gripper& g = world_.gripper(arm_);
        Phase p;
        p.kind = Phase::Kind::Rotate;
        p.rot_from = g.pose.orientation;
        p.rot_to = to;
        double angle = p.rot_from.angle_to(to);
        p.rot_steps = std::max(1, static_cast<int>(std::ceil(angle / rot_limit() - 1e-12)));
        return p;
    }

    Phase make_actuate(double to, int steps) {
        Phase p;
        p.kind = Phase::Kind::Actuate;
        p.width_from = world_.gripper(arm_).width;
        p.width_to = std::clamp(to, 0.0, Gripper::kMaxWidth);
        p.act_steps = std::max(1, steps);
        return p;
    }

    void build_all_phases() {
        if (specs_built_) return;
        specs_built_ = true;
        auto add = [&](std::function<std::optional<Phase>(ArmProgram&)> f) {
            specs_.push_back({std::move(f)});
        };
        switch (action_.kind) {
            case ActionKind::Grasp: {
                std::string obj = action_.object;
                double pre = action_.pre_grasp_dis;
                // widen first when the opening could not admit the object
                add([obj](ArmProgram& s) -> std::optional<Phase> {
                    const RigidObject& o = s.world_.object(obj);
                    if (s.gripper().width > o.grasp_width + 0.01) return std::nullopt;
                    return s.make_actuate(std::min(Gripper::kMaxWidth, o.grasp_width + 0.03), 20);
                });
                add([obj, pre](ArmProgram& s) -> std::optional<Phase> {
                    auto x = s.ctx_.sense();
                    Vec3 c = sensed_centroid(x, obj);
                    Quat ori = Quat::identity();
                    const RigidObject& o = s.world_.object(obj);
                    if (o.tilt_angle() > kLyingThreshold) {
                        // fallen object: align the wrist yaw with the lying axis
                        Vec3 u = o.world_upright();
                        ori = Quat::from_axis_angle({0, 0, 1}, std::atan2(u.y, u.x));
                    }
                    return s.make_move({c + Vec3{0, 0, pre}, ori});
                });
                add([obj](ArmProgram& s) -> std::optional<Phase> {
                    auto x = s.ctx_.sense();
                    return s.make_move({sensed_centroid(x, obj), s.gripper().pose.orientation});
                });
                add([obj](ArmProgram& s) -> std::optional<Phase> {
                    Phase p = s.make_actuate(0.0, 20);
                    p.kind = Phase::Kind::AttachClose;
                    p.attach_candidate = obj;
                    p.start_width = s.gripper().width;
                    const RigidObject& o = s.world_.object(obj);
                    Vec3 diff = o.centroid() - s.gripper().pose.position;
                    if (diff.norm() <= kAttachTolerance) p.width_to = o.grasp_width;
                    return p;
                });
                // fallen object: lift clear of the table, then right it
                add([obj](ArmProgram& s) -> std::optional<Phase> {
                    const RigidObject& o = s.world_.object(obj);
                    if (!o.attached_to || o.tilt_angle() <= kLyingThreshold) return std::nullopt;
                    Vec3 up = s.gripper().pose.position;
                    up.z = s.world_.table_z + 0.18;
                    return s.make_move({up, s.gripper().pose.orientation});
                });
                add([obj](ArmProgram& s) -> std::optional<Phase> {
                    const RigidObject& o = s.world_.object(obj);
                    if (!o.attached_to || o.tilt_angle() <= kLyingThreshold) return std::nullopt;
                    Quat fix = rotation_between(o.world_upright(), {0, 0, 1});
                    return s.make_rotate((fix * s.gripper().pose.orientation).normalized());
                });
                break;
            }
            case ActionKind::MoveToObj: {
                std::string obj = action_.object;
                Vec3 off = action_.offset;
                add([obj, off](ArmProgram& s) -> std::optional<Phase> {
                    auto x = s.ctx_.sense();
                    return s.make_move({sensed_centroid(x, obj) + off,
                                        s.gripper().pose.orientation});
                });
                break;
            }
            case ActionKind::MoveToTarget: {
                Vec3 t = action_.target;
                add([t](ArmProgram& s) -> std::optional<Phase> {
                    return s.make_move({t, s.gripper().pose.orientation});
                });
                break;
            }
            case ActionKind::MoveByOffset: {
                Vec3 off = action_.offset;
                add([off](ArmProgram& s) -> std::optional<Phase> {
                    return s.make_move({s.gripper().pose.position + off,
                                        s.gripper().pose.orientation});
                });
                break;
            }
            case ActionKind::RotateEef: {
                double angle = action_.angle;
                Vec3 axis = action_.axis;
                add([angle, axis](ArmProgram& s) -> std::optional<Phase> {
                    Quat delta = Quat::from_axis_angle(axis, angle);
                    return s.make_rotate((delta * s.gripper().pose.orientation).normalized());
                });
                break;
            }
            case ActionKind::OpenGripper: {
                double w = action_.width;
                int n = action_.sample_num;
                add([w, n](ArmProgram& s) -> std::optional<Phase> {
                    return s.make_actuate(w < 0.0 ? 0.08 : w, n);
                });
                break;
            }
            case ActionKind::CloseGripper: {
                int n = action_.sample_num;
                add([n](ArmProgram& s) -> std::optional<Phase> {
                    // close on whatever graspable object sits between the fingers
                    Phase p = s.make_actuate(0.0, n);
                    p.kind = Phase::Kind::AttachClose;
                    p.start_width = s.gripper().width;
                    const RigidObject* best = nullptr;
                    double best_d = kAttachTolerance;
                    for (const auto& [id, o] : s.world_.objects) {
                        if (o.grasp_width <= 0.0) continue;
                        double d = (o.centroid() - s.gripper().pose.position).norm();
                        if (d <= best_d) { best_d = d; best = &o; }
                    }
                    if (best) {
                        p.attach_candidate = best->id;
                        p.width_to = best->grasp_width;
                    }
                    return p;
                });
                break;
            }
            case ActionKind::Place: {
                Vec3 t = action_.target;
                double zoff = action_.z_offset;
                int n = action_.sample_num;
                add([t, zoff](ArmProgram& s) -> std::optional<Phase> {
                    const Gripper& g = s.world_.gripper(s.arm_);
                    if (!g.held) return std::nullopt;
                    const RigidObject& o = s.world_.object(*g.held);
                    double grip_above = g.pose.position.z - o.centroid().z;
                    double lift = o.centroid().z - o.bottom_z();
                    double z = s.world_.table_z + lift + zoff + grip_above;
                    return s.make_move({{t.x, t.y, z}, g.pose.orientation});
                });
                add([n](ArmProgram& s) -> std::optional<Phase> {
                    return s.make_actuate(0.08, n);
                });
                break;
            }
            case ActionKind::Back: {
                add([](ArmProgram& s) -> std::optional<Phase> {
                    return s.make_move(s.ctx_.workspace->home_pose(s.arm_));
                });
                break;
            }
            case ActionKind::Drive:
                throw Error("drive actions execute through ActionCursor");
        }
    }

    void run_phase_step() {
        Phase& p = *phase_;
        switch (p.kind) {
            case Phase::Kind::Move: {
                if (p.plan_next >= p.plan.size() || p.executed_in_plan >= ctx_.solver.execute_steps)
                    replan(p);
                Pose cmd = p.plan[p.plan_next++];
                ++p.executed_in_plan;
                step_pose(world_, arm_, cmd);
                break;
            }
            case Phase::Kind::Rotate: {
                ++p.rot_done;
                double t = std::min(1.0, static_cast<double>(p.rot_done) / p.rot_steps);
                Pose cmd = world_.gripper(arm_).pose;
                cmd.orientation = slerp(p.rot_from, p.rot_to, t);
                step_pose(world_, arm_, cmd);
                break;
            }
            case Phase::Kind::Actuate:
            case Phase::Kind::AttachClose: {
                ++p.act_done;
                double t = static_cast<double>(p.act_done) / p.act_steps;
                step_width(world_, arm_, p.width_from + (p.width_to - p.width_from) * t);
                if (p.kind == Phase::Kind::AttachClose && p.act_done >= p.act_steps)
                    try_attach(p);
                break;
            }
        }
        if (phase_finished(p)) phase_.reset();
    }

    void replan(Phase& p) {
        const Gripper& g = world_.gripper(arm_);
        double err = (g.pose.position - p.target.position).norm();
        // A replan that made no positional progress toward a target still
        // meters away means the solver cannot reach it.
        if (!p.plan.empty() && err > ctx_.solver.tolerance && err >= p.last_replan_err - 1e-12)
            throw UnreachableTarget("move stalled " + std::to_string(err) + " m from target");
        p.last_replan_err = err;

        PathProblem prob;
        prob.arm = arm_;
        prob.start = g.pose;
        prob.goal = p.target;
        prob.constraints = ctx_.path_constraints;
        prob.field = ctx_.field;
        prob.workspace = ctx_.workspace;
        prob.config = ctx_.solver;
        if (!prob.constraints.empty() || ctx_.field) {
            PerceptionOutput snap = ctx_.sense();
            prob.ctx.snapshot = std::move(snap);
            prob.ctx.robot = world_.robot_state();
            for (const auto& [armid, gr] : world_.grippers)
                if (gr.held) prob.ctx.held[armid] = *gr.held;
        }
        try {
            p.plan = solve_path(prob);
        } catch (const Infeasible& e) {
            throw UnreachableTarget(std::string("path solver infeasible: ") + e.what());
        }
        p.plan_next = 1;
        p.executed_in_plan = 0;
    }

    void try_attach(Phase& p) {
        if (p.attach_candidate.empty()) return;
        Gripper& g = world_.gripper(arm_);
        RigidObject& o = world_.object(p.attach_candidate);
        if ((o.centroid() - g.pose.position).norm() > kAttachTolerance) return;
        if (p.start_width <= o.grasp_width) return;
        if (o.attached_to && *o.attached_to == arm_) return;
        if (o.attached_to) {
            world_.gripper(*o.attached_to).held.reset();
            world_.log("handover", o.id, *o.attached_to + "->" + arm_);
        }
        o.attached_to = arm_;
        g.held = o.id;
        g.width = o.grasp_width;
        g.grasp_transform = g.pose.inverse().compose(o.pose);
        world_.log("grasped", o.id, arm_);
    }
};

}  // namespace

struct ActionCursor::Impl {
    WorldState& world;
    MotionContext ctx;
    DisturbanceState& dist;
    std::mt19937_64& rng;
    std::vector<std::unique_ptr<ArmProgram>> programs;  // 1 (single) or 2 (drive)
    std::size_t next_program = 0;

    Impl(WorldState& w, const MotionContext& c, DisturbanceState& d, std::mt19937_64& r)
        : world(w), ctx(c), dist(d), rng(r) {}
};

ActionCursor::ActionCursor(WorldState& world, const AtomicAction& action,
                           const MotionContext& ctx, DisturbanceState& disturbance,
                           std::mt19937_64& rng)
    : impl_(std::make_unique<Impl>(world, ctx, disturbance, rng)) {
    // Scheduled disturbances tied to this action index fire on entry.
    if (disturbance.model.mode == DisturbanceModel::Mode::Scheduled) {
        for (std::size_t i = 0; i < disturbance.model.events.size(); ++i) {
            const auto& e = disturbance.model.events[i];
            if (e.at_action && *e.at_action == disturbance.action_index &&
                !disturbance.applied.count(i)) {
                disturbance.applied.insert(i);
                inject(world, e);
            }
        }
    }
    ++disturbance.action_index;

    if (action.kind == ActionKind::Drive) {
        if (action.left)
            impl_->programs.push_back(
                std::make_unique<ArmProgram>(world, *action.left, impl_->ctx, disturbance, rng));
        if (action.right)
            impl_->programs.push_back(
                std::make_unique<ArmProgram>(world, *action.right, impl_->ctx, disturbance, rng));
    } else {
        impl_->programs.push_back(
            std::make_unique<ArmProgram>(world, action, impl_->ctx, disturbance, rng));
    }
}

ActionCursor::~ActionCursor() = default;
ActionCursor::ActionCursor(ActionCursor&&) noexcept = default;
ActionCursor& ActionCursor::operator=(ActionCursor&&) noexcept = default;

bool ActionCursor::done() const {
    for (const auto& p : impl_->programs)
        if (!p->done()) return false;
    return true;
}

bool ActionCursor::step() {
    auto& im = *impl_;
    // Scheduled step-indexed disturbances fire before the command.
    apply_scheduled(im.world, im.dist);
    // Round-robin over unfinished arm programs.
    for (std::size_t tries = 0; tries < im.programs.size(); ++tries) {
        auto& prog = im.programs[im.next_program % im.programs.size()];
        ++im.next_program;
        if (!prog->done()) return prog->step();
    }
    step_noop(im.world);
    return false;
}

std::uint64_t execute_atomic(WorldState& world, const AtomicAction& action,
                             const MotionContext& ctx, DisturbanceState& disturbance,
                             std::mt19937_64& rng) {
    ActionCursor cursor(world, action, ctx, disturbance, rng);
    std::uint64_t steps = 0;
    while (!cursor.done()) {
        cursor.step();
        ++steps;
        if (steps > 100000) throw Error("atomic action failed to terminate");
    }
    return steps;
}

bool check_success(const WorldState& world, const Node& terminal, double tol) {
    std::set<std::string> keys;
    for (const auto& c : terminal.sub_goals)
        for (const auto& k : c.required_keys()) keys.insert(k);
    std::mt19937_64 rng(0);  // noiseless extraction consumes no randomness
    PerceptionOutput x = perceive(world, NoiseConfig{}, rng);
    FeatureVector z = extract_features(x, world.robot_state(), keys);
    try {
        return subgoal_satisfied(terminal, z, tol);
    } catch (const MissingFeature&) {
        return false;
    }
}

}  // namespace chord
