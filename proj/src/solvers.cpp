#include "chord/solvers.hpp"

#include <algorithm>
#include <cmath>

namespace chord {

SolverConfig solver_config_from_json(const nlohmann::json& j) {
    SolverConfig c;
    c.restarts = j.value("restarts", c.restarts);
    c.horizon = j.value("horizon", c.horizon);
    c.execute_steps = j.value("execute_steps", c.execute_steps);
    c.translation_step = j.value("translation_step", c.translation_step);
    c.rotation_step = j.value("rotation_step", c.rotation_step);
    c.safety_margin = j.value("safety_margin", c.safety_margin);
    c.voxel_size = j.value("voxel_size", c.voxel_size);
    c.tolerance = j.value("tolerance", c.tolerance);
    c.max_iterations = j.value("max_iterations", c.max_iterations);
    if (j.contains("weights")) {
        const auto& w = j.at("weights");
        c.w_goal = w.value("goal", c.w_goal);
        c.w_smooth = w.value("smooth", c.w_smooth);
        c.w_collision = w.value("collision", c.w_collision);
        c.w_reach = w.value("reach", c.w_reach);
        c.w_reg = w.value("regularization", c.w_reg);
        c.w_consistency = w.value("consistency", c.w_consistency);
        c.w_wrist = w.value("wrist", c.w_wrist);
    }
    c.wrist_min = j.value("wrist_min", c.wrist_min);
    c.wrist_max = j.value("wrist_max", c.wrist_max);
    if (c.horizon < 1 || c.execute_steps < 1 || c.execute_steps > c.horizon)
        throw SchemaViolation("solver config requires H >= M >= 1");
    if (c.translation_step <= 0.0 || c.rotation_step <= 0.0 || c.voxel_size <= 0.0)
        throw SchemaViolation("solver step limits and voxel size must be positive");
    return c;
}

nlohmann::json solver_config_to_json(const SolverConfig& c) {
    return nlohmann::json{
        {"restarts", c.restarts},
        {"horizon", c.horizon},
        {"execute_steps", c.execute_steps},
        {"translation_step", c.translation_step},
        {"rotation_step", c.rotation_step},
        {"safety_margin", c.safety_margin},
        {"voxel_size", c.voxel_size},
        {"tolerance", c.tolerance},
        {"max_iterations", c.max_iterations},
        {"weights",
         {{"goal", c.w_goal},
          {"smooth", c.w_smooth},
          {"collision", c.w_collision},
          {"reach", c.w_reach},
          {"regularization", c.w_reg},
          {"consistency", c.w_consistency},
          {"wrist", c.w_wrist}}},
        {"wrist_min", c.wrist_min},
        {"wrist_max", c.wrist_max},
    };
}

const Aabb& WorkspaceModel::box(const std::string& arm) const {
    auto it = reach.find(arm);
    if (it == reach.end()) throw Error("no workspace for arm " + arm);
    return it->second;
}

const Pose& WorkspaceModel::home_pose(const std::string& arm) const {
    auto it = home.find(arm);
    if (it == home.end()) throw Error("no home pose for arm " + arm);
    return it->second;
}

double reachability_residual(const Vec3& position, const Aabb& box) {
    return box.distance(position);
}

namespace {

double box_sdf(const Vec3& p, const Aabb& b) {
    Vec3 c = b.center();
    Vec3 half = b.extent() * 0.5;
    Vec3 q{std::abs(p.x - c.x) - half.x, std::abs(p.y - c.y) - half.y,
           std::abs(p.z - c.z) - half.z};
    Vec3 qp{std::max(q.x, 0.0), std::max(q.y, 0.0), std::max(q.z, 0.0)};
    double outside = qp.norm();
    double inside = std::min(0.0, std::max({q.x, q.y, q.z}));
    return outside + inside;
}

double scene_distance(const Vec3& p, double table_z, const std::vector<Aabb>& obstacles) {
    double d = p.z - table_z;
    for (const auto& b : obstacles) d = std::min(d, box_sdf(p, b));
    return d;
}

}  // namespace

CollisionField CollisionField::build(const Aabb& bounds, double voxel, double table_z,
                                     const std::vector<Aabb>& obstacles) {
    CollisionField f;
    f.origin_ = bounds.min;
    f.voxel_ = voxel;
    Vec3 ext = bounds.extent();
    f.nx_ = static_cast<int>(std::ceil(ext.x / voxel)) + 1;
    f.ny_ = static_cast<int>(std::ceil(ext.y / voxel)) + 1;
    f.nz_ = static_cast<int>(std::ceil(ext.z / voxel)) + 1;
    f.data_.resize(static_cast<std::size_t>(f.nx_) * f.ny_ * f.nz_);
    for (int k = 0; k < f.nz_; ++k)
        for (int j = 0; j < f.ny_; ++j)
            for (int i = 0; i < f.nx_; ++i) {
                Vec3 p = f.origin_ + Vec3{i * voxel, j * voxel, k * voxel};
                f.data_[(static_cast<std::size_t>(k) * f.ny_ + j) * f.nx_ + i] =
                    scene_distance(p, table_z, obstacles);
            }
    return f;
}

double CollisionField::query(const Vec3& p, bool* clamped) const {
    if (empty()) {
        if (clamped) *clamped = false;
        return 1e9;
    }
    Vec3 local = (p - origin_) / voxel_;
    bool cl = false;
    auto clampi = [&](double v, int n) {
        if (v < 0.0) { cl = true; return 0.0; }
        if (v > n - 1.0) { cl = true; return n - 1.0; }
        return v;
    };
    double fx = clampi(local.x, nx_), fy = clampi(local.y, ny_), fz = clampi(local.z, nz_);
    if (clamped) *clamped = cl;
    int i0 = std::min(static_cast<int>(fx), nx_ - 2);
    int j0 = std::min(static_cast<int>(fy), ny_ - 2);
    int k0 = std::min(static_cast<int>(fz), nz_ - 2);
    i0 = std::max(i0, 0); j0 = std::max(j0, 0); k0 = std::max(k0, 0);
    double tx = fx - i0, ty = fy - j0, tz = fz - k0;

    auto lerp = [](double a, double b, double t) { return a + (b - a) * t; };
    double c00 = lerp(at(i0, j0, k0), at(i0 + 1, j0, k0), tx);
    double c10 = lerp(at(i0, j0 + 1, k0), at(i0 + 1, j0 + 1, k0), tx);
    double c01 = lerp(at(i0, j0, k0 + 1), at(i0 + 1, j0, k0 + 1), tx);
    double c11 = lerp(at(i0, j0 + 1, k0 + 1), at(i0 + 1, j0 + 1, k0 + 1), tx);
    return lerp(lerp(c00, c10, ty), lerp(c01, c11, ty), tz);
}

Vec3 CollisionField::gradient(const Vec3& p) const {
    if (empty()) return {0, 0, 1};
    Vec3 local = (p - origin_) / voxel_;
    int i0 = std::clamp(static_cast<int>(local.x), 0, nx_ - 2);
    int j0 = std::clamp(static_cast<int>(local.y), 0, ny_ - 2);
    int k0 = std::clamp(static_cast<int>(local.z), 0, nz_ - 2);
    double tx = std::clamp(local.x - i0, 0.0, 1.0);
    double ty = std::clamp(local.y - j0, 0.0, 1.0);
    double tz = std::clamp(local.z - k0, 0.0, 1.0);

    auto lerp = [](double a, double b, double t) { return a + (b - a) * t; };
    // Analytic derivative of the trilinear interpolant within the cell.
    double d000 = at(i0, j0, k0), d100 = at(i0 + 1, j0, k0);
    double d010 = at(i0, j0 + 1, k0), d110 = at(i0 + 1, j0 + 1, k0);
    double d001 = at(i0, j0, k0 + 1), d101 = at(i0 + 1, j0, k0 + 1);
    double d011 = at(i0, j0 + 1, k0 + 1), d111 = at(i0 + 1, j0 + 1, k0 + 1);

    double gx = lerp(lerp(d100 - d000, d110 - d010, ty), lerp(d101 - d001, d111 - d011, ty), tz);
    double gy = lerp(lerp(d010 - d000, d110 - d100, tx), lerp(d011 - d001, d111 - d101, tx), tz);
    double gz = lerp(lerp(d001 - d000, d101 - d100, tx), lerp(d011 - d010, d111 - d110, tx), ty);
    return Vec3{gx, gy, gz} / voxel_;
}

FeatureVector predict_features(const PredictionContext& ctx,
                               const std::map<std::string, Pose>& eef_override,
                               const std::set<std::string>& requested) {
    PerceptionOutput x = ctx.snapshot;
    RobotState xi = ctx.robot;
    for (const auto& [arm, pose] : eef_override) {
        auto cur = xi.eef.find(arm);
        if (cur == xi.eef.end()) throw Error("predict_features: unknown arm " + arm);
        Pose delta = pose.compose(cur->second.inverse());
        auto held_it = ctx.held.find(arm);
        if (held_it != ctx.held.end()) {
            auto obj = x.objects.find(held_it->second);
            if (obj != x.objects.end()) {
                for (auto& pt : obj->second.cloud.points) pt = delta.apply(pt);
                if (obj->second.centroid) obj->second.centroid = delta.apply(*obj->second.centroid);
            }
        }
        cur->second = pose;
    }
    return extract_features(x, xi, requested);
}

namespace {

double hinge(double v) { return v > 0.0 ? v : 0.0; }

// Max constraint violation (above tolerance) over a candidate assignment.
double max_violation(const std::vector<Detector>& constraints, const PredictionContext& ctx,
                     const std::map<std::string, Pose>& poses, double tol) {
    if (constraints.empty()) return 0.0;
    std::set<std::string> keys;
    for (const auto& c : constraints)
        for (const auto& k : c.required_keys()) keys.insert(k);
    FeatureVector z = predict_features(ctx, poses, keys);
    double worst = 0.0;
    for (const auto& c : constraints) worst = std::max(worst, eval_detector(c, z) - tol);
    return worst;
}

double constraint_penalty(const std::vector<Detector>& constraints, const PredictionContext& ctx,
                          const std::map<std::string, Pose>& poses) {
    if (constraints.empty()) return 0.0;
    std::set<std::string> keys;
    for (const auto& c : constraints)
        for (const auto& k : c.required_keys()) keys.insert(k);
    FeatureVector z = predict_features(ctx, poses, keys);
    double sum = 0.0;
    for (const auto& c : constraints) {
        double h = hinge(eval_detector(c, z));
        sum += h * h;
    }
    return sum;
}

}  // namespace

// ---------------------------------------------------------------------------
// Sub-goal solver

namespace {

struct SubgoalEval {
    const SubgoalProblem& p;
    double penalty_weight;

    std::map<std::string, Pose> poses_for(const std::vector<Vec3>& xs) const {
        std::map<std::string, Pose> poses;
        for (std::size_t i = 0; i < p.arms.size(); ++i)
            poses[p.arms[i].arm] = Pose{xs[i], p.arms[i].target_orientation};
        return poses;
    }

    double operator()(const std::vector<Vec3>& xs) const {
        const auto& cfg = p.config;
        double f = 0.0;
        for (std::size_t i = 0; i < p.arms.size(); ++i) {
            const auto& arm = p.arms[i];
            const Vec3& x = xs[i];
            f += cfg.w_reg * (x - arm.current.position).squared_norm();
            if (arm.previous) f += cfg.w_consistency * (x - *arm.previous).squared_norm();
            if (p.workspace) {
                double r = reachability_residual(x, p.workspace->box(arm.arm));
                f += cfg.w_reach * r * r;
            }
            if (p.field) {
                double clear = cfg.safety_margin;
                double h = hinge(clear - p.field->query(x));
                f += cfg.w_collision * h * h;
            }
        }
        if (xs.size() == 2) {
            double d = (xs[0] - xs[1]).norm();
            double hlo = hinge(cfg.wrist_min - d);
            double hhi = hinge(d - cfg.wrist_max);
            f += cfg.w_wrist * (hlo * hlo + hhi * hhi);
        }
        f += penalty_weight * constraint_penalty(p.constraints, p.ctx, poses_for(xs));
        return f;
    }
};

// Central-difference gradient over the flattened translation variables.
template <typename F>
std::vector<Vec3> fd_gradient(const F& f, std::vector<Vec3> xs, double h = 1e-6) {
    std::vector<Vec3> g(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i)
        for (int a = 0; a < 3; ++a) {
            double orig = xs[i][a];
            xs[i][a] = orig + h;
            double fp = f(xs);
            xs[i][a] = orig - h;
            double fm = f(xs);
            xs[i][a] = orig;
            g[i][a] = (fp - fm) / (2 * h);
        }
    return g;
}

// Projected gradient descent with backtracking; projection clamps each
// arm's translation into its workspace box.
template <typename F, typename Proj>
std::vector<Vec3> refine(const F& f, const Proj& project, std::vector<Vec3> xs,
                         int max_iterations) {
    double fx = f(xs);
    double step = 0.05;
    for (int it = 0; it < max_iterations; ++it) {
        auto g = fd_gradient(f, xs);
        double gnorm = 0.0;
        for (const auto& gi : g) gnorm += gi.squared_norm();
        gnorm = std::sqrt(gnorm);
        if (gnorm < 1e-10) break;
        bool improved = false;
        double alpha = step;
        for (int ls = 0; ls < 12; ++ls) {
            std::vector<Vec3> trial = xs;
            for (std::size_t i = 0; i < xs.size(); ++i) trial[i] -= g[i] * (alpha / gnorm);
            project(trial);
            double ft = f(trial);
            if (ft < fx - 1e-12) {
                xs = std::move(trial);
                fx = ft;
                improved = true;
                step = std::min(alpha * 2.0, 0.2);
                break;
            }
            alpha *= 0.5;
        }
        if (!improved) break;
    }
    return xs;
}

}  // namespace

std::map<std::string, Pose> solve_subgoal(const SubgoalProblem& p, std::mt19937_64& rng) {
    if (p.arms.empty()) throw Error("solve_subgoal: no arms in problem");
    const auto& cfg = p.config;

    auto project = [&](std::vector<Vec3>& xs) {
        if (!p.workspace) return;
        for (std::size_t i = 0; i < xs.size(); ++i)
            xs[i] = p.workspace->box(p.arms[i].arm).clamp(xs[i]);
    };

    std::vector<std::vector<Vec3>> seeds;
    {
        std::vector<Vec3> cur;
        for (const auto& a : p.arms) cur.push_back(a.current.position);
        seeds.push_back(cur);
        for (const auto& a : p.arms)
            if (a.previous) {
                std::vector<Vec3> prev;
                for (const auto& b : p.arms)
                    prev.push_back(b.previous.value_or(b.current.position));
                seeds.push_back(prev);
                break;
            }
    }
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    for (int r = 0; r < cfg.restarts; ++r) {
        std::vector<Vec3> xs;
        for (const auto& a : p.arms) {
            Aabb box = p.workspace ? p.workspace->box(a.arm)
                                   : Aabb{a.current.position - Vec3{0.5, 0.5, 0.5},
                                          a.current.position + Vec3{0.5, 0.5, 0.5}};
            Vec3 ext = box.extent();
            xs.push_back(box.min + Vec3{uni(rng) * ext.x, uni(rng) * ext.y, uni(rng) * ext.z});
        }
        seeds.push_back(std::move(xs));
    }

    std::optional<std::vector<Vec3>> best;
    double best_obj = std::numeric_limits<double>::infinity();
    SubgoalEval objective_only{p, 0.0};

    for (auto seed : seeds) {
        project(seed);
        std::vector<Vec3> xs = std::move(seed);
        double w = cfg.penalty0;
        for (int round = 0; round < 3; ++round) {
            SubgoalEval eval{p, w};
            xs = refine(eval, project, xs, cfg.max_iterations);
            if (max_violation(p.constraints, p.ctx, eval.poses_for(xs), 0.0) <= cfg.tolerance)
                break;
            w *= 10.0;
        }
        SubgoalEval eval{p, 0.0};
        auto poses = eval.poses_for(xs);
        bool feasible = max_violation(p.constraints, p.ctx, poses, 0.0) <= cfg.tolerance;
        if (p.workspace)
            for (std::size_t i = 0; i < xs.size(); ++i)
                feasible = feasible &&
                           reachability_residual(xs[i], p.workspace->box(p.arms[i].arm)) <= 1e-9;
        if (!feasible) continue;
        double obj = objective_only(xs);
        if (obj < best_obj) {
            best_obj = obj;
            best = xs;
        }
    }

    if (!best)
        throw Infeasible("solve_subgoal: no feasible keyframe after " +
                         std::to_string(seeds.size()) + " starts");
    std::map<std::string, Pose> out;
    for (std::size_t i = 0; i < p.arms.size(); ++i)
        out[p.arms[i].arm] = Pose{(*best)[i], p.arms[i].target_orientation};
    return out;
}

// ---------------------------------------------------------------------------
// Path solver

namespace {

double path_clearance(const SolverConfig& cfg) {
    // Waypoints keep an extra half-step of clearance so densely
    // interpolated points between them still satisfy the safety margin.
    return cfg.safety_margin + 0.5 * cfg.translation_step;
}

}  // namespace

double path_objective(const PathProblem& p, const std::vector<Vec3>& waypoints) {
    const auto& cfg = p.config;
    double f = 0.0;
    Vec3 prev = p.start.position;
    double clear = path_clearance(cfg);
    const Aabb* box = p.workspace ? &p.workspace->box(p.arm) : nullptr;
    for (const auto& x : waypoints) {
        f += cfg.w_smooth * (x - prev).squared_norm();
        if (p.field) {
            double h = hinge(clear - p.field->query(x));
            f += cfg.w_collision * h * h;
        }
        if (box) {
            Vec3 c = box->clamp(x);
            f += cfg.w_reach * (x - c).squared_norm();
        }
        prev = x;
    }
    f += cfg.w_goal * (waypoints.back() - p.goal.position).squared_norm();
    return f;
}

std::vector<Vec3> path_objective_gradient(const PathProblem& p,
                                          const std::vector<Vec3>& waypoints) {
    const auto& cfg = p.config;
    std::vector<Vec3> g(waypoints.size());
    double clear = path_clearance(cfg);
    const Aabb* box = p.workspace ? &p.workspace->box(p.arm) : nullptr;
    for (std::size_t h = 0; h < waypoints.size(); ++h) {
        const Vec3& x = waypoints[h];
        const Vec3 prev = h == 0 ? p.start.position : waypoints[h - 1];
        g[h] += 2.0 * cfg.w_smooth * (x - prev);
        if (h + 1 < waypoints.size()) g[h] -= 2.0 * cfg.w_smooth * (waypoints[h + 1] - x);
        if (p.field) {
            double hv = hinge(clear - p.field->query(x));
            if (hv > 0.0) g[h] -= 2.0 * cfg.w_collision * hv * p.field->gradient(x);
        }
        if (box) g[h] += 2.0 * cfg.w_reach * (x - box->clamp(x));
    }
    g.back() += 2.0 * cfg.w_goal * (waypoints.back() - p.goal.position);
    return g;
}

namespace {

// Forward pass clamping consecutive displacements to the step limit.
void project_steps(const Vec3& start, std::vector<Vec3>& xs, double limit) {
    Vec3 prev = start;
    for (auto& x : xs) {
        Vec3 d = x - prev;
        double n = d.norm();
        if (n > limit) x = prev + d * (limit / n);
        prev = x;
    }
}

std::vector<Vec3> straight_line_init(const Vec3& start, const Vec3& goal, int horizon,
                                     double limit) {
    std::vector<Vec3> xs;
    xs.reserve(horizon);
    Vec3 cur = start;
    for (int h = 0; h < horizon; ++h) {
        Vec3 d = goal - cur;
        double n = d.norm();
        if (n > limit) cur = cur + d * (limit / n);
        else cur = goal;
        xs.push_back(cur);
    }
    return xs;
}

// Detour init: straight line warped by a sine bump along `dir`.
std::vector<Vec3> bumped_init(const Vec3& start, const Vec3& goal, int horizon, double limit,
                              const Vec3& dir, double height) {
    std::vector<Vec3> xs;
    xs.reserve(horizon);
    for (int h = 1; h <= horizon; ++h) {
        double t = static_cast<double>(h) / horizon;
        Vec3 base = start + (goal - start) * t;
        xs.push_back(base + dir * (height * std::sin(M_PI * t)));
    }
    project_steps(start, xs, limit);
    return xs;
}

struct PathFeasibility {
    bool ok = false;
    double worst_constraint = 0.0;
};

PathFeasibility check_path(const PathProblem& p, const std::vector<Vec3>& xs) {
    const auto& cfg = p.config;
    PathFeasibility r;
    double clear = path_clearance(cfg);
    Vec3 prev = p.start.position;
    for (const auto& x : xs) {
        if ((x - prev).norm() > cfg.translation_step + 1e-9) return r;
        if (p.field && p.field->query(x) < clear - 1e-9) return r;
        prev = x;
    }
    if (!p.constraints.empty()) {
        for (const auto& x : xs) {
            double v = max_violation(p.constraints, p.ctx,
                                     {{p.arm, Pose{x, p.start.orientation}}}, 0.0);
            r.worst_constraint = std::max(r.worst_constraint, v);
            if (v > cfg.tolerance) return r;
        }
    }
    r.ok = true;
    return r;
}

}  // namespace

std::vector<Pose> solve_path(const PathProblem& p) {
    const auto& cfg = p.config;
    const int H = cfg.horizon;
    const Vec3 start = p.start.position;
    const Vec3 goal = p.goal.position;

    std::vector<std::vector<Vec3>> inits;
    inits.push_back(straight_line_init(start, goal, H, cfg.translation_step));
    inits.push_back(bumped_init(start, goal, H, cfg.translation_step, {0, 0, 1}, 0.10));
    inits.push_back(bumped_init(start, goal, H, cfg.translation_step, {0, 0, 1}, 0.20));
    {
        Vec3 d = goal - start;
        d.z = 0.0;
        if (d.norm() > 1e-9) {
            Vec3 side = d.normalized().cross({0, 0, 1});
            inits.push_back(bumped_init(start, goal, H, cfg.translation_step, side, 0.15));
            inits.push_back(bumped_init(start, goal, H, cfg.translation_step, -side, 0.15));
        }
    }

    std::optional<std::vector<Vec3>> best;
    double best_obj = std::numeric_limits<double>::infinity();

    for (std::size_t init_idx = 0; init_idx < inits.size(); ++init_idx) {
        std::vector<Vec3> xs = inits[init_idx];
        if (!check_path(p, xs).ok) {
            double w = cfg.penalty0;
            for (int round = 0; round < 3 && !check_path(p, xs).ok; ++round) {
                auto f = [&](const std::vector<Vec3>& ys) {
                    double v = path_objective(p, ys);
                    if (!p.constraints.empty()) {
                        for (const auto& y : ys) {
                            double c = constraint_penalty(
                                p.constraints, p.ctx, {{p.arm, Pose{y, p.start.orientation}}});
                            v += w * c;
                        }
                    }
                    return v;
                };
                auto project = [&](std::vector<Vec3>& ys) {
                    project_steps(start, ys, cfg.translation_step);
                };
                // Analytic gradient for the smooth part, finite differences
                // for constraint penalties when present.
                if (p.constraints.empty()) {
                    double fx = f(xs);
                    double step = 0.02;
                    for (int it = 0; it < cfg.max_iterations; ++it) {
                        auto grad = path_objective_gradient(p, xs);
                        double gnorm = 0.0;
                        for (const auto& gi : grad) gnorm += gi.squared_norm();
                        gnorm = std::sqrt(gnorm);
                        if (gnorm < 1e-10) break;
                        bool improved = false;
                        double alpha = step;
                        for (int ls = 0; ls < 12; ++ls) {
                            std::vector<Vec3> trial = xs;
                            for (std::size_t i = 0; i < xs.size(); ++i)
                                trial[i] -= grad[i] * (alpha / gnorm);
                            project(trial);
                            double ft = f(trial);
                            if (ft < fx - 1e-12) {
                                xs = std::move(trial);
                                fx = ft;
                                improved = true;
                                step = std::min(alpha * 2.0, 0.1);
                                break;
                            }
                            alpha *= 0.5;
                        }
                        if (!improved) break;
                    }
                } else {
                    xs = refine(f, project, xs, cfg.max_iterations);
                }
                w *= 10.0;
            }
        }
        auto feas = check_path(p, xs);
        if (!feas.ok) continue;
        double obj = path_objective(p, xs);
        if (obj < best_obj) {
            best_obj = obj;
            best = xs;
        }
        // The straight line is optimal when feasible; no need to try detours.
        if (init_idx == 0) break;
    }

    if (!best) throw Infeasible("solve_path: no feasible sequence within budget");

    // Attach rate-limited shortest-arc orientation interpolation.
    const auto& xs = *best;
    double angle = p.start.orientation.angle_to(p.goal.orientation);
    int rot_steps = angle <= 1e-12 ? 0 : static_cast<int>(std::ceil(angle / cfg.rotation_step));
    std::vector<Pose> out;
    out.reserve(H + 1);
    out.push_back(p.start);
    for (int h = 1; h <= H; ++h) {
        double t = rot_steps == 0 ? 1.0 : std::min(1.0, static_cast<double>(h) / rot_steps);
        out.push_back(Pose{xs[h - 1], slerp(p.start.orientation, p.goal.orientation, t)});
    }
    return out;
}

}  // namespace chord
