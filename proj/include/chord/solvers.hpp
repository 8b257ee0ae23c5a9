#pragma once
// Hierarchical constrained solvers over a free-flyer end-effector model:
// sub-goal keyframe synthesis (global random restarts + local gradient
// refinement) and receding-horizon path refinement. Decision variables are
// end-effector translations; orientations follow shortest-arc
// interpolation rate-limited per step.

#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "chord/geometry.hpp"
#include "chord/monitors.hpp"

namespace chord {

struct SolverConfig {
    int restarts = 32;           // global stage samples for Eq.-9-style solves
    int horizon = 20;            // H
    int execute_steps = 5;       // M
    double translation_step = 0.02;  // m per control step
    double rotation_step = 0.1;      // rad per control step
    double safety_margin = 0.01;     // m, collision clearance
    double voxel_size = 0.01;        // m
    double tolerance = 1e-3;         // constraint satisfaction tol
    int max_iterations = 80;         // local refinement budget
    // objective weights
    double w_goal = 10.0;
    double w_smooth = 0.5;
    double w_collision = 50.0;
    double w_reach = 10.0;
    double w_reg = 0.5;
    double w_consistency = 0.1;
    double w_wrist = 1.0;
    double wrist_min = 0.10;  // m, bimanual inter-wrist bounds
    double wrist_max = 1.00;
    double penalty0 = 100.0;  // initial hard-constraint penalty weight
};

SolverConfig solver_config_from_json(const nlohmann::json& j);
nlohmann::json solver_config_to_json(const SolverConfig& c);

// Axis-aligned reachability model per arm plus shared step limits.
struct WorkspaceModel {
    std::map<std::string, Aabb> reach;
    std::map<std::string, Pose> home;

    const Aabb& box(const std::string& arm) const;
    const Pose& home_pose(const std::string& arm) const;
};

// 0 inside the reachable box, Euclidean distance to it outside.
double reachability_residual(const Vec3& position, const Aabb& box);

// Voxelized signed distance to the static scene (table plane plus declared
// static obstacle boxes). Queries interpolate trilinearly; out-of-grid
// points are clamped and flagged.
class CollisionField {
  public:
    CollisionField() = default;

    // Samples the analytic scene distance onto a grid covering `bounds`.
    static CollisionField build(const Aabb& bounds, double voxel, double table_z,
                                const std::vector<Aabb>& obstacles);

    double query(const Vec3& p, bool* clamped = nullptr) const;
    Vec3 gradient(const Vec3& p) const;

    double voxel() const { return voxel_; }
    bool empty() const { return data_.empty(); }

  private:
    Vec3 origin_;
    double voxel_ = 0.01;
    int nx_ = 0, ny_ = 0, nz_ = 0;
    std::vector<double> data_;

    double at(int i, int j, int k) const {
        return data_[(static_cast<std::size_t>(k) * ny_ + j) * nx_ + i];
    }
};

inline double sdf_query(const CollisionField& field, const Vec3& p, bool* clamped = nullptr) {
    return field.query(p, clamped);
}

// Perceptual context for evaluating constraints at hypothetical poses:
// overridden arms move, and objects they hold move rigidly with them.
struct PredictionContext {
    PerceptionOutput snapshot;
    RobotState robot;
    std::map<std::string, std::string> held;  // arm -> object id
};

FeatureVector predict_features(const PredictionContext& ctx,
                               const std::map<std::string, Pose>& eef_override,
                               const std::set<std::string>& requested);

struct ArmGoal {
    std::string arm;
    Pose current;
    Quat target_orientation;          // fixed during optimization
    std::optional<Vec3> previous;     // consistency anchor
};

struct SubgoalProblem {
    std::vector<ArmGoal> arms;
    std::vector<Detector> constraints;  // C_sub, c(z) <= 0
    std::map<std::string, double> gripper_width;  // intended g^i per arm
    PredictionContext ctx;
    const CollisionField* field = nullptr;
    const WorkspaceModel* workspace = nullptr;
    SolverConfig config;
};

// Keyframe pose per arm satisfying the constraints within tolerance and
// inside the workspace box. Throws Infeasible after the restart budget.
std::map<std::string, Pose> solve_subgoal(const SubgoalProblem& p, std::mt19937_64& rng);

struct PathProblem {
    std::string arm;
    Pose start;  // e_t
    Pose goal;   // e^j
    std::vector<Detector> constraints;  // C_path
    PredictionContext ctx;
    const CollisionField* field = nullptr;
    const WorkspaceModel* workspace = nullptr;
    SolverConfig config;
};

// Pose sequence of length H+1 starting at e_t; consecutive translations
// respect the per-step limit and orientations the rotation limit.
std::vector<Pose> solve_path(const PathProblem& p);

// Smooth part of the path objective over waypoint translations (progress,
// smoothness, collision hinge, reachability), with its analytic gradient.
// Exposed so the gradient can be checked against finite differences.
double path_objective(const PathProblem& p, const std::vector<Vec3>& waypoints);
std::vector<Vec3> path_objective_gradient(const PathProblem& p,
                                          const std::vector<Vec3>& waypoints);

}  // namespace chord
