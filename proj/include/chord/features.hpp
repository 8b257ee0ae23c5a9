#pragma once
// Simulated observation oracle and geometric feature extraction. The
// feature vector is a named map of scalars and 3-vectors; constraint and
// failure evaluators consume it by key.

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "chord/errors.hpp"
#include "chord/geometry.hpp"

namespace chord {

struct PointCloud {
    std::string object_id;
    std::vector<Vec3> points;  // world frame, meters

    bool empty() const { return points.empty(); }
    Vec3 centroid() const;  // throws DegenerateCloud on empty cloud
};

struct ObjectObservation {
    PointCloud cloud;
    std::optional<Vec3> centroid;  // absent when the cloud is empty
    std::size_t point_count = 0;
};

// Output of the perception oracle for one sensing tick. Event counts come
// from the world's event log; the simulated oracle surfaces them the way a
// real pipeline would surface detected task events.
struct PerceptionOutput {
    std::uint64_t step = 0;
    std::map<std::string, ObjectObservation> objects;
    std::map<std::string, std::uint64_t> event_counts;  // key: kind or kind:object
};

struct GripperState {
    double width = 0.0;  // opening, meters
    bool closed = false;
};

struct RobotState {
    std::map<std::string, Pose> eef;            // arm id -> end-effector pose
    std::map<std::string, GripperState> gripper;  // arm id -> gripper state
};

struct NoiseConfig {
    double sigma = 0.0;    // isotropic Gaussian, meters
    double dropout = 0.0;  // per-point drop probability
};

using FeatureValue = std::variant<double, Vec3>;

// Named feature map. Keys use the canonical textual form, e.g.
// "centroid(bottle)" or "gripper_width(right)". Keys that could not be
// computed (object not visible) are recorded in `missing` instead of
// being fabricated.
struct FeatureVector {
    std::map<std::string, FeatureValue> values;
    std::set<std::string> missing;

    bool has(const std::string& key) const { return values.count(key) > 0; }
    bool is_missing(const std::string& key) const { return missing.count(key) > 0; }

    double scalar(const std::string& key) const;  // throws MissingFeature
    Vec3 vec(const std::string& key) const;       // throws MissingFeature

    void set(const std::string& key, FeatureValue v) { values[key] = std::move(v); }
    void mark_missing(const std::string& key) { missing.insert(key); }
};

// Canonical feature keys.
std::string key_centroid(const std::string& object);
std::string key_principal_axis(const std::string& object);
std::string key_top_point(const std::string& object);
std::string key_bottom_point(const std::string& object);
std::string key_fractional_point(const std::string& object, double alpha);
std::string key_point_count(const std::string& object);
std::string key_gripper_width(const std::string& arm);
std::string key_gripper_origin(const std::string& arm);
std::string key_relative_distance(const std::string& a, const std::string& b);
std::string key_event_count(const std::string& kind, const std::string& object = "");
inline std::string key_gravity_dir() { return "gravity_dir"; }

// Dominant PCA axis of the centered cloud, sign-canonicalized so the
// component of largest magnitude is positive. Throws DegenerateCloud for
// fewer than 3 points or a rank-deficient covariance (tolerance 1e-9).
Vec3 principal_axis(const PointCloud& cloud);

// Point on the line through the centroid along `axis`, at projection
// min + alpha * (max - min) over the cloud's projections.
Vec3 fractional_point(const PointCloud& cloud, const Vec3& axis, double alpha);

// Computes exactly the requested keys from a perception snapshot and the
// robot state. Keys referencing invisible objects are flagged missing.
// Malformed or unrecognized keys raise UnknownFeatureKey.
FeatureVector extract_features(const PerceptionOutput& x, const RobotState& xi,
                               const std::set<std::string>& requested);

struct WorldState;  // simworld

// Observation oracle: ground-truth object shapes transformed by their true
// poses, perturbed by iid Gaussian noise and per-point dropout. Events in
// the world log are surfaced as counts. Deterministic under a fixed rng.
PerceptionOutput perceive(const WorldState& world, const NoiseConfig& noise,
                          std::mt19937_64& rng);

}  // namespace chord
