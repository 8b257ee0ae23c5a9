#pragma once
// Compiled constraint/failure functions over the feature vector, plus the
// margin-and-persistence trigger semantics. A detector evaluates to a
// scalar; positive means the monitored condition is violated.

#include <deque>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "chord/expr.hpp"
#include "chord/features.hpp"

namespace chord {

// Shared defaults; every threshold is overridable per constraint.
struct MonitorDefaults {
    double epsilon = 0.0;
    int k = 3;
    double delta_shift = 0.05;    // m
    double theta_max = 0.35;      // rad
    double delta_attach = 0.08;   // m
    double n_min = 20;            // points
    double delta_rel = 0.04;      // m
    double subgoal_tol = 1e-3;
};

enum class RelationKind { LateralOffset, CentroidDistance, HeightDifference };

enum class DetectorKind { Shift, Tilt, GraspOpening, Attach, Visibility, Relational, Expr };

// A parameterized detector template. Doubles as the constraint form used
// for node sub-goals and edge path constraints (c(z) <= 0) and as the
// failure form (f(z) > 0 means the failure condition is present).
struct Detector {
    DetectorKind kind = DetectorKind::Expr;
    std::string object;                  // shift, tilt, attach, visibility
    std::string object2;                 // relational second subject
    std::string arm;                     // grasp_opening, attach
    RelationKind relation = RelationKind::CentroidDistance;
    double threshold = 0.0;              // delta_shift/theta_max/g_th/delta_attach/n_min/delta_rel
    std::optional<Vec3> reference;       // shift reference; nullopt = snapshot at edge entry
    std::optional<Expr> expr;

    // Feature keys the detector reads.
    std::set<std::string> required_keys() const;

    // True for shift detectors without an explicit reference position.
    bool needs_snapshot() const {
        return kind == DetectorKind::Shift && !reference.has_value();
    }
};

// Parse/serialize the task-file detector form. Optional "epsilon"/"k"
// fields are surfaced for failure-mode loading.
struct ParsedDetector {
    Detector detector;
    std::optional<double> epsilon;
    std::optional<int> k;
};
ParsedDetector parse_detector(const nlohmann::json& j, const MonitorDefaults& defaults);
nlohmann::json detector_to_json(const Detector& d);

// Scalar evaluation per the template formulas; positive means violation.
// Throws MissingFeature for absent keys on every template except
// visibility, which treats a missing cloud as zero points.
double eval_detector(const Detector& det, const FeatureVector& z);

// Copy with the snapshot reference resolved from the current features.
Detector resolve_snapshot(const Detector& det, const FeatureVector& z);

// Trigger state for one failure mode on the active edge. The buffer is
// cleared on edge entry and after each trigger; a trigger requires K
// consecutive violated samples observed since the last reset.
struct MonitorState {
    std::string failure_id;
    Detector detector;  // snapshot-resolved
    double epsilon = 0.0;
    int k = 1;
    std::deque<bool> buffer;
    int samples_since_reset = 0;

    void reset() {
        buffer.clear();
        samples_since_reset = 0;
    }
};

// Pushes (f_value > epsilon) and reports whether the monitor fired.
// Fires iff the last K samples are all violations and at least K samples
// arrived since reset; the state resets after firing.
bool update_monitor(MonitorState& state, double f_value);

struct Node;  // graph

// True iff every sub-goal constraint of the node evaluates <= tol.
bool subgoal_satisfied(const Node& node, const FeatureVector& z, double tol);

struct Edge;  // graph

// One MonitorState per failure mode, in declaration order, with buffers
// cleared. Snapshot references resolve against the entry features.
std::vector<MonitorState> compile_edge_monitors(const Edge& edge, const FeatureVector& entry_z);

}  // namespace chord
