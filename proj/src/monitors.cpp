#include "chord/monitors.hpp"

#include "chord/graph.hpp"

namespace chord {

std::set<std::string> Detector::required_keys() const {
    switch (kind) {
        case DetectorKind::Shift: return {key_centroid(object)};
        case DetectorKind::Tilt: return {key_principal_axis(object)};
        case DetectorKind::GraspOpening: return {key_gripper_width(arm)};
        case DetectorKind::Attach: return {key_centroid(object), key_gripper_origin(arm)};
        case DetectorKind::Visibility: return {key_point_count(object)};
        case DetectorKind::Relational: return {key_centroid(object), key_centroid(object2)};
        case DetectorKind::Expr: return expr->required_keys();
    }
    return {};
}

namespace {

RelationKind parse_relation(const std::string& s) {
    if (s == "lateral-offset") return RelationKind::LateralOffset;
    if (s == "centroid-distance") return RelationKind::CentroidDistance;
    if (s == "height-difference") return RelationKind::HeightDifference;
    throw SchemaViolation("unknown relational kind: " + s);
}

std::string relation_name(RelationKind r) {
    switch (r) {
        case RelationKind::LateralOffset: return "lateral-offset";
        case RelationKind::CentroidDistance: return "centroid-distance";
        case RelationKind::HeightDifference: return "height-difference";
    }
    return "";
}

double require_positive(const nlohmann::json& j, const std::string& key, double fallback) {
    double v = j.contains(key) ? j.at(key).get<double>() : fallback;
    if (v <= 0.0) throw SchemaViolation("threshold must be positive: " + key);
    return v;
}

std::string require_string(const nlohmann::json& j, const std::string& key) {
    if (!j.contains(key) || !j.at(key).is_string())
        throw SchemaViolation("detector missing string field: " + key);
    return j.at(key).get<std::string>();
}

}  // namespace

ParsedDetector parse_detector(const nlohmann::json& j, const MonitorDefaults& defaults) {
    if (!j.is_object() || !j.contains("template"))
        throw SchemaViolation("detector must be an object with a \"template\" field");
    std::string t = j.at("template").get<std::string>();

    ParsedDetector out;
    Detector& d = out.detector;
    if (t == "shift") {
        d.kind = DetectorKind::Shift;
        d.object = require_string(j, "object");
        d.threshold = require_positive(j, "delta_shift", defaults.delta_shift);
        if (j.contains("reference") && !j.at("reference").is_string())
            d.reference = j.at("reference").get<Vec3>();
    } else if (t == "tilt") {
        d.kind = DetectorKind::Tilt;
        d.object = require_string(j, "object");
        d.threshold = require_positive(j, "theta_max", defaults.theta_max);
    } else if (t == "grasp_opening") {
        d.kind = DetectorKind::GraspOpening;
        d.arm = require_string(j, "arm");
        d.threshold = require_positive(j, "g_th", 0.0);
    } else if (t == "attach") {
        d.kind = DetectorKind::Attach;
        d.object = require_string(j, "object");
        d.arm = require_string(j, "arm");
        d.threshold = require_positive(j, "delta_attach", defaults.delta_attach);
    } else if (t == "visibility") {
        d.kind = DetectorKind::Visibility;
        d.object = require_string(j, "object");
        d.threshold = require_positive(j, "n_min", defaults.n_min);
    } else if (t == "relational") {
        d.kind = DetectorKind::Relational;
        if (!j.contains("objects") || !j.at("objects").is_array() || j.at("objects").size() != 2)
            throw SchemaViolation("relational detector needs \"objects\": [k, l]");
        d.object = j.at("objects").at(0).get<std::string>();
        d.object2 = j.at("objects").at(1).get<std::string>();
        d.relation = parse_relation(j.value("relation", "centroid-distance"));
        d.threshold = require_positive(j, "delta_rel", defaults.delta_rel);
    } else if (t == "expr") {
        d.kind = DetectorKind::Expr;
        d.expr = Expr::parse(require_string(j, "expr"));
    } else {
        throw SchemaViolation("unknown detector template: " + t);
    }

    if (j.contains("epsilon")) {
        out.epsilon = j.at("epsilon").get<double>();
        if (*out.epsilon < 0.0) throw SchemaViolation("epsilon must be >= 0");
    }
    if (j.contains("k")) {
        out.k = j.at("k").get<int>();
        if (*out.k < 1) throw SchemaViolation("persistence k must be >= 1");
    }
    return out;
}

nlohmann::json detector_to_json(const Detector& d) {
    nlohmann::json j;
    switch (d.kind) {
        case DetectorKind::Shift:
            j["template"] = "shift";
            j["object"] = d.object;
            j["delta_shift"] = d.threshold;
            if (d.reference) j["reference"] = *d.reference;
            break;
        case DetectorKind::Tilt:
            j["template"] = "tilt";
            j["object"] = d.object;
            j["theta_max"] = d.threshold;
            break;
        case DetectorKind::GraspOpening:
            j["template"] = "grasp_opening";
            j["arm"] = d.arm;
            j["g_th"] = d.threshold;
            break;
        case DetectorKind::Attach:
            j["template"] = "attach";
            j["object"] = d.object;
            j["arm"] = d.arm;
            j["delta_attach"] = d.threshold;
            break;
        case DetectorKind::Visibility:
            j["template"] = "visibility";
            j["object"] = d.object;
            j["n_min"] = d.threshold;
            break;
        case DetectorKind::Relational:
            j["template"] = "relational";
            j["objects"] = {d.object, d.object2};
            j["relation"] = relation_name(d.relation);
            j["delta_rel"] = d.threshold;
            break;
        case DetectorKind::Expr:
            j["template"] = "expr";
            j["expr"] = d.expr->source();
            break;
    }
    return j;
}

double eval_detector(const Detector& det, const FeatureVector& z) {
    switch (det.kind) {
        case DetectorKind::Shift: {
            if (!det.reference)
                throw MissingFeature("shift detector evaluated without a resolved reference");
            Vec3 p = z.vec(key_centroid(det.object));
            return (p - *det.reference).norm() - det.threshold;
        }
        case DetectorKind::Tilt: {
            Vec3 u = z.vec(key_principal_axis(det.object));
            return std::acos(std::min(1.0, std::abs(u.dot(kGravityDir)))) - det.threshold;
        }
        case DetectorKind::GraspOpening:
            return z.scalar(key_gripper_width(det.arm)) - det.threshold;
        case DetectorKind::Attach: {
            Vec3 p = z.vec(key_centroid(det.object));
            Vec3 g = z.vec(key_gripper_origin(det.arm));
            return (p - g).norm() - det.threshold;
        }
        case DetectorKind::Visibility:
            return det.threshold - z.scalar(key_point_count(det.object));
        case DetectorKind::Relational: {
            Vec3 a = z.vec(key_centroid(det.object));
            Vec3 b = z.vec(key_centroid(det.object2));
            double d = 0.0;
            switch (det.relation) {
                case RelationKind::LateralOffset: {
                    Vec3 delta = a - b;
                    d = std::sqrt(delta.x * delta.x + delta.y * delta.y);
                    break;
                }
                case RelationKind::CentroidDistance: d = (a - b).norm(); break;
                case RelationKind::HeightDifference: d = std::abs(a.z - b.z); break;
            }
            return d - det.threshold;
        }
        case DetectorKind::Expr:
            return det.expr->eval(z);
    }
    throw Error("unreachable detector kind");
}

Detector resolve_snapshot(const Detector& det, const FeatureVector& z) {
    if (!det.needs_snapshot()) return det;
    Detector r = det;
    r.reference = z.vec(key_centroid(det.object));
    return r;
}

bool update_monitor(MonitorState& state, double f_value) {
    state.buffer.push_back(f_value > state.epsilon);
    if (state.buffer.size() > static_cast<std::size_t>(state.k)) state.buffer.pop_front();
    ++state.samples_since_reset;

    if (state.samples_since_reset < state.k) return false;
    for (bool v : state.buffer)
        if (!v) return false;
    state.reset();
    return true;
}

bool subgoal_satisfied(const Node& node, const FeatureVector& z, double tol) {
    for (const auto& c : node.sub_goals)
        if (eval_detector(c, z) > tol) return false;
    return true;
}

std::vector<MonitorState> compile_edge_monitors(const Edge& edge, const FeatureVector& entry_z) {
    std::vector<MonitorState> states;
    states.reserve(edge.failure_modes.size());
    for (const auto& fm : edge.failure_modes) {
        MonitorState s;
        s.failure_id = fm.id;
        s.detector = resolve_snapshot(fm.detector, entry_z);
        s.epsilon = fm.margin_epsilon;
        s.k = fm.persistence_k;
        states.push_back(std::move(s));
    }
    return states;
}

}  // namespace chord
