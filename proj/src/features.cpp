#include "chord/features.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cctype>
#include <charconv>
#include <sstream>

namespace chord {

Vec3 PointCloud::centroid() const {
    if (points.empty()) throw DegenerateCloud("centroid of empty cloud: " + object_id);
    Vec3 sum;
    for (const auto& p : points) sum += p;
    return sum / static_cast<double>(points.size());
}

double FeatureVector::scalar(const std::string& key) const {
    auto it = values.find(key);
    if (it == values.end() || !std::holds_alternative<double>(it->second))
        throw MissingFeature("scalar feature not available: " + key);
    return std::get<double>(it->second);
}

Vec3 FeatureVector::vec(const std::string& key) const {
    auto it = values.find(key);
    if (it == values.end() || !std::holds_alternative<Vec3>(it->second))
        throw MissingFeature("vector feature not available: " + key);
    return std::get<Vec3>(it->second);
}

namespace {

std::string format_alpha(double alpha) {
    std::ostringstream os;
    os << alpha;
    return os.str();
}

}  // namespace

std::string key_centroid(const std::string& o) { return "centroid(" + o + ")"; }
std::string key_principal_axis(const std::string& o) { return "principal_axis(" + o + ")"; }
std::string key_top_point(const std::string& o) { return "top_point(" + o + ")"; }
std::string key_bottom_point(const std::string& o) { return "bottom_point(" + o + ")"; }
std::string key_fractional_point(const std::string& o, double alpha) {
    return "fractional_point(" + o + "," + format_alpha(alpha) + ")";
}
std::string key_point_count(const std::string& o) { return "point_count(" + o + ")"; }
std::string key_gripper_width(const std::string& a) { return "gripper_width(" + a + ")"; }
std::string key_gripper_origin(const std::string& a) { return "gripper_origin(" + a + ")"; }
std::string key_relative_distance(const std::string& a, const std::string& b) {
    return "relative_distance(" + a + "," + b + ")";
}
std::string key_event_count(const std::string& kind, const std::string& object) {
    return object.empty() ? "event_count(" + kind + ")"
                          : "event_count(" + kind + "," + object + ")";
}

Vec3 principal_axis(const PointCloud& cloud) {
    const auto& pts = cloud.points;
    if (pts.size() < 3)
        throw DegenerateCloud("principal_axis needs >= 3 points: " + cloud.object_id);

    Vec3 c = cloud.centroid();
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (const auto& p : pts) {
        Eigen::Vector3d d(p.x - c.x, p.y - c.y, p.z - c.z);
        cov += d * d.transpose();
    }
    cov /= static_cast<double>(pts.size());

    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
    double lmax = es.eigenvalues()(2);
    if (lmax <= 1e-9)
        throw DegenerateCloud("rank-deficient cloud: " + cloud.object_id);

    Eigen::Vector3d u = es.eigenvectors().col(2).normalized();
    // Sign canonicalization: the component of largest magnitude is positive.
    int imax = 0;
    for (int i = 1; i < 3; ++i)
        if (std::abs(u(i)) > std::abs(u(imax))) imax = i;
    if (u(imax) < 0.0) u = -u;
    return {u(0), u(1), u(2)};
}

Vec3 fractional_point(const PointCloud& cloud, const Vec3& axis, double alpha) {
    if (cloud.empty()) throw DegenerateCloud("fractional_point on empty cloud");
    Vec3 u = axis.normalized();
    double tmin = cloud.points.front().dot(u);
    double tmax = tmin;
    for (const auto& p : cloud.points) {
        double t = p.dot(u);
        tmin = std::min(tmin, t);
        tmax = std::max(tmax, t);
    }
    double t = tmin + alpha * (tmax - tmin);
    Vec3 c = cloud.centroid();
    return c + (t - c.dot(u)) * u;
}

namespace {

// Parses "name(arg1,arg2)" into name + raw args. Returns false when the
// key has no parenthesized argument list.
bool split_key(const std::string& key, std::string& name, std::vector<std::string>& args) {
    auto open = key.find('(');
    if (open == std::string::npos) return false;
    if (key.back() != ')') throw UnknownFeatureKey("malformed feature key: " + key);
    name = key.substr(0, open);
    std::string inner = key.substr(open + 1, key.size() - open - 2);
    args.clear();
    std::string cur;
    for (char ch : inner) {
        if (ch == ',') {
            args.push_back(cur);
            cur.clear();
        } else if (!std::isspace(static_cast<unsigned char>(ch))) {
            cur += ch;
        }
    }
    if (!cur.empty() || !inner.empty()) args.push_back(cur);
    return true;
}

const ObjectObservation* find_object(const PerceptionOutput& x, const std::string& id) {
    auto it = x.objects.find(id);
    return it == x.objects.end() ? nullptr : &it->second;
}

}  // namespace

FeatureVector extract_features(const PerceptionOutput& x, const RobotState& xi,
                               const std::set<std::string>& requested) {
    FeatureVector z;
    for (const auto& key : requested) {
        if (key == key_gravity_dir()) {
            z.set(key, kGravityDir);
            continue;
        }
        std::string name;
        std::vector<std::string> args;
        if (!split_key(key, name, args))
            throw UnknownFeatureKey("unknown feature key: " + key);

        auto need_args = [&](std::size_t n) {
            if (args.size() != n)
                throw UnknownFeatureKey("wrong arity for feature key: " + key);
        };

        if (name == "centroid") {
            need_args(1);
            const auto* obs = find_object(x, args[0]);
            if (!obs || !obs->centroid) { z.mark_missing(key); continue; }
            z.set(key, *obs->centroid);
        } else if (name == "principal_axis") {
            need_args(1);
            const auto* obs = find_object(x, args[0]);
            if (!obs) { z.mark_missing(key); continue; }
            try {
                z.set(key, principal_axis(obs->cloud));
            } catch (const DegenerateCloud&) {
                z.mark_missing(key);
            }
        } else if (name == "top_point" || name == "bottom_point") {
            need_args(1);
            const auto* obs = find_object(x, args[0]);
            if (!obs || obs->cloud.empty()) { z.mark_missing(key); continue; }
            z.set(key, fractional_point(obs->cloud, {0, 0, 1}, name == "top_point" ? 1.0 : 0.0));
        } else if (name == "fractional_point") {
            need_args(2);
            const auto* obs = find_object(x, args[0]);
            double alpha = 0.0;
            try {
                alpha = std::stod(args[1]);
            } catch (const std::exception&) {
                throw UnknownFeatureKey("bad alpha in feature key: " + key);
            }
            if (alpha < 0.0 || alpha > 1.0)
                throw UnknownFeatureKey("alpha outside [0,1] in feature key: " + key);
            if (!obs || obs->cloud.empty()) { z.mark_missing(key); continue; }
            try {
                z.set(key, fractional_point(obs->cloud, principal_axis(obs->cloud), alpha));
            } catch (const DegenerateCloud&) {
                z.mark_missing(key);
            }
        } else if (name == "point_count") {
            need_args(1);
            const auto* obs = find_object(x, args[0]);
            // Invisible object reads as zero points, never as missing.
            z.set(key, obs ? static_cast<double>(obs->point_count) : 0.0);
        } else if (name == "gripper_width") {
            need_args(1);
            auto it = xi.gripper.find(args[0]);
            if (it == xi.gripper.end())
                throw UnknownFeatureKey("unknown arm in feature key: " + key);
            z.set(key, it->second.width);
        } else if (name == "gripper_origin") {
            need_args(1);
            auto it = xi.eef.find(args[0]);
            if (it == xi.eef.end())
                throw UnknownFeatureKey("unknown arm in feature key: " + key);
            z.set(key, it->second.position);
        } else if (name == "relative_distance") {
            need_args(2);
            const auto* a = find_object(x, args[0]);
            const auto* b = find_object(x, args[1]);
            if (!a || !a->centroid || !b || !b->centroid) { z.mark_missing(key); continue; }
            z.set(key, (*a->centroid - *b->centroid).norm());
        } else if (name == "event_count") {
            if (args.size() != 1 && args.size() != 2)
                throw UnknownFeatureKey("wrong arity for feature key: " + key);
            std::string ev = args.size() == 2 ? args[0] + ":" + args[1] : args[0];
            auto it = x.event_counts.find(ev);
            z.set(key, it == x.event_counts.end() ? 0.0 : static_cast<double>(it->second));
        } else {
            throw UnknownFeatureKey("unknown feature key: " + key);
        }
    }
    return z;
}

}  // namespace chord
