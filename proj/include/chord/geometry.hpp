#pragma once
// Minimal 3D types shared by every module: vectors, unit quaternions,
// rigid poses, axis-aligned boxes. Units are meters and radians, world
// frame is x-forward/y-left/z-up with gravity along -z.

#include <array>
#include <cmath>
#include <stdexcept>

#include <json.hpp>

namespace chord {

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    constexpr Vec3() = default;
    constexpr Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
    Vec3 operator-() const { return {-x, -y, -z}; }
    Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
    Vec3& operator-=(const Vec3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
    bool operator==(const Vec3& o) const { return x == o.x && y == o.y && z == o.z; }

    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    Vec3 cross(const Vec3& o) const {
        return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
    }
    double norm() const { return std::sqrt(dot(*this)); }
    double squared_norm() const { return dot(*this); }
    Vec3 normalized() const {
        double n = norm();
        if (n <= 0.0) throw std::domain_error("cannot normalize zero vector");
        return *this / n;
    }
    double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
    double& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }

inline constexpr Vec3 kGravityDir{0.0, 0.0, -1.0};

// Unit quaternion, (w, x, y, z) storage.
struct Quat {
    double w = 1.0, x = 0.0, y = 0.0, z = 0.0;

    constexpr Quat() = default;
    constexpr Quat(double w_, double x_, double y_, double z_) : w(w_), x(x_), y(y_), z(z_) {}

    static Quat identity() { return {}; }

    static Quat from_axis_angle(const Vec3& axis, double angle) {
        Vec3 u = axis.normalized();
        double h = 0.5 * angle;
        double s = std::sin(h);
        return {std::cos(h), u.x * s, u.y * s, u.z * s};
    }

    double norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }

    Quat normalized() const {
        double n = norm();
        if (n <= 0.0) throw std::domain_error("cannot normalize zero quaternion");
        return {w / n, x / n, y / n, z / n};
    }

    Quat conjugate() const { return {w, -x, -y, -z}; }

    Quat operator*(const Quat& o) const {
        return {w * o.w - x * o.x - y * o.y - z * o.z,
                w * o.x + x * o.w + y * o.z - z * o.y,
                w * o.y - x * o.z + y * o.w + z * o.x,
                w * o.z + x * o.y - y * o.x + z * o.w};
    }

    Vec3 rotate(const Vec3& v) const {
        // q v q* with v as a pure quaternion.
        Quat p{0.0, v.x, v.y, v.z};
        Quat r = (*this) * p * conjugate();
        return {r.x, r.y, r.z};
    }

    double dot(const Quat& o) const { return w * o.w + x * o.x + y * o.y + z * o.z; }

    // Angle of the relative rotation between two unit quaternions.
    double angle_to(const Quat& o) const {
        double d = std::min(1.0, std::abs(dot(o)));
        return 2.0 * std::acos(d);
    }
};

// Shortest-arc interpolation; t in [0,1].
inline Quat slerp(const Quat& a, Quat b, double t) {
    double d = a.dot(b);
    if (d < 0.0) { b = {-b.w, -b.x, -b.y, -b.z}; d = -d; }
    if (d > 1.0 - 1e-12) {
        Quat q{a.w + t * (b.w - a.w), a.x + t * (b.x - a.x),
               a.y + t * (b.y - a.y), a.z + t * (b.z - a.z)};
        return q.normalized();
    }
    double theta = std::acos(d);
    double sa = std::sin((1.0 - t) * theta) / std::sin(theta);
    double sb = std::sin(t * theta) / std::sin(theta);
    return Quat{sa * a.w + sb * b.w, sa * a.x + sb * b.x,
                sa * a.y + sb * b.y, sa * a.z + sb * b.z}.normalized();
}

// Quaternion rotating unit vector a onto unit vector b (shortest arc).
inline Quat rotation_between(const Vec3& a, const Vec3& b) {
    Vec3 u = a.normalized(), v = b.normalized();
    double c = u.dot(v);
    if (c > 1.0 - 1e-12) return Quat::identity();
    if (c < -1.0 + 1e-12) {
        // Opposite: pick any axis orthogonal to u.
        Vec3 axis = std::abs(u.x) < 0.9 ? u.cross({1, 0, 0}) : u.cross({0, 1, 0});
        return Quat::from_axis_angle(axis, M_PI);
    }
    Vec3 axis = u.cross(v);
    return Quat::from_axis_angle(axis, std::acos(std::clamp(c, -1.0, 1.0)));
}

struct Pose {
    Vec3 position;
    Quat orientation;

    static Pose identity() { return {}; }

    Vec3 apply(const Vec3& p) const { return orientation.rotate(p) + position; }

    Pose compose(const Pose& o) const {
        return {apply(o.position), (orientation * o.orientation).normalized()};
    }

    Pose inverse() const {
        Quat qi = orientation.conjugate();
        return {qi.rotate(-position), qi};
    }
};

struct Aabb {
    Vec3 min, max;

    bool contains(const Vec3& p) const {
        return p.x >= min.x && p.x <= max.x && p.y >= min.y && p.y <= max.y &&
               p.z >= min.z && p.z <= max.z;
    }

    Vec3 clamp(const Vec3& p) const {
        return {std::clamp(p.x, min.x, max.x), std::clamp(p.y, min.y, max.y),
                std::clamp(p.z, min.z, max.z)};
    }

    // Euclidean distance to the box surface, 0 inside.
    double distance(const Vec3& p) const {
        Vec3 c = clamp(p);
        return (p - c).norm();
    }

    Vec3 center() const { return (min + max) * 0.5; }
    Vec3 extent() const { return max - min; }
};

// JSON conversions (arrays for vectors, [w,x,y,z] for quaternions).
inline void to_json(nlohmann::json& j, const Vec3& v) { j = {v.x, v.y, v.z}; }
inline void from_json(const nlohmann::json& j, Vec3& v) {
    v = {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}
inline void to_json(nlohmann::json& j, const Quat& q) { j = {q.w, q.x, q.y, q.z}; }
inline void from_json(const nlohmann::json& j, Quat& q) {
    q = Quat{j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>(),
             j.at(3).get<double>()}.normalized();
}
inline void to_json(nlohmann::json& j, const Pose& p) {
    j = nlohmann::json{{"position", p.position}, {"orientation", p.orientation}};
}
inline void from_json(const nlohmann::json& j, Pose& p) {
    p.position = j.at("position").get<Vec3>();
    p.orientation = j.contains("orientation") ? j.at("orientation").get<Quat>() : Quat::identity();
}
inline void to_json(nlohmann::json& j, const Aabb& b) {
    j = nlohmann::json{{"min", b.min}, {"max", b.max}};
}
inline void from_json(const nlohmann::json& j, Aabb& b) {
    b.min = j.at("min").get<Vec3>();
    b.max = j.at("max").get<Vec3>();
}

}  // namespace chord
