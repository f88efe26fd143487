#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <cmath>
#include <cstdint>
#include <random>

namespace splatmap {

using Vec3 = Eigen::Vector3d;
using Vec2 = Eigen::Vector2d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Vec3i = Eigen::Vector3i;

/// Rigid camera-to-world transform: x_world = R * x_cam + t.
struct Pose {
    Mat3 R = Mat3::Identity();
    Vec3 t = Vec3::Zero();

    Vec3 to_world(const Vec3& p_cam) const { return R * p_cam + t; }
    Vec3 to_camera(const Vec3& p_world) const { return R.transpose() * (p_world - t); }

    Mat4 matrix() const {
        Mat4 m = Mat4::Identity();
        m.block<3, 3>(0, 0) = R;
        m.block<3, 1>(0, 3) = t;
        return m;
    }
    static Pose from_matrix(const Mat4& m) {
        Pose p;
        p.R = m.block<3, 3>(0, 0);
        p.t = m.block<3, 1>(0, 3);
        return p;
    }
    bool rotation_orthonormal(double tol = 1e-6) const {
        return (R * R.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff() < tol &&
               std::abs(R.determinant() - 1.0) < tol;
    }
};

/// Camera convention: +Z forward, +Y image-down. `up` defaults to world +Y.
inline Pose look_at(const Vec3& position, const Vec3& target, const Vec3& up = Vec3(0, 1, 0)) {
    Pose p;
    Vec3 z = (target - position).normalized();
    Vec3 x = z.cross(up);
    if (x.norm() < 1e-9) x = z.cross(Vec3(1, 0, 0));
    x.normalize();
    Vec3 y = z.cross(x);
    p.R.col(0) = x;
    p.R.col(1) = y;
    p.R.col(2) = z;
    p.t = position;
    return p;
}

struct Aabb {
    Vec3 min = Vec3::Zero();
    Vec3 max = Vec3::Zero();

    Vec3 extent() const { return max - min; }
    Vec3 center() const { return 0.5 * (min + max); }
    bool contains(const Vec3& p) const {
        return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
    }
    bool contains(const Aabb& other) const {
        return contains(other.min) && contains(other.max);
    }
};

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

/// Independent deterministic RNG stream for (seed, stream_id).
inline std::mt19937_64 make_rng(uint64_t seed, uint64_t stream_id) {
    return std::mt19937_64(splitmix64(splitmix64(seed) ^ stream_id));
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline double deg_to_rad(double d) { return d * M_PI / 180.0; }

}  // namespace splatmap
