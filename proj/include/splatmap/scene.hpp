#pragma once

#include <optional>
#include <string>
#include <vector>

#include "splatmap/geometry.hpp"

namespace splatmap {

struct ScenePrimitive {
    enum class Kind { Box, Sphere };
    Kind kind = Kind::Box;
    // Box
    Vec3 box_min = Vec3::Zero();
    Vec3 box_max = Vec3::Zero();
    // Sphere
    Vec3 center = Vec3::Zero();
    double radius = 0.0;

    int class_id = 0;
    Vec3 color = Vec3(0.5, 0.5, 0.5);

    bool contains(const Vec3& p) const;
    /// Signed distance to the solid (< 0 inside).
    double signed_distance(const Vec3& p) const;
    double surface_area() const;
    Aabb bounding_box() const;
};

struct RayHit {
    double t = 0.0;       // camera-space depth (ray parameterized with unit-Z direction)
    int class_id = 0;
    Vec3 color = Vec3::Zero();
    Vec3 normal = Vec3::Zero();
};

struct SurfaceSample {
    Vec3 point = Vec3::Zero();
    Vec3 normal = Vec3::Zero();  // outward into free space
    int class_id = 0;
};

/// Axis-aligned room with labeled solid primitives inside. The room bounds act
/// as inward-facing background surfaces (floor at min-y, ceiling at max-y,
/// four walls).
struct SceneSpec {
    Aabb bounds;
    int num_classes = 0;
    int floor_class = 0;
    int ceiling_class = 1;
    int wall_class = 2;
    Vec3 floor_color = Vec3(0.45, 0.40, 0.35);
    Vec3 ceiling_color = Vec3(0.85, 0.85, 0.88);
    Vec3 wall_color = Vec3(0.70, 0.72, 0.75);
    std::vector<ScenePrimitive> primitives;

    /// Throws std::runtime_error describing the first violated invariant.
    void validate() const;

    bool inside_any_solid(const Vec3& p) const;
    /// True when p keeps `margin` clearance from every solid and the bounds.
    bool is_free(const Vec3& p, double margin = 0.0) const;

    /// Nearest intersection along origin + t*dir (dir need not be unit).
    std::optional<RayHit> intersect(const Vec3& origin, const Vec3& dir) const;

    /// Distance from p to the closest scene surface (primitives or bounds faces).
    double surface_distance(const Vec3& p) const;

    /// Area-weighted samples of the observable surface: points whose outward
    /// offset stays inside the room and outside every solid.
    std::vector<SurfaceSample> sample_surface(int count, uint64_t seed) const;

    std::string to_json() const;
    static SceneSpec from_json(const std::string& text);
    static SceneSpec load(const std::string& path);
    void save(const std::string& path) const;
};

/// Deterministic cluttered room used by tests and benchmarks: boxes and
/// spheres with distinct classes, no mutual overlap.
SceneSpec make_random_room(uint64_t seed, int num_primitives, int num_classes,
                           const Vec3& room_size = Vec3(6.0, 3.0, 4.0));

}  // namespace splatmap
