#pragma once

#include <optional>
#include <string>

#include "splatmap/explorer.hpp"

namespace splatmap {

/// Free-space view of an ExplorationMap after obstacle inflation: a voxel is
/// traversable iff it is free and no occupied or unknown voxel center lies
/// within the buffer radius.
struct InflatedGrid {
    Vec3 origin = Vec3::Zero();
    double voxel = 0.05;
    Vec3i dims = Vec3i::Zero();
    std::vector<uint8_t> traversable;

    int linear_index(int ix, int iy, int iz) const {
        return (iz * dims.y() + iy) * dims.x() + ix;
    }
    bool in_grid(int ix, int iy, int iz) const {
        return ix >= 0 && iy >= 0 && iz >= 0 && ix < dims.x() && iy < dims.y() && iz < dims.z();
    }
    bool traversable_at(const Vec3& p) const {
        Vec3 rel = (p - origin) / voxel;
        int ix = static_cast<int>(std::floor(rel.x()));
        int iy = static_cast<int>(std::floor(rel.y()));
        int iz = static_cast<int>(std::floor(rel.z()));
        if (!in_grid(ix, iy, iz)) return false;
        return traversable[linear_index(ix, iy, iz)] != 0;
    }
    /// Every point sampled at half-voxel spacing along [a, b] is traversable.
    bool segment_valid(const Vec3& a, const Vec3& b) const;
};

/// Exact Euclidean inflation via a separable squared distance transform.
InflatedGrid inflate(const ExplorationMap& emap, double buffer_m);

struct PlanRequest {
    Vec3 start = Vec3::Zero();
    Vec3 goal = Vec3::Zero();
    double collision_buffer = 0.20;
    int max_iterations = 5000;
    double step_length = 0.20;  // 4 voxels at the default resolution
    double goal_bias = 0.1;
};

struct Path {
    std::vector<Vec3> waypoints;
    double total_length() const {
        double len = 0;
        for (size_t i = 1; i < waypoints.size(); ++i)
            len += (waypoints[i] - waypoints[i - 1]).norm();
        return len;
    }
};

struct PlanResult {
    std::optional<Path> path;
    std::string failure;  // empty on success

    bool ok() const { return path.has_value(); }
};

/// Goal-biased RRT over the inflated grid; every extension also attempts a
/// straight connection to the goal, and the returned path is greedily
/// shortcut. Deterministic for a fixed seed.
PlanResult plan(const InflatedGrid& grid, const PlanRequest& req, uint64_t seed);

}  // namespace splatmap
