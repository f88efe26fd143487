#pragma once

#include <set>
#include <unordered_set>

#include "splatmap/camera.hpp"
#include "splatmap/frame.hpp"
#include "splatmap/gaussian_map.hpp"

namespace splatmap {

enum class VoxelState : uint8_t { Unknown = 0, Free = 1, Occupied = 2 };

/// Dense occupancy grid over the scene envelope. Voxels move monotonically:
/// unknown -> free -> occupied; nothing ever returns to unknown. Newly freed
/// voxels accumulate in a changelog until a sampling pass consumes them.
class ExplorationMap {
public:
    ExplorationMap(const Aabb& bounds, double voxel_size = 0.05);

    double voxel_size() const { return voxel_; }
    const Vec3& origin() const { return origin_; }
    const Vec3i& dims() const { return dims_; }
    size_t voxel_count() const { return grid_.size(); }

    int linear_index(int ix, int iy, int iz) const {
        return (iz * dims_.y() + iy) * dims_.x() + ix;
    }
    bool in_grid(int ix, int iy, int iz) const {
        return ix >= 0 && iy >= 0 && iz >= 0 && ix < dims_.x() && iy < dims_.y() && iz < dims_.z();
    }
    /// Linear voxel id containing a point, or -1 outside the grid.
    int voxel_at(const Vec3& p) const;
    Vec3 voxel_center(int id) const;
    VoxelState state(int id) const { return grid_[id]; }
    VoxelState state_at(const Vec3& p) const {
        int id = voxel_at(p);
        return id < 0 ? VoxelState::Occupied : grid_[id];
    }
    std::span<const VoxelState> grid() const { return grid_; }

    /// Traces subsampled depth rays: voxels ahead of each hit become free,
    /// the hit voxel becomes occupied. Invalid-depth rays mark nothing.
    /// Returns the number of voxels newly freed by this frame.
    size_t integrate_frame(const Frame& frame, const CameraModel& camera, int stride = 2);

    size_t changelog_size() const { return changelog_.size(); }
    /// Returns and clears the accumulated newly-freed voxel ids.
    std::vector<int> take_changelog();
    /// Refills the changelog with every currently free voxel (used when the
    /// sampling schedule advances to its fine stage).
    void reseed_changelog_with_free();

    /// Prior injection: marks voxels whose centers fall inside the box.
    /// Freed voxels go through the normal changelog bookkeeping.
    void seed_free_region(const Aabb& box);
    void seed_occupied_region(const Aabb& box);

    size_t free_count() const { return free_count_; }
    size_t occupied_count() const { return occupied_count_; }

    /// One "state index" line per observed voxel.
    void export_voxels(const std::string& path) const;

private:
    void mark_free(int id);
    void mark_occupied(int id);

    Vec3 origin_;
    double voxel_;
    Vec3i dims_;
    std::vector<VoxelState> grid_;
    std::vector<int> changelog_;
    size_t free_count_ = 0;
    size_t occupied_count_ = 0;
};

/// Near-uniform view directions from a golden-angle lattice, restricted to
/// elevations within `max_elevation_deg` of horizontal. Y is up.
std::vector<Vec3> fibonacci_directions(int count, double max_elevation_deg = 45.0);

struct SamplingSchedule {
    enum class Stage { Coarse, Fine };
    Stage stage = Stage::Coarse;
    double v1 = 1.0;             // lattice spacing, meters
    int v2 = 5;                  // directions per position
    std::vector<double> heights = {1.4};

    static SamplingSchedule coarse() { return {Stage::Coarse, 1.0, 5, {1.4}}; }
    static SamplingSchedule fine() { return {Stage::Fine, 0.5, 15, {0.8, 1.4}}; }
};

struct CandidatePose {
    enum class State { Active, Pruned, Visited };
    Vec3 position = Vec3::Zero();
    Vec3 direction = Vec3::UnitX();
    State state = State::Active;
    double n_missing = 0.0;   // silhouette-zero pixel count at scoring resolution
    double entropy_sum = 0.0; // summed per-pixel clipped entropy
    double i_geo = 0.0;
    double i_sem = 0.0;
    double i_total = 0.0;
    int id = -1;

    Pose camera_pose() const { return look_at(position, position + direction); }
};

/// Lattice positions inside newly freed voxels at the schedule heights, each
/// fanned out into v2 lattice directions. Consumes the changelog.
std::vector<CandidatePose> sample_candidates(ExplorationMap& emap, const SamplingSchedule& schedule);

/// Renders silhouette and semantics at the scoring camera and caches
/// n_missing (exact-zero silhouette pixels) and the clipped entropy sum.
void refresh_candidate_scores(std::span<CandidatePose> candidates, const GaussianMap& map,
                              const CameraModel& scoring_camera);

/// Combines cached scores: softmax over log missing-pixel counts, softmax
/// over entropy sums, distance-softmax penalty against the current position.
/// A single candidate gets distance factor 1. Returns false when every
/// combined score is zero (pool exhausted).
bool combine_scores(std::span<CandidatePose> candidates, const Vec3& current_position);

/// refresh + combine + sort descending by combined score (ties by id).
/// Returns false when the pool is exhausted.
bool score_candidates(std::vector<CandidatePose>& candidates, const GaussianMap& map,
                      const CameraModel& scoring_camera, const Vec3& current_position);

/// Drops candidates whose missing-pixel count is below 0.5% of the scoring
/// image, and everything already visited.
std::vector<CandidatePose> prune_pool(const std::vector<CandidatePose>& candidates,
                                      const CameraModel& scoring_camera);

/// Active candidate set with stable ids and a visited tombstone list.
class CandidatePool {
public:
    void absorb(std::vector<CandidatePose> fresh);
    std::vector<CandidatePose>& active() { return active_; }
    const std::vector<CandidatePose>& active() const { return active_; }
    void mark_visited(int id);
    size_t prune(const CameraModel& scoring_camera);
    bool ever_visited(int id) const { return visited_.count(id) > 0; }
    size_t visited_count() const { return visited_.size(); }

private:
    std::vector<CandidatePose> active_;
    std::set<int> visited_;
    int next_id_ = 0;
};

}  // namespace splatmap
