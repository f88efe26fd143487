#include "splatmap/explorer.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

#include "splatmap/splat_render.hpp"

namespace splatmap {

ExplorationMap::ExplorationMap(const Aabb& bounds, double voxel_size)
    : origin_(bounds.min), voxel_(voxel_size) {
    if (voxel_size <= 0) throw std::invalid_argument("emap: voxel size must be > 0");
    Vec3 e = bounds.extent();
    dims_ = Vec3i(static_cast<int>(std::ceil(e.x() / voxel_)),
                  static_cast<int>(std::ceil(e.y() / voxel_)),
                  static_cast<int>(std::ceil(e.z() / voxel_)));
    dims_ = dims_.cwiseMax(Vec3i(1, 1, 1));
    grid_.assign(static_cast<size_t>(dims_.x()) * dims_.y() * dims_.z(), VoxelState::Unknown);
}

int ExplorationMap::voxel_at(const Vec3& p) const {
    Vec3 rel = (p - origin_) / voxel_;
    int ix = static_cast<int>(std::floor(rel.x()));
    int iy = static_cast<int>(std::floor(rel.y()));
    int iz = static_cast<int>(std::floor(rel.z()));
    if (!in_grid(ix, iy, iz)) return -1;
    return linear_index(ix, iy, iz);
}

Vec3 ExplorationMap::voxel_center(int id) const {
    int ix = id % dims_.x();
    int iy = (id / dims_.x()) % dims_.y();
    int iz = id / (dims_.x() * dims_.y());
    return origin_ + voxel_ * Vec3(ix + 0.5, iy + 0.5, iz + 0.5);
}

void ExplorationMap::mark_free(int id) {
    if (grid_[id] != VoxelState::Unknown) return;  // free stays, occupied wins
    grid_[id] = VoxelState::Free;
    ++free_count_;
    changelog_.push_back(id);
}

void ExplorationMap::mark_occupied(int id) {
    VoxelState& s = grid_[id];
    if (s == VoxelState::Occupied) return;
    if (s == VoxelState::Free) --free_count_;
    s = VoxelState::Occupied;
    ++occupied_count_;
}

size_t ExplorationMap::integrate_frame(const Frame& frame, const CameraModel& camera, int stride) {
    const size_t changelog_before = changelog_.size();
    for (int y = 0; y < frame.height; y += stride) {
        for (int x = 0; x < frame.width; x += stride) {
            float d = frame.depth_at(x, y);
            if (d <= 0) continue;
            Vec3 start = frame.pose.t;
            Vec3 end = frame.pose.to_world(camera.pixel_ray(x, y) * static_cast<double>(d));

            // Amanatides-Woo voxel walk from start to end.
            Vec3 rel = (start - origin_) / voxel_;
            int ix = static_cast<int>(std::floor(rel.x()));
            int iy = static_cast<int>(std::floor(rel.y()));
            int iz = static_cast<int>(std::floor(rel.z()));
            Vec3 dir = end - start;
            double len = dir.norm();
            if (len < 1e-12) continue;
            dir /= len;
            // Surfaces on the outer shell land exactly on the boundary plane;
            // classify the hit by a point just inside it.
            const int hit = voxel_at(end - dir * 1e-6);

            int step[3];
            double t_max[3], t_delta[3];
            int idx[3] = {ix, iy, iz};
            for (int a = 0; a < 3; ++a) {
                if (std::abs(dir[a]) < 1e-12) {
                    step[a] = 0;
                    t_max[a] = 1e300;
                    t_delta[a] = 1e300;
                } else {
                    step[a] = dir[a] > 0 ? 1 : -1;
                    double boundary =
                        origin_[a] + (idx[a] + (dir[a] > 0 ? 1.0 : 0.0)) * voxel_;
                    t_max[a] = (boundary - start[a]) / dir[a];
                    t_delta[a] = voxel_ / std::abs(dir[a]);
                }
            }

            double t = 0.0;
            int guard = dims_.x() + dims_.y() + dims_.z() + 4;
            while (guard-- > 0 && t <= len) {
                if (!in_grid(idx[0], idx[1], idx[2])) break;
                int id = linear_index(idx[0], idx[1], idx[2]);
                if (id == hit) break;
                mark_free(id);
                int axis = 0;
                if (t_max[1] < t_max[axis]) axis = 1;
                if (t_max[2] < t_max[axis]) axis = 2;
                t = t_max[axis];
                t_max[axis] += t_delta[axis];
                idx[axis] += step[axis];
            }
            if (hit >= 0) mark_occupied(hit);
        }
    }
    return changelog_.size() - changelog_before;
}

std::vector<int> ExplorationMap::take_changelog() {
    std::vector<int> out;
    out.swap(changelog_);
    return out;
}

void ExplorationMap::reseed_changelog_with_free() {
    changelog_.clear();
    for (size_t i = 0; i < grid_.size(); ++i)
        if (grid_[i] == VoxelState::Free) changelog_.push_back(static_cast<int>(i));
}

void ExplorationMap::seed_free_region(const Aabb& box) {
    for (size_t i = 0; i < grid_.size(); ++i)
        if (box.contains(voxel_center(static_cast<int>(i)))) mark_free(static_cast<int>(i));
}

void ExplorationMap::seed_occupied_region(const Aabb& box) {
    for (size_t i = 0; i < grid_.size(); ++i)
        if (box.contains(voxel_center(static_cast<int>(i)))) mark_occupied(static_cast<int>(i));
}

void ExplorationMap::export_voxels(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("emap: cannot write " + path);
    for (size_t i = 0; i < grid_.size(); ++i)
        if (grid_[i] != VoxelState::Unknown)
            out << (grid_[i] == VoxelState::Free ? "free " : "occupied ") << i << "\n";
}

std::vector<Vec3> fibonacci_directions(int count, double max_elevation_deg) {
    std::vector<Vec3> dirs;
    dirs.reserve(count);
    const double golden_angle = M_PI * (3.0 - std::sqrt(5.0));
    const double s_max = std::sin(deg_to_rad(max_elevation_deg));
    for (int j = 0; j < count; ++j) {
        // Uniform in sin(elevation) over the band, golden-angle azimuth.
        double s = count == 1 ? 0.0 : s_max * (1.0 - (2.0 * j + 1.0) / count);
        double r = std::sqrt(std::max(0.0, 1.0 - s * s));
        double az = golden_angle * j;
        dirs.emplace_back(r * std::cos(az), s, r * std::sin(az));
    }
    return dirs;
}

std::vector<CandidatePose> sample_candidates(ExplorationMap& emap,
                                             const SamplingSchedule& schedule) {
    std::vector<int> fresh = emap.take_changelog();
    std::unordered_set<int> fresh_set(fresh.begin(), fresh.end());
    std::vector<CandidatePose> out;
    if (fresh_set.empty()) return out;

    const Vec3& o = emap.origin();
    const Vec3 top = o + Vec3(emap.dims().x(), emap.dims().y(), emap.dims().z()) * emap.voxel_size();
    std::vector<Vec3> dirs = fibonacci_directions(schedule.v2);
    for (double h : schedule.heights) {
        for (double x = o.x(); x <= top.x() + 1e-9; x += schedule.v1) {
            for (double z = o.z(); z <= top.z() + 1e-9; z += schedule.v1) {
                Vec3 pos(x, h, z);
                int id = emap.voxel_at(pos);
                if (id < 0 || emap.state(id) != VoxelState::Free) continue;
                if (!fresh_set.count(id)) continue;
                for (const Vec3& d : dirs) {
                    CandidatePose c;
                    c.position = pos;
                    c.direction = d;
                    out.push_back(c);
                }
            }
        }
    }
    return out;
}

void refresh_candidate_scores(std::span<CandidatePose> candidates, const GaussianMap& map,
                              const CameraModel& scoring_camera) {
    for (auto& c : candidates) {
        if (c.state != CandidatePose::State::Active) continue;
        RenderChannels ch;
        ch.color = false;
        ch.depth = false;
        ch.semantics = true;
        RenderOutput out = render(map, scoring_camera, c.camera_pose(), ch);
        size_t missing = 0;
        double entropy = 0.0;
        for (int i = 0; i < out.pixel_count(); ++i) {
            if (out.silhouette[i] == 0.0) ++missing;
            entropy += clipped_entropy(std::span<const double>(
                &out.sem[static_cast<size_t>(i) * out.channels], out.channels));
        }
        c.n_missing = static_cast<double>(missing);
        c.entropy_sum = entropy;
    }
}

namespace {
// Softmax with -inf support; all -inf (or empty) yields all zeros.
std::vector<double> stable_softmax(const std::vector<double>& v) {
    std::vector<double> out(v.size(), 0.0);
    double mx = -std::numeric_limits<double>::infinity();
    for (double x : v)
        if (std::isfinite(x)) mx = std::max(mx, x);
    if (!std::isfinite(mx)) return out;
    double sum = 0.0;
    for (size_t i = 0; i < v.size(); ++i) {
        out[i] = std::isfinite(v[i]) ? std::exp(v[i] - mx) : 0.0;
        sum += out[i];
    }
    for (auto& x : out) x /= sum;
    return out;
}
}  // namespace

bool combine_scores(std::span<CandidatePose> candidates, const Vec3& current_position) {
    const size_t n = candidates.size();
    if (n == 0) return false;
    std::vector<double> log_missing(n), entropy(n), dist(n);
    for (size_t i = 0; i < n; ++i) {
        log_missing[i] = candidates[i].n_missing > 0.0
                             ? std::log(candidates[i].n_missing)
                             : -std::numeric_limits<double>::infinity();
        entropy[i] = candidates[i].entropy_sum;
        dist[i] = (candidates[i].position - current_position).norm();
    }
    std::vector<double> geo = stable_softmax(log_missing);
    std::vector<double> sem = stable_softmax(entropy);
    std::vector<double> dist_soft = stable_softmax(dist);
    bool any = false;
    for (size_t i = 0; i < n; ++i) {
        double dist_factor = n == 1 ? 1.0 : 1.0 - dist_soft[i];
        candidates[i].i_geo = geo[i];
        candidates[i].i_sem = sem[i];
        candidates[i].i_total = dist_factor * geo[i] * sem[i];
        if (candidates[i].i_total > 0.0) any = true;
    }
    return any;
}

bool score_candidates(std::vector<CandidatePose>& candidates, const GaussianMap& map,
                      const CameraModel& scoring_camera, const Vec3& current_position) {
    refresh_candidate_scores(candidates, map, scoring_camera);
    bool any = combine_scores(candidates, current_position);
    std::sort(candidates.begin(), candidates.end(), [](const CandidatePose& a, const CandidatePose& b) {
        if (a.i_total != b.i_total) return a.i_total > b.i_total;
        return a.id < b.id;
    });
    return any;
}

std::vector<CandidatePose> prune_pool(const std::vector<CandidatePose>& candidates,
                                      const CameraModel& scoring_camera) {
    const double threshold = 0.005 * scoring_camera.width * scoring_camera.height;
    std::vector<CandidatePose> out;
    out.reserve(candidates.size());
    for (const auto& c : candidates) {
        if (c.state == CandidatePose::State::Visited) continue;
        if (c.n_missing < threshold) continue;
        out.push_back(c);
    }
    return out;
}

void CandidatePool::absorb(std::vector<CandidatePose> fresh) {
    for (auto& c : fresh) {
        c.id = next_id_++;
        c.state = CandidatePose::State::Active;
        active_.push_back(c);
    }
}

void CandidatePool::mark_visited(int id) {
    visited_.insert(id);
    for (auto& c : active_)
        if (c.id == id) c.state = CandidatePose::State::Visited;
}

size_t CandidatePool::prune(const CameraModel& scoring_camera) {
    size_t before = active_.size();
    active_ = prune_pool(active_, scoring_camera);
    return before - active_.size();
}

}  // namespace splatmap
