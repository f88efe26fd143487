#pragma once

#include <optional>

#include "splatmap/optimizer.hpp"
#include "splatmap/splat_render.hpp"

namespace splatmap {

struct KeyframeRecord {
    Frame frame;
    double psnr = 0.0;             // render quality against the stored frame
    double mean_gt_entropy = 0.0;  // intrinsic, computed at insertion
    double unknown_fraction = 0.0;
    int keyframe_id = 0;
};

struct MapperConfig {
    AdamParams adam;
    LossWeights weights;
    DensifyConfig densify;
    int keyframe_count = 10;  // selection size n
    int iters_per_step = 60;
    int keyframe_stride = 5;
    int prune_every = 100;
    double prune_opacity = 0.005;
    double overlap_margin = 0.10;  // meters added to keyframe depth for visibility
    double quality_scale = 0.25;   // render scale for cached PSNR refresh
    int backproject_stride = 4;
    double divergence_factor = 10.0;
    int divergence_window = 100;
};

/// Keyframe candidates are exactly the frames with index % stride == 0.
class KeyframeDatabase {
public:
    explicit KeyframeDatabase(int stride = 5) : stride_(stride) {}

    /// Returns true when the frame was admitted.
    bool maybe_add(const Frame& frame);
    size_t size() const { return records_.size(); }
    const KeyframeRecord& record(size_t i) const { return records_[i]; }
    KeyframeRecord& record(size_t i) { return records_[i]; }

    /// Re-renders every keyframe at reduced scale and refreshes cached PSNR.
    void refresh_render_quality(const GaussianMap& map, const CameraModel& camera, double scale);

private:
    int stride_;
    int next_id_ = 0;
    std::vector<KeyframeRecord> records_;
};

/// PSNR in dB between a rendered color plane and a frame, both at the
/// renderer's resolution. Capped at 100 dB for an exact match.
double psnr_color(const RenderOutput& render, std::span<const float> rgb);

/// 50-50 local/global selection. Locals rank by 3D overlap with the current
/// frame (back-projected depth visibility inside the keyframe frustum);
/// globals by low cached PSNR, low ground-truth entropy and few unknown
/// labels, min-max normalized over the database. Returns ceil(n/2) locals
/// then floor(n/2) globals, deduplicated; everything when the db is smaller
/// than n.
std::vector<const KeyframeRecord*> select_keyframes(const KeyframeDatabase& db,
                                                    const Frame& current, const GaussianMap& map,
                                                    const CameraModel& camera, int n,
                                                    const MapperConfig& cfg = {});

/// Round-robin keyframe optimization: render, evaluate both losses, step.
/// Splats with activated opacity below the pruning threshold are dropped on
/// the pruning cadence. Throws on sustained divergence.
std::vector<LossReport> optimize_map(GaussianMap& map, AdamState& adam,
                                     std::span<const Frame* const> frames,
                                     const CameraModel& camera, const MapperConfig& cfg,
                                     int iters);

}  // namespace splatmap
