#pragma once

#include <cstring>
#include <span>
#include <string>
#include <vector>

#include "splatmap/gaussian_map.hpp"

namespace splatmap {

struct RenderChannels {
    bool color = true;
    bool depth = true;
    bool semantics = true;
    bool retain_contributors = false;

    static RenderChannels all(bool retain = false) { return {true, true, true, retain}; }
    static RenderChannels scoring() { return {false, false, true, false}; }
};

struct RenderOptions {
    bool early_exit = true;
    double transmittance_eps = 1e-4;
    double z_near = 0.01;
    double truncation_sigmas = 3.0;
    int tile_size = 8;
};

/// Splat footprint in image space: f(p) = alpha * exp(-|p-mean|^2 / (2 rad^2)),
/// cut off at truncation_sigmas. `index` refers back into the map.
struct SplatProjection {
    double mx = 0.0, my = 0.0;
    double rad_px = 0.0;
    double z = 0.0;
    double alpha = 0.0;
    uint32_t index = 0;
};

/// Footprints are capped just below 1 so transmittance never reaches zero.
constexpr double kMaxFootprint = 0.999999;

/// Rendered planes plus (optionally) everything the backward pass needs:
/// depth-ordered projections and per-pixel contributor lists.
struct RenderOutput {
    int width = 0;
    int height = 0;
    int channels = 0;  // semantic channels (num_classes + 1), 0 when not rendered
    double proj_fx = 0.0, proj_fy = 0.0, proj_cx = 0.0, proj_cy = 0.0;

    std::vector<double> color;       // H*W*3
    std::vector<double> depth;       // H*W
    std::vector<double> silhouette;  // H*W
    std::vector<double> sem;         // H*W*channels

    std::vector<SplatProjection> projections;   // depth-sorted, culled
    std::vector<uint32_t> contrib;              // indices into projections
    std::vector<uint32_t> contrib_offset;       // H*W+1 prefix offsets

    double silhouette_at(int x, int y) const { return silhouette[static_cast<size_t>(y) * width + x]; }
    double depth_at(int x, int y) const { return depth[static_cast<size_t>(y) * width + x]; }
    const double* color_at(int x, int y) const { return &color[(static_cast<size_t>(y) * width + x) * 3]; }
    const double* sem_at(int x, int y) const { return &sem[(static_cast<size_t>(y) * width + x) * channels]; }
    int pixel_count() const { return width * height; }
};

/// Dense per-splat class distributions, the memory layout the sparse
/// representation replaces. Used by the reference renderer and benchmarks.
struct DenseSemantics {
    int channels = 0;
    std::vector<double> probs;  // N * channels
};
DenseSemantics densify_semantics(const GaussianMap& map);

/// Tiled front-to-back compositor (the production path). When `dense` is
/// non-null the semantic pass iterates every class of every splat instead of
/// the k stored entries.
RenderOutput render(const GaussianMap& map, const CameraModel& camera, const Pose& pose,
                    const RenderChannels& channels = {}, const RenderOptions& options = {},
                    const DenseSemantics* dense = nullptr);

/// Per-pixel loop over all projected splats, no tiling, no early exit.
/// Deliberately plain; kept as the oracle the tiled path is tested against.
RenderOutput render_reference(const GaussianMap& map, const CameraModel& camera, const Pose& pose,
                              const RenderChannels& channels = {},
                              const DenseSemantics* dense = nullptr);

/// Clips to [0.001, 1], renormalizes, and returns the natural-log entropy.
double clipped_entropy(std::span<const double> probs);
/// Entropy with the 0*log(0) = 0 convention, no clipping.
double raw_entropy(std::span<const float> probs);

/// Per-pixel clipped entropy of the rendered semantic map.
std::vector<double> render_entropy(const GaussianMap& map, const CameraModel& camera,
                                   const Pose& pose, const RenderOptions& options = {});

// PNG exports for inspection: color plane, entropy (scaled by ln(channels)),
// and argmax-class palette.
void save_color_png(const RenderOutput& out, const std::string& path);
void save_entropy_png(std::span<const double> entropy, int width, int height, int channels,
                      const std::string& path);
void save_semantics_png(const RenderOutput& out, const std::string& path);

}  // namespace splatmap
