#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "splatmap/camera.hpp"
#include "splatmap/frame.hpp"

namespace splatmap {

struct RenderOutput;  // splat_render.hpp

/// Per-splat class distribution restricted to k classes. Indices are frozen
/// at creation; probs stay a simplex over those indices.
struct SparseSemanticVector {
    std::vector<uint16_t> indices;
    std::vector<double> probs;

    int k() const { return static_cast<int>(indices.size()); }
    double sum() const;
    int argmax_class() const;
};

/// Isotropic splat. Radius and opacity are stored unconstrained; activations
/// (exp, sigmoid) are applied at render time, color is clamped there.
struct SemanticGaussian {
    Vec3 center = Vec3::Zero();
    double log_radius = 0.0;
    double opacity_logit = 0.0;
    Vec3 color = Vec3::Zero();
    SparseSemanticVector sem;
    uint32_t source_frame = 0;

    double radius() const { return std::exp(log_radius); }
    double opacity() const { return sigmoid(opacity_logit); }
};

/// Top-k of a dense distribution, renormalized. Ties break toward the lower
/// class index; k never exceeds the channel count.
SparseSemanticVector sparse_from_dense(std::span<const float> dense, int k);

/// Applies an additive step to the probs, clamps at zero and renormalizes.
/// A step that zeroes everything resets to uniform over the k indices.
SemanticGaussian update_sparse_semantics(const SemanticGaussian& g,
                                         std::span<const double> grad_step);
void apply_semantic_step(std::span<double> probs, std::span<const double> step);

struct DensifyConfig {
    int stride = 2;
    double silhouette_threshold = 0.5;
    double depth_error_factor = 5.0;
    // Near-opaque seeds: the silhouette-masked mapping loss only trains
    // pixels with S > 0.99, so fresh splats must already explain theirs.
    double opacity_init_logit = 5.0;
};

/// Structure-of-arrays splat storage. Semantic memory is exactly k
/// (index, prob) entries per splat.
class GaussianMap {
public:
    GaussianMap(int k, int num_classes) : k_(k), num_classes_(num_classes) {
        if (k < 1 || k > num_classes + 1)
            throw std::invalid_argument("map: k must be in [1, num_classes+1]");
    }

    int k() const { return k_; }
    int num_classes() const { return num_classes_; }
    int channels() const { return num_classes_ + 1; }
    size_t size() const { return log_radii_.size(); }
    bool empty() const { return log_radii_.empty(); }

    void add(const SemanticGaussian& g);
    SemanticGaussian get(size_t i) const;

    Vec3 center(size_t i) const { return Vec3(centers_[3 * i], centers_[3 * i + 1], centers_[3 * i + 2]); }

    std::span<double> centers() { return centers_; }
    std::span<double> log_radii() { return log_radii_; }
    std::span<double> opacity_logits() { return opacity_logits_; }
    std::span<double> colors() { return colors_; }
    std::span<double> sem_probs() { return sem_probs_; }
    std::span<const double> centers() const { return centers_; }
    std::span<const double> log_radii() const { return log_radii_; }
    std::span<const double> opacity_logits() const { return opacity_logits_; }
    std::span<const double> colors() const { return colors_; }
    std::span<const uint16_t> sem_indices() const { return sem_indices_; }
    std::span<const double> sem_probs() const { return sem_probs_; }
    std::span<const uint32_t> source_frames() const { return source_frames_; }

    /// Accounting check: semantic storage entries held by this map.
    size_t semantic_entry_count() const { return sem_indices_.size(); }

    /// Removes splats whose activated opacity falls below `threshold`.
    /// Fills `kept` (old index per surviving splat) so optimizer state can be
    /// compacted alongside; returns the number removed.
    size_t prune_by_opacity(double threshold, std::vector<uint32_t>* kept = nullptr);

    void save(const std::string& path) const;
    static GaussianMap load(const std::string& path);
    void export_ply(const std::string& path) const;

private:
    int k_;
    int num_classes_;
    std::vector<double> centers_;         // 3N
    std::vector<double> log_radii_;       // N
    std::vector<double> opacity_logits_;  // N
    std::vector<double> colors_;          // 3N
    std::vector<uint16_t> sem_indices_;   // kN
    std::vector<double> sem_probs_;       // kN
    std::vector<uint32_t> source_frames_; // N
};

/// Spawns splats for under-explained pixels: rendered silhouette below the
/// threshold, or depth error above factor * median frame depth error. Pixels
/// are subsampled by `stride`; invalid-depth pixels are skipped. Returns the
/// number of splats added.
size_t densify(GaussianMap& map, const Frame& frame, const RenderOutput& render,
               const CameraModel& camera, const DensifyConfig& cfg = {});

}  // namespace splatmap
