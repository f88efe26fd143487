#pragma once

#include "splatmap/frame.hpp"
#include "splatmap/gaussian_map.hpp"
#include "splatmap/splat_render.hpp"

namespace splatmap {

struct LossWeights {
    double lambda_hd = 0.8;
    double lambda_cos = 0.2;
    int mask_k = 16;  // supervision mask threshold: gt entropy < ln(mask_k)
    bool use_hd = true;
    bool use_cos = true;
    bool use_kl = false;  // replaces the Hellinger term; needs gradient clipping
    double kl_clip_norm = 1.0;
};

struct LossReport {
    double photometric = 0.0;  // mean masked per-pixel L1 color (3 channels summed)
    double depth = 0.0;        // mean masked per-pixel L1 depth, meters
    double semantic = 0.0;     // mean masked per-pixel semantic loss
    size_t photometric_px = 0;
    size_t depth_px = 0;
    size_t semantic_px = 0;
    size_t uncovered_px = 0;  // pixels skipped for having no splat coverage

    /// Optimization objective for the geometry/color path.
    double mapping_total() const { return depth + 0.5 * photometric; }
    double total() const { return mapping_total() + semantic; }
};

/// Hellinger distance sqrt(1 - sum_m sqrt(p_m q_m)), bounded to [0, 1].
double hellinger_distance(std::span<const double> p, std::span<const double> q);
double cosine_similarity(std::span<const double> p, std::span<const double> q);

/// Silhouette-masked (S > 0.99) L1 color + depth objective. Pixels without
/// valid ground-truth depth are excluded from the depth term. Terms are
/// means over their masked pixel counts.
LossReport mapping_loss(const RenderOutput& render, const Frame& frame);

/// Entropy-masked Hellinger + cosine objective between the frame's class
/// probabilities (pseudo ground truth) and the rendered semantic map.
/// Uncovered pixels (no contributing splat) are skipped and counted.
LossReport semantic_loss(const RenderOutput& render, const Frame& frame,
                         const LossWeights& weights);

/// Per-splat parameter gradients, laid out parallel to GaussianMap storage.
struct ParamGradients {
    std::vector<double> center;         // 3N
    std::vector<double> log_radius;     // N
    std::vector<double> opacity_logit;  // N
    std::vector<double> color;          // 3N
    std::vector<double> sem;            // kN

    void resize_for(const GaussianMap& map) {
        center.assign(map.size() * 3, 0.0);
        log_radius.assign(map.size(), 0.0);
        opacity_logit.assign(map.size(), 0.0);
        color.assign(map.size() * 3, 0.0);
        sem.assign(map.size() * map.k(), 0.0);
    }
};

/// Analytic gradients of the composited objectives. The mapping loss flows to
/// center/radius/opacity/color; the semantic loss flows only to the sparse
/// semantic probs — its pathway into geometry is deliberately cut.
/// Requires a render with retained contributors. Throws when a gradient goes
/// non-finite, naming the splat and parameter.
ParamGradients backward(const RenderOutput& render, const Frame& frame, const GaussianMap& map,
                        const LossWeights& weights, bool include_mapping = true,
                        bool include_semantic = true);

}  // namespace splatmap
