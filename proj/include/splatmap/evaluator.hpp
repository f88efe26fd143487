#pragma once

#include <string>

#include "splatmap/frame.hpp"
#include "splatmap/gaussian_map.hpp"
#include "splatmap/scene.hpp"
#include "splatmap/splat_render.hpp"

namespace splatmap {

struct PerClassMetric {
    int class_id = 0;
    double iou_pct = 0.0;
    double ap_pct = 0.0;
    double f1_pct = 0.0;
    size_t gt_pixels = 0;
};

struct MetricReport {
    // Semantic
    double miou_pct = 0.0;
    double top1_pct = 0.0;
    double top3_pct = 0.0;
    double map_pct = 0.0;
    double f1_pct = 0.0;
    // Geometric (centimeters / percent)
    double accuracy_cm = -1.0;  // -1 marks "undefined" (empty map)
    double completeness_cm = 0.0;
    double completeness_ratio_pct = 0.0;
    // Photometric
    double psnr_db = 0.0;
    double depth_l1_cm = 0.0;

    std::vector<double> per_view_miou;
    std::vector<double> per_view_psnr;
    std::vector<PerClassMetric> per_class;

    std::string to_json() const;
    void save_json(const std::string& path) const;
    /// Per-class table: class_id, iou, ap, f1, gt_pixels.
    void save_class_csv(const std::string& path) const;
};

/// SGS-style protocol: per-view IoU over the classes present in that view's
/// ground truth, averaged per view and then across views. Top-1/Top-3 from
/// the per-pixel ranking; AP and F1 pooled across views over the complete
/// class set (classes with no ground-truth positives are skipped). Ground
/// truth "unknown" pixels are excluded everywhere.
MetricReport semantic_metrics(std::span<const RenderOutput> renders,
                              std::span<const Frame> gt_frames);

/// Accuracy: mean analytic surface distance of opaque splat centers.
/// Completeness / ratio: observable-surface samples against the nearest map
/// point, 5 cm threshold for the ratio.
MetricReport geometric_metrics(const GaussianMap& map, const SceneSpec& scene, int samples,
                               uint64_t seed);

MetricReport photometric_metrics(std::span<const RenderOutput> renders,
                                 std::span<const Frame> gt_frames);

/// Merges semantic + geometric + photometric parts into one report.
MetricReport merge_reports(const MetricReport& semantic, const MetricReport& geometric,
                           const MetricReport& photometric);

/// Fraction of observable surface samples whose opacity-weighted splat vote
/// (within `radius` meters) agrees with the ground-truth class. Samples with
/// no splat nearby count as disagreement.
double surface_label_agreement(const GaussianMap& map, const SceneSpec& scene, int samples,
                               uint64_t seed, double radius = 0.05);

}  // namespace splatmap
