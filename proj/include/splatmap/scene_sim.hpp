#pragma once

#include "splatmap/camera.hpp"
#include "splatmap/frame.hpp"
#include "splatmap/scene.hpp"

namespace splatmap {

/// Parametric error model standing in for a real segmentation network.
/// flip_rate: probability a pixel's argmax label is swapped for a random
/// wrong one. boundary_blur_px: pixels this close to a label edge get the
/// average of the two meeting labels' distributions. concentration: Dirichlet
/// sharpness around the true label; +infinity means exact one-hot passthrough.
struct SemanticNoiseModel {
    double flip_rate = 0.0;
    int boundary_blur_px = 0;
    double concentration = std::numeric_limits<double>::infinity();

    void validate() const {
        if (flip_rate < 0.0 || flip_rate > 1.0)
            throw std::invalid_argument("noise: flip_rate must be in [0,1]");
        if (boundary_blur_px < 0) throw std::invalid_argument("noise: blur must be >= 0");
        if (!(concentration > 0.0)) throw std::invalid_argument("noise: concentration must be > 0");
    }
};

/// Renders a ground-truth RGB-D-semantic frame by per-pixel nearest-hit
/// raycasting. Pixels with no hit get depth 0 and a one-hot "unknown" label.
/// Throws std::runtime_error("camera in collision") when the pose origin is
/// inside a solid or outside the scene bounds.
Frame raycast_frame(const SceneSpec& scene, const CameraModel& camera, const Pose& pose);

/// Applies the noise model; deterministic for a fixed seed. Pixels labeled
/// "unknown" pass through untouched.
Frame apply_semantic_noise(const Frame& frame, const SemanticNoiseModel& noise, uint64_t seed);

}  // namespace splatmap
