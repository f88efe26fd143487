#pragma once

#include <vector>

#include "splatmap/geometry.hpp"

namespace splatmap {

/// Posed RGB-D observation with a per-pixel class probability map.
/// Semantic planes carry num_classes + 1 channels; the last channel is the
/// reserved "unknown" label. Depth 0 marks an invalid pixel.
struct Frame {
    int width = 0;
    int height = 0;
    int num_classes = 0;  // known classes; unknown is index num_classes
    Pose pose;
    int timestamp = 0;
    std::vector<float> rgb;    // H*W*3 interleaved, values in [0,1]
    std::vector<float> depth;  // H*W meters
    std::vector<float> sem;    // H*W*(num_classes+1), each pixel a simplex

    int channels() const { return num_classes + 1; }
    int unknown_class() const { return num_classes; }
    int pixel_count() const { return width * height; }

    void allocate() {
        rgb.assign(static_cast<size_t>(pixel_count()) * 3, 0.0f);
        depth.assign(pixel_count(), 0.0f);
        sem.assign(static_cast<size_t>(pixel_count()) * channels(), 0.0f);
    }

    float* rgb_at(int x, int y) { return &rgb[(static_cast<size_t>(y) * width + x) * 3]; }
    const float* rgb_at(int x, int y) const { return &rgb[(static_cast<size_t>(y) * width + x) * 3]; }
    float& depth_at(int x, int y) { return depth[static_cast<size_t>(y) * width + x]; }
    float depth_at(int x, int y) const { return depth[static_cast<size_t>(y) * width + x]; }
    float* sem_at(int x, int y) { return &sem[(static_cast<size_t>(y) * width + x) * channels()]; }
    const float* sem_at(int x, int y) const {
        return &sem[(static_cast<size_t>(y) * width + x) * channels()];
    }

    int label_at(int x, int y) const {
        const float* p = sem_at(x, y);
        int best = 0;
        for (int m = 1; m < channels(); ++m)
            if (p[m] > p[best]) best = m;
        return best;
    }

    /// Checks the type invariants: simplex rows, non-negative depth,
    /// orthonormal rotation. Returns false on the first violation.
    bool valid(double tol = 1e-6) const {
        if (!pose.rotation_orthonormal(tol)) return false;
        for (int i = 0; i < pixel_count(); ++i) {
            if (depth[i] < 0.0f) return false;
            double s = 0.0;
            const float* p = &sem[static_cast<size_t>(i) * channels()];
            for (int m = 0; m < channels(); ++m) {
                if (p[m] < 0.0f) return false;
                s += p[m];
            }
            if (std::abs(s - 1.0) > tol) return false;
        }
        return true;
    }
};

}  // namespace splatmap
