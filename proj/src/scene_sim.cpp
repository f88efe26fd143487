#include "splatmap/scene_sim.hpp"

#include <stdexcept>

namespace splatmap {

Frame raycast_frame(const SceneSpec& scene, const CameraModel& camera, const Pose& pose) {
    if (!scene.bounds.contains(pose.t) || scene.inside_any_solid(pose.t))
        throw std::runtime_error("camera in collision");

    Frame f;
    f.width = camera.width;
    f.height = camera.height;
    f.num_classes = scene.num_classes;
    f.pose = pose;
    f.allocate();

    const int unknown = f.unknown_class();
    for (int y = 0; y < camera.height; ++y) {
        for (int x = 0; x < camera.width; ++x) {
            Vec3 dir_world = pose.R * camera.pixel_ray(x, y);
            auto hit = scene.intersect(pose.t, dir_world);
            float* sem = f.sem_at(x, y);
            if (hit) {
                f.depth_at(x, y) = static_cast<float>(hit->t);
                float* rgb = f.rgb_at(x, y);
                for (int c = 0; c < 3; ++c)
                    rgb[c] = static_cast<float>(std::clamp(hit->color[c], 0.0, 1.0));
                sem[hit->class_id] = 1.0f;
            } else {
                f.depth_at(x, y) = 0.0f;
                sem[unknown] = 1.0f;
            }
        }
    }
    return f;
}

namespace {

// Dirichlet(concentration * onehot(label) + prior) sample over `channels`
// entries, written into out.
void sample_label_distribution(int label, int channels, double concentration,
                               std::mt19937_64& rng, float* out) {
    const double prior = 1.0 / channels;
    std::vector<double> draw(channels);
    double total = 0.0;
    for (int m = 0; m < channels; ++m) {
        double alpha = concentration * (m == label ? 1.0 : 0.0) + prior;
        std::gamma_distribution<double> gamma(alpha, 1.0);
        draw[m] = gamma(rng);
        total += draw[m];
    }
    if (total <= 0.0) {
        for (int m = 0; m < channels; ++m) out[m] = static_cast<float>(prior);
        out[label] = static_cast<float>(1.0 - prior * (channels - 1));
        return;
    }
    for (int m = 0; m < channels; ++m) out[m] = static_cast<float>(draw[m] / total);
}

void renormalize(float* p, int channels) {
    double s = 0.0;
    for (int m = 0; m < channels; ++m) s += p[m];
    if (s <= 0.0) return;
    for (int m = 0; m < channels; ++m) p[m] = static_cast<float>(p[m] / s);
}

}  // namespace

Frame apply_semantic_noise(const Frame& frame, const SemanticNoiseModel& noise, uint64_t seed) {
    noise.validate();
    Frame out = frame;
    const int W = frame.width, H = frame.height, C = frame.channels();
    const int unknown = frame.unknown_class();
    const bool sharp = !std::isfinite(noise.concentration);

    std::vector<int> gt_label(static_cast<size_t>(W) * H);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) gt_label[static_cast<size_t>(y) * W + x] = frame.label_at(x, y);

    auto rng = make_rng(seed, 0x5e3a11c);
    std::uniform_real_distribution<double> uni(0.0, 1.0);

    // Per-pixel smoothed distribution plus argmax flips.
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            int g = gt_label[static_cast<size_t>(y) * W + x];
            float* p = out.sem_at(x, y);
            if (g == unknown) continue;
            if (!sharp) sample_label_distribution(g, C, noise.concentration, rng, p);
            if (noise.flip_rate > 0.0 && uni(rng) < noise.flip_rate) {
                // Swap the true label's mass with a random wrong label (the
                // "confident wrong prediction" failure mode).
                int wrong = static_cast<int>(uni(rng) * (C - 1));
                if (wrong >= g) ++wrong;
                std::swap(p[g], p[wrong]);
            }
        }
    }

    // Boundary mixing: pixels near a ground-truth label edge average their
    // distribution with the nearest differing-label pixel's distribution.
    if (noise.boundary_blur_px > 0) {
        const int b = noise.boundary_blur_px;
        std::vector<float> mixed(out.sem.size());
        std::copy(out.sem.begin(), out.sem.end(), mixed.begin());
        for (int y = 0; y < H; ++y) {
            for (int x = 0; x < W; ++x) {
                int g = gt_label[static_cast<size_t>(y) * W + x];
                if (g == unknown) continue;
                int best_d2 = std::numeric_limits<int>::max();
                int nx = -1, ny = -1;
                for (int dy = -b; dy <= b; ++dy) {
                    for (int dx = -b; dx <= b; ++dx) {
                        int xx = x + dx, yy = y + dy;
                        if (xx < 0 || yy < 0 || xx >= W || yy >= H) continue;
                        int og = gt_label[static_cast<size_t>(yy) * W + xx];
                        if (og == g || og == unknown) continue;
                        int d2 = dx * dx + dy * dy;
                        if (d2 < best_d2) {
                            best_d2 = d2;
                            nx = xx;
                            ny = yy;
                        }
                    }
                }
                if (nx >= 0) {
                    const float* a = out.sem_at(x, y);
                    const float* o = out.sem_at(nx, ny);
                    float* m = &mixed[(static_cast<size_t>(y) * W + x) * C];
                    for (int c = 0; c < C; ++c) m[c] = 0.5f * (a[c] + o[c]);
                }
            }
        }
        out.sem.swap(mixed);
    }

    for (int i = 0; i < out.pixel_count(); ++i) renormalize(&out.sem[static_cast<size_t>(i) * C], C);
    return out;
}

}  // namespace splatmap
