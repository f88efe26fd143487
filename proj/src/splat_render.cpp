#include "splatmap/splat_render.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "png_io.hpp"

namespace splatmap {

namespace {

// Projects, culls, and depth-sorts the map. Ties are broken by projected
// position so the result is independent of storage order.
std::vector<SplatProjection> project_splats(const GaussianMap& map, const CameraModel& camera,
                                            const Pose& pose, const RenderOptions& opt) {
    std::vector<SplatProjection> out;
    out.reserve(map.size());
    const Mat3 R_cw = pose.R.transpose();
    auto centers = map.centers();
    auto logr = map.log_radii();
    auto logits = map.opacity_logits();
    for (size_t i = 0; i < map.size(); ++i) {
        Vec3 mu(centers[3 * i], centers[3 * i + 1], centers[3 * i + 2]);
        Vec3 pc = R_cw * (mu - pose.t);
        if (pc.z() <= opt.z_near) continue;
        SplatProjection p;
        p.z = pc.z();
        p.mx = camera.fx * pc.x() / pc.z() + camera.cx;
        p.my = camera.fy * pc.y() / pc.z() + camera.cy;
        p.rad_px = std::exp(logr[i]) * camera.fy / pc.z();
        p.alpha = sigmoid(logits[i]);
        p.index = static_cast<uint32_t>(i);
        double reach = opt.truncation_sigmas * p.rad_px;
        if (p.mx + reach < 0 || p.mx - reach > camera.width || p.my + reach < 0 ||
            p.my - reach > camera.height)
            continue;
        out.push_back(p);
    }
    std::sort(out.begin(), out.end(), [](const SplatProjection& a, const SplatProjection& b) {
        if (a.z != b.z) return a.z < b.z;
        if (a.mx != b.mx) return a.mx < b.mx;
        if (a.my != b.my) return a.my < b.my;
        return a.alpha < b.alpha;
    });
    return out;
}

void alloc_output(RenderOutput& out, const CameraModel& camera, const RenderChannels& ch,
                  int sem_channels) {
    out.width = camera.width;
    out.height = camera.height;
    out.proj_fx = camera.fx;
    out.proj_fy = camera.fy;
    out.proj_cx = camera.cx;
    out.proj_cy = camera.cy;
    out.silhouette.assign(out.pixel_count(), 0.0);
    if (ch.color) out.color.assign(static_cast<size_t>(out.pixel_count()) * 3, 0.0);
    if (ch.depth) out.depth.assign(out.pixel_count(), 0.0);
    if (ch.semantics) {
        out.channels = sem_channels;
        out.sem.assign(static_cast<size_t>(out.pixel_count()) * sem_channels, 0.0);
    }
}

// Composites one pixel over the given depth-ordered projection ids. Appends
// the ids of splats that actually contributed when `contributors` is set.
void composite_pixel(RenderOutput& out, const GaussianMap& map, const RenderChannels& ch,
                     const RenderOptions& opt, const DenseSemantics* dense,
                     std::span<const uint32_t> ids, int x, int y,
                     std::vector<uint32_t>* contributors) {
    const double px = x + 0.5, py = y + 0.5;
    const double cutoff_sq = opt.truncation_sigmas * opt.truncation_sigmas;
    const size_t pix = static_cast<size_t>(y) * out.width + x;
    const int k = map.k();
    auto colors = map.colors();
    auto sem_idx = map.sem_indices();
    auto sem_probs = map.sem_probs();
    double* sem_out = ch.semantics ? &out.sem[pix * out.channels] : nullptr;

    double acc_color[3] = {0, 0, 0};
    double acc_depth = 0.0;
    double transmittance = 1.0;

    for (uint32_t id : ids) {
        const SplatProjection& p = out.projections[id];
        double dx = px - p.mx;
        double dy = py - p.my;
        double d2 = dx * dx + dy * dy;
        if (d2 > cutoff_sq * p.rad_px * p.rad_px) continue;
        double f = std::min(p.alpha * std::exp(-d2 / (2.0 * p.rad_px * p.rad_px)), kMaxFootprint);
        if (f <= 0.0) continue;
        const double w = f * transmittance;
        if (ch.color) {
            const double* c = &colors[
                static_cast<size_t>(p.index) * 3];
            acc_color[0] += std::clamp(c[0], 0.0, 1.0) * w;
            acc_color[1] += std::clamp(c[1], 0.0, 1.0) * w;
            acc_color[2] += std::clamp(c[2], 0.0, 1.0) * w;
        }
        if (ch.depth) acc_depth += p.z * w;
        if (ch.semantics) {
            if (dense) {
                const double* probs = &dense->probs[static_cast<size_t>(p.index) * dense->channels];
                for (int m = 0; m < dense->channels; ++m) sem_out[m] += probs[m] * w;
            } else {
                const uint16_t* idx = &sem_idx[static_cast<size_t>(p.index) * k];
                const double* probs = &sem_probs[static_cast<size_t>(p.index) * k];
                for (int j = 0; j < k; ++j) sem_out[idx[j]] += probs[j] * w;
            }
        }
        if (contributors) contributors->push_back(id);
        transmittance *= (1.0 - f);
        if (opt.early_exit && transmittance < opt.transmittance_eps) break;
    }
    out.silhouette[pix] = 1.0 - transmittance;
    if (ch.color) {
        out.color[pix * 3] = acc_color[0];
        out.color[pix * 3 + 1] = acc_color[1];
        out.color[pix * 3 + 2] = acc_color[2];
    }
    if (ch.depth) out.depth[pix] = acc_depth;
}

void flatten_contributors(RenderOutput& out, const std::vector<std::vector<uint32_t>>& per_pixel) {
    out.contrib_offset.assign(out.pixel_count() + 1, 0);
    size_t total = 0;
    for (int i = 0; i < out.pixel_count(); ++i) {
        out.contrib_offset[i] = static_cast<uint32_t>(total);
        total += per_pixel[i].size();
    }
    out.contrib_offset[out.pixel_count()] = static_cast<uint32_t>(total);
    out.contrib.resize(total);
    size_t at = 0;
    for (int i = 0; i < out.pixel_count(); ++i)
        for (uint32_t v : per_pixel[i]) out.contrib[at++] = v;
}

}  // namespace

DenseSemantics densify_semantics(const GaussianMap& map) {
    DenseSemantics d;
    d.channels = map.channels();
    d.probs.assign(map.size() * d.channels, 0.0);
    auto idx = map.sem_indices();
    auto probs = map.sem_probs();
    const int k = map.k();
    for (size_t i = 0; i < map.size(); ++i)
        for (int j = 0; j < k; ++j)
            d.probs[i * d.channels + idx[i * k + j]] += probs[i * k + j];
    return d;
}

namespace {

// Per-tile copy of the projection data, laid out for the pixel scan: one
// contiguous read per probe, footprint constants precomputed.
struct PackedSplat {
    double mx, my;
    double inv_two_r2;
    double cutoff_d2;
    double alpha;
    double z;
    uint32_t proj_id;
    uint32_t map_index;
};

}  // namespace

RenderOutput render(const GaussianMap& map, const CameraModel& camera, const Pose& pose,
                    const RenderChannels& channels, const RenderOptions& opt,
                    const DenseSemantics* dense) {
    RenderOutput out;
    alloc_output(out, camera, channels, dense ? dense->channels : map.channels());
    out.projections = project_splats(map, camera, pose, opt);

    const int ts = opt.tile_size;
    const int tiles_x = (camera.width + ts - 1) / ts;
    const int tiles_y = (camera.height + ts - 1) / ts;
    const double cut_sq = opt.truncation_sigmas * opt.truncation_sigmas;
    std::vector<PackedSplat> packed(out.projections.size());
    // Compact probe records: the conservative float cutoff filters most
    // pairs with a quarter of the bandwidth; survivors get the exact test.
    struct Probe {
        float mx, my, cutoff_d2;
        uint32_t id;
    };
    std::vector<std::vector<Probe>> bins(static_cast<size_t>(tiles_x) * tiles_y);
    for (uint32_t pi = 0; pi < out.projections.size(); ++pi) {
        const SplatProjection& p = out.projections[pi];
        PackedSplat& ps = packed[pi];
        ps.mx = p.mx;
        ps.my = p.my;
        ps.inv_two_r2 = 1.0 / (2.0 * p.rad_px * p.rad_px);
        ps.cutoff_d2 = cut_sq * p.rad_px * p.rad_px;
        ps.alpha = p.alpha;
        ps.z = p.z;
        ps.proj_id = pi;
        ps.map_index = p.index;
        Probe pr;
        pr.mx = static_cast<float>(p.mx);
        pr.my = static_cast<float>(p.my);
        pr.cutoff_d2 = static_cast<float>(ps.cutoff_d2 * (1.0 + 1e-5)) + 1e-6f;
        pr.id = pi;
        double reach = opt.truncation_sigmas * p.rad_px;
        int tx0 = std::max(0, static_cast<int>((p.mx - reach) / ts));
        int tx1 = std::min(tiles_x - 1, static_cast<int>((p.mx + reach) / ts));
        int ty0 = std::max(0, static_cast<int>((p.my - reach) / ts));
        int ty1 = std::min(tiles_y - 1, static_cast<int>((p.my + reach) / ts));
        for (int ty = ty0; ty <= ty1; ++ty)
            for (int tx = tx0; tx <= tx1; ++tx)
                bins[static_cast<size_t>(ty) * tiles_x + tx].push_back(pr);
    }

    std::vector<std::vector<uint32_t>> per_pixel;
    if (channels.retain_contributors) per_pixel.resize(out.pixel_count());

    const int k = map.k();
    auto colors = map.colors();
    const int sem_channels = out.channels;

    // Stage semantic data in depth order so the per-pixel walk streams it
    // sequentially instead of chasing storage-order addresses.
    std::vector<uint16_t> staged_idx;
    std::vector<double> staged_probs;
    if (channels.semantics && !dense) {
        auto src_idx = map.sem_indices();
        auto src_probs = map.sem_probs();
        staged_idx.resize(out.projections.size() * k);
        staged_probs.resize(out.projections.size() * k);
        for (size_t pi = 0; pi < out.projections.size(); ++pi) {
            const size_t m = out.projections[pi].index;
            std::copy(&src_idx[m * k], &src_idx[m * k] + k, &staged_idx[pi * k]);
            std::copy(&src_probs[m * k], &src_probs[m * k] + k, &staged_probs[pi * k]);
        }
    }
    std::vector<double> staged_dense;
    if (channels.semantics && dense) {
        staged_dense.resize(out.projections.size() * dense->channels);
        for (size_t pi = 0; pi < out.projections.size(); ++pi) {
            const size_t m = out.projections[pi].index;
            std::copy(&dense->probs[m * dense->channels], &dense->probs[(m + 1) * dense->channels],
                      &staged_dense[pi * dense->channels]);
        }
    }

    // The dense representation composites every class channel independently,
    // the way a generic multi-channel rasterizer does: per-channel
    // transmittance marching in lockstep. Numerically identical to the scalar
    // form, but it pays the full channel bandwidth per splat.
    std::vector<double> dense_transmittance;
    if (dense) dense_transmittance.resize(dense->channels);

    for (int ty = 0; ty < tiles_y; ++ty) {
        for (int tx = 0; tx < tiles_x; ++tx) {
            const auto& bin = bins[static_cast<size_t>(ty) * tiles_x + tx];
            if (bin.empty()) continue;
            const int y1 = std::min(camera.height, (ty + 1) * ts);
            const int x1 = std::min(camera.width, (tx + 1) * ts);
            for (int y = ty * ts; y < y1; ++y) {
                const double py = y + 0.5;
                for (int x = tx * ts; x < x1; ++x) {
                    const double px = x + 0.5;
                    const size_t pix = static_cast<size_t>(y) * out.width + x;
                    double acc_color[3] = {0, 0, 0};
                    double acc_depth = 0.0;
                    double transmittance = 1.0;
                    double* sem_out = channels.semantics ? &out.sem[pix * sem_channels] : nullptr;
                    std::vector<uint32_t>* contrib =
                        channels.retain_contributors ? &per_pixel[pix] : nullptr;
                    if (dense)
                        std::fill(dense_transmittance.begin(), dense_transmittance.end(), 1.0);

                    const float pxf = static_cast<float>(px), pyf = static_cast<float>(py);
                    for (const Probe& pr : bin) {
                        const float fdx = pxf - pr.mx;
                        const float fdy = pyf - pr.my;
                        if (fdx * fdx + fdy * fdy > pr.cutoff_d2) continue;
                        const PackedSplat& s = packed[pr.id];
                        const double dx = px - s.mx;
                        const double dy = py - s.my;
                        const double d2 = dx * dx + dy * dy;
                        if (d2 > s.cutoff_d2) continue;
                        double f = s.alpha * std::exp(-d2 * s.inv_two_r2);
                        if (f > kMaxFootprint) f = kMaxFootprint;
                        const double w = f * transmittance;
                        if (channels.color) {
                            const double* c = &colors[static_cast<size_t>(s.map_index) * 3];
                            acc_color[0] += std::clamp(c[0], 0.0, 1.0) * w;
                            acc_color[1] += std::clamp(c[1], 0.0, 1.0) * w;
                            acc_color[2] += std::clamp(c[2], 0.0, 1.0) * w;
                        }
                        if (channels.depth) acc_depth += s.z * w;
                        if (channels.semantics) {
                            if (dense) {
                                const double* probs =
                                    &staged_dense[static_cast<size_t>(pr.id) * dense->channels];
                                const double one_minus_f = 1.0 - f;
                                double* t_ch = dense_transmittance.data();
                                for (int m = 0; m < dense->channels; ++m) {
                                    sem_out[m] += probs[m] * f * t_ch[m];
                                    t_ch[m] *= one_minus_f;
                                }
                            } else {
                                const uint16_t* idx = &staged_idx[static_cast<size_t>(pr.id) * k];
                                const double* probs = &staged_probs[static_cast<size_t>(pr.id) * k];
                                for (int j = 0; j < k; ++j) sem_out[idx[j]] += probs[j] * w;
                            }
                        }
                        if (contrib) contrib->push_back(s.proj_id);
                        transmittance *= (1.0 - f);
                        if (opt.early_exit && transmittance < opt.transmittance_eps) break;
                    }
                    out.silhouette[pix] = 1.0 - transmittance;
                    if (channels.color) {
                        out.color[pix * 3] = acc_color[0];
                        out.color[pix * 3 + 1] = acc_color[1];
                        out.color[pix * 3 + 2] = acc_color[2];
                    }
                    if (channels.depth) out.depth[pix] = acc_depth;
                }
            }
        }
    }

    if (channels.retain_contributors) flatten_contributors(out, per_pixel);
    return out;
}

RenderOutput render_reference(const GaussianMap& map, const CameraModel& camera, const Pose& pose,
                              const RenderChannels& channels, const DenseSemantics* dense) {
    RenderOptions opt;
    opt.early_exit = false;
    RenderOutput out;
    alloc_output(out, camera, channels, dense ? dense->channels : map.channels());
    out.projections = project_splats(map, camera, pose, opt);

    std::vector<uint32_t> all(out.projections.size());
    std::iota(all.begin(), all.end(), 0u);

    std::vector<std::vector<uint32_t>> per_pixel;
    if (channels.retain_contributors) per_pixel.resize(out.pixel_count());

    std::vector<uint32_t> scratch;
    for (int y = 0; y < camera.height; ++y) {
        for (int x = 0; x < camera.width; ++x) {
            std::vector<uint32_t>* contrib = nullptr;
            if (channels.retain_contributors) {
                scratch.clear();
                contrib = &scratch;
            }
            composite_pixel(out, map, channels, opt, dense, all, x, y, contrib);
            if (contrib) per_pixel[static_cast<size_t>(y) * out.width + x] = *contrib;
        }
    }
    if (channels.retain_contributors) flatten_contributors(out, per_pixel);
    return out;
}

double clipped_entropy(std::span<const double> probs) {
    double total = 0.0;
    for (double p : probs) total += std::clamp(p, 0.001, 1.0);
    double h = 0.0;
    for (double p : probs) {
        double q = std::clamp(p, 0.001, 1.0) / total;
        h -= q * std::log(q);
    }
    return h;
}

double raw_entropy(std::span<const float> probs) {
    double h = 0.0;
    for (float p : probs)
        if (p > 0.0f) h -= static_cast<double>(p) * std::log(static_cast<double>(p));
    return h;
}

std::vector<double> render_entropy(const GaussianMap& map, const CameraModel& camera,
                                   const Pose& pose, const RenderOptions& options) {
    RenderChannels ch;
    ch.color = false;
    ch.depth = false;
    ch.semantics = true;
    RenderOutput out = render(map, camera, pose, ch, options);
    std::vector<double> entropy(out.pixel_count());
    for (int i = 0; i < out.pixel_count(); ++i)
        entropy[i] = clipped_entropy(
            std::span<const double>(&out.sem[static_cast<size_t>(i) * out.channels], out.channels));
    return entropy;
}

namespace {
uint8_t to_byte(double v) { return static_cast<uint8_t>(std::clamp(v, 0.0, 1.0) * 255.0 + 0.5); }

Vec3 class_palette(int cls) {
    double h = std::fmod(0.61803398875 * (cls + 1), 1.0) * 6.0;
    double x = 1.0 - std::abs(std::fmod(h, 2.0) - 1.0);
    double r = 0, g = 0, b = 0;
    switch (static_cast<int>(h)) {
        case 0: r = 1; g = x; break;
        case 1: r = x; g = 1; break;
        case 2: g = 1; b = x; break;
        case 3: g = x; b = 1; break;
        case 4: r = x; b = 1; break;
        default: r = 1; b = x; break;
    }
    return Vec3(r, g, b);
}
}  // namespace

void save_color_png(const RenderOutput& out, const std::string& path) {
    std::vector<uint8_t> rgb(static_cast<size_t>(out.pixel_count()) * 3);
    for (int i = 0; i < out.pixel_count(); ++i)
        for (int c = 0; c < 3; ++c) rgb[i * 3 + c] = to_byte(out.color[i * 3 + c]);
    write_rgb_png(path, out.width, out.height, rgb);
}

void save_entropy_png(std::span<const double> entropy, int width, int height, int channels,
                      const std::string& path) {
    const double hmax = std::log(static_cast<double>(std::max(2, channels)));
    std::vector<uint8_t> rgb(static_cast<size_t>(width) * height * 3);
    for (size_t i = 0; i < entropy.size(); ++i) {
        double v = std::clamp(entropy[i] / hmax, 0.0, 1.0);
        rgb[i * 3] = to_byte(v);
        rgb[i * 3 + 1] = to_byte(0.2 + 0.4 * v);
        rgb[i * 3 + 2] = to_byte(1.0 - v);
    }
    write_rgb_png(path, width, height, rgb);
}

void save_semantics_png(const RenderOutput& out, const std::string& path) {
    std::vector<uint8_t> rgb(static_cast<size_t>(out.pixel_count()) * 3, 0);
    for (int i = 0; i < out.pixel_count(); ++i) {
        const double* p = &out.sem[static_cast<size_t>(i) * out.channels];
        int best = 0;
        for (int m = 1; m < out.channels; ++m)
            if (p[m] > p[best]) best = m;
        if (p[best] <= 0.0) continue;  // uncovered pixel stays black
        Vec3 c = class_palette(best);
        rgb[i * 3] = to_byte(c.x());
        rgb[i * 3 + 1] = to_byte(c.y());
        rgb[i * 3 + 2] = to_byte(c.z());
    }
    write_rgb_png(path, out.width, out.height, rgb);
}

}  // namespace splatmap
