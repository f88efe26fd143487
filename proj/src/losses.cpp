#include "splatmap/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace splatmap {

namespace {
constexpr double kSilhouetteMask = 0.99;
constexpr double kGradEps = 1e-8;
// Residuals below float32 quantization count as converged: the L1 subgradient
// at the kink is taken as 0 so perfect fits stay stationary.
constexpr double kResidualDeadband = 1e-6;
// Same idea for the Hellinger cone point; below this the pixel is converged.
constexpr double kHellingerGradFloor = 1e-3;

inline double sign_of(double x) {
    if (x > kResidualDeadband) return 1.0;
    if (x < -kResidualDeadband) return -1.0;
    return 0.0;
}
}  // namespace

double hellinger_distance(std::span<const double> p, std::span<const double> q) {
    double bc = 0.0;
    for (size_t m = 0; m < p.size(); ++m) bc += std::sqrt(std::max(p[m] * q[m], 0.0));
    return std::sqrt(std::max(1.0 - bc, 0.0));
}

double cosine_similarity(std::span<const double> p, std::span<const double> q) {
    double dot = 0.0, np = 0.0, nq = 0.0;
    for (size_t m = 0; m < p.size(); ++m) {
        dot += p[m] * q[m];
        np += p[m] * p[m];
        nq += q[m] * q[m];
    }
    return dot / (std::sqrt(np) * std::sqrt(nq) + kGradEps);
}

LossReport mapping_loss(const RenderOutput& render, const Frame& frame) {
    if (render.width != frame.width || render.height != frame.height)
        throw std::invalid_argument("loss: resolution mismatch");
    LossReport rep;
    double photo = 0.0, depth = 0.0;
    for (int i = 0; i < render.pixel_count(); ++i) {
        if (render.silhouette[i] <= kSilhouetteMask) continue;
        ++rep.photometric_px;
        for (int c = 0; c < 3; ++c)
            photo += std::abs(render.color[i * 3 + c] - frame.rgb[i * 3 + c]);
        float gt = frame.depth[i];
        if (gt > 0.0f) {
            ++rep.depth_px;
            depth += std::abs(render.depth[i] - gt);
        }
    }
    rep.photometric = rep.photometric_px ? photo / rep.photometric_px : 0.0;
    rep.depth = rep.depth_px ? depth / rep.depth_px : 0.0;
    return rep;
}

namespace {

struct SemanticPixelLoss {
    double value = 0.0;
    bool covered = false;
};

// Loss for one pixel; fills dq (size channels) with d(value)/dq when non-null.
SemanticPixelLoss semantic_pixel(std::span<const double> q, std::span<const float> p_f,
                                 const LossWeights& w, std::vector<double>* dq,
                                 std::vector<double>& p_buf) {
    SemanticPixelLoss out;
    const size_t C = q.size();
    p_buf.resize(C);
    for (size_t m = 0; m < C; ++m) p_buf[m] = p_f[m];
    std::span<const double> p(p_buf);

    bool any = false;
    for (size_t m = 0; m < C; ++m)
        if (q[m] != 0.0) any = true;
    if (!any) return out;
    out.covered = true;
    if (dq) std::fill(dq->begin(), dq->end(), 0.0);

    if (w.use_kl) {
        double kl = 0.0;
        for (size_t m = 0; m < C; ++m) {
            if (p[m] <= 0.0) continue;
            double qm = std::max(q[m], kGradEps);
            kl += p[m] * std::log(p[m] / qm);
            if (dq && q[m] > kGradEps) (*dq)[m] += w.lambda_hd * (-p[m] / qm);
        }
        out.value += w.lambda_hd * kl;
    } else if (w.use_hd) {
        double bc = 0.0;
        for (size_t m = 0; m < C; ++m) bc += std::sqrt(std::max(p[m] * q[m], 0.0));
        double hd = std::sqrt(std::max(1.0 - bc, 0.0));
        out.value += w.lambda_hd * hd;
        // At hd == 0 the distance has a cone point; the zero subgradient is
        // the one that keeps converged pixels stationary.
        if (dq && hd > kHellingerGradFloor) {
            double dhd_dbc = -1.0 / (2.0 * hd + kGradEps);
            for (size_t m = 0; m < C; ++m) {
                if (p[m] <= 0.0 || q[m] <= 0.0) continue;
                double dbc = p[m] / (2.0 * std::sqrt(p[m] * q[m]) + kGradEps);
                (*dq)[m] += w.lambda_hd * dhd_dbc * dbc;
            }
        }
    }

    if (w.use_cos) {
        double dot = 0.0, np2 = 0.0, nq2 = 0.0;
        for (size_t m = 0; m < C; ++m) {
            dot += p[m] * q[m];
            np2 += p[m] * p[m];
            nq2 += q[m] * q[m];
        }
        double np = std::sqrt(np2), nq = std::sqrt(nq2);
        double denom = np * nq + kGradEps;
        double cosv = dot / denom;
        out.value += w.lambda_cos * (1.0 - cosv);
        if (dq && nq > 0.0) {
            for (size_t m = 0; m < C; ++m) {
                double dcos = p[m] / denom - dot * (np * q[m] / nq) / (denom * denom);
                (*dq)[m] += -w.lambda_cos * dcos;
            }
        }
    }
    return out;
}

}  // namespace

LossReport semantic_loss(const RenderOutput& render, const Frame& frame,
                         const LossWeights& weights) {
    if (render.width != frame.width || render.height != frame.height)
        throw std::invalid_argument("loss: resolution mismatch");
    if (render.channels != frame.channels())
        throw std::invalid_argument("loss: semantic channel mismatch");
    const double tau = std::log(static_cast<double>(weights.mask_k));
    LossReport rep;
    double total = 0.0;
    std::vector<double> p_buf;
    for (int i = 0; i < render.pixel_count(); ++i) {
        std::span<const float> p(&frame.sem[static_cast<size_t>(i) * frame.channels()],
                                 frame.channels());
        if (raw_entropy(p) >= tau) continue;
        std::span<const double> q(&render.sem[static_cast<size_t>(i) * render.channels],
                                  render.channels);
        auto pl = semantic_pixel(q, p, weights, nullptr, p_buf);
        if (!pl.covered) {
            ++rep.uncovered_px;
            continue;
        }
        ++rep.semantic_px;
        total += pl.value;
    }
    rep.semantic = rep.semantic_px ? total / rep.semantic_px : 0.0;
    return rep;
}

ParamGradients backward(const RenderOutput& render, const Frame& frame, const GaussianMap& map,
                        const LossWeights& weights, bool include_mapping, bool include_semantic) {
    if (render.contrib_offset.empty())
        throw std::invalid_argument("backward: render did not retain contributors");
    if (render.width != frame.width || render.height != frame.height)
        throw std::invalid_argument("backward: resolution mismatch");
    const int C = render.channels;
    if (include_semantic && C != frame.channels())
        throw std::invalid_argument("backward: semantic channel mismatch");

    ParamGradients g;
    g.resize_for(map);

    // Pass 1: masked pixel counts (the loss terms are means).
    const double tau = std::log(static_cast<double>(weights.mask_k));
    size_t n_photo = 0, n_depth = 0, n_sem = 0;
    std::vector<double> p_buf;
    std::vector<uint8_t> sem_masked(render.pixel_count(), 0);
    for (int i = 0; i < render.pixel_count(); ++i) {
        if (include_mapping && render.silhouette[i] > kSilhouetteMask) {
            ++n_photo;
            if (frame.depth[i] > 0.0f) ++n_depth;
        }
        if (include_semantic) {
            std::span<const float> p(&frame.sem[static_cast<size_t>(i) * frame.channels()],
                                     frame.channels());
            if (raw_entropy(p) < tau) {
                bool covered = render.contrib_offset[i + 1] > render.contrib_offset[i];
                if (covered) {
                    sem_masked[i] = 1;
                    ++n_sem;
                }
            }
        }
    }

    // Per-projection accumulators for the footprint chain.
    const size_t np = render.projections.size();
    std::vector<double> g_alpha(np, 0.0), g_mx(np, 0.0), g_my(np, 0.0), g_rad(np, 0.0),
        g_z(np, 0.0);

    auto colors = map.colors();
    auto sem_idx = map.sem_indices();
    auto sem_probs = map.sem_probs();
    const int k = map.k();

    std::vector<double> fs, ts;       // per-contributor footprint and transmittance
    std::vector<uint8_t> f_clamped;
    std::vector<double> dq(C, 0.0);

    for (int y = 0; y < render.height; ++y) {
        for (int x = 0; x < render.width; ++x) {
            const size_t pix = static_cast<size_t>(y) * render.width + x;
            const uint32_t c0 = render.contrib_offset[pix];
            const uint32_t c1 = render.contrib_offset[pix + 1];
            if (c0 == c1) continue;

            const bool map_masked = include_mapping && render.silhouette[pix] > kSilhouetteMask;
            const bool sem_px = include_semantic && sem_masked[pix];
            if (!map_masked && !sem_px) continue;

            // dL/d(channel value) for this pixel.
            double dLdC[3] = {0, 0, 0};
            double dLdD = 0.0;
            if (map_masked) {
                for (int c = 0; c < 3; ++c)
                    dLdC[c] = 0.5 * sign_of(render.color[pix * 3 + c] - frame.rgb[pix * 3 + c]) /
                              static_cast<double>(n_photo);
                if (frame.depth[pix] > 0.0f)
                    dLdD = sign_of(render.depth[pix] - frame.depth[pix]) /
                           static_cast<double>(n_depth);
            }
            if (sem_px) {
                std::span<const double> q(&render.sem[pix * C], C);
                std::span<const float> p(&frame.sem[pix * frame.channels()], frame.channels());
                semantic_pixel(q, p, weights, &dq, p_buf);
                const double inv_n = 1.0 / static_cast<double>(n_sem);
                for (int m = 0; m < C; ++m) dq[m] *= inv_n;
            }

            // Recompute the footprint sequence front-to-back.
            const uint32_t n = c1 - c0;
            fs.resize(n);
            ts.resize(n);
            f_clamped.resize(n);
            const double px = x + 0.5, py = y + 0.5;
            double t = 1.0;
            for (uint32_t j = 0; j < n; ++j) {
                const SplatProjection& pr = render.projections[render.contrib[c0 + j]];
                double dx = px - pr.mx, dy = py - pr.my;
                double f_raw = pr.alpha * std::exp(-(dx * dx + dy * dy) / (2 * pr.rad_px * pr.rad_px));
                f_clamped[j] = f_raw > kMaxFootprint;
                fs[j] = std::min(f_raw, kMaxFootprint);
                ts[j] = t;
                t *= (1.0 - fs[j]);
            }

            // Semantic gradient: only into the sparse probs, weights f*T fixed.
            if (sem_px) {
                for (uint32_t j = 0; j < n; ++j) {
                    const SplatProjection& pr = render.projections[render.contrib[c0 + j]];
                    const double w = fs[j] * ts[j];
                    const uint16_t* idx = &sem_idx[static_cast<size_t>(pr.index) * k];
                    double* gs = &g.sem[static_cast<size_t>(pr.index) * k];
                    for (int j2 = 0; j2 < k; ++j2) gs[j2] += dq[idx[j2]] * w;
                }
            }

            if (!map_masked) continue;

            // Reverse sweep with suffix sums for the alpha-compositing chain.
            double suf_c[3] = {0, 0, 0};
            double suf_d = 0.0;
            for (int j = static_cast<int>(n) - 1; j >= 0; --j) {
                const uint32_t proj_id = render.contrib[c0 + j];
                const SplatProjection& pr = render.projections[proj_id];
                const double f = fs[j], T = ts[j];
                const double w = f * T;
                const double* col = &colors[static_cast<size_t>(pr.index) * 3];

                double zc[3];
                for (int c = 0; c < 3; ++c) zc[c] = std::clamp(col[c], 0.0, 1.0);

                double dLdf = 0.0;
                for (int c = 0; c < 3; ++c)
                    dLdf += dLdC[c] * (zc[c] * T - suf_c[c] / (1.0 - f));
                dLdf += dLdD * (pr.z * T - suf_d / (1.0 - f));

                // Direct channel-value gradients.
                for (int c = 0; c < 3; ++c) {
                    if (col[c] > 0.0 && col[c] < 1.0)
                        g.color[static_cast<size_t>(pr.index) * 3 + c] += dLdC[c] * w;
                }
                g_z[proj_id] += dLdD * w;

                if (!f_clamped[j] && pr.rad_px > 0.0) {
                    double dx = px - pr.mx, dy = py - pr.my;
                    double r2 = pr.rad_px * pr.rad_px;
                    g_alpha[proj_id] += dLdf * f / pr.alpha;
                    g_mx[proj_id] += dLdf * f * dx / r2;
                    g_my[proj_id] += dLdf * f * dy / r2;
                    g_rad[proj_id] += dLdf * f * (dx * dx + dy * dy) / (r2 * pr.rad_px);
                }

                suf_d += pr.z * w;
                for (int c = 0; c < 3; ++c) suf_c[c] += zc[c] * w;
            }
        }
    }

    // Projection-space accumulators -> world-space parameter gradients.
    const Pose& pose = frame.pose;
    for (size_t pi = 0; pi < np; ++pi) {
        if (g_alpha[pi] == 0 && g_mx[pi] == 0 && g_my[pi] == 0 && g_rad[pi] == 0 && g_z[pi] == 0)
            continue;
        const SplatProjection& pr = render.projections[pi];
        const size_t i = pr.index;
        const double z = pr.z;
        const double fx = render.proj_fx, fy = render.proj_fy;
        const double cx = render.proj_cx, cy = render.proj_cy;

        double dX = g_mx[pi] * fx / z;
        double dY = g_my[pi] * fy / z;
        double dZ = g_z[pi] - g_mx[pi] * (pr.mx - cx) / z - g_my[pi] * (pr.my - cy) / z -
                    g_rad[pi] * pr.rad_px / z;
        Vec3 dcam(dX, dY, dZ);
        Vec3 dworld = pose.R * dcam;
        g.center[3 * i] += dworld.x();
        g.center[3 * i + 1] += dworld.y();
        g.center[3 * i + 2] += dworld.z();
        // rad_px = exp(log_r) * fy / z, so d/d(log_r) = rad_px.
        g.log_radius[i] += g_rad[pi] * pr.rad_px;
        g.opacity_logit[i] += g_alpha[pi] * pr.alpha * (1.0 - pr.alpha);
    }

    if (weights.use_kl && include_semantic && weights.kl_clip_norm > 0.0) {
        for (size_t i = 0; i < map.size(); ++i) {
            double norm2 = 0.0;
            for (int j = 0; j < k; ++j) norm2 += g.sem[i * k + j] * g.sem[i * k + j];
            double norm = std::sqrt(norm2);
            if (norm > weights.kl_clip_norm) {
                double s = weights.kl_clip_norm / norm;
                for (int j = 0; j < k; ++j) g.sem[i * k + j] *= s;
            }
        }
    }

    auto check = [&](const std::vector<double>& v, size_t stride, const char* name) {
        for (size_t idx = 0; idx < v.size(); ++idx) {
            if (!std::isfinite(v[idx]))
                throw std::runtime_error("backward: non-finite gradient for gaussian " +
                                         std::to_string(idx / stride) + " parameter " + name);
        }
    };
    check(g.center, 3, "center");
    check(g.log_radius, 1, "log_radius");
    check(g.opacity_logit, 1, "opacity_logit");
    check(g.color, 3, "color");
    check(g.sem, k, "sem");
    return g;
}

}  // namespace splatmap
