#include "splatmap/mapper.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace splatmap {

void AdamState::step(GaussianMap& map, const ParamGradients& g, const AdamParams& p) {
    ensure_size(map);
    ++t_;
    const double bc1 = 1.0 - std::pow(p.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(p.beta2, static_cast<double>(t_));

    auto update = [&](std::span<double> param, const std::vector<double>& grad,
                      std::vector<double>& m, std::vector<double>& v, double lr) {
        for (size_t i = 0; i < param.size(); ++i) {
            m[i] = p.beta1 * m[i] + (1 - p.beta1) * grad[i];
            v[i] = p.beta2 * v[i] + (1 - p.beta2) * grad[i] * grad[i];
            double mh = m[i] / bc1;
            double vh = v[i] / bc2;
            param[i] -= lr * mh / (std::sqrt(vh) + p.eps);
        }
    };
    update(map.centers(), g.center, m_center_, v_center_, p.lr_center);
    update(map.log_radii(), g.log_radius, m_radius_, v_radius_, p.lr_radius);
    update(map.opacity_logits(), g.opacity_logit, m_opacity_, v_opacity_, p.lr_opacity);
    update(map.colors(), g.color, m_color_, v_color_, p.lr_color);

    // Semantic probs live on a simplex: center each splat's gradient onto
    // the tangent space (sum-zero) first — stepping the raw gradient and
    // renormalizing applies an oblique projection that can ascend when the
    // rendered mass deficit gives all components a shared negative part.
    const int k = map.k();
    std::vector<double> delta(k);
    auto probs = map.sem_probs();
    for (size_t i = 0; i < map.size(); ++i) {
        double gbar = 0.0;
        for (int j = 0; j < k; ++j) gbar += g.sem[i * k + j];
        gbar /= k;
        for (int j = 0; j < k; ++j) {
            size_t idx = i * k + j;
            double gj = g.sem[idx] - gbar;
            m_sem_[idx] = p.beta1 * m_sem_[idx] + (1 - p.beta1) * gj;
            v_sem_[idx] = p.beta2 * v_sem_[idx] + (1 - p.beta2) * gj * gj;
            double mh = m_sem_[idx] / bc1;
            double vh = v_sem_[idx] / bc2;
            delta[j] = -p.lr_sem * mh / (std::sqrt(vh) + p.eps_sem);
        }
        apply_semantic_step(probs.subspan(i * k, k), delta);
    }
}

void AdamState::compact(const std::vector<uint32_t>& kept, int k) {
    auto apply = [&](std::vector<double>& vec, size_t stride) {
        if (vec.empty()) return;
        std::vector<double> next(kept.size() * stride);
        for (size_t j = 0; j < kept.size(); ++j)
            for (size_t s = 0; s < stride; ++s) next[j * stride + s] = vec[kept[j] * stride + s];
        vec.swap(next);
    };
    apply(m_center_, 3);
    apply(v_center_, 3);
    apply(m_radius_, 1);
    apply(v_radius_, 1);
    apply(m_opacity_, 1);
    apply(v_opacity_, 1);
    apply(m_color_, 3);
    apply(v_color_, 3);
    apply(m_sem_, k);
    apply(v_sem_, k);
}

bool KeyframeDatabase::maybe_add(const Frame& frame) {
    if (frame.timestamp % stride_ != 0) return false;
    KeyframeRecord rec;
    rec.frame = frame;
    rec.keyframe_id = next_id_++;
    double entropy = 0.0;
    size_t unknown = 0;
    const int C = frame.channels();
    for (int i = 0; i < frame.pixel_count(); ++i) {
        std::span<const float> p(&frame.sem[static_cast<size_t>(i) * C], C);
        entropy += raw_entropy(p);
        int best = 0;
        for (int m = 1; m < C; ++m)
            if (p[m] > p[best]) best = m;
        if (best == frame.unknown_class()) ++unknown;
    }
    rec.mean_gt_entropy = entropy / frame.pixel_count();
    rec.unknown_fraction = static_cast<double>(unknown) / frame.pixel_count();
    records_.push_back(std::move(rec));
    return true;
}

double psnr_color(const RenderOutput& render, std::span<const float> rgb) {
    double mse = 0.0;
    const size_t n = render.color.size();
    for (size_t i = 0; i < n; ++i) {
        double d = render.color[i] - rgb[i];
        mse += d * d;
    }
    mse /= static_cast<double>(n);
    if (mse <= 0.0) return 100.0;
    return std::min(100.0, 10.0 * std::log10(1.0 / mse));
}

namespace {

std::vector<float> downsample_rgb(const Frame& frame, int sw, int sh) {
    std::vector<float> out(static_cast<size_t>(sw) * sh * 3, 0.0f);
    std::vector<int> counts(static_cast<size_t>(sw) * sh, 0);
    for (int y = 0; y < frame.height; ++y) {
        int sy = std::min(sh - 1, y * sh / frame.height);
        for (int x = 0; x < frame.width; ++x) {
            int sx = std::min(sw - 1, x * sw / frame.width);
            size_t o = static_cast<size_t>(sy) * sw + sx;
            for (int c = 0; c < 3; ++c) out[o * 3 + c] += frame.rgb[(static_cast<size_t>(y) * frame.width + x) * 3 + c];
            ++counts[o];
        }
    }
    for (size_t i = 0; i < counts.size(); ++i)
        if (counts[i])
            for (int c = 0; c < 3; ++c) out[i * 3 + c] /= counts[i];
    return out;
}

}  // namespace

void KeyframeDatabase::refresh_render_quality(const GaussianMap& map, const CameraModel& camera,
                                              double scale) {
    CameraModel scaled = camera.scaled(scale);
    RenderChannels ch;
    ch.color = true;
    ch.depth = false;
    ch.semantics = false;
    for (auto& rec : records_) {
        RenderOutput out = render(map, scaled, rec.frame.pose, ch);
        std::vector<float> small = downsample_rgb(rec.frame, scaled.width, scaled.height);
        rec.psnr = psnr_color(out, small);
    }
}

std::vector<const KeyframeRecord*> select_keyframes(const KeyframeDatabase& db,
                                                    const Frame& current, const GaussianMap& map,
                                                    const CameraModel& camera, int n,
                                                    const MapperConfig& cfg) {
    (void)map;
    if (db.size() == 0) throw std::invalid_argument("select_keyframes: empty database");
    std::vector<const KeyframeRecord*> all;
    for (size_t i = 0; i < db.size(); ++i) all.push_back(&db.record(i));
    if (static_cast<int>(db.size()) <= n) return all;

    // Back-project the current frame's depth once.
    std::vector<Vec3> points;
    for (int y = 0; y < current.height; y += cfg.backproject_stride) {
        for (int x = 0; x < current.width; x += cfg.backproject_stride) {
            float d = current.depth_at(x, y);
            if (d <= 0) continue;
            points.push_back(current.pose.to_world(camera.pixel_ray(x, y) * static_cast<double>(d)));
        }
    }

    auto overlap = [&](const KeyframeRecord& rec) {
        if (points.empty()) return 0.0;
        size_t visible = 0;
        for (const Vec3& p : points) {
            Vec3 pc = rec.frame.pose.to_camera(p);
            if (pc.z() <= 0) continue;
            int px = static_cast<int>(camera.fx * pc.x() / pc.z() + camera.cx);
            int py = static_cast<int>(camera.fy * pc.y() / pc.z() + camera.cy);
            if (px < 0 || py < 0 || px >= camera.width || py >= camera.height) continue;
            float kf_depth = rec.frame.depth_at(px, py);
            if (kf_depth <= 0) continue;
            if (pc.z() <= kf_depth + cfg.overlap_margin) ++visible;
        }
        return static_cast<double>(visible) / points.size();
    };

    struct Scored {
        const KeyframeRecord* rec;
        double score;
    };
    std::vector<Scored> local;
    for (const auto* rec : all) local.push_back({rec, overlap(*rec)});
    std::sort(local.begin(), local.end(), [](const Scored& a, const Scored& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.rec->keyframe_id > b.rec->keyframe_id;  // recency breaks ties
    });

    const int n_local = (n + 1) / 2;
    const int n_global = n / 2;
    std::vector<const KeyframeRecord*> selected;
    std::set<int> chosen;
    for (int i = 0; i < n_local && i < static_cast<int>(local.size()); ++i) {
        selected.push_back(local[i].rec);
        chosen.insert(local[i].rec->keyframe_id);
    }

    // Min-max normalization over the whole database.
    double psnr_lo = 1e300, psnr_hi = -1e300, ent_lo = 1e300, ent_hi = -1e300, unk_lo = 1e300,
           unk_hi = -1e300;
    for (const auto* rec : all) {
        psnr_lo = std::min(psnr_lo, rec->psnr);
        psnr_hi = std::max(psnr_hi, rec->psnr);
        ent_lo = std::min(ent_lo, rec->mean_gt_entropy);
        ent_hi = std::max(ent_hi, rec->mean_gt_entropy);
        unk_lo = std::min(unk_lo, rec->unknown_fraction);
        unk_hi = std::max(unk_hi, rec->unknown_fraction);
    }
    auto norm = [](double v, double lo, double hi) { return hi > lo ? (v - lo) / (hi - lo) : 0.0; };

    std::vector<Scored> global;
    for (const auto* rec : all) {
        if (chosen.count(rec->keyframe_id)) continue;
        double s = (1.0 - norm(rec->psnr, psnr_lo, psnr_hi)) +
                   (1.0 - norm(rec->mean_gt_entropy, ent_lo, ent_hi)) +
                   (1.0 - norm(rec->unknown_fraction, unk_lo, unk_hi));
        global.push_back({rec, s});
    }
    std::sort(global.begin(), global.end(), [](const Scored& a, const Scored& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.rec->keyframe_id > b.rec->keyframe_id;
    });
    for (int i = 0; i < n_global && i < static_cast<int>(global.size()); ++i) {
        selected.push_back(global[i].rec);
        chosen.insert(global[i].rec->keyframe_id);
    }

    // The current frame, when it is a keyframe candidate, always rides along.
    for (const auto* rec : all) {
        if (rec->frame.timestamp == current.timestamp && !chosen.count(rec->keyframe_id)) {
            selected.push_back(rec);
            break;
        }
    }
    return selected;
}

std::vector<LossReport> optimize_map(GaussianMap& map, AdamState& adam,
                                     std::span<const Frame* const> frames,
                                     const CameraModel& camera, const MapperConfig& cfg,
                                     int iters) {
    if (frames.empty()) throw std::invalid_argument("optimize_map: no frames");
    if (iters < 1) throw std::invalid_argument("optimize_map: iters must be >= 1");
    std::vector<LossReport> history;
    history.reserve(iters);
    double initial_total = -1.0;
    int diverged_streak = 0;

    for (int it = 0; it < iters; ++it) {
        const Frame& kf = *frames[it % frames.size()];
        if (map.empty()) break;
        RenderOutput out = render(map, camera, kf.pose, RenderChannels::all(true));
        LossReport rep = mapping_loss(out, kf);
        LossReport sem = semantic_loss(out, kf, cfg.weights);
        rep.semantic = sem.semantic;
        rep.semantic_px = sem.semantic_px;
        rep.uncovered_px = sem.uncovered_px;

        ParamGradients grads = backward(out, kf, map, cfg.weights);
        adam.step(map, grads, cfg.adam);

        if (initial_total < 0) initial_total = rep.total();
        if (initial_total > 0 && rep.total() > cfg.divergence_factor * initial_total) {
            if (++diverged_streak >= cfg.divergence_window)
                throw std::runtime_error(
                    "optimize_map: diverged (loss " + std::to_string(rep.total()) + " vs initial " +
                    std::to_string(initial_total) + " for " + std::to_string(diverged_streak) +
                    " iterations)");
        } else {
            diverged_streak = 0;
        }

        if (cfg.prune_every > 0 && adam.step_count() % cfg.prune_every == 0) {
            std::vector<uint32_t> kept;
            if (map.prune_by_opacity(cfg.prune_opacity, &kept) > 0) adam.compact(kept, map.k());
        }
        history.push_back(rep);
    }
    return history;
}

}  // namespace splatmap
