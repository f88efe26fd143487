#include "splatmap/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <unordered_map>

#include <json.hpp>

#include "splatmap/mapper.hpp"

namespace splatmap {

namespace {

int argmax_channel(const double* p, int channels) {
    int best = 0;
    for (int m = 1; m < channels; ++m)
        if (p[m] > p[best]) best = m;
    return best;
}

/// Uniform-cell point index. Nearest-point queries first bound the answer by
/// the closest occupied cell center, then check only the cells that can beat
/// the bound; cell counts stay small (occupied surface cells), so the linear
/// bound pass is cheap even for far-away queries.
class PointGrid {
public:
    PointGrid(std::vector<Vec3> pts, double cell) : pts_(std::move(pts)), cell_(cell) {
        for (size_t i = 0; i < pts_.size(); ++i) cells_[key_of(pts_[i])].push_back(i);
        cell_list_.reserve(cells_.size());
        for (const auto& [key, members] : cells_) {
            Vec3 center((unpack_x(key) + 0.5) * cell_, (unpack_y(key) + 0.5) * cell_,
                        (unpack_z(key) + 0.5) * cell_);
            cell_list_.push_back({center, &members});
        }
    }
    bool empty() const { return pts_.empty(); }

    double nearest_distance(const Vec3& q) const {
        if (pts_.empty()) return std::numeric_limits<double>::infinity();
        const double half_diag = 0.5 * std::sqrt(3.0) * cell_;
        double best_center = std::numeric_limits<double>::infinity();
        for (const auto& [center, members] : cell_list_)
            best_center = std::min(best_center, (center - q).norm());
        // Any point inside the closest cell is within best_center + half_diag;
        // only cells intersecting that ball can contain the true nearest.
        const double bound = best_center + half_diag;
        double best = std::numeric_limits<double>::infinity();
        for (const auto& [center, members] : cell_list_) {
            if ((center - q).norm() > bound + half_diag) continue;
            for (size_t i : *members) best = std::min(best, (pts_[i] - q).norm());
        }
        return best;
    }

    void collect_within(const Vec3& q, double r, std::vector<size_t>& out) const {
        out.clear();
        int lo[3] = {coord(q.x() - r), coord(q.y() - r), coord(q.z() - r)};
        int hi[3] = {coord(q.x() + r), coord(q.y() + r), coord(q.z() + r)};
        for (int z = lo[2]; z <= hi[2]; ++z)
            for (int y = lo[1]; y <= hi[1]; ++y)
                for (int x = lo[0]; x <= hi[0]; ++x) {
                    auto it = cells_.find(pack(x, y, z));
                    if (it == cells_.end()) continue;
                    for (size_t i : it->second)
                        if ((pts_[i] - q).norm() <= r) out.push_back(i);
                }
    }

private:
    static constexpr int kBias = 1 << 20;
    int coord(double v) const { return static_cast<int>(std::floor(v / cell_)); }
    static uint64_t pack(int x, int y, int z) {
        auto u = [](int v) { return static_cast<uint64_t>(static_cast<uint32_t>(v + kBias)) & 0x1fffffull; };
        return (u(x) << 42) | (u(y) << 21) | u(z);
    }
    static int unpack_x(uint64_t k) { return static_cast<int>((k >> 42) & 0x1fffff) - kBias; }
    static int unpack_y(uint64_t k) { return static_cast<int>((k >> 21) & 0x1fffff) - kBias; }
    static int unpack_z(uint64_t k) { return static_cast<int>(k & 0x1fffff) - kBias; }
    uint64_t key_of(const Vec3& p) const { return pack(coord(p.x()), coord(p.y()), coord(p.z())); }

    std::vector<Vec3> pts_;
    double cell_;
    std::unordered_map<uint64_t, std::vector<size_t>> cells_;
    std::vector<std::pair<Vec3, const std::vector<size_t>*>> cell_list_;
};

}  // namespace

MetricReport semantic_metrics(std::span<const RenderOutput> renders,
                              std::span<const Frame> gt_frames) {
    if (renders.size() != gt_frames.size() || renders.empty())
        throw std::invalid_argument("semantic_metrics: view count mismatch");
    const int C = renders[0].channels;
    MetricReport rep;

    size_t top1 = 0, top3 = 0, total = 0;
    // Pooled confusion over known classes (+1 bucket for predicted unknown).
    std::vector<int64_t> confusion(static_cast<size_t>(C) * C, 0);

    for (size_t v = 0; v < renders.size(); ++v) {
        const RenderOutput& r = renders[v];
        const Frame& gt = gt_frames[v];
        if (r.width != gt.width || r.height != gt.height || r.channels != gt.channels())
            throw std::invalid_argument("semantic_metrics: resolution mismatch");
        std::vector<int64_t> view_confusion(static_cast<size_t>(C) * C, 0);
        std::vector<uint8_t> present(C, 0);

        for (int i = 0; i < r.pixel_count(); ++i) {
            int gt_label = gt.label_at(i % r.width, i / r.width);
            if (gt_label == gt.unknown_class()) continue;
            const double* q = &r.sem[static_cast<size_t>(i) * C];
            int pred = argmax_channel(q, C);
            ++view_confusion[static_cast<size_t>(gt_label) * C + pred];
            ++confusion[static_cast<size_t>(gt_label) * C + pred];
            present[gt_label] = 1;
            ++total;
            if (pred == gt_label) ++top1;
            // Top-3: count strictly-higher channels.
            int higher = 0;
            for (int m = 0; m < C; ++m)
                if (q[m] > q[gt_label] || (q[m] == q[gt_label] && m < gt_label)) ++higher;
            if (higher < 3) ++top3;
        }

        double iou_sum = 0;
        int iou_classes = 0;
        for (int c = 0; c < C; ++c) {
            if (!present[c]) continue;
            int64_t tp = view_confusion[static_cast<size_t>(c) * C + c];
            int64_t fn = 0, fp = 0;
            for (int m = 0; m < C; ++m) {
                if (m != c) {
                    fn += view_confusion[static_cast<size_t>(c) * C + m];
                    fp += view_confusion[static_cast<size_t>(m) * C + c];
                }
            }
            int64_t uni = tp + fn + fp;
            if (uni > 0) {
                iou_sum += static_cast<double>(tp) / uni;
                ++iou_classes;
            }
        }
        rep.per_view_miou.push_back(iou_classes ? 100.0 * iou_sum / iou_classes : 0.0);
    }
    rep.miou_pct = rep.per_view_miou.empty()
                       ? 0.0
                       : std::accumulate(rep.per_view_miou.begin(), rep.per_view_miou.end(), 0.0) /
                             rep.per_view_miou.size();
    rep.top1_pct = total ? 100.0 * top1 / total : 0.0;
    rep.top3_pct = total ? 100.0 * top3 / total : 0.0;

    // Average precision per class, pooled across views, normalized scores.
    const int M = C - 1;  // known classes
    double ap_sum = 0;
    int ap_classes = 0;
    std::vector<std::pair<float, uint8_t>> scored;
    for (int c = 0; c < M; ++c) {
        scored.clear();
        size_t positives = 0;
        for (size_t v = 0; v < renders.size(); ++v) {
            const RenderOutput& r = renders[v];
            const Frame& gt = gt_frames[v];
            for (int i = 0; i < r.pixel_count(); ++i) {
                int gt_label = gt.label_at(i % r.width, i / r.width);
                if (gt_label == gt.unknown_class()) continue;
                const double* q = &r.sem[static_cast<size_t>(i) * C];
                double s = r.silhouette[i];
                float score = s > 1e-9 ? static_cast<float>(q[c] / s) : 0.0f;
                bool positive = gt_label == c;
                positives += positive;
                scored.push_back({score, positive ? uint8_t(1) : uint8_t(0)});
            }
        }
        if (positives == 0) continue;  // AP undefined without positives
        std::stable_sort(scored.begin(), scored.end(),
                         [](const auto& a, const auto& b) { return a.first > b.first; });
        double ap = 0;
        size_t tp = 0;
        double prev_recall = 0;
        for (size_t i = 0; i < scored.size(); ++i) {
            if (!scored[i].second) continue;
            ++tp;
            double recall = static_cast<double>(tp) / positives;
            double precision = static_cast<double>(tp) / (i + 1);
            ap += (recall - prev_recall) * precision;
            prev_recall = recall;
        }
        ap_sum += ap;
        ++ap_classes;

        PerClassMetric pc;
        pc.class_id = c;
        pc.ap_pct = 100.0 * ap;
        pc.gt_pixels = positives;
        rep.per_class.push_back(pc);
    }
    rep.map_pct = ap_classes ? 100.0 * ap_sum / ap_classes : 0.0;

    // Macro F1 over classes that appear in ground truth or prediction.
    double f1_sum = 0;
    int f1_classes = 0;
    for (int c = 0; c < M; ++c) {
        int64_t tp = confusion[static_cast<size_t>(c) * C + c];
        int64_t fn = 0, fp = 0;
        for (int m = 0; m < C; ++m)
            if (m != c) {
                fn += confusion[static_cast<size_t>(c) * C + m];
                fp += confusion[static_cast<size_t>(m) * C + c];
            }
        if (tp + fn + fp == 0) continue;
        double f1 = tp > 0 ? 2.0 * tp / (2.0 * tp + fp + fn) : 0.0;
        f1_sum += f1;
        ++f1_classes;
        double iou = tp + fn + fp > 0 ? static_cast<double>(tp) / (tp + fn + fp) : 0.0;
        bool found = false;
        for (auto& pc : rep.per_class)
            if (pc.class_id == c) {
                pc.f1_pct = 100.0 * f1;
                pc.iou_pct = 100.0 * iou;
                found = true;
            }
        if (!found) {
            PerClassMetric pc;
            pc.class_id = c;
            pc.f1_pct = 100.0 * f1;
            pc.iou_pct = 100.0 * iou;
            rep.per_class.push_back(pc);
        }
    }
    rep.f1_pct = f1_classes ? 100.0 * f1_sum / f1_classes : 0.0;
    std::sort(rep.per_class.begin(), rep.per_class.end(),
              [](const PerClassMetric& a, const PerClassMetric& b) { return a.class_id < b.class_id; });
    return rep;
}

MetricReport geometric_metrics(const GaussianMap& map, const SceneSpec& scene, int samples,
                               uint64_t seed) {
    MetricReport rep;
    std::vector<Vec3> map_points;
    for (size_t i = 0; i < map.size(); ++i)
        if (sigmoid(map.opacity_logits()[i]) > 0.5) map_points.push_back(map.center(i));

    auto surface = scene.sample_surface(samples, seed);
    const double threshold = 0.05;

    if (map_points.empty()) {
        rep.accuracy_cm = -1.0;
        rep.completeness_cm = 100.0 * scene.bounds.extent().norm();
        rep.completeness_ratio_pct = 0.0;
        return rep;
    }

    double acc = 0;
    for (const Vec3& p : map_points) acc += scene.surface_distance(p);
    rep.accuracy_cm = 100.0 * acc / map_points.size();

    PointGrid grid(map_points, threshold);
    double comp = 0;
    size_t close = 0;
    for (const auto& s : surface) {
        double d = grid.nearest_distance(s.point);
        comp += d;
        if (d < threshold) ++close;
    }
    rep.completeness_cm = surface.empty() ? 0.0 : 100.0 * comp / surface.size();
    rep.completeness_ratio_pct = surface.empty() ? 0.0 : 100.0 * close / surface.size();
    return rep;
}

MetricReport photometric_metrics(std::span<const RenderOutput> renders,
                                 std::span<const Frame> gt_frames) {
    if (renders.size() != gt_frames.size() || renders.empty())
        throw std::invalid_argument("photometric_metrics: view count mismatch");
    MetricReport rep;
    double depth_sum = 0;
    size_t depth_px = 0;
    for (size_t v = 0; v < renders.size(); ++v) {
        const RenderOutput& r = renders[v];
        const Frame& gt = gt_frames[v];
        rep.per_view_psnr.push_back(psnr_color(r, gt.rgb));
        for (int i = 0; i < r.pixel_count(); ++i) {
            if (gt.depth[i] <= 0) continue;
            depth_sum += std::abs(r.depth[i] - gt.depth[i]);
            ++depth_px;
        }
    }
    rep.psnr_db = std::accumulate(rep.per_view_psnr.begin(), rep.per_view_psnr.end(), 0.0) /
                  rep.per_view_psnr.size();
    rep.depth_l1_cm = depth_px ? 100.0 * depth_sum / depth_px : 0.0;
    return rep;
}

MetricReport merge_reports(const MetricReport& semantic, const MetricReport& geometric,
                           const MetricReport& photometric) {
    MetricReport rep = semantic;
    rep.accuracy_cm = geometric.accuracy_cm;
    rep.completeness_cm = geometric.completeness_cm;
    rep.completeness_ratio_pct = geometric.completeness_ratio_pct;
    rep.psnr_db = photometric.psnr_db;
    rep.depth_l1_cm = photometric.depth_l1_cm;
    rep.per_view_psnr = photometric.per_view_psnr;
    return rep;
}

double surface_label_agreement(const GaussianMap& map, const SceneSpec& scene, int samples,
                               uint64_t seed, double radius) {
    auto surface = scene.sample_surface(samples, seed);
    if (surface.empty()) return 0.0;
    std::vector<Vec3> centers;
    centers.reserve(map.size());
    for (size_t i = 0; i < map.size(); ++i) centers.push_back(map.center(i));
    PointGrid grid(centers, radius);

    const int C = map.channels();
    const int k = map.k();
    auto idx = map.sem_indices();
    auto probs = map.sem_probs();
    auto logits = map.opacity_logits();

    size_t agree = 0;
    std::vector<size_t> near;
    std::vector<double> votes(C);
    for (const auto& s : surface) {
        grid.collect_within(s.point, radius, near);
        if (near.empty()) continue;
        std::fill(votes.begin(), votes.end(), 0.0);
        for (size_t i : near) {
            double w = sigmoid(logits[i]);
            for (int j = 0; j < k; ++j) votes[idx[i * k + j]] += w * probs[i * k + j];
        }
        if (argmax_channel(votes.data(), C) == s.class_id) ++agree;
    }
    return static_cast<double>(agree) / surface.size();
}

std::string MetricReport::to_json() const {
    nlohmann::json j;
    j["miou_pct"] = miou_pct;
    j["top1_pct"] = top1_pct;
    j["top3_pct"] = top3_pct;
    j["map_pct"] = map_pct;
    j["f1_pct"] = f1_pct;
    j["accuracy_cm"] = accuracy_cm;
    j["completeness_cm"] = completeness_cm;
    j["completeness_ratio_pct"] = completeness_ratio_pct;
    j["psnr_db"] = psnr_db;
    j["depth_l1_cm"] = depth_l1_cm;
    j["per_view_miou"] = per_view_miou;
    j["per_view_psnr"] = per_view_psnr;
    return j.dump(2);
}

void MetricReport::save_json(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("metrics: cannot write " + path);
    out << to_json() << "\n";
}

void MetricReport::save_class_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("metrics: cannot write " + path);
    out << "class_id,iou_pct,ap_pct,f1_pct,gt_pixels\n";
    for (const auto& pc : per_class)
        out << pc.class_id << "," << pc.iou_pct << "," << pc.ap_pct << "," << pc.f1_pct << ","
            << pc.gt_pixels << "\n";
}

}  // namespace splatmap
