#include "splatmap/gaussian_map.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "splatmap/splat_render.hpp"

namespace splatmap {

double SparseSemanticVector::sum() const {
    return std::accumulate(probs.begin(), probs.end(), 0.0);
}

int SparseSemanticVector::argmax_class() const {
    if (probs.empty()) return -1;
    size_t best = 0;
    for (size_t i = 1; i < probs.size(); ++i)
        if (probs[i] > probs[best]) best = i;
    return indices[best];
}

SparseSemanticVector sparse_from_dense(std::span<const float> dense, int k) {
    const int channels = static_cast<int>(dense.size());
    k = std::min(k, channels);
    std::vector<int> order(channels);
    std::iota(order.begin(), order.end(), 0);
    std::partial_sort(order.begin(), order.begin() + k, order.end(), [&](int a, int b) {
        if (dense[a] != dense[b]) return dense[a] > dense[b];
        return a < b;
    });
    SparseSemanticVector out;
    out.indices.resize(k);
    out.probs.resize(k);
    double total = 0.0;
    for (int i = 0; i < k; ++i) {
        out.indices[i] = static_cast<uint16_t>(order[i]);
        out.probs[i] = std::max(0.0, static_cast<double>(dense[order[i]]));
        total += out.probs[i];
    }
    if (total <= 0.0) {
        for (int i = 0; i < k; ++i) out.probs[i] = 1.0 / k;
    } else {
        for (int i = 0; i < k; ++i) out.probs[i] /= total;
    }
    return out;
}

void apply_semantic_step(std::span<double> probs, std::span<const double> step) {
    double total = 0.0;
    for (size_t i = 0; i < probs.size(); ++i) {
        probs[i] = std::max(0.0, probs[i] + (i < step.size() ? step[i] : 0.0));
        total += probs[i];
    }
    if (total <= 0.0) {
        // Degenerate update: fall back to uniform over the frozen indices.
        for (auto& p : probs) p = 1.0 / probs.size();
    } else {
        for (auto& p : probs) p /= total;
    }
}

SemanticGaussian update_sparse_semantics(const SemanticGaussian& g,
                                         std::span<const double> grad_step) {
    for (double s : grad_step)
        if (!std::isfinite(s)) throw std::invalid_argument("semantic step must be finite");
    SemanticGaussian out = g;
    apply_semantic_step(out.sem.probs, grad_step);
    return out;
}

void GaussianMap::add(const SemanticGaussian& g) {
    if (g.sem.k() != k_) throw std::invalid_argument("map: sparse vector k mismatch");
    centers_.insert(centers_.end(), {g.center.x(), g.center.y(), g.center.z()});
    log_radii_.push_back(g.log_radius);
    opacity_logits_.push_back(g.opacity_logit);
    colors_.insert(colors_.end(), {g.color.x(), g.color.y(), g.color.z()});
    sem_indices_.insert(sem_indices_.end(), g.sem.indices.begin(), g.sem.indices.end());
    sem_probs_.insert(sem_probs_.end(), g.sem.probs.begin(), g.sem.probs.end());
    source_frames_.push_back(g.source_frame);
}

SemanticGaussian GaussianMap::get(size_t i) const {
    SemanticGaussian g;
    g.center = center(i);
    g.log_radius = log_radii_[i];
    g.opacity_logit = opacity_logits_[i];
    g.color = Vec3(colors_[3 * i], colors_[3 * i + 1], colors_[3 * i + 2]);
    g.sem.indices.assign(sem_indices_.begin() + i * k_, sem_indices_.begin() + (i + 1) * k_);
    g.sem.probs.assign(sem_probs_.begin() + i * k_, sem_probs_.begin() + (i + 1) * k_);
    g.source_frame = source_frames_[i];
    return g;
}

size_t GaussianMap::prune_by_opacity(double threshold, std::vector<uint32_t>* kept) {
    const size_t n = size();
    std::vector<uint32_t> keep;
    keep.reserve(n);
    for (size_t i = 0; i < n; ++i)
        if (sigmoid(opacity_logits_[i]) >= threshold) keep.push_back(static_cast<uint32_t>(i));
    if (keep.size() == n) {
        if (kept) *kept = std::move(keep);
        return 0;
    }
    auto compact = [&](auto& vec, size_t stride) {
        using V = std::remove_reference_t<decltype(vec)>;
        V next(keep.size() * stride);
        for (size_t j = 0; j < keep.size(); ++j)
            for (size_t s = 0; s < stride; ++s) next[j * stride + s] = vec[keep[j] * stride + s];
        vec.swap(next);
    };
    compact(centers_, 3);
    compact(log_radii_, 1);
    compact(opacity_logits_, 1);
    compact(colors_, 3);
    compact(sem_indices_, k_);
    compact(sem_probs_, k_);
    compact(source_frames_, 1);
    size_t removed = n - keep.size();
    if (kept) *kept = std::move(keep);
    return removed;
}

namespace {
constexpr uint32_t kMapMagic = 0x53474d50;  // "SGMP"
constexpr uint32_t kMapVersion = 1;

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
T read_pod(std::ifstream& in) {
    T v;
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw std::runtime_error("map: truncated file");
    return v;
}
}  // namespace

void GaussianMap::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("map: cannot write " + path);
    write_pod(out, kMapMagic);
    write_pod(out, kMapVersion);
    write_pod(out, static_cast<uint64_t>(size()));
    write_pod(out, static_cast<uint32_t>(k_));
    write_pod(out, static_cast<uint32_t>(num_classes_));
    for (size_t i = 0; i < size(); ++i) {
        float rec[8] = {static_cast<float>(centers_[3 * i]),     static_cast<float>(centers_[3 * i + 1]),
                        static_cast<float>(centers_[3 * i + 2]), static_cast<float>(log_radii_[i]),
                        static_cast<float>(opacity_logits_[i]),  static_cast<float>(colors_[3 * i]),
                        static_cast<float>(colors_[3 * i + 1]),  static_cast<float>(colors_[3 * i + 2])};
        out.write(reinterpret_cast<const char*>(rec), sizeof(rec));
        write_pod(out, source_frames_[i]);
        for (int j = 0; j < k_; ++j) write_pod(out, sem_indices_[i * k_ + j]);
        for (int j = 0; j < k_; ++j) write_pod(out, static_cast<float>(sem_probs_[i * k_ + j]));
    }
}

GaussianMap GaussianMap::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("map: cannot open " + path);
    if (read_pod<uint32_t>(in) != kMapMagic) throw std::runtime_error("map: bad magic");
    if (read_pod<uint32_t>(in) != kMapVersion) throw std::runtime_error("map: bad version");
    uint64_t n = read_pod<uint64_t>(in);
    uint32_t k = read_pod<uint32_t>(in);
    uint32_t m = read_pod<uint32_t>(in);
    GaussianMap map(static_cast<int>(k), static_cast<int>(m));
    for (uint64_t i = 0; i < n; ++i) {
        float rec[8];
        in.read(reinterpret_cast<char*>(rec), sizeof(rec));
        if (!in) throw std::runtime_error("map: truncated file");
        SemanticGaussian g;
        g.center = Vec3(rec[0], rec[1], rec[2]);
        g.log_radius = rec[3];
        g.opacity_logit = rec[4];
        g.color = Vec3(rec[5], rec[6], rec[7]);
        g.source_frame = read_pod<uint32_t>(in);
        g.sem.indices.resize(k);
        g.sem.probs.resize(k);
        for (uint32_t j = 0; j < k; ++j) g.sem.indices[j] = read_pod<uint16_t>(in);
        for (uint32_t j = 0; j < k; ++j) g.sem.probs[j] = read_pod<float>(in);
        map.add(g);
    }
    return map;
}

void GaussianMap::export_ply(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("map: cannot write " + path);
    out << "ply\nformat ascii 1.0\nelement vertex " << size() << "\n"
        << "property float x\nproperty float y\nproperty float z\n"
        << "property uchar red\nproperty uchar green\nproperty uchar blue\n"
        << "property int class_id\nend_header\n";
    for (size_t i = 0; i < size(); ++i) {
        SemanticGaussian g = get(i);
        auto byte = [](double v) { return std::clamp(static_cast<int>(v * 255.0 + 0.5), 0, 255); };
        out << g.center.x() << " " << g.center.y() << " " << g.center.z() << " " << byte(g.color.x())
            << " " << byte(g.color.y()) << " " << byte(g.color.z()) << " " << g.sem.argmax_class()
            << "\n";
    }
}

size_t densify(GaussianMap& map, const Frame& frame, const RenderOutput& render,
               const CameraModel& camera, const DensifyConfig& cfg) {
    if (render.width != frame.width || render.height != frame.height)
        throw std::invalid_argument("densify: render/frame resolution mismatch");

    // Median |rendered - observed| depth over explained pixels with valid depth.
    std::vector<double> errors;
    errors.reserve(frame.pixel_count() / 4);
    for (int y = 0; y < frame.height; ++y) {
        for (int x = 0; x < frame.width; ++x) {
            float gt = frame.depth_at(x, y);
            if (gt <= 0.0f) continue;
            if (render.silhouette_at(x, y) < cfg.silhouette_threshold) continue;
            errors.push_back(std::abs(render.depth_at(x, y) - gt));
        }
    }
    double median_error = 0.0;
    if (!errors.empty()) {
        size_t mid = errors.size() / 2;
        std::nth_element(errors.begin(), errors.begin() + mid, errors.end());
        median_error = errors[mid];
    }
    const double depth_threshold = cfg.depth_error_factor * median_error;

    size_t added = 0;
    for (int y = 0; y < frame.height; y += cfg.stride) {
        for (int x = 0; x < frame.width; x += cfg.stride) {
            float gt = frame.depth_at(x, y);
            if (gt <= 0.0f) continue;
            bool uncovered = render.silhouette_at(x, y) < cfg.silhouette_threshold;
            bool depth_off =
                !uncovered && std::abs(render.depth_at(x, y) - gt) > depth_threshold;
            if (!uncovered && !depth_off) continue;

            SemanticGaussian g;
            Vec3 ray = camera.pixel_ray(x, y);
            g.center = frame.pose.to_world(ray * static_cast<double>(gt));
            g.log_radius = std::log(static_cast<double>(gt) / camera.fy);
            g.opacity_logit = cfg.opacity_init_logit;
            const float* rgb = frame.rgb_at(x, y);
            g.color = Vec3(rgb[0], rgb[1], rgb[2]);
            g.sem = sparse_from_dense(std::span<const float>(frame.sem_at(x, y), frame.channels()),
                                      map.k());
            g.source_frame = static_cast<uint32_t>(frame.timestamp);
            map.add(g);
            ++added;
        }
    }
    return added;
}

}  // namespace splatmap
