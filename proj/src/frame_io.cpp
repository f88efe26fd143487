#include "splatmap/frame_io.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "png_io.hpp"

namespace splatmap {

namespace fs = std::filesystem;

namespace {
constexpr int kTopK = 8;

std::string frame_stem(const std::string& dir, int index) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%05d", index);
    return (fs::path(dir) / buf).string();
}
}  // namespace

void export_frame(const std::string& dir, int index, const Frame& frame) {
    fs::create_directories(dir);
    const std::string stem = frame_stem(dir, index);

    std::vector<uint8_t> rgb(frame.rgb.size());
    for (size_t i = 0; i < frame.rgb.size(); ++i)
        rgb[i] = static_cast<uint8_t>(std::clamp(frame.rgb[i], 0.0f, 1.0f) * 255.0f + 0.5f);
    write_rgb_png(stem + ".rgb.png", frame.width, frame.height, rgb);

    {
        std::ofstream out(stem + ".depth.bin", std::ios::binary);
        if (!out) throw std::runtime_error("frame_io: cannot write depth for " + stem);
        out.write(reinterpret_cast<const char*>(frame.depth.data()),
                  static_cast<std::streamsize>(frame.depth.size() * sizeof(float)));
    }

    {
        std::ofstream out(stem + ".sem.bin", std::ios::binary);
        if (!out) throw std::runtime_error("frame_io: cannot write semantics for " + stem);
        const int C = frame.channels();
        std::vector<int> order(C);
        for (int i = 0; i < frame.pixel_count(); ++i) {
            const float* p = &frame.sem[static_cast<size_t>(i) * C];
            std::iota(order.begin(), order.end(), 0);
            int take = std::min(kTopK, C);
            std::partial_sort(order.begin(), order.begin() + take, order.end(), [&](int a, int b) {
                if (p[a] != p[b]) return p[a] > p[b];
                return a < b;
            });
            float total = 0;
            for (int j = 0; j < take; ++j) total += p[order[j]];
            for (int j = 0; j < kTopK; ++j) {
                uint16_t idx = j < take ? static_cast<uint16_t>(order[j]) : 0;
                float prob = 0.0f;
                if (j < take && total > 0) prob = p[order[j]] / total;
                if (j == 0 && total <= 0) prob = 1.0f;  // degenerate pixel
                out.write(reinterpret_cast<const char*>(&idx), sizeof(idx));
                out.write(reinterpret_cast<const char*>(&prob), sizeof(prob));
            }
        }
    }
}

void append_pose(const std::string& dir, const Pose& pose) {
    fs::create_directories(dir);
    std::ofstream out(fs::path(dir) / "poses.txt", std::ios::app);
    if (!out) throw std::runtime_error("frame_io: cannot write poses.txt");
    Mat4 m = pose.matrix();
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) out << m(r, c) << (r == 3 && c == 3 ? "" : " ");
    out << "\n";
}

size_t replay_frame_count(const std::string& dir) {
    size_t count = 0;
    while (fs::exists(frame_stem(dir, static_cast<int>(count)) + ".rgb.png")) ++count;
    return count;
}

std::vector<Frame> load_replay(const std::string& dir, int num_classes) {
    std::ifstream poses(fs::path(dir) / "poses.txt");
    if (!poses) throw std::runtime_error("frame_io: missing poses.txt in " + dir);
    std::vector<Pose> pose_list;
    Mat4 m;
    while (true) {
        bool ok = true;
        for (int r = 0; r < 4 && ok; ++r)
            for (int c = 0; c < 4 && ok; ++c)
                if (!(poses >> m(r, c))) ok = false;
        if (!ok) break;
        pose_list.push_back(Pose::from_matrix(m));
    }

    std::vector<Frame> frames;
    const size_t count = replay_frame_count(dir);
    if (pose_list.size() < count)
        throw std::runtime_error("frame_io: poses.txt has fewer entries than frames");
    for (size_t i = 0; i < count; ++i) {
        const std::string stem = frame_stem(dir, static_cast<int>(i));
        Frame f;
        int w = 0, h = 0;
        std::vector<uint8_t> rgb;
        read_rgb_png(stem + ".rgb.png", w, h, rgb);
        f.width = w;
        f.height = h;
        f.num_classes = num_classes;
        f.pose = pose_list[i];
        f.timestamp = static_cast<int>(i);
        f.allocate();
        for (size_t j = 0; j < rgb.size(); ++j) f.rgb[j] = rgb[j] / 255.0f;

        {
            std::ifstream in(stem + ".depth.bin", std::ios::binary);
            if (!in) throw std::runtime_error("frame_io: missing depth for " + stem);
            in.read(reinterpret_cast<char*>(f.depth.data()),
                    static_cast<std::streamsize>(f.depth.size() * sizeof(float)));
            if (!in) throw std::runtime_error("frame_io: truncated depth for " + stem);
        }
        {
            std::ifstream in(stem + ".sem.bin", std::ios::binary);
            if (!in) throw std::runtime_error("frame_io: missing semantics for " + stem);
            const int C = f.channels();
            for (int px = 0; px < f.pixel_count(); ++px) {
                float* dst = &f.sem[static_cast<size_t>(px) * C];
                double total = 0;
                uint16_t idx[kTopK];
                float prob[kTopK];
                for (int j = 0; j < kTopK; ++j) {
                    in.read(reinterpret_cast<char*>(&idx[j]), sizeof(uint16_t));
                    in.read(reinterpret_cast<char*>(&prob[j]), sizeof(float));
                }
                if (!in) throw std::runtime_error("frame_io: truncated semantics for " + stem);
                for (int j = 0; j < kTopK; ++j) {
                    if (idx[j] >= C)
                        throw std::runtime_error("frame_io: class index out of range in " + stem);
                    dst[idx[j]] += prob[j];
                    total += prob[j];
                }
                if (total > 0)
                    for (int c = 0; c < C; ++c) dst[c] = static_cast<float>(dst[c] / total);
                else
                    dst[f.unknown_class()] = 1.0f;
            }
        }
        frames.push_back(std::move(f));
    }
    return frames;
}

}  // namespace splatmap
