#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

#include "splatmap/episode.hpp"
#include "splatmap/frame_io.hpp"

using namespace splatmap;

namespace {

int cmd_run(const std::string& config_path, const std::string& mode, int64_t seed,
            const std::string& out_dir) {
    RunConfig cfg = RunConfig::load(config_path);
    if (!mode.empty()) {
        if (mode == "active") cfg.mode = RunConfig::Mode::Active;
        else if (mode == "replay") cfg.mode = RunConfig::Mode::Replay;
        else if (mode == "random") cfg.mode = RunConfig::Mode::Random;
        else throw std::runtime_error("unknown mode '" + mode + "'");
    }
    if (seed >= 0) {
        cfg.seed_noise = static_cast<uint64_t>(seed);
        cfg.seed_sampling = static_cast<uint64_t>(seed) + 1;
        cfg.seed_rrt = static_cast<uint64_t>(seed) + 2;
    }
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    EpisodeResult res = run_episode(cfg);
    std::cout << "steps " << res.steps << "\n"
              << "termination " << res.termination << "\n"
              << "map_size " << res.map_size << "\n"
              << "miou_pct " << res.metrics.miou_pct << "\n"
              << "completeness_ratio_pct " << res.metrics.completeness_ratio_pct << "\n"
              << "psnr_db " << res.metrics.psnr_db << "\n"
              << "summary " << res.summary_path << "\n";
    return 0;
}

int cmd_eval(const std::string& map_path, const std::string& scene_path, int views, int64_t seed,
             const std::string& out_dir) {
    GaussianMap map = GaussianMap::load(map_path);
    SceneSpec scene = SceneSpec::load(scene_path);
    CameraModel camera = CameraModel::desk_default();
    uint64_t s = seed >= 0 ? static_cast<uint64_t>(seed) : 4;

    std::vector<Frame> frames;
    std::vector<RenderOutput> renders;
    auto rng = make_rng(s, 0xe5a1);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    int guard = 0;
    while (static_cast<int>(frames.size()) < views && guard++ < 10000) {
        Vec3 p(scene.bounds.min.x() + uni(rng) * scene.bounds.extent().x(),
               0.7 + uni(rng) * std::min(1.2, scene.bounds.extent().y() - 1.0),
               scene.bounds.min.z() + uni(rng) * scene.bounds.extent().z());
        if (!scene.is_free(p, 0.25)) continue;
        double yaw = 2.0 * M_PI * uni(rng);
        Frame gt = raycast_frame(scene, camera, look_at(p, p + Vec3(std::cos(yaw), 0, std::sin(yaw))));
        gt.timestamp = static_cast<int>(frames.size());
        frames.push_back(std::move(gt));
    }
    for (const Frame& f : frames) renders.push_back(render(map, camera, f.pose));

    MetricReport rep = merge_reports(semantic_metrics(renders, frames),
                                     geometric_metrics(map, scene, 12000, s),
                                     photometric_metrics(renders, frames));
    std::cout << rep.to_json() << "\n";
    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        rep.save_json((std::filesystem::path(out_dir) / "metrics.json").string());
        rep.save_class_csv((std::filesystem::path(out_dir) / "per_class.csv").string());
    }
    return 0;
}

int cmd_bench(int splats, int classes, int k, int renders) {
    BenchReport rep = benchmark_sparse_render(splats, classes, k, renders);
    std::cout << rep.to_json() << "\n";
    return 0;
}

int cmd_export_ply(const std::string& map_path, std::string out_path) {
    GaussianMap map = GaussianMap::load(map_path);
    if (out_path.empty()) out_path = map_path + ".ply";
    map.export_ply(out_path);
    std::cout << "wrote " << out_path << " (" << map.size() << " splats)\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Active semantic splat mapping"};
    app.require_subcommand(1);

    std::string config_path, mode, out_dir;
    int64_t seed = -1;
    auto* run = app.add_subcommand("run", "Run a mapping episode from a config");
    run->add_option("--config", config_path, "Run config JSON")->required();
    run->add_option("--mode", mode, "Override mode: active|replay|random");
    run->add_option("--seed", seed, "Override noise/sampling/planner seeds");
    run->add_option("--out", out_dir, "Override output directory");

    std::string map_path, scene_path;
    int views = 12;
    auto* eval = app.add_subcommand("eval", "Evaluate a saved map against a scene");
    eval->add_option("--map", map_path, "Map binary")->required();
    eval->add_option("--scene", scene_path, "Scene spec JSON")->required();
    eval->add_option("--views", views, "Held-out view count");
    eval->add_option("--seed", seed, "Evaluation seed");
    eval->add_option("--out", out_dir, "Directory for metrics artifacts");

    int splats = 10000, classes = 102, k = 16, renders = 50;
    auto* bench = app.add_subcommand("bench-render", "Time sparse vs dense semantic rendering");
    bench->add_option("--splats", splats, "Splat count");
    bench->add_option("--classes", classes, "Class count");
    bench->add_option("--k", k, "Sparse entries per splat");
    bench->add_option("--renders", renders, "Renders per timing pass");

    std::string ply_out;
    auto* ply = app.add_subcommand("export-ply", "Export a map binary as ASCII PLY");
    ply->add_option("--map", map_path, "Map binary")->required();
    ply->add_option("--out", ply_out, "Output path (default: <map>.ply)");

    CLI11_PARSE(app, argc, argv);
    try {
        if (run->parsed()) return cmd_run(config_path, mode, seed, out_dir);
        if (eval->parsed()) return cmd_eval(map_path, scene_path, views, seed, out_dir);
        if (bench->parsed()) return cmd_bench(splats, classes, k, renders);
        if (ply->parsed()) return cmd_export_ply(map_path, ply_out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
