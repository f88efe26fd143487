#include "splatmap/episode.hpp"

#include <chrono>
#include <deque>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "splatmap/frame_io.hpp"

namespace splatmap {

namespace fs = std::filesystem;
using nlohmann::json;

void RunConfig::validate() const {
    const bool has_scene = !scene_path.empty();
    const bool has_replay = !replay_dir.empty();
    if (has_scene == has_replay)
        throw std::runtime_error("config: exactly one of scene/replay_dir must be set");
    if (has_scene && !fs::exists(scene_path))
        throw std::runtime_error("config: scene file does not exist: " + scene_path);
    if (has_replay && !fs::exists(replay_dir))
        throw std::runtime_error("config: replay directory does not exist: " + replay_dir);
    if (mode != Mode::Replay && has_replay)
        throw std::runtime_error("config: replay_dir requires mode=replay");
    if (mode == Mode::Replay && !has_replay)
        throw std::runtime_error("config: mode=replay requires replay_dir");
    if (step_budget <= 0 || eval_cadence <= 0 || eval_views <= 0)
        throw std::runtime_error("config: budgets must be positive");
    if (k < 1 || k > num_classes + 1) throw std::runtime_error("config: k out of range");
    noise.validate();
    camera();  // validates resolution and FOV
}

namespace {

std::string mode_name(RunConfig::Mode m) {
    switch (m) {
        case RunConfig::Mode::Active: return "active";
        case RunConfig::Mode::Replay: return "replay";
        default: return "random";
    }
}

RunConfig::Mode mode_of(const std::string& s) {
    if (s == "active") return RunConfig::Mode::Active;
    if (s == "replay") return RunConfig::Mode::Replay;
    if (s == "random") return RunConfig::Mode::Random;
    throw std::runtime_error("config: unknown mode '" + s + "'");
}

json schedule_json(const SamplingSchedule& s) {
    return {{"v1", s.v1}, {"v2", s.v2}, {"heights", s.heights}};
}

void schedule_from(const json& j, SamplingSchedule& s) {
    s.v1 = j.value("v1", s.v1);
    s.v2 = j.value("v2", s.v2);
    if (j.contains("heights")) s.heights = j.at("heights").get<std::vector<double>>();
}

}  // namespace

std::string RunConfig::to_json() const {
    json j;
    j["mode"] = mode_name(mode);
    j["scene"] = scene_path;
    j["replay_dir"] = replay_dir;
    j["out_dir"] = out_dir;
    j["camera"] = {{"width", width}, {"height", height}, {"vfov_deg", vfov_deg}, {"hfov_deg", hfov_deg}};
    j["map"] = {{"k", k}, {"num_classes", num_classes}};
    j["loss"] = {{"lambda_hd", weights.lambda_hd}, {"lambda_cos", weights.lambda_cos},
                 {"use_hd", weights.use_hd},       {"use_cos", weights.use_cos},
                 {"use_kl", weights.use_kl},       {"mask_k", weights.mask_k}};
    j["noise"] = {{"flip_rate", noise.flip_rate},
                  {"boundary_blur_px", noise.boundary_blur_px},
                  {"concentration", std::isfinite(noise.concentration) ? json(noise.concentration)
                                                                       : json(nullptr)}};
    j["schedule"] = {{"coarse", schedule_json(coarse)}, {"fine", schedule_json(fine)}};
    j["explorer"] = {{"voxel_size", voxel_size}, {"score_scale", score_scale}};
    j["planner"] = {{"collision_buffer", collision_buffer},
                    {"rrt_max_iterations", rrt_max_iterations},
                    {"rrt_step", rrt_step},
                    {"waypoint_spacing", waypoint_spacing}};
    j["budget"] = {{"steps", step_budget},
                   {"eval_cadence", eval_cadence},
                   {"eval_samples", eval_samples},
                   {"eval_views", eval_views},
                   {"final_eval_samples", final_eval_samples},
                   {"checkpoint_every", checkpoint_every}};
    j["mapper"] = {{"keyframe_count", mapper.keyframe_count},
                   {"iters_per_step", mapper.iters_per_step},
                   {"keyframe_stride", mapper.keyframe_stride},
                   {"prune_every", mapper.prune_every},
                   {"prune_opacity", mapper.prune_opacity},
                   {"densify_stride", mapper.densify.stride},
                   {"lr_center", mapper.adam.lr_center},
                   {"lr_radius", mapper.adam.lr_radius},
                   {"lr_opacity", mapper.adam.lr_opacity},
                   {"lr_color", mapper.adam.lr_color},
                   {"lr_sem", mapper.adam.lr_sem}};
    j["seeds"] = {{"noise", seed_noise}, {"sampling", seed_sampling}, {"rrt", seed_rrt},
                  {"eval", seed_eval}};
    return j.dump(2);
}

RunConfig RunConfig::from_json(const std::string& text) {
    json j = json::parse(text);
    RunConfig c;
    if (j.contains("mode")) c.mode = mode_of(j.at("mode"));
    c.scene_path = j.value("scene", "");
    c.replay_dir = j.value("replay_dir", "");
    c.out_dir = j.value("out_dir", c.out_dir);
    if (j.contains("camera")) {
        const auto& cam = j.at("camera");
        c.width = cam.value("width", c.width);
        c.height = cam.value("height", c.height);
        c.vfov_deg = cam.value("vfov_deg", c.vfov_deg);
        c.hfov_deg = cam.value("hfov_deg", c.hfov_deg);
    }
    if (j.contains("map")) {
        c.k = j.at("map").value("k", c.k);
        c.num_classes = j.at("map").value("num_classes", c.num_classes);
    }
    if (j.contains("loss")) {
        const auto& l = j.at("loss");
        c.weights.lambda_hd = l.value("lambda_hd", c.weights.lambda_hd);
        c.weights.lambda_cos = l.value("lambda_cos", c.weights.lambda_cos);
        c.weights.use_hd = l.value("use_hd", c.weights.use_hd);
        c.weights.use_cos = l.value("use_cos", c.weights.use_cos);
        c.weights.use_kl = l.value("use_kl", c.weights.use_kl);
        c.weights.mask_k = l.value("mask_k", c.k);
    }
    if (j.contains("noise")) {
        const auto& n = j.at("noise");
        c.noise.flip_rate = n.value("flip_rate", c.noise.flip_rate);
        c.noise.boundary_blur_px = n.value("boundary_blur_px", c.noise.boundary_blur_px);
        if (n.contains("concentration") && !n.at("concentration").is_null())
            c.noise.concentration = n.at("concentration");
    }
    if (j.contains("schedule")) {
        if (j.at("schedule").contains("coarse")) schedule_from(j.at("schedule").at("coarse"), c.coarse);
        if (j.at("schedule").contains("fine")) schedule_from(j.at("schedule").at("fine"), c.fine);
    }
    if (j.contains("explorer")) {
        c.voxel_size = j.at("explorer").value("voxel_size", c.voxel_size);
        c.score_scale = j.at("explorer").value("score_scale", c.score_scale);
    }
    if (j.contains("planner")) {
        const auto& p = j.at("planner");
        c.collision_buffer = p.value("collision_buffer", c.collision_buffer);
        c.rrt_max_iterations = p.value("rrt_max_iterations", c.rrt_max_iterations);
        c.rrt_step = p.value("rrt_step", c.rrt_step);
        c.waypoint_spacing = p.value("waypoint_spacing", c.waypoint_spacing);
    }
    if (j.contains("budget")) {
        const auto& b = j.at("budget");
        c.step_budget = b.value("steps", c.step_budget);
        c.eval_cadence = b.value("eval_cadence", c.eval_cadence);
        c.eval_samples = b.value("eval_samples", c.eval_samples);
        c.eval_views = b.value("eval_views", c.eval_views);
        c.final_eval_samples = b.value("final_eval_samples", c.final_eval_samples);
        c.checkpoint_every = b.value("checkpoint_every", c.checkpoint_every);
    }
    if (j.contains("mapper")) {
        const auto& m = j.at("mapper");
        c.mapper.keyframe_count = m.value("keyframe_count", c.mapper.keyframe_count);
        c.mapper.iters_per_step = m.value("iters_per_step", c.mapper.iters_per_step);
        c.mapper.keyframe_stride = m.value("keyframe_stride", c.mapper.keyframe_stride);
        c.mapper.prune_every = m.value("prune_every", c.mapper.prune_every);
        c.mapper.prune_opacity = m.value("prune_opacity", c.mapper.prune_opacity);
        c.mapper.densify.stride = m.value("densify_stride", c.mapper.densify.stride);
        c.mapper.adam.lr_center = m.value("lr_center", c.mapper.adam.lr_center);
        c.mapper.adam.lr_radius = m.value("lr_radius", c.mapper.adam.lr_radius);
        c.mapper.adam.lr_opacity = m.value("lr_opacity", c.mapper.adam.lr_opacity);
        c.mapper.adam.lr_color = m.value("lr_color", c.mapper.adam.lr_color);
        c.mapper.adam.lr_sem = m.value("lr_sem", c.mapper.adam.lr_sem);
    }
    if (j.contains("seeds")) {
        const auto& s = j.at("seeds");
        c.seed_noise = s.value("noise", c.seed_noise);
        c.seed_sampling = s.value("sampling", c.seed_sampling);
        c.seed_rrt = s.value("rrt", c.seed_rrt);
        c.seed_eval = s.value("eval", c.seed_eval);
    }
    if (!j.contains("loss") || !j.at("loss").contains("mask_k")) c.weights.mask_k = c.k;
    return c;
}

RunConfig RunConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return from_json(ss.str());
}

void RunConfig::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("config: cannot write " + path);
    out << to_json() << "\n";
}

namespace {

Pose travel_pose(const Vec3& position, const Vec3& motion, const Vec3& fallback_forward) {
    Vec3 fwd(motion.x(), 0.0, motion.z());
    if (fwd.norm() < 1e-6) fwd = Vec3(fallback_forward.x(), 0.0, fallback_forward.z());
    if (fwd.norm() < 1e-6) fwd = Vec3(1, 0, 0);
    fwd.normalize();
    return look_at(position, position + fwd);
}

std::vector<Vec3> discretize_path(const Path& path, double spacing) {
    std::vector<Vec3> points;
    for (size_t i = 1; i < path.waypoints.size(); ++i) {
        const Vec3& a = path.waypoints[i - 1];
        const Vec3& b = path.waypoints[i];
        double len = (b - a).norm();
        int n = std::max(1, static_cast<int>(std::ceil(len / spacing)));
        for (int s = 1; s <= n; ++s) points.push_back(a + (b - a) * (static_cast<double>(s) / n));
    }
    return points;
}

struct EpisodeLogs {
    std::ofstream trajectory;
    std::ofstream losses;
    std::ofstream metrics;
    std::ofstream candidates;
};

/// Shared mapping stack for every mode: exploration integration,
/// densification, keyframe bookkeeping and map optimization.
struct MappingStack {
    const RunConfig& cfg;
    CameraModel camera;
    GaussianMap map;
    AdamState adam;
    KeyframeDatabase db;
    MapperConfig mapper_cfg;

    explicit MappingStack(const RunConfig& c)
        : cfg(c),
          camera(c.camera()),
          map(c.k, c.num_classes),
          db(c.mapper.keyframe_stride),
          mapper_cfg(c.mapper) {
        mapper_cfg.weights = c.weights;
        if (mapper_cfg.weights.mask_k <= 0) mapper_cfg.weights.mask_k = c.k;
    }

    LossReport step(const Frame& obs) {
        RenderOutput pre = render(map, camera, obs.pose);
        densify(map, obs, pre, camera, mapper_cfg.densify);
        adam.ensure_size(map);
        db.maybe_add(obs);
        db.refresh_render_quality(map, camera, cfg.score_scale);
        std::vector<const Frame*> frames = {&obs};
        if (db.size() > 0) {
            auto selected = select_keyframes(db, obs, map, camera, mapper_cfg.keyframe_count,
                                             mapper_cfg);
            for (const auto* rec : selected)
                if (rec->frame.timestamp != obs.timestamp) frames.push_back(&rec->frame);
        }
        auto history = optimize_map(map, adam, frames, camera, mapper_cfg,
                                    mapper_cfg.iters_per_step);
        return history.empty() ? LossReport{} : history.back();
    }
};

}  // namespace

EpisodeResult run_episode(const RunConfig& config) {
    config.validate();
    const auto t_start = std::chrono::steady_clock::now();
    fs::create_directories(config.out_dir);
    fs::create_directories(fs::path(config.out_dir) / "images");

    EpisodeLogs logs;
    logs.trajectory.open(fs::path(config.out_dir) / "trajectory.txt");
    logs.losses.open(fs::path(config.out_dir) / "losses.csv");
    logs.metrics.open(fs::path(config.out_dir) / "metrics.jsonl");
    logs.candidates.open(fs::path(config.out_dir) / "candidates.jsonl");
    logs.losses << "step,photometric,depth,semantic,semantic_px,uncovered_px,map_size\n";

    MappingStack stack(config);
    const CameraModel camera = stack.camera;
    const CameraModel scoring_camera = camera.scaled(config.score_scale);

    // Input sources.
    SceneSpec scene;
    std::vector<Frame> replay;
    const bool simulated = config.mode != RunConfig::Mode::Replay;
    if (simulated) {
        scene = SceneSpec::load(config.scene_path);
        if (scene.num_classes != config.num_classes)
            throw std::runtime_error("config: num_classes does not match the scene");
        scene.save((fs::path(config.out_dir) / "scene.json").string());
    } else {
        replay = load_replay(config.replay_dir, config.num_classes);
    }

    ExplorationMap emap(simulated ? scene.bounds : Aabb{Vec3(-8, -8, -8), Vec3(8, 8, 8)},
                        config.voxel_size);
    CandidatePool pool;
    SamplingSchedule schedule = config.coarse;
    bool fine_stage = false;

    EpisodeResult result;
    result.termination = "budget";

    Pose pose;
    if (simulated) {
        Vec3 start(scene.bounds.center().x(), config.coarse.heights.front(),
                   scene.bounds.center().z());
        if (!scene.is_free(start, 0.25))
            throw std::runtime_error("episode: scene center is not free to spawn");
        auto rng = make_rng(config.seed_sampling, 0x51a27);
        std::uniform_real_distribution<double> uni(0.0, 1.0);
        double yaw = 2.0 * M_PI * uni(rng);
        pose = look_at(start, start + Vec3(std::cos(yaw), 0, std::sin(yaw)));
        // The agent occupies its spawn region; mark it free so the first
        // planning pass has a collision-free start.
        double m = config.collision_buffer + 0.15;
        emap.seed_free_region(Aabb{start - Vec3::Constant(m), start + Vec3::Constant(m)});
    }

    std::deque<Vec3> waypoints;
    Vec3 goal_direction = Vec3(1, 0, 0);
    auto selection_rng = make_rng(config.seed_sampling, 0x5e1ec7);

    int step = 0;
    for (; step < config.step_budget; ++step) {
        // --- observe ---
        Frame obs;
        if (simulated) {
            Frame gt = raycast_frame(scene, camera, pose);
            gt.timestamp = step;
            obs = apply_semantic_noise(gt, config.noise, splitmix64(config.seed_noise) + step);
        } else {
            if (step >= static_cast<int>(replay.size())) {
                result.termination = "replay complete";
                break;
            }
            obs = replay[step];
            obs.timestamp = step;
            pose = obs.pose;
        }

        logs.trajectory << step << " " << pose.t.x() << " " << pose.t.y() << " " << pose.t.z()
                        << " " << pose.R(0, 2) << " " << pose.R(1, 2) << " " << pose.R(2, 2)
                        << "\n";

        // --- integrate + map ---
        emap.integrate_frame(obs, camera);
        LossReport rep = stack.step(obs);
        logs.losses << step << "," << rep.photometric << "," << rep.depth << "," << rep.semantic
                    << "," << rep.semantic_px << "," << rep.uncovered_px << "," << stack.map.size()
                    << "\n";

        // --- periodic evaluation ---
        if (step % config.eval_cadence == 0 && simulated) {
            MetricReport geo = geometric_metrics(stack.map, scene, config.eval_samples,
                                                 config.seed_eval);
            result.completeness_curve.push_back({step, geo.completeness_ratio_pct});
            json rec = {{"step", step},
                        {"completeness_ratio_pct", geo.completeness_ratio_pct},
                        {"completeness_cm", geo.completeness_cm},
                        {"accuracy_cm", geo.accuracy_cm},
                        {"map_size", stack.map.size()},
                        {"free_voxels", emap.free_count()}};
            logs.metrics << rec.dump() << "\n";
        }

        if (config.checkpoint_every > 0 && step > 0 && step % config.checkpoint_every == 0) {
            fs::path ck = fs::path(config.out_dir) / "checkpoints";
            fs::create_directories(ck);
            stack.map.save((ck / ("map_" + std::to_string(step) + ".bin")).string());
        }

        // --- plan (active / random) ---
        bool stop_episode = false;
        if (simulated && waypoints.empty()) {
            bool planned = false;
            for (int attempt = 0; attempt < 4 && !planned; ++attempt) {
                pool.absorb(sample_candidates(emap, schedule));
                refresh_candidate_scores(pool.active(), stack.map, scoring_camera);
                pool.prune(scoring_camera);

                bool scored = !pool.active().empty() &&
                              combine_scores(pool.active(), pose.t);
                if (!scored) {
                    if (!fine_stage) {
                        fine_stage = true;
                        schedule = config.fine;
                        emap.reseed_changelog_with_free();
                        continue;  // resample on the fine lattice
                    }
                    result.termination = "pool exhausted";
                    break;
                }

                // Rank candidates (active) or shuffle uniformly (random).
                std::vector<CandidatePose>& active = pool.active();
                std::sort(active.begin(), active.end(),
                          [](const CandidatePose& a, const CandidatePose& b) {
                              if (a.i_total != b.i_total) return a.i_total > b.i_total;
                              return a.id < b.id;
                          });
                std::vector<size_t> order(active.size());
                std::iota(order.begin(), order.end(), 0u);
                if (config.mode == RunConfig::Mode::Random)
                    std::shuffle(order.begin(), order.end(), selection_rng);

                {
                    json rec;
                    rec["step"] = step;
                    rec["stage"] = fine_stage ? "fine" : "coarse";
                    rec["candidates"] = json::array();
                    for (const auto& c : active)
                        rec["candidates"].push_back({{"id", c.id},
                                                     {"pos", {c.position.x(), c.position.y(), c.position.z()}},
                                                     {"n_missing", c.n_missing},
                                                     {"entropy_sum", c.entropy_sum},
                                                     {"i_total", c.i_total}});
                    logs.candidates << rec.dump() << "\n";
                }

                InflatedGrid grid = inflate(emap, config.collision_buffer);
                for (size_t oi = 0; oi < order.size() && !planned; ++oi) {
                    const CandidatePose& cand = active[order[oi]];
                    if (config.mode == RunConfig::Mode::Active && cand.i_total <= 0.0) break;
                    PlanRequest req;
                    req.start = pose.t;
                    req.goal = cand.position;
                    req.collision_buffer = config.collision_buffer;
                    req.max_iterations = config.rrt_max_iterations;
                    req.step_length = config.rrt_step;
                    PlanResult pr = plan(grid, req, splitmix64(config.seed_rrt) + step + oi);
                    if (!pr.ok()) {
                        pool.mark_visited(cand.id);  // unreachable
                        continue;
                    }
                    auto points = discretize_path(*pr.path, config.waypoint_spacing);
                    waypoints.assign(points.begin(), points.end());
                    goal_direction = cand.direction;
                    pool.mark_visited(cand.id);
                    planned = true;
                }
                if (!planned) pool.prune(scoring_camera);  // drop freshly visited entries
            }
            if (!planned) {
                if (result.termination != "pool exhausted") result.termination = "planner exhausted";
                stop_episode = true;
            }
        }
        if (stop_episode) {
            ++step;  // this step's observation already happened
            break;
        }

        // --- move ---
        if (simulated && !waypoints.empty()) {
            Vec3 next = waypoints.front();
            waypoints.pop_front();
            Vec3 motion = next - pose.t;
            if (waypoints.empty())
                pose = look_at(next, next + goal_direction);
            else
                pose = travel_pose(next, motion, pose.R.col(2));
        }
    }
    result.steps = step;
    if (result.termination == "budget" && !simulated) result.termination = "replay complete";
    result.map_size = stack.map.size();

    // --- final evaluation ---
    std::vector<Frame> eval_frames;
    std::vector<RenderOutput> eval_renders;
    MetricReport semantic, geometric, photometric;
    if (simulated) {
        auto rng = make_rng(config.seed_eval, 0xe5a1);
        std::uniform_real_distribution<double> uni(0.0, 1.0);
        int guard = 0;
        while (static_cast<int>(eval_frames.size()) < config.eval_views && guard++ < 10000) {
            Vec3 p(scene.bounds.min.x() + uni(rng) * scene.bounds.extent().x(),
                   0.7 + uni(rng) * std::min(1.2, scene.bounds.extent().y() - 1.0),
                   scene.bounds.min.z() + uni(rng) * scene.bounds.extent().z());
            if (!scene.is_free(p, 0.25)) continue;
            double yaw = 2.0 * M_PI * uni(rng);
            double elev = deg_to_rad((uni(rng) - 0.5) * 60.0);
            Vec3 dir(std::cos(elev) * std::cos(yaw), std::sin(elev), std::cos(elev) * std::sin(yaw));
            Pose vp = look_at(p, p + dir);
            Frame gt = raycast_frame(scene, camera, vp);
            gt.timestamp = static_cast<int>(eval_frames.size());
            eval_frames.push_back(std::move(gt));
        }
        for (const Frame& f : eval_frames)
            eval_renders.push_back(render(stack.map, camera, f.pose));
        if (!eval_frames.empty()) {
            semantic = semantic_metrics(eval_renders, eval_frames);
            photometric = photometric_metrics(eval_renders, eval_frames);
        }
        geometric = geometric_metrics(stack.map, scene, config.final_eval_samples, config.seed_eval);
        result.surface_agreement =
            surface_label_agreement(stack.map, scene, config.final_eval_samples, config.seed_eval);
    } else {
        for (const Frame& f : replay) {
            eval_renders.push_back(render(stack.map, camera, f.pose));
        }
        if (!replay.empty()) {
            semantic = semantic_metrics(eval_renders, replay);
            photometric = photometric_metrics(eval_renders, replay);
        }
    }
    result.metrics = merge_reports(semantic, geometric, photometric);

    // --- artifacts ---
    const fs::path out(config.out_dir);
    stack.map.save((out / "map.bin").string());
    stack.map.export_ply((out / "map.ply").string());
    emap.export_voxels((out / "voxels.txt").string());
    result.metrics.save_json((out / "metrics.json").string());
    result.metrics.save_class_csv((out / "per_class.csv").string());
    config.save((out / "config.json").string());
    if (!eval_renders.empty()) {
        save_color_png(eval_renders[0], (out / "images" / "eval0.rgb.png").string());
        save_semantics_png(eval_renders[0], (out / "images" / "eval0.sem.png").string());
        std::vector<double> entropy(eval_renders[0].pixel_count());
        for (int i = 0; i < eval_renders[0].pixel_count(); ++i)
            entropy[i] = clipped_entropy(std::span<const double>(
                &eval_renders[0].sem[static_cast<size_t>(i) * eval_renders[0].channels],
                eval_renders[0].channels));
        save_entropy_png(entropy, eval_renders[0].width, eval_renders[0].height,
                         eval_renders[0].channels, (out / "images" / "eval0.entropy.png").string());
    }

    logs.trajectory.close();
    logs.losses.close();
    logs.metrics.close();
    logs.candidates.close();

    const auto t_end = std::chrono::steady_clock::now();
    {
        std::ofstream timing(out / "timing.log");
        timing << "wall_seconds "
               << std::chrono::duration_cast<std::chrono::milliseconds>(t_end - t_start).count() /
                      1000.0
               << "\n";
    }

    json summary;
    summary["mode"] = mode_name(config.mode);
    summary["termination"] = result.termination;
    summary["steps"] = result.steps;
    summary["map_size"] = result.map_size;
    summary["metrics"] = json::parse(result.metrics.to_json());
    summary["surface_agreement"] = result.surface_agreement;
    summary["completeness_curve"] = json::array();
    for (auto& [s, v] : result.completeness_curve)
        summary["completeness_curve"].push_back({{"step", s}, {"ratio_pct", v}});
    summary["config"] = json::parse(config.to_json());
    summary["artifacts"] = {"trajectory.txt", "losses.csv",  "metrics.jsonl", "candidates.jsonl",
                            "map.bin",        "map.ply",     "voxels.txt",    "metrics.json",
                            "per_class.csv",  "config.json"};
    if (simulated) summary["artifacts"].push_back("scene.json");

    result.summary_path = (out / "run_summary.json").string();
    std::ofstream sum(result.summary_path);
    sum << summary.dump(2) << "\n";
    return result;
}

std::string BenchReport::to_json() const {
    json j;
    j["sparse_ms"] = sparse_ms;
    j["dense_ms"] = dense_ms;
    j["ratio"] = ratio;
    j["degenerate"] = degenerate;
    j["splats"] = splats;
    j["classes"] = classes;
    j["k"] = k;
    j["renders"] = renders;
    return j.dump(2);
}

BenchReport benchmark_sparse_render(int splats, int num_classes, int k, int renders,
                                    uint64_t seed) {
    BenchReport rep;
    rep.splats = splats;
    rep.classes = num_classes;
    rep.k = k;
    rep.renders = renders;
    rep.degenerate = splats == 0 || k >= num_classes + 1;

    CameraModel camera = CameraModel::desk_default();
    Pose pose;  // identity, looking +z

    // Identical splats in both maps; only the semantic truncation differs.
    // The dense path is the full-width distribution (k = M+1) pushed through
    // the same tiled compositor. Deep translucent overlap so every pixel
    // composites a long depth stack, as in a mid-optimization room map.
    const int dense_k = num_classes + 1;
    GaussianMap sparse_map(std::min(k, dense_k), num_classes);
    GaussianMap dense_map(dense_k, num_classes);
    auto rng = make_rng(seed, 0xbe7c);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    for (int i = 0; i < splats; ++i) {
        SemanticGaussian g;
        double z = 1.0 + 2.5 * uni(rng);
        g.center = Vec3((uni(rng) - 0.5) * 1.6 * z, (uni(rng) - 0.5) * 1.0 * z, z);
        g.log_radius = std::log((6.0 + 4.0 * uni(rng)) * z / camera.fy);
        g.opacity_logit = -2.2 + 1.4 * uni(rng);
        g.color = Vec3(uni(rng), uni(rng), uni(rng));
        std::vector<float> dist(num_classes + 1, 0.0f);
        for (int j = 0; j < k; ++j)
            dist[static_cast<int>(uni(rng) * (num_classes + 1))] += static_cast<float>(uni(rng));
        dist[static_cast<int>(uni(rng) * num_classes)] += 1.0f;
        g.sem = sparse_from_dense(dist, sparse_map.k());
        sparse_map.add(g);
        g.sem = sparse_from_dense(dist, dense_k);
        dense_map.add(g);
    }

    RenderChannels ch;
    ch.color = false;
    ch.depth = false;
    ch.semantics = true;

    auto time_renders = [&](const GaussianMap& m) {
        render(m, camera, pose, ch);  // warmup
        auto t0 = std::chrono::steady_clock::now();
        for (int i = 0; i < renders; ++i) {
            RenderOutput out = render(m, camera, pose, ch);
            (void)out;
        }
        auto t1 = std::chrono::steady_clock::now();
        return std::chrono::duration_cast<std::chrono::microseconds>(t1 - t0).count() / 1000.0 /
               renders;
    };
    rep.sparse_ms = time_renders(sparse_map);
    rep.dense_ms = time_renders(dense_map);
    rep.ratio = rep.sparse_ms > 0 ? rep.dense_ms / rep.sparse_ms : 0.0;
    return rep;
}

}  // namespace splatmap
