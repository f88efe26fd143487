#pragma once

#include <string>

#include "splatmap/evaluator.hpp"
#include "splatmap/explorer.hpp"
#include "splatmap/mapper.hpp"
#include "splatmap/path_planner.hpp"
#include "splatmap/scene_sim.hpp"

namespace splatmap {

/// Everything an episode needs, loadable from JSON (all keys optional except
/// the input source; see docs/config_schema.md).
struct RunConfig {
    enum class Mode { Active, Replay, Random };
    Mode mode = Mode::Active;
    std::string scene_path;  // exactly one of scene_path / replay_dir
    std::string replay_dir;
    std::string out_dir = "run_out";

    int width = 160, height = 120;
    double vfov_deg = 60.0, hfov_deg = 90.0;

    int k = 16;
    int num_classes = 32;

    LossWeights weights;
    SemanticNoiseModel noise;

    SamplingSchedule coarse = SamplingSchedule::coarse();
    SamplingSchedule fine = SamplingSchedule::fine();

    double voxel_size = 0.05;
    double collision_buffer = 0.20;
    int rrt_max_iterations = 5000;
    double rrt_step = 0.20;
    double score_scale = 0.25;
    double waypoint_spacing = 0.25;

    int step_budget = 240;
    int eval_cadence = 10;
    int eval_samples = 5000;
    int eval_views = 12;
    int final_eval_samples = 12000;
    int checkpoint_every = 0;

    MapperConfig mapper;

    uint64_t seed_noise = 1, seed_sampling = 2, seed_rrt = 3, seed_eval = 4;

    CameraModel camera() const { return CameraModel::from_fov(width, height, vfov_deg, hfov_deg); }
    void validate() const;
    std::string to_json() const;
    static RunConfig from_json(const std::string& text);
    static RunConfig load(const std::string& path);
    void save(const std::string& path) const;
};

struct EpisodeResult {
    MetricReport metrics;
    std::string termination;
    int steps = 0;
    size_t map_size = 0;
    double surface_agreement = 0.0;
    std::vector<std::pair<int, double>> completeness_curve;  // (step, ratio %)
    std::string summary_path;
};

/// Runs the observe -> integrate -> map -> plan -> move loop until the step
/// budget runs out or the candidate pool is exhausted, then evaluates against
/// held-out views and writes all artifacts into out_dir.
EpisodeResult run_episode(const RunConfig& config);

struct BenchReport {
    double sparse_ms = 0.0;
    double dense_ms = 0.0;
    double ratio = 0.0;
    bool degenerate = false;
    int splats = 0, classes = 0, k = 0, renders = 0;
    std::string to_json() const;
};

/// Times the sparse semantic render path against the dense per-splat
/// representation on the same synthetic map and pose.
BenchReport benchmark_sparse_render(int splats, int num_classes, int k, int renders = 50,
                                    uint64_t seed = 7);

}  // namespace splatmap
