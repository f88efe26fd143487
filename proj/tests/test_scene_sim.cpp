#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"
#include "splatmap/scene_sim.hpp"

using namespace splatmap;

namespace {

SceneSpec box_room() {
    SceneSpec s;
    s.bounds.min = Vec3(0, 0, 0);
    s.bounds.max = Vec3(4, 3, 4);
    s.num_classes = 8;
    s.floor_class = 0;
    s.ceiling_class = 1;
    s.wall_class = 2;
    // Tiny fourth-class marker tucked into the origin corner, outside every
    // camera frustum used below; scenes need at least 4 distinct class ids.
    ScenePrimitive marker;
    marker.kind = ScenePrimitive::Kind::Box;
    marker.box_min = Vec3(0.01, 0.01, 0.01);
    marker.box_max = Vec3(0.05, 0.05, 0.05);
    marker.class_id = 3;
    s.primitives.push_back(marker);
    s.validate();
    return s;
}

}  // namespace

TEST_CASE("perpendicular wall gives exact center depth") {
    SceneSpec s = box_room();
    CameraModel cam = CameraModel::from_fov(32, 24, 60, 80);
    // Camera at room center looking +x toward the wall 2 m away.
    Pose pose = look_at(Vec3(2, 1.5, 2), Vec3(4, 1.5, 2));
    Frame f = raycast_frame(s, cam, pose);
    // Every pixel on a fronto-parallel wall has z-depth equal to the distance.
    CHECK(f.depth_at(cam.width / 2, cam.height / 2) == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(f.depth_at(0, 0) == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(f.label_at(cam.width / 2, cam.height / 2) == s.wall_class);
}

TEST_CASE("hit pixels carry one-hot class") {
    SceneSpec s = box_room();
    ScenePrimitive pr;
    pr.kind = ScenePrimitive::Kind::Sphere;
    pr.center = Vec3(3, 1.5, 2);
    pr.radius = 0.4;
    pr.class_id = 7;
    pr.color = Vec3(1, 0, 0);
    s.primitives.push_back(pr);
    s.validate();

    CameraModel cam = CameraModel::from_fov(16, 16, 50, 50);
    Pose pose = look_at(Vec3(1, 1.5, 2), Vec3(3, 1.5, 2));
    Frame f = raycast_frame(s, cam, pose);
    int cx = cam.width / 2, cy = cam.height / 2;
    CHECK(f.label_at(cx, cy) == 7);
    const float* sem = f.sem_at(cx, cy);
    CHECK(sem[7] == doctest::Approx(1.0));
    double sum = 0;
    for (int m = 0; m < f.channels(); ++m) sum += sem[m];
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-7));
    // Center ray is half a pixel off-axis, so z-depth sits just above 1.6.
    CHECK(f.depth_at(cx, cy) == doctest::Approx(2.0 - 0.4).epsilon(0.01));
}

TEST_CASE("empty room render matches per-pixel intersection oracle") {
    SceneSpec s = box_room();
    CameraModel cam = CameraModel::from_fov(40, 30, 60, 80);
    Pose pose = look_at(Vec3(1.2, 1.1, 2.9), Vec3(3.5, 1.0, 0.7));
    Frame f = raycast_frame(s, cam, pose);
    for (int y = 0; y < cam.height; ++y) {
        for (int x = 0; x < cam.width; ++x) {
            CHECK(f.depth_at(x, y) > 0.0f);
            int label = f.label_at(x, y);
            bool background = label == s.floor_class || label == s.ceiling_class ||
                              label == s.wall_class;
            CHECK(background);
            auto oracle = oracles::raycast_depth(s, pose.t, pose.R * cam.pixel_ray(x, y));
            REQUIRE(oracle.has_value());
            CHECK(std::abs(f.depth_at(x, y) - oracle->first) < 1e-6);
        }
    }
}

TEST_CASE("raycast depth matches analytic oracle on random rays") {
    SceneSpec s = make_random_room(77, 8, 16);
    CameraModel cam = CameraModel::desk_default();
    Pose pose = look_at(s.bounds.center(), s.bounds.center() + Vec3(1, -0.1, 0.4));
    Frame f = raycast_frame(s, cam, pose);

    auto rng = make_rng(123, 9);
    std::uniform_int_distribution<int> ux(0, cam.width - 1), uy(0, cam.height - 1);
    for (int i = 0; i < 1000; ++i) {
        int x = ux(rng), y = uy(rng);
        auto oracle = oracles::raycast_depth(s, pose.t, pose.R * cam.pixel_ray(x, y));
        REQUIRE(oracle.has_value());
        CHECK(std::abs(f.depth_at(x, y) - oracle->first) < 1e-6);
        CHECK(f.label_at(x, y) == oracle->second);
    }
}

TEST_CASE("camera inside a solid is rejected") {
    SceneSpec s = box_room();
    ScenePrimitive pr;
    pr.kind = ScenePrimitive::Kind::Box;
    pr.box_min = Vec3(1, 0, 1);
    pr.box_max = Vec3(2, 1, 2);
    pr.class_id = 5;
    s.primitives.push_back(pr);
    CameraModel cam = CameraModel::from_fov(8, 8, 60, 60);
    CHECK_THROWS_WITH(raycast_frame(s, cam, look_at(Vec3(1.5, 0.5, 1.5), Vec3(3, 1, 3))),
                      "camera in collision");
    CHECK_THROWS_WITH(raycast_frame(s, cam, look_at(Vec3(-1, 1, 1), Vec3(3, 1, 3))),
                      "camera in collision");
}

TEST_CASE("noiseless noise model is the identity") {
    SceneSpec s = make_random_room(3, 5, 12);
    CameraModel cam = CameraModel::from_fov(32, 24, 60, 80);
    Frame f = raycast_frame(s, cam, look_at(s.bounds.center(), s.bounds.center() + Vec3(1, 0, 0.2)));
    SemanticNoiseModel noise;  // flip 0, blur 0, concentration inf
    Frame g = apply_semantic_noise(f, noise, 42);
    CHECK(g.sem == f.sem);
    CHECK(g.rgb == f.rgb);
}

TEST_CASE("flip_rate one flips every argmax") {
    Frame f;
    f.width = 20;
    f.height = 20;
    f.num_classes = 2;
    f.allocate();
    for (int i = 0; i < f.pixel_count(); ++i) f.sem[static_cast<size_t>(i) * 3 + (i % 2)] = 1.0f;
    SemanticNoiseModel noise;
    noise.flip_rate = 1.0;
    Frame g = apply_semantic_noise(f, noise, 7);
    for (int y = 0; y < f.height; ++y)
        for (int x = 0; x < f.width; ++x) CHECK(g.label_at(x, y) != f.label_at(x, y));
}

TEST_CASE("measured flip fraction tracks flip_rate") {
    Frame f;
    f.width = 400;
    f.height = 250;  // 1e5 pixels
    f.num_classes = 6;
    f.allocate();
    for (int i = 0; i < f.pixel_count(); ++i) f.sem[static_cast<size_t>(i) * 7 + (i % 6)] = 1.0f;
    SemanticNoiseModel noise;
    noise.flip_rate = 0.1;
    Frame g = apply_semantic_noise(f, noise, 2024);
    int flipped = 0;
    for (int y = 0; y < f.height; ++y)
        for (int x = 0; x < f.width; ++x)
            if (g.label_at(x, y) != f.label_at(x, y)) ++flipped;
    double fraction = static_cast<double>(flipped) / f.pixel_count();
    CHECK(fraction == doctest::Approx(0.1).epsilon(0.1));
    CHECK(std::abs(fraction - 0.1) < 0.01);
}

TEST_CASE("noise keeps rows on the simplex") {
    SceneSpec s = make_random_room(5, 6, 14);
    CameraModel cam = CameraModel::from_fov(48, 36, 60, 80);
    Frame f = raycast_frame(s, cam, look_at(s.bounds.center(), s.bounds.center() + Vec3(0.5, -0.2, 1)));
    SemanticNoiseModel noise;
    noise.flip_rate = 0.15;
    noise.boundary_blur_px = 2;
    noise.concentration = 12.0;
    Frame g = apply_semantic_noise(f, noise, 99);
    CHECK(g.valid(1e-5));
}

TEST_CASE("identical seeds give bit-identical frames") {
    SceneSpec s = make_random_room(11, 7, 15);
    CameraModel cam = CameraModel::from_fov(40, 30, 60, 80);
    Frame f = raycast_frame(s, cam, look_at(s.bounds.center(), s.bounds.center() + Vec3(1, 0, 0)));
    SemanticNoiseModel noise;
    noise.flip_rate = 0.2;
    noise.boundary_blur_px = 1;
    noise.concentration = 25.0;
    Frame a = apply_semantic_noise(f, noise, 31337);
    Frame b = apply_semantic_noise(f, noise, 31337);
    CHECK(a.sem == b.sem);
    Frame c = apply_semantic_noise(f, noise, 31338);
    CHECK(a.sem != c.sem);
}

TEST_CASE("boundary blur mixes the two adjacent labels") {
    Frame f;
    f.width = 8;
    f.height = 4;
    f.num_classes = 4;
    f.allocate();
    for (int y = 0; y < f.height; ++y)
        for (int x = 0; x < f.width; ++x) f.sem_at(x, y)[x < 4 ? 0 : 1] = 1.0f;
    SemanticNoiseModel noise;
    noise.boundary_blur_px = 1;
    Frame g = apply_semantic_noise(f, noise, 5);
    // Pixels touching the edge become an even mix of both labels.
    const float* p = g.sem_at(3, 2);
    CHECK(p[0] == doctest::Approx(0.5));
    CHECK(p[1] == doctest::Approx(0.5));
    // Far pixels stay one-hot.
    CHECK(g.sem_at(0, 0)[0] == doctest::Approx(1.0));
}
