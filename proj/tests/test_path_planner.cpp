#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <queue>

#include "splatmap/path_planner.hpp"

using namespace splatmap;

namespace {

ExplorationMap free_box(const Aabb& bounds, double voxel = 0.05) {
    ExplorationMap emap(bounds, voxel);
    emap.seed_free_region(bounds);
    return emap;
}

// Brute-force inflation oracle: scan the full neighborhood ball per voxel.
std::vector<uint8_t> inflate_oracle(const ExplorationMap& emap, double buffer) {
    const auto dims = emap.dims();
    const int r = static_cast<int>(std::ceil(buffer / emap.voxel_size()));
    const double r2 = (buffer / emap.voxel_size()) * (buffer / emap.voxel_size());
    std::vector<uint8_t> out(emap.voxel_count(), 0);
    for (int z = 0; z < dims.z(); ++z)
        for (int y = 0; y < dims.y(); ++y)
            for (int x = 0; x < dims.x(); ++x) {
                int id = emap.linear_index(x, y, z);
                if (emap.state(id) != VoxelState::Free) continue;
                bool blocked = false;
                for (int dz = -r; dz <= r && !blocked; ++dz)
                    for (int dy = -r; dy <= r && !blocked; ++dy)
                        for (int dx = -r; dx <= r && !blocked; ++dx) {
                            int nx = x + dx, ny = y + dy, nz = z + dz;
                            if (!emap.in_grid(nx, ny, nz)) continue;
                            if (emap.state(emap.linear_index(nx, ny, nz)) == VoxelState::Free)
                                continue;
                            if (dx * dx + dy * dy + dz * dz <= r2 + 1e-9) blocked = true;
                        }
                out[id] = blocked ? 0 : 1;
            }
    return out;
}

// 6-connected BFS reachability over the inflated grid.
bool bfs_reachable(const InflatedGrid& g, const Vec3& start, const Vec3& goal) {
    auto index_of = [&](const Vec3& p) {
        Vec3 rel = (p - g.origin) / g.voxel;
        int ix = static_cast<int>(std::floor(rel.x()));
        int iy = static_cast<int>(std::floor(rel.y()));
        int iz = static_cast<int>(std::floor(rel.z()));
        if (!g.in_grid(ix, iy, iz)) return -1;
        return g.linear_index(ix, iy, iz);
    };
    int s = index_of(start), t = index_of(goal);
    if (s < 0 || t < 0 || !g.traversable[s] || !g.traversable[t]) return false;
    std::vector<uint8_t> seen(g.traversable.size(), 0);
    std::queue<int> q;
    q.push(s);
    seen[s] = 1;
    const int nx = g.dims.x(), ny = g.dims.y();
    const int offs[6] = {1, -1, nx, -nx, nx * ny, -nx * ny};
    const int strides[6] = {0, 0, 1, 1, 2, 2};
    (void)strides;
    while (!q.empty()) {
        int at = q.front();
        q.pop();
        if (at == t) return true;
        int ax = at % nx, ay = (at / nx) % ny;
        for (int d = 0; d < 6; ++d) {
            // guard wraps on x/y edges
            if (d == 0 && ax == nx - 1) continue;
            if (d == 1 && ax == 0) continue;
            if (d == 2 && ay == ny - 1) continue;
            if (d == 3 && ay == 0) continue;
            int nb = at + offs[d];
            if (nb < 0 || nb >= static_cast<int>(seen.size()) || seen[nb] || !g.traversable[nb])
                continue;
            seen[nb] = 1;
            q.push(nb);
        }
    }
    return false;
}

}  // namespace

TEST_CASE("zero buffer keeps exactly the free set") {
    ExplorationMap emap(Aabb{Vec3(0, 0, 0), Vec3(1.5, 1, 1.5)}, 0.05);
    emap.seed_free_region(Aabb{Vec3(0.2, 0.2, 0.2), Vec3(1.2, 0.8, 1.2)});
    emap.seed_occupied_region(Aabb{Vec3(0.5, 0.3, 0.5), Vec3(0.7, 0.6, 0.7)});
    InflatedGrid g = inflate(emap, 0.0);
    for (size_t i = 0; i < emap.voxel_count(); ++i)
        CHECK((g.traversable[i] != 0) == (emap.state(static_cast<int>(i)) == VoxelState::Free));
}

TEST_CASE("a 20 cm buffer blocks four voxels around an obstacle") {
    ExplorationMap emap = free_box(Aabb{Vec3(0, 0, 0), Vec3(2, 1, 2)});
    // Single occupied voxel near the middle.
    Vec3 obstacle(1.025, 0.525, 1.025);
    emap.seed_occupied_region(Aabb{obstacle - Vec3::Constant(0.01), obstacle + Vec3::Constant(0.01)});
    InflatedGrid g = inflate(emap, 0.20);
    // 4 voxels along an axis: center distance exactly 0.20 -> blocked.
    CHECK(!g.traversable_at(obstacle + Vec3(0.20, 0, 0)));
    // 5 voxels: 0.25 > 0.20 -> traversable.
    CHECK(g.traversable_at(obstacle + Vec3(0.25, 0, 0)));
    CHECK(!g.traversable_at(obstacle));
}

TEST_CASE("inflation matches the brute-force neighborhood oracle") {
    auto rng = make_rng(31, 7);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    ExplorationMap emap(Aabb{Vec3(0, 0, 0), Vec3(1.2, 0.8, 1.2)}, 0.05);
    emap.seed_free_region(Aabb{Vec3(0, 0, 0), Vec3(1.2, 0.8, 1.2)});
    for (int i = 0; i < 12; ++i) {
        Vec3 c(uni(rng) * 1.2, uni(rng) * 0.8, uni(rng) * 1.2);
        emap.seed_occupied_region(Aabb{c - Vec3::Constant(0.03), c + Vec3::Constant(0.03)});
    }
    for (double buffer : {0.1, 0.2}) {
        InflatedGrid g = inflate(emap, buffer);
        auto oracle = inflate_oracle(emap, buffer);
        size_t mismatches = 0;
        for (size_t i = 0; i < oracle.size(); ++i)
            if (oracle[i] != g.traversable[i]) ++mismatches;
        CHECK(mismatches == 0);
    }
}

TEST_CASE("free straight line plans directly with two waypoints") {
    ExplorationMap emap = free_box(Aabb{Vec3(0, 0, 0), Vec3(4, 2, 4)});
    InflatedGrid g = inflate(emap, 0.0);
    PlanRequest req;
    req.start = Vec3(0.5, 1, 0.5);
    req.goal = Vec3(3.5, 1, 3.2);
    PlanResult res = plan(g, req, 1);
    REQUIRE(res.ok());
    CHECK(res.path->waypoints.size() == 2);
    CHECK((res.path->waypoints.front() - req.start).norm() < 1e-12);
    CHECK((res.path->waypoints.back() - req.goal).norm() < 1e-12);
    CHECK(res.path->total_length() == doctest::Approx((req.goal - req.start).norm()));
}

TEST_CASE("goal inside an obstacle fails immediately") {
    ExplorationMap emap = free_box(Aabb{Vec3(0, 0, 0), Vec3(2, 2, 2)});
    emap.seed_occupied_region(Aabb{Vec3(1.2, 0.8, 1.2), Vec3(1.6, 1.4, 1.6)});
    InflatedGrid g = inflate(emap, 0.10);
    PlanRequest req;
    req.start = Vec3(0.3, 1, 0.3);
    req.goal = Vec3(1.4, 1.1, 1.4);
    PlanResult res = plan(g, req, 2);
    CHECK(!res.ok());
    CHECK(res.failure == "goal in collision");
}

TEST_CASE("start inside the buffer zone is reported") {
    ExplorationMap emap = free_box(Aabb{Vec3(0, 0, 0), Vec3(2, 2, 2)});
    emap.seed_occupied_region(Aabb{Vec3(0.3, 0.9, 0.3), Vec3(0.5, 1.1, 0.5)});
    InflatedGrid g = inflate(emap, 0.20);
    PlanRequest req;
    req.start = Vec3(0.45, 1.0, 0.6);  // within 20 cm of the box
    req.goal = Vec3(1.7, 1.0, 1.7);
    PlanResult res = plan(g, req, 3);
    CHECK(!res.ok());
    CHECK(res.failure == "start in collision");
}

TEST_CASE("doorway scenario: planner succeeds exactly when BFS does") {
    // Wall across the room with a single doorway gap.
    ExplorationMap emap = free_box(Aabb{Vec3(0, 0, 0), Vec3(4, 2, 4)});
    emap.seed_occupied_region(Aabb{Vec3(1.9, 0, 0), Vec3(2.1, 2, 1.4)});
    emap.seed_occupied_region(Aabb{Vec3(1.9, 0, 2.2), Vec3(2.1, 2, 4)});
    // Doorway z in [1.4, 2.2], 80 cm wide.
    InflatedGrid g = inflate(emap, 0.20);
    PlanRequest req;
    req.start = Vec3(0.6, 1, 2.0);
    req.goal = Vec3(3.4, 1, 1.8);
    REQUIRE(bfs_reachable(g, req.start, req.goal));
    PlanResult res = plan(g, req, 7);
    REQUIRE(res.ok());
    // Path revalidates segment by segment and can't beat the straight line.
    const auto& wp = res.path->waypoints;
    for (size_t i = 1; i < wp.size(); ++i) CHECK(g.segment_valid(wp[i - 1], wp[i]));
    CHECK(res.path->total_length() >= (req.goal - req.start).norm() - 1e-9);

    // Sealing the doorway removes reachability and the planner agrees.
    emap.seed_occupied_region(Aabb{Vec3(1.9, 0, 1.3), Vec3(2.1, 2, 2.3)});
    InflatedGrid sealed = inflate(emap, 0.20);
    CHECK(!bfs_reachable(sealed, req.start, req.goal));
    PlanRequest req2 = req;
    req2.max_iterations = 800;
    PlanResult res2 = plan(sealed, req2, 7);
    CHECK(!res2.ok());
}

TEST_CASE("identical request and seed give identical paths") {
    ExplorationMap emap = free_box(Aabb{Vec3(0, 0, 0), Vec3(4, 2, 4)});
    emap.seed_occupied_region(Aabb{Vec3(1.8, 0, 0.6), Vec3(2.2, 2, 3.4)});
    InflatedGrid g = inflate(emap, 0.15);
    PlanRequest req;
    req.start = Vec3(0.5, 1, 2.0);
    req.goal = Vec3(3.5, 1, 2.0);
    PlanResult a = plan(g, req, 42);
    PlanResult b = plan(g, req, 42);
    REQUIRE(a.ok());
    REQUIRE(b.ok());
    REQUIRE(a.path->waypoints.size() == b.path->waypoints.size());
    for (size_t i = 0; i < a.path->waypoints.size(); ++i)
        CHECK((a.path->waypoints[i] - b.path->waypoints[i]).norm() == 0.0);
    PlanResult c = plan(g, req, 43);
    REQUIRE(c.ok());  // different seed still succeeds
}

TEST_CASE("random solvable scatter scenes always plan and revalidate") {
    auto rng = make_rng(99, 3);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    int solved = 0;
    for (int trial = 0; trial < 20; ++trial) {
        ExplorationMap emap = free_box(Aabb{Vec3(0, 0, 0), Vec3(5, 2.5, 4)});
        for (int b = 0; b < 8; ++b) {
            Vec3 c(0.4 + uni(rng) * 4.2, uni(rng) * 2.0, 0.4 + uni(rng) * 3.2);
            Vec3 half(0.1 + 0.25 * uni(rng), 0.2 + 0.5 * uni(rng), 0.1 + 0.25 * uni(rng));
            emap.seed_occupied_region(Aabb{c - half, c + half});
        }
        InflatedGrid g = inflate(emap, 0.20);
        PlanRequest req;
        req.start = Vec3(0.45 + 0.2 * uni(rng), 0.8 + uni(rng), 0.45 + 0.2 * uni(rng));
        req.goal = Vec3(4.3 + 0.2 * uni(rng), 0.8 + uni(rng), 3.2 + 0.4 * uni(rng));
        if (!g.traversable_at(req.start) || !g.traversable_at(req.goal)) continue;
        if (!bfs_reachable(g, req.start, req.goal)) continue;
        ++solved;
        PlanResult res = plan(g, req, 1000 + trial);
        REQUIRE(res.ok());
        const auto& wp = res.path->waypoints;
        CHECK((wp.front() - req.start).norm() < 1e-12);
        CHECK((wp.back() - req.goal).norm() < 1e-12);
        for (size_t i = 1; i < wp.size(); ++i) CHECK(g.segment_valid(wp[i - 1], wp[i]));
    }
    CHECK(solved >= 10);  // the generator keeps most instances solvable
}
