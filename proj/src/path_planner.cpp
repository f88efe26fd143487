#include "splatmap/path_planner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace splatmap {

namespace {

// 1D squared distance transform (lower envelope of parabolas).
void edt_1d(const std::vector<double>& f, std::vector<double>& d, std::vector<int>& v,
            std::vector<double>& z) {
    const int n = static_cast<int>(f.size());
    d.assign(n, 0.0);
    v.assign(n, 0);
    z.assign(n + 1, 0.0);
    int k = 0;
    v[0] = 0;
    z[0] = -std::numeric_limits<double>::infinity();
    z[1] = std::numeric_limits<double>::infinity();
    for (int q = 1; q < n; ++q) {
        double s;
        while (true) {
            s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * q - 2.0 * v[k]);
            if (s <= z[k]) {
                --k;
            } else {
                break;
            }
        }
        ++k;
        v[k] = q;
        z[k] = s;
        z[k + 1] = std::numeric_limits<double>::infinity();
    }
    k = 0;
    for (int q = 0; q < n; ++q) {
        while (z[k + 1] < q) ++k;
        double dq = q - v[k];
        d[q] = dq * dq + f[v[k]];
    }
}

}  // namespace

bool InflatedGrid::segment_valid(const Vec3& a, const Vec3& b) const {
    double len = (b - a).norm();
    int n = std::max(1, static_cast<int>(std::ceil(len / (voxel * 0.5))));
    for (int i = 0; i <= n; ++i) {
        Vec3 p = a + (b - a) * (static_cast<double>(i) / n);
        if (!traversable_at(p)) return false;
    }
    return true;
}

InflatedGrid inflate(const ExplorationMap& emap, double buffer_m) {
    if (buffer_m < 0) throw std::invalid_argument("inflate: buffer must be >= 0");
    InflatedGrid g;
    g.origin = emap.origin();
    g.voxel = emap.voxel_size();
    g.dims = emap.dims();
    const int nx = g.dims.x(), ny = g.dims.y(), nz = g.dims.z();
    const size_t total = static_cast<size_t>(nx) * ny * nz;

    // Squared index-space distance to the nearest obstacle (occupied or
    // unknown), computed one axis at a time.
    const double kInf = 1e18;
    std::vector<double> dist(total);
    for (size_t i = 0; i < total; ++i)
        dist[i] = emap.state(static_cast<int>(i)) == VoxelState::Free ? kInf : 0.0;

    std::vector<double> line, out;
    std::vector<int> vbuf;
    std::vector<double> zbuf;
    // X axis
    line.resize(nx);
    for (int z = 0; z < nz; ++z)
        for (int y = 0; y < ny; ++y) {
            for (int x = 0; x < nx; ++x) line[x] = dist[g.linear_index(x, y, z)];
            edt_1d(line, out, vbuf, zbuf);
            for (int x = 0; x < nx; ++x) dist[g.linear_index(x, y, z)] = out[x];
        }
    // Y axis
    line.resize(ny);
    for (int z = 0; z < nz; ++z)
        for (int x = 0; x < nx; ++x) {
            for (int y = 0; y < ny; ++y) line[y] = dist[g.linear_index(x, y, z)];
            edt_1d(line, out, vbuf, zbuf);
            for (int y = 0; y < ny; ++y) dist[g.linear_index(x, y, z)] = out[y];
        }
    // Z axis
    line.resize(nz);
    for (int y = 0; y < ny; ++y)
        for (int x = 0; x < nx; ++x) {
            for (int z = 0; z < nz; ++z) line[z] = dist[g.linear_index(x, y, z)];
            edt_1d(line, out, vbuf, zbuf);
            for (int z = 0; z < nz; ++z) dist[g.linear_index(x, y, z)] = out[z];
        }

    // Blocked when the nearest obstacle center is within the buffer radius.
    const double r2 = (buffer_m / g.voxel) * (buffer_m / g.voxel);
    g.traversable.assign(total, 0);
    for (size_t i = 0; i < total; ++i) {
        if (emap.state(static_cast<int>(i)) != VoxelState::Free) continue;
        g.traversable[i] = dist[i] > r2 + 1e-9 ? 1 : 0;
    }
    return g;
}

PlanResult plan(const InflatedGrid& grid, const PlanRequest& req, uint64_t seed) {
    PlanResult res;
    if (!grid.traversable_at(req.start)) {
        res.failure = "start in collision";
        return res;
    }
    if (!grid.traversable_at(req.goal)) {
        res.failure = "goal in collision";
        return res;
    }

    auto finish = [&](std::vector<Vec3> waypoints) {
        // Greedy shortcutting: always jump to the farthest visible waypoint.
        std::vector<Vec3> shortcut;
        size_t i = 0;
        shortcut.push_back(waypoints.front());
        while (i + 1 < waypoints.size()) {
            size_t j = waypoints.size() - 1;
            for (; j > i + 1; --j)
                if (grid.segment_valid(waypoints[i], waypoints[j])) break;
            shortcut.push_back(waypoints[j]);
            i = j;
        }
        Path p;
        p.waypoints = std::move(shortcut);
        res.path = std::move(p);
        return res;
    };

    if (grid.segment_valid(req.start, req.goal)) return finish({req.start, req.goal});

    struct Node {
        Vec3 p;
        int parent;
    };
    std::vector<Node> nodes = {{req.start, -1}};
    auto rng = make_rng(seed, 0x9147);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    const Vec3 lo = grid.origin;
    const Vec3 hi = grid.origin + Vec3(grid.dims.x(), grid.dims.y(), grid.dims.z()) * grid.voxel;

    for (int it = 0; it < req.max_iterations; ++it) {
        Vec3 target;
        if (uni(rng) < req.goal_bias) {
            target = req.goal;
        } else {
            target = Vec3(lo.x() + uni(rng) * (hi.x() - lo.x()), lo.y() + uni(rng) * (hi.y() - lo.y()),
                          lo.z() + uni(rng) * (hi.z() - lo.z()));
        }
        size_t nearest = 0;
        double best = (nodes[0].p - target).squaredNorm();
        for (size_t i = 1; i < nodes.size(); ++i) {
            double d = (nodes[i].p - target).squaredNorm();
            if (d < best) {
                best = d;
                nearest = i;
            }
        }
        Vec3 from = nodes[nearest].p;
        Vec3 delta = target - from;
        double len = delta.norm();
        if (len < 1e-9) continue;
        Vec3 next = len <= req.step_length ? target : from + delta * (req.step_length / len);
        if (!grid.traversable_at(next)) continue;
        if (!grid.segment_valid(from, next)) continue;
        nodes.push_back({next, static_cast<int>(nearest)});

        // Direct goal connection attempt from every new node.
        if (grid.segment_valid(next, req.goal)) {
            std::vector<Vec3> waypoints = {req.goal};
            for (int at = static_cast<int>(nodes.size()) - 1; at >= 0; at = nodes[at].parent)
                waypoints.push_back(nodes[at].p);
            std::reverse(waypoints.begin(), waypoints.end());
            return finish(std::move(waypoints));
        }
    }
    res.failure = "unreachable within budget";
    return res;
}

}  // namespace splatmap
