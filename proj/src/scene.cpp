#include "splatmap/scene.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace splatmap {

using nlohmann::json;

bool ScenePrimitive::contains(const Vec3& p) const {
    if (kind == Kind::Box)
        return (p.array() > box_min.array()).all() && (p.array() < box_max.array()).all();
    return (p - center).squaredNorm() < radius * radius;
}

double ScenePrimitive::signed_distance(const Vec3& p) const {
    if (kind == Kind::Sphere) return (p - center).norm() - radius;
    Vec3 c = 0.5 * (box_min + box_max);
    Vec3 h = 0.5 * (box_max - box_min);
    Vec3 q = (p - c).cwiseAbs() - h;
    double outside = q.cwiseMax(0.0).norm();
    double inside = std::min(q.maxCoeff(), 0.0);
    return outside + inside;
}

double ScenePrimitive::surface_area() const {
    if (kind == Kind::Sphere) return 4.0 * M_PI * radius * radius;
    Vec3 e = box_max - box_min;
    return 2.0 * (e.x() * e.y() + e.y() * e.z() + e.x() * e.z());
}

Aabb ScenePrimitive::bounding_box() const {
    if (kind == Kind::Box) return {box_min, box_max};
    return {center - Vec3::Constant(radius), center + Vec3::Constant(radius)};
}

namespace {

// Slab intersection; returns [t_enter, t_exit] or nothing. dir may be non-unit.
std::optional<std::pair<double, double>> ray_box(const Vec3& o, const Vec3& d, const Vec3& bmin,
                                                 const Vec3& bmax) {
    double t0 = -std::numeric_limits<double>::infinity();
    double t1 = std::numeric_limits<double>::infinity();
    for (int a = 0; a < 3; ++a) {
        if (std::abs(d[a]) < 1e-300) {
            if (o[a] < bmin[a] || o[a] > bmax[a]) return std::nullopt;
            continue;
        }
        double ta = (bmin[a] - o[a]) / d[a];
        double tb = (bmax[a] - o[a]) / d[a];
        if (ta > tb) std::swap(ta, tb);
        t0 = std::max(t0, ta);
        t1 = std::min(t1, tb);
    }
    if (t0 > t1) return std::nullopt;
    return std::make_pair(t0, t1);
}

Vec3 box_normal_at(const Vec3& p, const Vec3& bmin, const Vec3& bmax) {
    // Face whose plane is closest to p.
    int axis = 0;
    double best = std::numeric_limits<double>::infinity();
    double sign = 1.0;
    for (int a = 0; a < 3; ++a) {
        double dmin = std::abs(p[a] - bmin[a]);
        double dmax = std::abs(p[a] - bmax[a]);
        if (dmin < best) { best = dmin; axis = a; sign = -1.0; }
        if (dmax < best) { best = dmax; axis = a; sign = 1.0; }
    }
    Vec3 n = Vec3::Zero();
    n[axis] = sign;
    return n;
}

std::optional<double> ray_sphere_enter(const Vec3& o, const Vec3& d, const Vec3& c, double r) {
    Vec3 oc = o - c;
    double a = d.squaredNorm();
    double b = 2.0 * oc.dot(d);
    double cc = oc.squaredNorm() - r * r;
    double disc = b * b - 4 * a * cc;
    if (disc < 0) return std::nullopt;
    double sq = std::sqrt(disc);
    double t = (-b - sq) / (2 * a);
    if (t > 1e-9) return t;
    t = (-b + sq) / (2 * a);
    if (t > 1e-9) return t;
    return std::nullopt;
}

}  // namespace

void SceneSpec::validate() const {
    if (num_classes < 1) throw std::runtime_error("scene: num_classes must be >= 1");
    if ((bounds.extent().array() <= 0.0).any()) throw std::runtime_error("scene: empty bounds");
    auto check_class = [&](int c, const char* what) {
        if (c < 0 || c >= num_classes)
            throw std::runtime_error(std::string("scene: class id out of range for ") + what);
    };
    check_class(floor_class, "floor");
    check_class(ceiling_class, "ceiling");
    check_class(wall_class, "walls");
    std::set<int> classes = {floor_class, ceiling_class, wall_class};
    for (size_t i = 0; i < primitives.size(); ++i) {
        const auto& pr = primitives[i];
        check_class(pr.class_id, "primitive");
        classes.insert(pr.class_id);
        if (!bounds.contains(pr.bounding_box()))
            throw std::runtime_error("scene: primitive " + std::to_string(i) + " not inside bounds");
        if (pr.kind == ScenePrimitive::Kind::Box && (pr.box_max - pr.box_min).minCoeff() <= 0)
            throw std::runtime_error("scene: degenerate box " + std::to_string(i));
        if (pr.kind == ScenePrimitive::Kind::Sphere && pr.radius <= 0)
            throw std::runtime_error("scene: degenerate sphere " + std::to_string(i));
    }
    if (static_cast<int>(classes.size()) < 4)
        throw std::runtime_error("scene: fewer than 4 distinct class ids");
}

bool SceneSpec::inside_any_solid(const Vec3& p) const {
    for (const auto& pr : primitives)
        if (pr.contains(p)) return true;
    return false;
}

bool SceneSpec::is_free(const Vec3& p, double margin) const {
    if ((p.array() < bounds.min.array() + margin).any() ||
        (p.array() > bounds.max.array() - margin).any())
        return false;
    for (const auto& pr : primitives)
        if (pr.signed_distance(p) < margin) return false;
    return true;
}

std::optional<RayHit> SceneSpec::intersect(const Vec3& origin, const Vec3& dir) const {
    double best_t = std::numeric_limits<double>::infinity();
    const ScenePrimitive* best_prim = nullptr;

    for (const auto& pr : primitives) {
        std::optional<double> t;
        if (pr.kind == ScenePrimitive::Kind::Box) {
            auto iv = ray_box(origin, dir, pr.box_min, pr.box_max);
            if (iv && iv->second > 1e-9) {
                double te = iv->first > 1e-9 ? iv->first : iv->second;
                t = te;
            }
        } else {
            t = ray_sphere_enter(origin, dir, pr.center, pr.radius);
        }
        if (t && *t < best_t) {
            best_t = *t;
            best_prim = &pr;
        }
    }

    // Room shell: the ray exits the bounds box from inside.
    auto iv = ray_box(origin, dir, bounds.min, bounds.max);
    bool hit_shell = false;
    Vec3 shell_point = Vec3::Zero();
    if (iv && iv->second > 1e-9 && iv->second < best_t) {
        best_t = iv->second;
        hit_shell = true;
        shell_point = origin + best_t * dir;
    }

    if (!best_prim && !hit_shell) return std::nullopt;

    RayHit hit;
    hit.t = best_t;
    Vec3 p = origin + best_t * dir;
    if (hit_shell) {
        Vec3 n = -box_normal_at(shell_point, bounds.min, bounds.max);  // inward
        hit.normal = n;
        if (n.y() > 0.5) {
            hit.class_id = floor_class;
            hit.color = floor_color;
        } else if (n.y() < -0.5) {
            hit.class_id = ceiling_class;
            hit.color = ceiling_color;
        } else {
            hit.class_id = wall_class;
            hit.color = wall_color;
        }
    } else {
        hit.class_id = best_prim->class_id;
        hit.color = best_prim->color;
        if (best_prim->kind == ScenePrimitive::Kind::Sphere)
            hit.normal = (p - best_prim->center).normalized();
        else
            hit.normal = box_normal_at(p, best_prim->box_min, best_prim->box_max);
    }
    return hit;
}

double SceneSpec::surface_distance(const Vec3& p) const {
    // Distance to the bounds shell faces (from inside).
    double d = std::numeric_limits<double>::infinity();
    for (int a = 0; a < 3; ++a) {
        d = std::min(d, std::abs(p[a] - bounds.min[a]));
        d = std::min(d, std::abs(p[a] - bounds.max[a]));
    }
    for (const auto& pr : primitives) d = std::min(d, std::abs(pr.signed_distance(p)));
    return d;
}

std::vector<SurfaceSample> SceneSpec::sample_surface(int count, uint64_t seed) const {
    struct Face {
        // Rectangular patch: origin + u*eu + v*ev, outward normal n.
        Vec3 origin, eu, ev, n;
        int class_id;
        double area;
    };
    std::vector<Face> faces;
    auto add_box_faces = [&](const Vec3& bmin, const Vec3& bmax, int cls, double normal_sign) {
        Vec3 e = bmax - bmin;
        for (int a = 0; a < 3; ++a) {
            int u = (a + 1) % 3, v = (a + 2) % 3;
            for (int side = 0; side < 2; ++side) {
                Face f;
                f.origin = bmin;
                if (side == 1) f.origin[a] = bmax[a];
                f.eu = Vec3::Zero();
                f.ev = Vec3::Zero();
                f.eu[u] = e[u];
                f.ev[v] = e[v];
                f.n = Vec3::Zero();
                f.n[a] = (side == 1 ? 1.0 : -1.0) * normal_sign;
                f.class_id = cls;
                f.area = e[u] * e[v];
                faces.push_back(f);
            }
        }
    };
    // Bounds faces point inward; class depends on orientation.
    {
        Vec3 e = bounds.extent();
        for (int a = 0; a < 3; ++a) {
            int u = (a + 1) % 3, v = (a + 2) % 3;
            for (int side = 0; side < 2; ++side) {
                Face f;
                f.origin = bounds.min;
                if (side == 1) f.origin[a] = bounds.max[a];
                f.eu = Vec3::Zero();
                f.ev = Vec3::Zero();
                f.eu[u] = e[u];
                f.ev[v] = e[v];
                f.n = Vec3::Zero();
                f.n[a] = side == 1 ? -1.0 : 1.0;  // inward
                if (a == 1)
                    f.class_id = side == 0 ? floor_class : ceiling_class;
                else
                    f.class_id = wall_class;
                f.area = e[u] * e[v];
                faces.push_back(f);
            }
        }
    }
    std::vector<const ScenePrimitive*> spheres;
    for (const auto& pr : primitives) {
        if (pr.kind == ScenePrimitive::Kind::Box)
            add_box_faces(pr.box_min, pr.box_max, pr.class_id, 1.0);
        else
            spheres.push_back(&pr);
    }

    std::vector<double> weights;
    for (const auto& f : faces) weights.push_back(f.area);
    for (const auto* s : spheres) weights.push_back(s->surface_area());
    std::discrete_distribution<int> pick(weights.begin(), weights.end());
    auto rng = make_rng(seed, 0x5f2f4ce);

    const double eps = 0.01;
    std::vector<SurfaceSample> out;
    out.reserve(count);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    int guard = 0;
    while (static_cast<int>(out.size()) < count && guard < count * 200) {
        ++guard;
        int idx = pick(rng);
        SurfaceSample s;
        if (idx < static_cast<int>(faces.size())) {
            const Face& f = faces[idx];
            s.point = f.origin + uni(rng) * f.eu + uni(rng) * f.ev;
            s.normal = f.n;
            s.class_id = f.class_id;
        } else {
            const ScenePrimitive* sp = spheres[idx - faces.size()];
            Vec3 n(gauss(rng), gauss(rng), gauss(rng));
            if (n.norm() < 1e-9) continue;
            n.normalize();
            s.point = sp->center + sp->radius * n;
            s.normal = n;
            s.class_id = sp->class_id;
        }
        Vec3 probe = s.point + eps * s.normal;
        if (!bounds.contains(probe)) continue;
        if (inside_any_solid(probe)) continue;
        out.push_back(s);
    }
    return out;
}

std::string SceneSpec::to_json() const {
    json j;
    j["bounds"] = {{"min", {bounds.min.x(), bounds.min.y(), bounds.min.z()}},
                   {"max", {bounds.max.x(), bounds.max.y(), bounds.max.z()}}};
    j["num_classes"] = num_classes;
    j["background"] = {
        {"floor_class", floor_class},     {"ceiling_class", ceiling_class},
        {"wall_class", wall_class},       {"floor_color", {floor_color.x(), floor_color.y(), floor_color.z()}},
        {"ceiling_color", {ceiling_color.x(), ceiling_color.y(), ceiling_color.z()}},
        {"wall_color", {wall_color.x(), wall_color.y(), wall_color.z()}}};
    j["primitives"] = json::array();
    for (const auto& pr : primitives) {
        json p;
        p["class"] = pr.class_id;
        p["color"] = {pr.color.x(), pr.color.y(), pr.color.z()};
        if (pr.kind == ScenePrimitive::Kind::Box) {
            p["type"] = "box";
            p["min"] = {pr.box_min.x(), pr.box_min.y(), pr.box_min.z()};
            p["max"] = {pr.box_max.x(), pr.box_max.y(), pr.box_max.z()};
        } else {
            p["type"] = "sphere";
            p["center"] = {pr.center.x(), pr.center.y(), pr.center.z()};
            p["radius"] = pr.radius;
        }
        j["primitives"].push_back(p);
    }
    return j.dump(2);
}

namespace {
Vec3 vec3_of(const json& a) { return Vec3(a.at(0), a.at(1), a.at(2)); }
}

SceneSpec SceneSpec::from_json(const std::string& text) {
    json j = json::parse(text);
    SceneSpec s;
    s.bounds.min = vec3_of(j.at("bounds").at("min"));
    s.bounds.max = vec3_of(j.at("bounds").at("max"));
    s.num_classes = j.at("num_classes");
    const auto& bg = j.at("background");
    s.floor_class = bg.at("floor_class");
    s.ceiling_class = bg.at("ceiling_class");
    s.wall_class = bg.at("wall_class");
    if (bg.contains("floor_color")) s.floor_color = vec3_of(bg.at("floor_color"));
    if (bg.contains("ceiling_color")) s.ceiling_color = vec3_of(bg.at("ceiling_color"));
    if (bg.contains("wall_color")) s.wall_color = vec3_of(bg.at("wall_color"));
    for (const auto& p : j.at("primitives")) {
        ScenePrimitive pr;
        pr.class_id = p.at("class");
        pr.color = vec3_of(p.at("color"));
        std::string type = p.at("type");
        if (type == "box") {
            pr.kind = ScenePrimitive::Kind::Box;
            pr.box_min = vec3_of(p.at("min"));
            pr.box_max = vec3_of(p.at("max"));
        } else if (type == "sphere") {
            pr.kind = ScenePrimitive::Kind::Sphere;
            pr.center = vec3_of(p.at("center"));
            pr.radius = p.at("radius");
        } else {
            throw std::runtime_error("scene: unknown primitive type '" + type + "'");
        }
        s.primitives.push_back(pr);
    }
    s.validate();
    return s;
}

SceneSpec SceneSpec::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("scene: cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return from_json(ss.str());
}

void SceneSpec::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("scene: cannot write " + path);
    out << to_json() << "\n";
}

SceneSpec make_random_room(uint64_t seed, int num_primitives, int num_classes,
                           const Vec3& room_size) {
    if (num_classes < 4 + num_primitives)
        throw std::invalid_argument("make_random_room: need num_classes >= primitives + 4");
    SceneSpec s;
    s.bounds.min = Vec3::Zero();
    s.bounds.max = room_size;
    s.num_classes = num_classes;
    s.floor_class = 0;
    s.ceiling_class = 1;
    s.wall_class = 2;

    auto rng = make_rng(seed, 0x5ce4e);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    auto palette = [&](int cls) {
        // Distinct hues per class, deterministic.
        double h = std::fmod(0.61803398875 * cls, 1.0) * 6.0;
        double x = 1.0 - std::abs(std::fmod(h, 2.0) - 1.0);
        double r = 0, g = 0, b = 0;
        switch (static_cast<int>(h)) {
            case 0: r = 1; g = x; break;
            case 1: r = x; g = 1; break;
            case 2: g = 1; b = x; break;
            case 3: g = x; b = 1; break;
            case 4: r = x; b = 1; break;
            default: r = 1; b = x; break;
        }
        return Vec3(0.15 + 0.85 * r, 0.15 + 0.85 * g, 0.15 + 0.85 * b);
    };

    int next_class = 3;
    int attempts = 0;
    while (static_cast<int>(s.primitives.size()) < num_primitives && attempts < 10000) {
        ++attempts;
        ScenePrimitive pr;
        pr.class_id = next_class;
        pr.color = palette(pr.class_id);
        bool sphere = uni(rng) < 0.35;
        if (sphere) {
            pr.kind = ScenePrimitive::Kind::Sphere;
            pr.radius = 0.15 + 0.25 * uni(rng);
            double margin = pr.radius + 0.05;
            Vec3 lo = s.bounds.min + Vec3::Constant(margin);
            Vec3 hi = s.bounds.max - Vec3::Constant(margin);
            pr.center = Vec3(lo.x() + uni(rng) * (hi.x() - lo.x()),
                             lo.y() + uni(rng) * std::min(1.2, hi.y() - lo.y()),
                             lo.z() + uni(rng) * (hi.z() - lo.z()));
        } else {
            pr.kind = ScenePrimitive::Kind::Box;
            Vec3 size(0.25 + 0.65 * uni(rng), 0.25 + 0.9 * uni(rng), 0.25 + 0.65 * uni(rng));
            Vec3 lo = s.bounds.min + Vec3::Constant(0.05);
            Vec3 hi = s.bounds.max - size - Vec3::Constant(0.05);
            if ((hi.array() < lo.array()).any()) continue;
            Vec3 corner(lo.x() + uni(rng) * (hi.x() - lo.x()), s.bounds.min.y(),
                        lo.z() + uni(rng) * (hi.z() - lo.z()));
            pr.box_min = corner;
            pr.box_max = corner + size;
        }
        // Keep solids disjoint and leave the room center free for spawning.
        Aabb bb = pr.bounding_box();
        bool overlaps = false;
        for (const auto& other : s.primitives) {
            Aabb ob = other.bounding_box();
            bool sep = (bb.max.array() + 0.1 < ob.min.array()).any() ||
                       (ob.max.array() + 0.1 < bb.min.array()).any();
            if (!sep) overlaps = true;
        }
        Vec3 c = s.bounds.center();
        if (pr.signed_distance(c) < 0.5) overlaps = true;
        if (overlaps) continue;
        s.primitives.push_back(pr);
        ++next_class;
    }
    s.validate();
    return s;
}

}  // namespace splatmap
