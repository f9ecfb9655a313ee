#include "loopkit/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>
#include <set>

#include "loopkit/errors.hpp"
#include "loopkit/grid.hpp"
#include "loopkit/preprocess.hpp"

namespace loopkit {

namespace {

constexpr double kPi = std::numbers::pi_v<double>;

Vec3 tri_normal(const std::array<Vec3, 3>& t) {
    Vec3 n = (t[1] - t[0]).cross(t[2] - t[0]);
    double len = n.norm();
    return len > 1e-15 ? Vec3(n / len) : Vec3::UnitZ();
}

void add_quad(TriangleScene& s, const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
    s.triangles.push_back({a, b, c});
    s.triangles.push_back({a, c, d});
}

/// Appends a box given its center, half extents, and orientation; `open_bottom`
/// skips the -y face (boxes resting on the floor).
void add_box(TriangleScene& s, const Vec3& center, const Vec3& half, const Mat3& r,
             bool open_bottom) {
    auto corner = [&](int sx, int sy, int sz) {
        Vec3 local(sx * half.x(), sy * half.y(), sz * half.z());
        return Vec3(center + r * local);
    };
    Vec3 c_mmm = corner(-1, -1, -1), c_pmm = corner(1, -1, -1), c_mpm = corner(-1, 1, -1),
         c_ppm = corner(1, 1, -1), c_mmp = corner(-1, -1, 1), c_pmp = corner(1, -1, 1),
         c_mpp = corner(-1, 1, 1), c_ppp = corner(1, 1, 1);
    add_quad(s, c_mmm, c_pmm, c_ppm, c_mpm);  // z-
    add_quad(s, c_mmp, c_pmp, c_ppp, c_mpp);  // z+
    add_quad(s, c_mmm, c_mpm, c_mpp, c_mmp);  // x-
    add_quad(s, c_pmm, c_ppm, c_ppp, c_pmp);  // x+
    add_quad(s, c_mmm, c_pmm, c_pmp, c_mmp);  // y-
    if (!open_bottom) add_quad(s, c_mpm, c_ppm, c_ppp, c_mpp);  // y+ (down)
}

/// Nearest triangle hit: (distance, triangle index).
std::optional<std::pair<double, std::size_t>> raycast_hit(const TriangleScene& scene,
                                                          const Vec3& origin, const Vec3& dir) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_tri = 0;
    for (std::size_t i = 0; i < scene.triangles.size(); ++i) {
        const auto& t = scene.triangles[i];
        Vec3 e1 = t[1] - t[0], e2 = t[2] - t[0];
        Vec3 p = dir.cross(e2);
        double det = e1.dot(p);
        if (std::abs(det) < 1e-12) continue;
        double inv = 1.0 / det;
        Vec3 s = origin - t[0];
        double u = s.dot(p) * inv;
        if (u < 0.0 || u > 1.0) continue;
        Vec3 q = s.cross(e1);
        double v = dir.dot(q) * inv;
        if (v < 0.0 || u + v > 1.0) continue;
        double dist = e2.dot(q) * inv;
        if (dist > 1e-9 && dist < best) {
            best = dist;
            best_tri = i;
        }
    }
    if (!std::isfinite(best)) return std::nullopt;
    return std::make_pair(best, best_tri);
}

}  // namespace

TriangleScene make_room_scene(std::uint64_t seed, int boxes) {
    RngStream rng(seed, 0x500);
    TriangleScene s;
    // Rectangular footprint: no quarter-turn maps the walls onto themselves.
    const double hx = 2.3, hz = 1.8, y_floor = 1.0, y_top = -1.0;
    add_quad(s, {-hx, y_floor, -hz}, {hx, y_floor, -hz}, {hx, y_floor, hz}, {-hx, y_floor, hz});
    add_quad(s, {-hx, y_top, -hz}, {hx, y_top, -hz}, {hx, y_floor, -hz}, {-hx, y_floor, -hz});
    add_quad(s, {-hx, y_top, hz}, {hx, y_top, hz}, {hx, y_floor, hz}, {-hx, y_floor, hz});
    add_quad(s, {-hx, y_top, -hz}, {-hx, y_top, hz}, {-hx, y_floor, hz}, {-hx, y_floor, -hz});
    add_quad(s, {hx, y_top, -hz}, {hx, y_top, hz}, {hx, y_floor, hz}, {hx, y_floor, -hz});

    // Fixed furniture that survives no yaw: a tall column in the +x/+z
    // corner and a bench along the -x wall. A half-turn would land both in
    // empty space, so the 180-degree wall alias dies too.
    add_box(s, {1.9, y_floor - 0.85, 1.4}, {0.28, 0.85, 0.28}, Mat3::Identity(), true);
    add_box(s, {-2.0, y_floor - 0.25, -0.4}, {0.22, 0.25, 0.8}, Mat3::Identity(), true);

    if (boxes <= 0) boxes = 4 + static_cast<int>(rng.next_bounded(4));
    for (int b = 0; b < boxes; ++b) {
        Vec3 half(0.15 + 0.25 * rng.next_double(), 0.15 + 0.3 * rng.next_double(),
                  0.15 + 0.25 * rng.next_double());
        // Keep box centers off the camera orbit ring (radius ~1.2).
        double radius = b % 2 == 0 ? 0.55 * rng.next_double() : 1.55 + 0.25 * rng.next_double();
        double angle = 2.0 * kPi * rng.next_double();
        Vec3 center(radius * std::sin(angle), y_floor - half.y(), radius * std::cos(angle));
        // Clamp into the walls whatever the yaw below turns out to be.
        double reach = std::hypot(half.x(), half.z()) + 0.02;
        center.x() = std::clamp(center.x(), -hx + reach, hx - reach);
        center.z() = std::clamp(center.z(), -hz + reach, hz - reach);
        double yaw = 2.0 * kPi * rng.next_double();
        Mat3 r = Eigen::AngleAxisd(yaw, Vec3::UnitY()).toRotationMatrix();
        add_box(s, center, half, r, true);
    }
    return s;
}

namespace {

/// Appends a once-subdivided icosahedron (80 triangles) approximating a
/// sphere; curved-ish geometry whose pair-angle signatures differ from any
/// polyhedral edge.
void add_icosphere(TriangleScene& s, const Vec3& center, double radius) {
    const double g = (1.0 + std::sqrt(5.0)) / 2.0;
    std::array<Vec3, 12> v = {Vec3(-1, g, 0), Vec3(1, g, 0),   Vec3(-1, -g, 0), Vec3(1, -g, 0),
                              Vec3(0, -1, g), Vec3(0, 1, g),   Vec3(0, -1, -g), Vec3(0, 1, -g),
                              Vec3(g, 0, -1), Vec3(g, 0, 1),   Vec3(-g, 0, -1), Vec3(-g, 0, 1)};
    for (Vec3& p : v) p.normalize();
    static constexpr int faces[20][3] = {
        {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
        {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
        {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
        {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
    for (const auto& f : faces) {
        Vec3 a = v[static_cast<std::size_t>(f[0])], b = v[static_cast<std::size_t>(f[1])],
             c = v[static_cast<std::size_t>(f[2])];
        Vec3 ab = ((a + b) * 0.5).normalized(), bc = ((b + c) * 0.5).normalized(),
             ca = ((c + a) * 0.5).normalized();
        for (const auto& t : {std::array<Vec3, 3>{a, ab, ca}, std::array<Vec3, 3>{ab, b, bc},
                              std::array<Vec3, 3>{ca, bc, c}, std::array<Vec3, 3>{ab, bc, ca}}) {
            s.triangles.push_back(
                {center + radius * t[0], center + radius * t[1], center + radius * t[2]});
        }
    }
}

}  // namespace

TriangleScene make_scatter_scene(std::uint64_t seed) {
    RngStream rng(seed, 0x5CA);
    TriangleScene s;
    // Sheared parallelepipeds: every dihedral angle is seed-specific, so no
    // two edges or corners share a local pair-angle signature the way
    // axis-aligned boxes do. The shear rides on add_box's frame argument
    // (corners = center + m * diag(half) * signs needs no orthonormal m).
    for (int b = 0; b < 36; ++b) {
        Vec3 half(0.10 + 0.30 * rng.next_double(), 0.10 + 0.30 * rng.next_double(),
                  0.10 + 0.30 * rng.next_double());
        double hr = 1.45 * std::sqrt(rng.next_double());
        double ha = 2.0 * kPi * rng.next_double();
        Vec3 center(hr * std::sin(ha), 1.6 * (rng.next_double() - 0.5), hr * std::cos(ha));
        Vec3 axis(rng.next_gaussian(), rng.next_gaussian(), rng.next_gaussian());
        if (axis.norm() < 1e-9) axis = Vec3::UnitZ();
        axis.normalize();
        double angle = 2.0 * kPi * rng.next_double();
        Mat3 shear = Mat3::Identity();
        shear(0, 1) = 0.9 * (rng.next_double() - 0.5);
        shear(0, 2) = 0.9 * (rng.next_double() - 0.5);
        shear(1, 2) = 0.9 * (rng.next_double() - 0.5);
        Mat3 m = Eigen::AngleAxisd(angle, axis).toRotationMatrix() * shear;
        add_box(s, center, half, m, false);
    }
    for (int b = 0; b < 12; ++b) {
        double radius = 0.14 + 0.24 * rng.next_double();
        double hr = 1.45 * std::sqrt(rng.next_double());
        double ha = 2.0 * kPi * rng.next_double();
        Vec3 center(hr * std::sin(ha), 1.6 * (rng.next_double() - 0.5), hr * std::cos(ha));
        add_icosphere(s, center, radius);
    }
    return s;
}

std::optional<double> raycast(const TriangleScene& scene, const Vec3& origin, const Vec3& dir) {
    auto hit = raycast_hit(scene, origin, dir);
    if (!hit) return std::nullopt;
    return hit->first;
}

RigidTransform look_at(const Vec3& eye, const Vec3& target) {
    Vec3 z = target - eye;
    double len = z.norm();
    if (len < 1e-12) throw DegenerateConfiguration("look_at: eye equals target");
    z /= len;
    Vec3 down = Vec3::UnitY();
    Vec3 x = down.cross(z);
    if (x.norm() < 1e-9) x = Vec3::UnitX();  // looking straight up/down
    x.normalize();
    Vec3 y = z.cross(x);
    RigidTransform t;
    t.rotation.col(0) = x;
    t.rotation.col(1) = y;
    t.rotation.col(2) = z;
    t.translation = eye;
    return t;
}

PointCloud render_view(const TriangleScene& scene, const RigidTransform& cam_to_world,
                       const CameraIntrinsics& k, int stride, double noise_sigma,
                       RngStream& rng) {
    PointCloud cloud;
    for (int v = stride / 2; v < k.height; v += stride) {
        for (int u = stride / 2; u < k.width; u += stride) {
            Vec3 dir_cam((u + 0.5 - k.cx) / k.fx, (v + 0.5 - k.cy) / k.fy, 1.0);
            dir_cam.normalize();
            Vec3 dir_world = cam_to_world.rotation * dir_cam;
            auto hit = raycast_hit(scene, cam_to_world.translation, dir_world);
            if (!hit) continue;
            double depth = hit->first;
            if (noise_sigma > 0.0) depth += noise_sigma * rng.next_gaussian();
            if (depth <= 1e-6) continue;
            cloud.positions.push_back(dir_cam * depth);
            Vec3 n = tri_normal(scene.triangles[hit->second]);
            if (n.dot(dir_world) > 0.0) n = -n;  // face the camera
            cloud.normals.push_back(cam_to_world.rotation.transpose() * n);
        }
    }
    return cloud;
}

DepthMap render_depth(const TriangleScene& scene, const RigidTransform& cam_to_world,
                      const CameraIntrinsics& k) {
    DepthMap d;
    d.width = k.width;
    d.height = k.height;
    d.depth.assign(static_cast<std::size_t>(k.width) * static_cast<std::size_t>(k.height), 0.0f);
    for (int v = 0; v < k.height; ++v) {
        for (int u = 0; u < k.width; ++u) {
            Vec3 dir_cam((u + 0.5 - k.cx) / k.fx, (v + 0.5 - k.cy) / k.fy, 1.0);
            dir_cam.normalize();
            Vec3 dir_world = cam_to_world.rotation * dir_cam;
            auto hit = raycast_hit(scene, cam_to_world.translation, dir_world);
            if (!hit) continue;
            d.depth[static_cast<std::size_t>(v) * static_cast<std::size_t>(d.width) +
                    static_cast<std::size_t>(u)] = static_cast<float>(hit->first * dir_cam.z());
        }
    }
    return d;
}

PointCloud sample_surface(const TriangleScene& scene, double density, std::uint64_t seed) {
    RngStream rng(seed, 0x5A9);
    PointCloud cloud;
    for (const auto& t : scene.triangles) {
        double area = 0.5 * (t[1] - t[0]).cross(t[2] - t[0]).norm();
        double want = area * density;
        int count = static_cast<int>(want);
        if (rng.next_double() < want - count) count += 1;
        Vec3 n = tri_normal(t);
        for (int i = 0; i < count; ++i) {
            double a = rng.next_double(), b = rng.next_double();
            if (a + b > 1.0) {
                a = 1.0 - a;
                b = 1.0 - b;
            }
            cloud.positions.push_back(t[0] + a * (t[1] - t[0]) + b * (t[2] - t[0]));
            cloud.normals.push_back(n);
        }
    }
    return cloud;
}

namespace {

double get_f(const std::map<std::string, std::string>& kv, const std::string& key, double dflt) {
    auto it = kv.find(key);
    return it == kv.end() ? dflt : std::stod(it->second);
}

std::int64_t get_i(const std::map<std::string, std::string>& kv, const std::string& key,
                   std::int64_t dflt) {
    auto it = kv.find(key);
    return it == kv.end() ? dflt : std::stoll(it->second);
}

}  // namespace

SynthConfig synth_config_from(const std::map<std::string, std::string>& kv) {
    SynthConfig c;
    c.seed = static_cast<std::uint64_t>(get_i(kv, "seed", static_cast<std::int64_t>(c.seed)));
    c.frames = static_cast<int>(get_i(kv, "frames", c.frames));
    c.keyframe_every = static_cast<int>(get_i(kv, "keyframe_every", c.keyframe_every));
    c.width = static_cast<int>(get_i(kv, "width", c.width));
    c.height = static_cast<int>(get_i(kv, "height", c.height));
    c.fx = get_f(kv, "fx", c.fx);
    c.fy = get_f(kv, "fy", c.fy);
    c.cx = get_f(kv, "cx", c.cx);
    c.cy = get_f(kv, "cy", c.cy);
    c.stride = static_cast<int>(get_i(kv, "stride", c.stride));
    c.noise = get_f(kv, "noise", c.noise);
    c.drift_yaw = get_f(kv, "drift_yaw", c.drift_yaw);
    c.drift_trans = get_f(kv, "drift_trans", c.drift_trans);
    c.noise_odom_rot = get_f(kv, "noise_odom_rot", c.noise_odom_rot);
    c.noise_odom_trans = get_f(kv, "noise_odom_trans", c.noise_odom_trans);
    c.orbit_radius = get_f(kv, "orbit_radius", c.orbit_radius);
    c.orbits = get_f(kv, "orbits", c.orbits);
    c.leaf = get_f(kv, "leaf", c.leaf);
    c.landmark_attempts = static_cast<int>(get_i(kv, "landmark_attempts", c.landmark_attempts));
    c.pixel_noise = get_f(kv, "pixel_noise", c.pixel_noise);
    c.boxes = static_cast<int>(get_i(kv, "boxes", c.boxes));
    c.scene_density = get_f(kv, "scene_density", c.scene_density);
    c.fps = get_f(kv, "fps", c.fps);
    return c;
}

namespace {

RigidTransform orbit_pose(const SynthConfig& c, int frame) {
    double theta =
        2.0 * kPi * c.orbits * static_cast<double>(frame) / static_cast<double>(c.frames);
    double radius = c.orbit_radius + 0.08 * std::cos(3.0 * theta);
    Vec3 eye(radius * std::sin(theta), -0.1 + 0.2 * std::sin(2.0 * theta),
             radius * std::cos(theta));
    return look_at(eye, Vec3(0.0, 0.45, 0.0));
}

/// Keyframe id whose frame index is nearest to `frame` (ties to the lower id).
int nearest_keyframe(const std::vector<int>& keyframe_frames, int frame) {
    int best = 0;
    int best_d = std::abs(keyframe_frames[0] - frame);
    for (std::size_t i = 1; i < keyframe_frames.size(); ++i) {
        int d = std::abs(keyframe_frames[i] - frame);
        if (d < best_d) {
            best_d = d;
            best = static_cast<int>(i);
        }
    }
    return best;
}

}  // namespace

SynthDataset synth_scene(const SynthConfig& config) {
    SynthDataset d;
    d.config = config;
    d.scene = make_room_scene(config.seed, config.boxes);
    d.intrinsics = {config.fx, config.fy, config.cx, config.cy, config.width, config.height};

    const int n = config.frames;
    d.timestamps.resize(static_cast<std::size_t>(n));
    d.truth.resize(static_cast<std::size_t>(n));
    d.odometry.resize(static_cast<std::size_t>(n));
    d.clouds.resize(static_cast<std::size_t>(n));

    RngStream drift_rng(config.seed, 0xD01);
    for (int i = 0; i < n; ++i) {
        d.timestamps[static_cast<std::size_t>(i)] = static_cast<double>(i) / config.fps;
        d.truth[static_cast<std::size_t>(i)] = orbit_pose(config, i);
        RngStream render_rng(config.seed, 0x3E0 + static_cast<std::uint64_t>(i));
        d.clouds[static_cast<std::size_t>(i)] =
            render_view(d.scene, d.truth[static_cast<std::size_t>(i)], d.intrinsics,
                        config.stride, config.noise, render_rng);
    }

    d.odometry[0] = d.truth[0];
    for (int i = 1; i < n; ++i) {
        RigidTransform inc = compose(inverse(d.truth[static_cast<std::size_t>(i - 1)]),
                                     d.truth[static_cast<std::size_t>(i)]);
        Twist err;
        err.alpha = config.noise_odom_rot * drift_rng.next_gaussian();
        err.beta = config.drift_yaw + config.noise_odom_rot * drift_rng.next_gaussian();
        err.gamma = config.noise_odom_rot * drift_rng.next_gaussian();
        err.x = config.noise_odom_trans * drift_rng.next_gaussian();
        err.y = config.noise_odom_trans * drift_rng.next_gaussian();
        err.z = config.drift_trans + config.noise_odom_trans * drift_rng.next_gaussian();
        d.odometry[static_cast<std::size_t>(i)] =
            compose(d.odometry[static_cast<std::size_t>(i - 1)],
                    compose(inc, transform_from_twist(err)));
    }

    for (int f = 0; f < n; f += config.keyframe_every) d.keyframe_frames.push_back(f);

    // Surfel map fused under the drifted poses: one surfel per occupied voxel,
    // running means for position and normal, the contribution time window, and
    // visibility from each contributing frame's nearest keyframe.
    struct Accum {
        Vec3 sum_p = Vec3::Zero();
        Vec3 sum_n = Vec3::Zero();
        double count = 0.0;
        double t0 = 0.0, tu = 0.0;
        std::set<int> kfs;
    };
    std::map<std::array<std::int64_t, 3>, Accum> cells;
    for (int f = 0; f < n; ++f) {
        const RigidTransform& pose = d.odometry[static_cast<std::size_t>(f)];
        int kf = nearest_keyframe(d.keyframe_frames, f);
        double ts = d.timestamps[static_cast<std::size_t>(f)];
        const PointCloud& cloud = d.clouds[static_cast<std::size_t>(f)];
        for (std::size_t p = 0; p < cloud.size(); ++p) {
            Vec3 w = pose * cloud.positions[p];
            Vec3 nw = pose.rotation * cloud.normals[p];
            std::array<std::int64_t, 3> key = {
                static_cast<std::int64_t>(std::floor(w.x() / config.leaf)),
                static_cast<std::int64_t>(std::floor(w.y() / config.leaf)),
                static_cast<std::int64_t>(std::floor(w.z() / config.leaf))};
            auto [it, fresh] = cells.try_emplace(key);
            Accum& a = it->second;
            if (fresh) {
                a.t0 = a.tu = ts;
            } else {
                a.t0 = std::min(a.t0, ts);
                a.tu = std::max(a.tu, ts);
            }
            a.sum_p += w;
            a.sum_n += nw;
            a.count += 1.0;
            a.kfs.insert(kf);
        }
    }
    for (const auto& [key, a] : cells) {
        Vec3 mean_n = a.sum_n / a.count;
        if (mean_n.norm() < 1e-9) continue;  // opposing views cancelled out
        Surfel s;
        s.position = a.sum_p / a.count;
        s.normal = mean_n.normalized();
        s.radius = config.leaf;
        s.confidence = a.count;
        s.t0 = a.t0;
        s.tu = a.tu;
        d.map.surfels.push_back(s);
        d.map.visibility.emplace_back(a.kfs.begin(), a.kfs.end());
    }

    // Bundle-adjustment problem posed at the drifted keyframes: landmarks are
    // true surface points observed (with occlusion checking) from >= 2
    // keyframes; initial landmark positions are carried by the first
    // observer's drift so the problem is consistent with the odometry.
    for (std::size_t k = 0; k < d.keyframe_frames.size(); ++k) {
        int f = d.keyframe_frames[k];
        d.ba.keyframes.push_back({static_cast<int>(k), d.timestamps[static_cast<std::size_t>(f)],
                                  d.odometry[static_cast<std::size_t>(f)]});
    }
    d.ba.intrinsics = d.intrinsics;
    RngStream lm_rng(config.seed, 0x1A5);
    int next_lm = 0;
    for (int attempt = 0; attempt < config.landmark_attempts; ++attempt) {
        std::size_t k0 = attempt % d.keyframe_frames.size();
        const RigidTransform& origin_pose =
            d.truth[static_cast<std::size_t>(d.keyframe_frames[k0])];
        double u = 2.0 + (config.width - 4.0) * lm_rng.next_double();
        double v = 2.0 + (config.height - 4.0) * lm_rng.next_double();
        Vec3 dir_cam((u - config.cx) / config.fx, (v - config.cy) / config.fy, 1.0);
        dir_cam.normalize();
        auto hit = raycast(d.scene, origin_pose.translation, origin_pose.rotation * dir_cam);
        if (!hit) continue;
        Vec3 x_world = origin_pose.translation + *hit * (origin_pose.rotation * dir_cam);

        std::vector<Observation> obs;
        for (std::size_t k = 0; k < d.keyframe_frames.size(); ++k) {
            const RigidTransform& kf_truth =
                d.truth[static_cast<std::size_t>(d.keyframe_frames[k])];
            auto px = project(d.intrinsics, inverse(kf_truth), x_world);
            if (!px) continue;
            if (px->x() < 1.0 || px->x() >= config.width - 1.0 || px->y() < 1.0 ||
                px->y() >= config.height - 1.0) {
                continue;
            }
            Vec3 to_x = x_world - kf_truth.translation;
            double dist = to_x.norm();
            auto occ = raycast(d.scene, kf_truth.translation, to_x / dist);
            if (!occ || std::abs(*occ - dist) > 0.02) continue;
            Vec2 pixel = *px;
            if (config.pixel_noise > 0.0) {
                pixel.x() += config.pixel_noise * lm_rng.next_gaussian();
                pixel.y() += config.pixel_noise * lm_rng.next_gaussian();
            }
            obs.push_back({static_cast<int>(k), next_lm, pixel, 1.0});
        }
        if (obs.size() < 2) continue;
        std::size_t first_kf = static_cast<std::size_t>(obs.front().keyframe_id);
        RigidTransform carry =
            compose(d.odometry[static_cast<std::size_t>(d.keyframe_frames[first_kf])],
                    inverse(d.truth[static_cast<std::size_t>(d.keyframe_frames[first_kf])]));
        d.ba.landmarks.push_back({next_lm, carry * x_world});
        d.ba.observations.insert(d.ba.observations.end(), obs.begin(), obs.end());
        next_lm += 1;
    }

    d.scene_points = sample_surface(d.scene, config.scene_density, config.seed ^ 0x5CEDEULL);
    return d;
}

void write_dataset(const SynthDataset& d, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir / "clouds");

    auto to_timed = [&](const std::vector<RigidTransform>& poses) {
        std::vector<TimedPose> out;
        out.reserve(poses.size());
        for (std::size_t i = 0; i < poses.size(); ++i) {
            out.push_back({d.timestamps[i], poses[i]});
        }
        return out;
    };
    auto truth = to_timed(d.truth);
    auto odom = to_timed(d.odometry);
    write_trajectory((dir / "groundtruth.txt").string(), truth);
    write_trajectory((dir / "odometry.txt").string(), odom);

    std::vector<TimedPose> kfs;
    for (int f : d.keyframe_frames) {
        kfs.push_back({d.timestamps[static_cast<std::size_t>(f)],
                       d.odometry[static_cast<std::size_t>(f)]});
    }
    write_trajectory((dir / "keyframes.txt").string(), kfs);

    for (std::size_t i = 0; i < d.clouds.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "cloud_%06zu.ply", i);
        write_ply((dir / "clouds" / name).string(), d.clouds[i], true);
    }

    write_surfel_map((dir / "map.ply").string(), (dir / "map_vis.txt").string(), d.map);
    write_ba_json((dir / "ba.json").string(), d.ba);
    write_ply((dir / "scene.ply").string(), d.scene_points, true);

    FILE* f = std::fopen((dir / "dataset.cfg").string().c_str(), "w");
    if (!f) throw Error("cannot open for writing: " + (dir / "dataset.cfg").string());
    std::fprintf(f, "frames = %d\nkeyframe_every = %d\nfps = %.17g\n", d.config.frames,
                 d.config.keyframe_every, d.config.fps);
    std::fprintf(f, "width = %d\nheight = %d\nfx = %.17g\nfy = %.17g\ncx = %.17g\ncy = %.17g\n",
                 d.config.width, d.config.height, d.config.fx, d.config.fy, d.config.cx,
                 d.config.cy);
    std::fprintf(f, "stride = %d\nnoise = %.17g\ndrift_yaw = %.17g\ndrift_trans = %.17g\n",
                 d.config.stride, d.config.noise, d.config.drift_yaw, d.config.drift_trans);
    std::fprintf(f, "noise_odom_rot = %.17g\nnoise_odom_trans = %.17g\norbit_radius = %.17g\n",
                 d.config.noise_odom_rot, d.config.noise_odom_trans, d.config.orbit_radius);
    std::fprintf(f, "orbits = %.17g\n", d.config.orbits);
    std::fprintf(f, "leaf = %.17g\nlandmark_attempts = %d\npixel_noise = %.17g\nboxes = %d\n",
                 d.config.leaf, d.config.landmark_attempts, d.config.pixel_noise, d.config.boxes);
    std::fprintf(f, "scene_density = %.17g\nseed = %llu\n", d.config.scene_density,
                 static_cast<unsigned long long>(d.config.seed));
    std::fclose(f);
}

namespace {

/// Renders three nearby orbit views, unions them in world coordinates, and
/// downsamples at `leaf`; `theta0` picks where on the orbit the views sit.
/// The render stride adapts to the leaf so the downsampled count stays near
/// 5k regardless of the resolution.
PointCloud fragment_union(const TriangleScene& scene, const CameraIntrinsics& k, double theta0,
                          double spacing, double noise, RngStream& rng, double orbit_radius,
                          const Vec3& target, double leaf) {
    int stride = leaf < 0.04 ? 3 : 2;
    PointCloud world;
    for (int view = 0; view < 3; ++view) {
        double theta = theta0 + spacing * view;
        Vec3 eye(orbit_radius * std::sin(theta), -0.1 + 0.15 * std::sin(2.0 * theta),
                 orbit_radius * std::cos(theta));
        RigidTransform pose = look_at(eye, target);
        PointCloud local = render_view(scene, pose, k, stride, noise, rng);
        PointCloud posed = transformed(local, pose);
        world.positions.insert(world.positions.end(), posed.positions.begin(),
                               posed.positions.end());
        world.normals.insert(world.normals.end(), posed.normals.begin(), posed.normals.end());
    }
    return voxel_downsample(world, leaf);
}

void recenter(PointCloud& cloud, const Vec3& c) {
    for (Vec3& p : cloud.positions) p -= c;
}

RigidTransform random_transform(RngStream& rng, double max_angle, double max_trans) {
    Vec3 axis(rng.next_gaussian(), rng.next_gaussian(), rng.next_gaussian());
    if (axis.norm() < 1e-9) axis = Vec3::UnitZ();
    axis.normalize();
    double angle = max_angle * rng.next_double();
    Vec3 dir(rng.next_gaussian(), rng.next_gaussian(), rng.next_gaussian());
    if (dir.norm() < 1e-9) dir = Vec3::UnitX();
    dir.normalize();
    RigidTransform t;
    t.rotation = Eigen::AngleAxisd(angle, axis).toRotationMatrix();
    t.translation = dir * (max_trans * rng.next_double());
    return t;
}

}  // namespace

RegistrationPair synth_registration_pair(std::uint64_t seed, double leaf) {
    CameraIntrinsics k{130.0, 130.0, 80.0, 60.0, 160, 120};
    RegistrationPair best;
    for (std::uint64_t attempt = 0; attempt < 64; ++attempt) {
        RngStream rng(seed, 0xA110 + attempt);
        TriangleScene scene = make_scatter_scene(seed * 64 + attempt);
        double theta0 = 2.0 * kPi * rng.next_double();
        double delta = 2.0 * kPi * (0.065 + 0.04 * rng.next_double());  // 23..38 degrees apart

        PointCloud a =
            fragment_union(scene, k, theta0, 0.20, 0.005, rng, 2.6, {0.0, 0.0, 0.0}, leaf);
        PointCloud b = fragment_union(scene, k, theta0 + delta, 0.20, 0.005, rng, 2.3,
                                      {0.0, 0.0, 0.0}, leaf);
        if (a.size() < 2500 || b.size() < 2500) continue;

        Vec3 c = centroid(b);
        recenter(a, c);
        recenter(b, c);

        SearchGrid grid = build_grid(b, 0.075);
        std::size_t hits = 0;
        for (const Vec3& p : a.positions) {
            if (nn_within(grid, p, 0.075)) hits += 1;
        }
        double overlap = static_cast<double>(hits) / static_cast<double>(a.size());
        if (overlap < 0.62) continue;

        RigidTransform displace = random_transform(rng, kPi / 3.0, 1.0);
        RegistrationPair pair;
        pair.source = transformed(a, displace);
        pair.target = std::move(b);
        pair.truth = inverse(displace);
        pair.overlap = overlap;
        return pair;
    }
    throw DegenerateConfiguration("synth_registration_pair: no overlapping view pair found");
}

RegistrationPair synth_negative_pair(std::uint64_t seed, double leaf) {
    CameraIntrinsics k{130.0, 130.0, 80.0, 60.0, 160, 120};
    RngStream rng(seed, 0xBAD);
    TriangleScene scene_a = make_scatter_scene(seed * 2 + 1);
    TriangleScene scene_b = make_scatter_scene(seed * 2 + 2);

    auto views = [&](const TriangleScene& scene) {
        int stride = leaf < 0.04 ? 3 : 2;
        PointCloud world;
        double theta0 = 2.0 * kPi * rng.next_double();
        for (int view = 0; view < 3; ++view) {
            double theta = theta0 + 0.25 * view;
            Vec3 eye(1.8 * std::sin(theta), 0.4 * std::sin(theta * 1.7), 1.8 * std::cos(theta));
            RigidTransform pose = look_at(eye, Vec3::Zero());
            PointCloud posed = transformed(render_view(scene, pose, k, stride, 0.005, rng), pose);
            world.positions.insert(world.positions.end(), posed.positions.begin(),
                                   posed.positions.end());
            world.normals.insert(world.normals.end(), posed.normals.begin(), posed.normals.end());
        }
        PointCloud down = voxel_downsample(world, leaf);
        recenter(down, centroid(down));
        return down;
    };

    RegistrationPair pair;
    pair.source = views(scene_a);
    pair.target = views(scene_b);
    return pair;
}

}  // namespace loopkit
