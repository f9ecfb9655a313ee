#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "loopkit/fragments.hpp"
#include "loopkit/geometry.hpp"
#include "loopkit/io.hpp"
#include "loopkit/rng.hpp"
#include "loopkit/surfel_map.hpp"

namespace loopkit {

/// Triangle soup in world coordinates; the ground-truth surface for rendering
/// and for surface-error evaluation.
struct TriangleScene {
    std::vector<std::array<Vec3, 3>> triangles;
};

/// Desk-scale rectangular room: floor, four walls, a fixed corner column and
/// wall bench (so no yaw rotation maps the room onto itself), and seeded
/// boxes resting on the floor (`boxes` <= 0 draws 4-7 from the seed). World
/// frame: y points down, the floor is at y = +1.
TriangleScene make_room_scene(std::uint64_t seed, int boxes = -1);

/// A floating field of sheared parallelepipeds and spheres of varied
/// proportions: geometry is distinctive everywhere (no two edges share a
/// dihedral angle), there is no common support plane, and two scenes with
/// different seeds share no alignable structure.
TriangleScene make_scatter_scene(std::uint64_t seed);

/// Distance along `dir` (unit) to the nearest triangle hit, if any.
std::optional<double> raycast(const TriangleScene& scene, const Vec3& origin, const Vec3& dir);

/// Camera-to-world pose looking from `eye` toward `target` with the camera
/// convention z forward, y down, x right.
RigidTransform look_at(const Vec3& eye, const Vec3& target);

/// Renders a camera-local point cloud by casting one ray per `stride`-th
/// pixel. Positions carry along-ray Gaussian noise of `noise_sigma` meters;
/// normals are the (noise-free) triangle normals oriented toward the camera.
PointCloud render_view(const TriangleScene& scene, const RigidTransform& cam_to_world,
                       const CameraIntrinsics& k, int stride, double noise_sigma, RngStream& rng);

/// Full-resolution depth image (camera-frame z per pixel, 0 where no hit).
DepthMap render_depth(const TriangleScene& scene, const RigidTransform& cam_to_world,
                      const CameraIntrinsics& k);

/// Uniform area-weighted surface sampling, `density` points per square meter.
PointCloud sample_surface(const TriangleScene& scene, double density, std::uint64_t seed);

struct SynthConfig {
    std::uint64_t seed = 1;
    int frames = 90;
    int keyframe_every = 5;
    int width = 160, height = 120;
    double fx = 130.0, fy = 130.0, cx = 80.0, cy = 60.0;
    int stride = 4;              // pixel step between cast rays
    double noise = 0.0;          // along-ray depth noise sigma, m
    double drift_yaw = 0.0;      // odometry yaw bias per frame, rad
    double drift_trans = 0.0;    // odometry translation bias per frame, m
    double noise_odom_rot = 0.0;    // per-frame odometry rotation noise, rad
    double noise_odom_trans = 0.0;  // per-frame odometry translation noise, m
    double orbit_radius = 1.2;
    double orbits = 1.0;         // revolutions over `frames`; > 1 revisits the start
    double leaf = 0.05;          // surfel map voxel size, m
    int landmark_attempts = 400;
    double pixel_noise = 0.0;    // observation noise sigma, px
    int boxes = 6;
    double scene_density = 600.0;  // truth surface sampling, points/m^2
    double fps = 30.0;
};

SynthConfig synth_config_from(const std::map<std::string, std::string>& kv);

/// A fully ground-truthed sequence: drifted odometry, per-frame camera-local
/// clouds, a surfel map fused under the drifted poses, a bundle-adjustment
/// problem posed at the drifted keyframes, and truth for evaluation.
struct SynthDataset {
    SynthConfig config;
    CameraIntrinsics intrinsics;
    std::vector<double> timestamps;
    std::vector<RigidTransform> truth;     // camera-to-world per frame
    std::vector<RigidTransform> odometry;  // drifted camera-to-world per frame
    std::vector<PointCloud> clouds;        // camera-local, with normals
    std::vector<int> keyframe_frames;      // frame index per keyframe id
    SurfelMap map;                         // fused under drifted poses
    BaProblem ba;                          // keyframes at drifted poses
    PointCloud scene_points;               // truth surface sampling
    TriangleScene scene;
};

/// Deterministic per seed: identical configs produce bitwise-identical
/// datasets.
SynthDataset synth_scene(const SynthConfig& config);

/// Writes odometry.txt, groundtruth.txt, keyframes.txt, dataset.cfg,
/// clouds/cloud_%06d.ply, map.ply, map_vis.txt, ba.json, and scene.ply.
void write_dataset(const SynthDataset& dataset, const std::filesystem::path& dir);

/// A seeded fragment pair with known alignment: two multi-view unions of one
/// cluttered scene, the source additionally displaced by a random transform
/// (rotation <= 60 degrees, translation <= 1 m). `truth` maps source points
/// onto the target cloud.
struct RegistrationPair {
    PointCloud source;
    PointCloud target;
    RigidTransform truth;
    double overlap = 0.0;  // fraction of source points with a target point within 0.075 m
};

/// Overlapping pair (overlap >= 0.6) with ~5k points per cloud after
/// downsampling at `leaf` meters (the render stride adapts so the count
/// stays in that range) and 0.005 m depth noise.
RegistrationPair synth_registration_pair(std::uint64_t seed, double leaf = 0.05);

/// Views of two unrelated scatter scenes; no correct alignment exists and
/// `truth` is meaningless.
RegistrationPair synth_negative_pair(std::uint64_t seed, double leaf = 0.05);

}  // namespace loopkit
