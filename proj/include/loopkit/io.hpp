#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "loopkit/ba.hpp"
#include "loopkit/geometry.hpp"
#include "loopkit/pose_graph.hpp"
#include "loopkit/surfel_map.hpp"

namespace loopkit {

/// Reads an ascii or binary_little_endian PLY vertex cloud. Positions are
/// required (x y z), normals are picked up when present (nx ny nz); other
/// scalar properties are skipped. List properties on the vertex element,
/// and elements declared before it, raise UnsupportedProperty; malformed
/// content raises ParseError with the file position.
PointCloud read_ply(const std::string& path);

/// Writes x y z [nx ny nz] as float32, ascii or binary_little_endian.
void write_ply(const std::string& path, const PointCloud& cloud, bool binary = false);

struct TimedPose {
    double timestamp = 0.0;
    RigidTransform pose;
};

/// Trajectory text format: one "timestamp tx ty tz qx qy qz qw" line per
/// pose, '#' comments and blank lines allowed. The quaternion is read in
/// (x, y, z, w) order and normalized.
std::vector<TimedPose> read_trajectory(const std::string& path);

/// Writes with enough digits for an exact double round trip; the
/// quaternion is canonicalized to qw >= 0.
void write_trajectory(const std::string& path, std::span<const TimedPose> trajectory);

/// One pairwise-registration record: fragment indices, the fragment count
/// of the run, and a 4x4 transform given as four 4-value rows.
struct LogEntry {
    int i = 0;
    int j = 0;
    int n = 0;
    Mat4 transform = Mat4::Identity();
};

std::vector<LogEntry> read_registration_log(const std::string& path);
void write_registration_log(const std::string& path, std::span<const LogEntry>
                            entries);

/// Surfel maps travel as a PLY with extra scalar properties
/// (radius, confidence, t0, tu) plus a sidecar listing, per surfel, the
/// observing keyframe ids on one line.
SurfelMap read_surfel_map(const std::string& ply_path, const std::string& vis_path);
void write_surfel_map(const std::string& ply_path, const std::string& vis_path,
                      const SurfelMap& map);

/// Flat "key = value" configuration, '#' comments and blank lines allowed.
std::map<std::string, std::string> read_config(const std::string& path);

void write_graph_json(const std::string& path, const PoseGraph& graph);
PoseGraph read_graph_json(const std::string& path);

/// A packaged refinement problem: keyframes, landmarks, observations and
/// the camera the pixels were measured with.
struct BaProblem {
    CameraIntrinsics intrinsics;
    std::vector<Keyframe> keyframes;
    std::vector<Landmark> landmarks;
    std::vector<Observation> observations;
};

BaProblem read_ba_json(const std::string& path);
void write_ba_json(const std::string& path, const BaProblem& problem);

}  // namespace loopkit
