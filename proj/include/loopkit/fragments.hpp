#pragma once

#include <span>
#include <vector>

#include "loopkit/geometry.hpp"
#include "loopkit/pose_graph.hpp"

namespace loopkit {

/// One input frame: a camera-local cloud and its current pose estimate.
struct FrameData {
    int index = 0;
    double timestamp = 0.0;
    RigidTransform pose;  // camera to world (odometry estimate)
    PointCloud cloud;     // camera frame
};

/// A block of k consecutive frames fused into one cloud. `cloud` lives in
/// the anchor keyframe's coordinates; `pose` (the anchor pose at build
/// time) maps it to world.
struct Fragment {
    int id = 0;
    int first_frame = 0;
    int last_frame = 0;
    int anchor_keyframe = 0;
    RigidTransform pose;
    PointCloud cloud;
};

/// Splits frames into consecutive blocks of k (the last may be shorter),
/// fuses each block's clouds under the frame poses, downsamples at `leaf`,
/// and anchors each fragment to the keyframe whose time stamp is nearest
/// the block's middle frame (ties to the lower keyframe id).
/// Throws EmptyCloud (no frames), MissingData (no keyframes), and rejects
/// k < 1.
std::vector<Fragment> make_fragments(std::span<const FrameData> frames,
                                     std::span<const Keyframe> keyframes, int k, double leaf);

struct LoopParams {
    double overlap_radius = 0.1;  // point-to-point distance counted as overlap
    double min_overlap = 0.2;     // fraction of the source fragment's points
};

/// Candidate loop pairing a later fragment i against an earlier fragment j
/// (i >= j + 2, so odometry-adjacent pairs never appear).
struct LoopProposal {
    int i = 0;  // later fragment
    int j = 0;  // earlier fragment
    double overlap = 0.0;
};

/// Proposes loops from spatial overlap under the graph's current poses:
/// for every non-adjacent pair not already joined by a loop edge, the
/// overlap is the fraction of the later fragment's points whose nearest
/// point of the earlier fragment (both posed by graph.poses) lies within
/// overlap_radius. Pairs reaching min_overlap are returned sorted by
/// overlap descending, ties by (i, j) ascending.
std::vector<LoopProposal> propose_loops(std::span<const Fragment> fragments,
                                        const PoseGraph& graph, const LoopParams& params);

}  // namespace loopkit
