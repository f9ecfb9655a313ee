#pragma once

#include <span>
#include <vector>

#include "loopkit/geometry.hpp"

namespace loopkit {

/// Dense depth image associated with a keyframe, row-major, in meters;
/// a value <= 0 means no measurement.
struct DepthMap {
    int width = 0;
    int height = 0;
    std::vector<float> depth;

    float at(int u, int v) const { return depth[static_cast<std::size_t>(v) * static_cast<std::size_t>(width) + static_cast<std::size_t>(u)]; }
};

/// Surfels plus, per surfel, the ids of the keyframes that observe it.
struct SurfelMap {
    std::vector<Surfel> surfels;
    std::vector<std::vector<int>> visibility;

    std::size_t size() const { return surfels.size(); }
};

/// Keyframes (among the given observers) whose time stamp lies strictly
/// inside the surfel's window (t0, tu), as ids in input order. When the
/// window traps no observer, falls back to the single observer nearest in
/// time to the interval [t0, tu] (ties to the lower id).
/// Returns empty only when `observers` is empty.
std::vector<int> influencers(const Surfel& surfel, std::span<const Keyframe> observers);

/// Rigidly carries every surfel by the mean pose correction of its
/// influencing keyframes: position by (1/k) sum T_new T_old^-1 p, normal by
/// the normalized mean of the rotated normals (kept unchanged if the mean
/// cancels). Keyframes are matched between old and new by id; both lists
/// must cover every id in the visibility lists. Radius, confidence, window
/// and visibility are preserved. Surfels with no observers are returned
/// unchanged. Throws MissingData on unknown ids or missing visibility.
SurfelMap correct_surfels(const SurfelMap& map, std::span<const Keyframe> old_keyframes,
                          std::span<const Keyframe> new_keyframes);

/// Drops every surfel none of whose observing keyframes survives in
/// `keyframes`, and filters the surviving surfels' visibility lists to the
/// surviving ids.
SurfelMap prune_orphans(const SurfelMap& map, std::span<const Keyframe> keyframes);

/// Recomputes visibility geometrically: a surfel is visible from a keyframe
/// iff it projects inside the image bounds with positive depth and its
/// normal faces the camera (n . (p - c) < 0). When depth maps are given
/// (parallel to `keyframes`), the surfel's camera depth must additionally
/// agree with the stored depth at its pixel within depth_tol (a missing
/// depth sample rejects it as occluded-unknown).
void compute_visibility(SurfelMap& map, std::span<const Keyframe> keyframes,
                        const CameraIntrinsics& k,
                        std::span<const DepthMap> depth_maps = {}, double depth_tol = 0.05);

}  // namespace loopkit
