#include "loopkit/fragments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "loopkit/grid.hpp"
#include "loopkit/preprocess.hpp"

namespace loopkit {

std::vector<Fragment> make_fragments(std::span<const FrameData> frames,
                                     std::span<const Keyframe> keyframes, int k, double leaf) {
    if (frames.empty()) throw EmptyCloud("make_fragments: no frames");
    if (keyframes.empty()) throw MissingData("make_fragments: no keyframes");
    if (k < 1) throw Error("make_fragments: k must be >= 1");

    std::vector<Fragment> fragments;
    const int n = static_cast<int>(frames.size());
    for (int first = 0; first < n; first += k) {
        int last = std::min(first + k, n) - 1;
        int len = last - first + 1;

        Fragment frag;
        frag.id = static_cast<int>(fragments.size());
        frag.first_frame = first;
        frag.last_frame = last;

        double mid_ts = frames[static_cast<std::size_t>(first + len / 2)].timestamp;
        int best_kf = 0;
        double best_dt = std::numeric_limits<double>::infinity();
        for (std::size_t a = 0; a < keyframes.size(); ++a) {
            double dt = std::abs(keyframes[a].timestamp - mid_ts);
            if (dt < best_dt || (dt == best_dt && keyframes[a].id < keyframes[static_cast<std::size_t>(best_kf)].id)) {
                best_dt = dt;
                best_kf = static_cast<int>(a);
            }
        }
        frag.anchor_keyframe = keyframes[static_cast<std::size_t>(best_kf)].id;
        frag.pose = keyframes[static_cast<std::size_t>(best_kf)].pose;

        PointCloud world;
        for (int f = first; f <= last; ++f) {
            PointCloud posed = transformed(frames[static_cast<std::size_t>(f)].cloud,
                                           frames[static_cast<std::size_t>(f)].pose);
            world.positions.insert(world.positions.end(), posed.positions.begin(), posed.positions.end());
            if (posed.has_normals()) {
                world.normals.insert(world.normals.end(), posed.normals.begin(), posed.normals.end());
            }
        }
        if (world.empty()) throw EmptyCloud("make_fragments: fragment has no points");
        if (!world.normals.empty() && world.normals.size() != world.positions.size()) {
            throw MissingNormals("make_fragments: frames must uniformly carry normals or not");
        }
        frag.cloud = transformed(voxel_downsample(world, leaf), inverse(frag.pose));
        fragments.push_back(std::move(frag));
    }
    return fragments;
}

std::vector<LoopProposal> propose_loops(std::span<const Fragment> fragments,
                                        const PoseGraph& graph, const LoopParams& params) {
    const int n = static_cast<int>(fragments.size());
    if (graph.poses.size() != fragments.size()) {
        throw MissingData("propose_loops: one graph pose per fragment required");
    }

    std::vector<PointCloud> posed(static_cast<std::size_t>(n));
    for (int f = 0; f < n; ++f) {
        posed[static_cast<std::size_t>(f)].positions.reserve(fragments[static_cast<std::size_t>(f)].cloud.size());
        for (const Vec3& p : fragments[static_cast<std::size_t>(f)].cloud.positions) {
            posed[static_cast<std::size_t>(f)].positions.push_back(graph.poses[static_cast<std::size_t>(f)] * p);
        }
    }
    std::vector<SearchGrid> grids;
    grids.reserve(static_cast<std::size_t>(n));
    for (int f = 0; f < n; ++f) grids.push_back(build_grid(posed[static_cast<std::size_t>(f)], params.overlap_radius));

    auto linked = [&](int i, int j) {
        for (const LoopEdge& e : graph.loops) {
            if ((e.i == i && e.j == j) || (e.i == j && e.j == i)) return true;
        }
        return false;
    };

    // Proposals pair a later fragment i against an earlier fragment j (i >= j+2, so
    // odometry-adjacent pairs are never proposed). Overlap is the fraction of the later
    // fragment's points that land within overlap_radius of the earlier fragment.
    std::vector<LoopProposal> proposals;
    for (int i = 2; i < n; ++i) {
        if (posed[static_cast<std::size_t>(i)].positions.empty()) continue;
        for (int j = 0; j + 2 <= i; ++j) {
            if (linked(i, j)) continue;
            std::size_t hits = 0;
            for (const Vec3& p : posed[static_cast<std::size_t>(i)].positions) {
                if (nn_within(grids[static_cast<std::size_t>(j)], p, params.overlap_radius)) hits += 1;
            }
            double overlap = static_cast<double>(hits) /
                             static_cast<double>(posed[static_cast<std::size_t>(i)].positions.size());
            if (overlap >= params.min_overlap) proposals.push_back({i, j, overlap});
        }
    }
    std::sort(proposals.begin(), proposals.end(), [](const LoopProposal& a, const LoopProposal& b) {
        if (a.overlap != b.overlap) return a.overlap > b.overlap;
        if (a.i != b.i) return a.i < b.i;
        return a.j < b.j;
    });
    return proposals;
}

}  // namespace loopkit
