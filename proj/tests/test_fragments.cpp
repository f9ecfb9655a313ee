#include <algorithm>
#include <vector>

#include "doctest.h"
#include "loopkit/errors.hpp"
#include "loopkit/fragments.hpp"
#include "loopkit/preprocess.hpp"
#include "loopkit/rng.hpp"
#include "support/helpers.hpp"

using namespace loopkit;
using testing::random_cloud;
using testing::random_transform;

namespace {

std::vector<FrameData> make_frames(int n, RngStream& rng) {
    std::vector<FrameData> frames;
    for (int f = 0; f < n; ++f) {
        FrameData d;
        d.index = f;
        d.timestamp = 0.1 * f;
        d.pose = random_transform(rng, 0.4, 0.5);
        d.cloud = random_cloud(30, rng, -0.5, 0.5, true);
        frames.push_back(std::move(d));
    }
    return frames;
}

std::vector<Keyframe> make_keyframes(const std::vector<FrameData>& frames, int every) {
    std::vector<Keyframe> kfs;
    for (std::size_t f = 0; f < frames.size(); f += static_cast<std::size_t>(every)) {
        kfs.push_back({static_cast<int>(kfs.size()), frames[f].timestamp, frames[f].pose});
    }
    return kfs;
}

}  // namespace

TEST_CASE("make_fragments partitions frames into consecutive blocks") {
    RngStream rng(61, 0);
    auto frames = make_frames(23, rng);
    auto kfs = make_keyframes(frames, 5);
    auto frags = make_fragments(frames, kfs, 10, 0.01);

    REQUIRE(frags.size() == 3);  // 10 + 10 + 3
    CHECK(frags[0].id == 0);
    CHECK(frags[0].first_frame == 0);
    CHECK(frags[0].last_frame == 9);
    CHECK(frags[1].first_frame == 10);
    CHECK(frags[1].last_frame == 19);
    CHECK(frags[2].first_frame == 20);
    CHECK(frags[2].last_frame == 22);  // short tail block
}

TEST_CASE("make_fragments anchors to the keyframe nearest the middle frame") {
    RngStream rng(62, 0);
    auto frames = make_frames(20, rng);
    auto kfs = make_keyframes(frames, 5);  // keyframes at t = 0.0, 0.5, 1.0, 1.5
    auto frags = make_fragments(frames, kfs, 10, 0.01);

    REQUIRE(frags.size() == 2);
    // Block 0 covers frames 0..9, middle frame index 10/2 = 5, t = 0.5 -> kf 1.
    CHECK(frags[0].anchor_keyframe == 1);
    CHECK((frags[0].pose.matrix() - kfs[1].pose.matrix()).norm() == 0.0);
    // Block 1 covers frames 10..19, middle frame 15, t = 1.5 -> kf 3.
    CHECK(frags[1].anchor_keyframe == 3);

    // Tie goes to the lower keyframe id: timestamps equidistant.
    std::vector<Keyframe> tie_kfs = {{0, 0.4, frames[4].pose}, {1, 0.6, frames[6].pose}};
    auto tied = make_fragments(frames, tie_kfs, 10, 0.01);
    CHECK(tied[0].anchor_keyframe == 0);
}

TEST_CASE("fragment clouds are the fused block in anchor coordinates") {
    RngStream rng(63, 0);
    auto frames = make_frames(6, rng);
    auto kfs = make_keyframes(frames, 3);
    double leaf = 0.01;
    auto frags = make_fragments(frames, kfs, 3, leaf);
    REQUIRE(frags.size() == 2);

    for (const Fragment& frag : frags) {
        RigidTransform to_anchor = inverse(frag.pose);
        PointCloud manual;
        for (int f = frag.first_frame; f <= frag.last_frame; ++f) {
            PointCloud local = transformed(frames[static_cast<std::size_t>(f)].cloud,
                                           compose(to_anchor, frames[static_cast<std::size_t>(f)].pose));
            manual.positions.insert(manual.positions.end(), local.positions.begin(),
                                    local.positions.end());
            manual.normals.insert(manual.normals.end(), local.normals.begin(),
                                  local.normals.end());
        }
        PointCloud expect = voxel_downsample(manual, leaf);
        REQUIRE(frag.cloud.size() == expect.size());
        for (std::size_t i = 0; i < expect.size(); ++i) {
            CHECK((frag.cloud.positions[i] - expect.positions[i]).norm() < 1e-12);
        }
    }
}

TEST_CASE("make_fragments input validation") {
    RngStream rng(64, 0);
    auto frames = make_frames(5, rng);
    auto kfs = make_keyframes(frames, 2);
    CHECK_THROWS_AS(make_fragments({}, kfs, 3, 0.05), EmptyCloud);
    CHECK_THROWS_AS(make_fragments(frames, {}, 3, 0.05), MissingData);
    CHECK_THROWS_AS(make_fragments(frames, kfs, 0, 0.05), Error);
}

namespace {

/// Brute-force restatement of the proposal contract.
std::vector<LoopProposal> propose_oracle(const std::vector<Fragment>& frags,
                                         const PoseGraph& graph, const LoopParams& params) {
    std::vector<LoopProposal> out;
    int n = static_cast<int>(frags.size());
    for (int i = 2; i < n; ++i) {
        for (int j = 0; j + 2 <= i; ++j) {
            bool joined = false;
            for (const LoopEdge& e : graph.loops) {
                if ((e.i == i && e.j == j) || (e.i == j && e.j == i)) joined = true;
            }
            if (joined) continue;
            PointCloud pi = transformed(frags[static_cast<std::size_t>(i)].cloud,
                                        graph.poses[static_cast<std::size_t>(i)]);
            PointCloud pj = transformed(frags[static_cast<std::size_t>(j)].cloud,
                                        graph.poses[static_cast<std::size_t>(j)]);
            if (pi.empty() || pj.empty()) continue;
            int hits = 0;
            for (const Vec3& p : pi.positions) {
                double best = std::numeric_limits<double>::infinity();
                for (const Vec3& q : pj.positions) best = std::min(best, (p - q).norm());
                if (best <= params.overlap_radius) ++hits;
            }
            double overlap = static_cast<double>(hits) / static_cast<double>(pi.size());
            if (overlap >= params.min_overlap) out.push_back({i, j, overlap});
        }
    }
    std::stable_sort(out.begin(), out.end(), [](const LoopProposal& a, const LoopProposal& b) {
        if (a.overlap != b.overlap) return a.overlap > b.overlap;
        if (a.i != b.i) return a.i < b.i;
        return a.j < b.j;
    });
    return out;
}

}  // namespace

TEST_CASE("propose_loops matches the brute-force oracle") {
    RngStream rng(65, 0);
    for (int trial = 0; trial < 4; ++trial) {
        int n = 6;
        std::vector<Fragment> frags(static_cast<std::size_t>(n));
        PoseGraph graph;
        for (int i = 0; i < n; ++i) {
            frags[static_cast<std::size_t>(i)].id = i;
            frags[static_cast<std::size_t>(i)].cloud = random_cloud(60, rng, -0.4, 0.4);
            RigidTransform pose;  // small scattered offsets so some pairs overlap
            pose.translation = Vec3(rng.next_double(-0.5, 0.5), rng.next_double(-0.5, 0.5),
                                    rng.next_double(-0.5, 0.5));
            graph.poses.push_back(pose);
        }
        // A pre-existing loop edge (in reversed orientation) must suppress.
        if (trial % 2 == 1) graph.loops.push_back({0, 3, RigidTransform::identity(), {}, 1.0});

        LoopParams params;
        params.overlap_radius = 0.15;
        params.min_overlap = 0.1;

        auto got = propose_loops(frags, graph, params);
        auto want = propose_oracle(frags, graph, params);
        REQUIRE(got.size() == want.size());
        for (std::size_t k = 0; k < got.size(); ++k) {
            CHECK(got[k].i == want[k].i);
            CHECK(got[k].j == want[k].j);
            CHECK(got[k].overlap == doctest::Approx(want[k].overlap).epsilon(1e-12));
            CHECK(got[k].i >= got[k].j + 2);
        }
    }
}

TEST_CASE("propose_loops never pairs adjacent fragments") {
    RngStream rng(66, 0);
    std::vector<Fragment> frags(3);
    PoseGraph graph;
    PointCloud shared = random_cloud(50, rng, -0.3, 0.3);
    for (int i = 0; i < 3; ++i) {
        frags[static_cast<std::size_t>(i)].id = i;
        frags[static_cast<std::size_t>(i)].cloud = shared;
        graph.poses.emplace_back();  // identical clouds and poses: total overlap
    }
    LoopParams params;
    params.min_overlap = 0.0;
    auto proposals = propose_loops(frags, graph, params);
    REQUIRE(proposals.size() == 1);  // only (2, 0) is non-adjacent
    CHECK(proposals[0].i == 2);
    CHECK(proposals[0].j == 0);
    CHECK(proposals[0].overlap > 0.9);
}
