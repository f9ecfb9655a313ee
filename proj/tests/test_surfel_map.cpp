#include <cmath>
#include <vector>

#include "doctest.h"
#include "loopkit/errors.hpp"
#include "loopkit/rng.hpp"
#include "loopkit/surfel_map.hpp"
#include "support/helpers.hpp"

using namespace loopkit;
using testing::random_transform;

namespace {

Surfel make_surfel(const Vec3& p, const Vec3& n, double t0, double tu) {
    Surfel s;
    s.position = p;
    s.normal = n.normalized();
    s.radius = 0.02;
    s.confidence = 3.0;
    s.t0 = t0;
    s.tu = tu;
    return s;
}

std::vector<Keyframe> keyframe_row(int n) {
    std::vector<Keyframe> kfs;
    for (int i = 0; i < n; ++i) {
        RigidTransform pose;
        pose.translation = Vec3(1.0 * i, 0, 0);
        kfs.push_back({i, 1.0 * i, pose});
    }
    return kfs;
}

}  // namespace

TEST_CASE("influencers picks observers strictly inside the time window") {
    auto kfs = keyframe_row(5);  // timestamps 0..4
    Surfel s = make_surfel(Vec3::Zero(), Vec3::UnitZ(), 0.5, 3.5);
    // Observers are keyframes 0, 2, 4; only t=2 lies strictly inside.
    std::vector<Keyframe> observers = {kfs[0], kfs[2], kfs[4]};
    CHECK(influencers(s, observers) == std::vector<int>{2});

    // Wider window traps 0 and 2 but not 4 (strict bound).
    s.t0 = -0.5;
    s.tu = 4.0;
    CHECK(influencers(s, observers) == std::vector<int>{0, 2});
}

TEST_CASE("influencers falls back to the nearest observer when the window is empty") {
    auto kfs = keyframe_row(5);
    Surfel s = make_surfel(Vec3::Zero(), Vec3::UnitZ(), 2.9, 3.1);
    std::vector<Keyframe> observers = {kfs[0], kfs[4]};  // t = 0 and 4
    // Distance to [2.9, 3.1]: kf0 -> 2.9, kf4 -> 0.9: nearest is 4.
    CHECK(influencers(s, observers) == std::vector<int>{4});

    // Equidistant: tie to the lower id.
    s.t0 = 1.9;
    s.tu = 2.1;
    CHECK(influencers(s, observers) == std::vector<int>{0});

    CHECK(influencers(s, {}).empty());
}

TEST_CASE("correct_surfels carries a uniform correction rigidly") {
    RngStream rng(91, 0);
    RigidTransform t = random_transform(rng, 1.0, 2.0);

    auto old_kfs = keyframe_row(4);
    std::vector<Keyframe> new_kfs = old_kfs;
    for (Keyframe& kf : new_kfs) kf.pose = compose(t, kf.pose);

    SurfelMap map;
    for (int i = 0; i < 30; ++i) {
        Vec3 p(rng.next_double(-2, 2), rng.next_double(-2, 2), rng.next_double(-2, 2));
        Vec3 n(rng.next_gaussian(), rng.next_gaussian(), rng.next_gaussian());
        map.surfels.push_back(make_surfel(p, n, 0.5, 2.5));
        map.visibility.push_back({0, static_cast<int>(rng.next_bounded(3)) + 1});
    }

    SurfelMap out = correct_surfels(map, old_kfs, new_kfs);
    REQUIRE(out.size() == map.size());
    for (std::size_t i = 0; i < map.size(); ++i) {
        // Every influencing keyframe moved by the same t, so the surfel must
        // move rigidly by t regardless of which keyframes influence it.
        CHECK((out.surfels[i].position - t * map.surfels[i].position).norm() < 1e-9);
        CHECK((out.surfels[i].normal - t.rotation * map.surfels[i].normal).norm() < 1e-9);
        CHECK(out.surfels[i].normal.norm() == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(out.surfels[i].radius == map.surfels[i].radius);
        CHECK(out.surfels[i].confidence == map.surfels[i].confidence);
        CHECK(out.surfels[i].t0 == map.surfels[i].t0);
        CHECK(out.surfels[i].tu == map.surfels[i].tu);
        CHECK(out.visibility[i] == map.visibility[i]);
    }
}

TEST_CASE("correct_surfels averages the influencing keyframe corrections") {
    auto old_kfs = keyframe_row(2);  // t = 0 and 1, both influencing below
    std::vector<Keyframe> new_kfs = old_kfs;
    new_kfs[0].pose.translation += Vec3(0.1, 0, 0);
    new_kfs[1].pose.translation += Vec3(0.3, 0, 0);

    SurfelMap map;
    map.surfels.push_back(make_surfel(Vec3(0.5, 0.5, 0.5), Vec3::UnitZ(), -0.5, 1.5));
    map.visibility.push_back({0, 1});

    SurfelMap out = correct_surfels(map, old_kfs, new_kfs);
    // Both corrections are pure translations; the mean is (0.2, 0, 0).
    CHECK((out.surfels[0].position - Vec3(0.7, 0.5, 0.5)).norm() < 1e-12);
    CHECK((out.surfels[0].normal - Vec3::UnitZ()).norm() < 1e-12);
}

TEST_CASE("correct_surfels leaves unobserved surfels alone and validates ids") {
    auto kfs = keyframe_row(2);
    SurfelMap map;
    map.surfels.push_back(make_surfel(Vec3(1, 2, 3), Vec3::UnitX(), 0, 1));
    map.visibility.push_back({});  // no observers

    std::vector<Keyframe> moved = kfs;
    moved[0].pose.translation += Vec3(5, 0, 0);
    SurfelMap out = correct_surfels(map, kfs, moved);
    CHECK((out.surfels[0].position - Vec3(1, 2, 3)).norm() == 0.0);

    map.visibility[0] = {7};  // unknown keyframe id
    CHECK_THROWS_AS(correct_surfels(map, kfs, moved), MissingData);

    SurfelMap no_vis;
    no_vis.surfels.push_back(make_surfel(Vec3::Zero(), Vec3::UnitX(), 0, 1));
    CHECK_THROWS_AS(correct_surfels(no_vis, kfs, moved), MissingData);
}

TEST_CASE("correct_surfels keeps the normal when rotated normals cancel") {
    // Two influencers rotate the normal to +x and -x respectively: the mean
    // cancels and the original normal must survive.
    std::vector<Keyframe> old_kfs = keyframe_row(2);
    std::vector<Keyframe> new_kfs = old_kfs;
    new_kfs[0].pose.rotation =
        Eigen::AngleAxisd(M_PI / 2.0, Vec3::UnitY().eval()).toRotationMatrix();
    new_kfs[1].pose.rotation =
        Eigen::AngleAxisd(-M_PI / 2.0, Vec3::UnitY().eval()).toRotationMatrix();

    SurfelMap map;
    map.surfels.push_back(make_surfel(Vec3::Zero(), Vec3::UnitZ(), -1.0, 3.0));
    map.visibility.push_back({0, 1});

    SurfelMap out = correct_surfels(map, old_kfs, new_kfs);
    CHECK((out.surfels[0].normal - Vec3::UnitZ()).norm() < 1e-12);
    CHECK(out.surfels[0].normal.norm() == doctest::Approx(1.0));
}

TEST_CASE("prune_orphans drops surfels with no surviving observer") {
    auto kfs = keyframe_row(3);
    SurfelMap map;
    map.surfels.push_back(make_surfel(Vec3(0, 0, 0), Vec3::UnitZ(), 0, 1));
    map.surfels.push_back(make_surfel(Vec3(1, 0, 0), Vec3::UnitZ(), 0, 1));
    map.surfels.push_back(make_surfel(Vec3(2, 0, 0), Vec3::UnitZ(), 0, 1));
    map.visibility = {{0, 2}, {2}, {1}};

    // Keep only keyframes 0 and 1: the middle surfel (seen only by 2) dies,
    // the first surfel keeps just observer 0.
    std::vector<Keyframe> survivors = {kfs[0], kfs[1]};
    SurfelMap out = prune_orphans(map, survivors);
    REQUIRE(out.size() == 2);
    CHECK(out.surfels[0].position.x() == 0.0);
    CHECK(out.visibility[0] == std::vector<int>{0});
    CHECK(out.surfels[1].position.x() == 2.0);
    CHECK(out.visibility[1] == std::vector<int>{1});
}

TEST_CASE("compute_visibility applies the projection, facing and depth gates") {
    CameraIntrinsics k{10.0, 10.0, 2.0, 2.0, 5, 5};
    std::vector<Keyframe> kfs = {{0, 0.0, RigidTransform::identity()}};  // camera at origin, +z

    SurfelMap map;
    // Visible: 1 m ahead, normal toward the camera.
    map.surfels.push_back(make_surfel(Vec3(0, 0, 1), -Vec3::UnitZ(), 0, 1));
    // Behind the camera.
    map.surfels.push_back(make_surfel(Vec3(0, 0, -1), Vec3::UnitZ(), 0, 1));
    // In front but facing away.
    map.surfels.push_back(make_surfel(Vec3(0, 0, 1), Vec3::UnitZ(), 0, 1));
    // Projects outside the 5x5 image.
    map.surfels.push_back(make_surfel(Vec3(2, 0, 1), -Vec3::UnitZ(), 0, 1));
    map.visibility.resize(4);

    compute_visibility(map, kfs, k);
    CHECK(map.visibility[0] == std::vector<int>{0});
    CHECK(map.visibility[1].empty());
    CHECK(map.visibility[2].empty());
    CHECK(map.visibility[3].empty());

    // With a depth map: agreement within tolerance keeps the surfel, a
    // closer stored depth (occluder) or a missing sample rejects it.
    DepthMap depth;
    depth.width = 5;
    depth.height = 5;
    depth.depth.assign(25, 1.0f);
    std::vector<DepthMap> maps = {depth};
    compute_visibility(map, kfs, k, maps, 0.05);
    CHECK(map.visibility[0] == std::vector<int>{0});

    maps[0].depth.assign(25, 0.5f);  // something occludes the surfel
    compute_visibility(map, kfs, k, maps, 0.05);
    CHECK(map.visibility[0].empty());

    maps[0].depth.assign(25, 0.0f);  // no measurement: occluded-unknown
    compute_visibility(map, kfs, k, maps, 0.05);
    CHECK(map.visibility[0].empty());
}
