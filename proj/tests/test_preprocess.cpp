#include <vector>

#include "doctest.h"
#include "loopkit/errors.hpp"
#include "loopkit/preprocess.hpp"
#include "loopkit/rng.hpp"
#include "support/helpers.hpp"

using namespace loopkit;
using testing::random_cloud;

TEST_CASE("voxel_downsample averages voxel members") {
    PointCloud c;
    // Two points in voxel (0,0,0) at leaf 1, one in voxel (2,0,0).
    c.positions = {Vec3(0.2, 0.2, 0.2), Vec3(0.6, 0.4, 0.0), Vec3(2.5, 0.1, 0.3)};
    PointCloud out = voxel_downsample(c, 1.0);
    REQUIRE(out.size() == 2);
    CHECK((out.positions[0] - Vec3(0.4, 0.3, 0.1)).norm() < 1e-12);
    CHECK((out.positions[1] - Vec3(2.5, 0.1, 0.3)).norm() < 1e-12);
    CHECK_FALSE(out.has_normals());
}

TEST_CASE("voxel_downsample orders voxels by their smallest input index") {
    PointCloud c;
    c.positions = {Vec3(5.5, 0, 0), Vec3(0.5, 0, 0), Vec3(5.6, 0, 0), Vec3(-3.5, 0, 0)};
    PointCloud out = voxel_downsample(c, 1.0);
    REQUIRE(out.size() == 3);
    CHECK(out.positions[0].x() == doctest::Approx(5.55));  // first seen at index 0
    CHECK(out.positions[1].x() == doctest::Approx(0.5));
    CHECK(out.positions[2].x() == doctest::Approx(-3.5));
}

TEST_CASE("voxel_downsample blends and normalizes member normals") {
    PointCloud c;
    c.positions = {Vec3(0.1, 0.1, 0.1), Vec3(0.2, 0.2, 0.2), Vec3(0.3, 0.3, 0.3),
                   Vec3(3.1, 0, 0),     Vec3(3.2, 0, 0),     Vec3(6.1, 0, 0)};
    c.normals = {Vec3::UnitX(), Vec3::UnitY(), Vec3::Zero(),
                 Vec3::UnitX(), -Vec3::UnitX(), Vec3::Zero()};
    PointCloud out = voxel_downsample(c, 1.0);
    REQUIRE(out.size() == 3);
    // Mean of x and y unit vectors, normalized; the zero marker is ignored.
    CHECK((out.normals[0] - Vec3(1, 1, 0).normalized()).norm() < 1e-12);
    // Exactly cancelling normals leave the zero marker.
    CHECK(out.normals[1].norm() == 0.0);
    // No valid member normals leave the zero marker.
    CHECK(out.normals[2].norm() == 0.0);
}

TEST_CASE("voxel_downsample bounds and containment on random data") {
    RngStream rng(31, 0);
    PointCloud c = random_cloud(500, rng);
    double leaf = 0.23;
    PointCloud out = voxel_downsample(c, leaf);
    CHECK(out.size() <= c.size());
    CHECK(out.size() > 0);
    // Each centroid stays inside its own voxel.
    for (const Vec3& p : out.positions) {
        Vec3 cell = (p / leaf).array().floor();
        bool inside = true;
        for (int a = 0; a < 3; ++a) {
            if (p[a] < cell[a] * leaf - 1e-12 || p[a] > (cell[a] + 1) * leaf + 1e-12) {
                inside = false;
            }
        }
        CHECK(inside);
    }
}

TEST_CASE("voxel_downsample rejects empty input and non-positive leaf") {
    PointCloud empty;
    CHECK_THROWS_AS(voxel_downsample(empty, 0.1), EmptyCloud);
    PointCloud one;
    one.positions = {Vec3::Zero()};
    CHECK_THROWS_AS(voxel_downsample(one, 0.0), Error);
}

TEST_CASE("estimate_normals recovers a plane's normal oriented to the viewpoint") {
    PointCloud plane;
    for (int i = 0; i < 20; ++i) {
        for (int j = 0; j < 20; ++j) {
            plane.positions.emplace_back(0.05 * i, 0.05 * j, 0.0);
        }
    }
    Vec3 viewpoint(0.5, 0.5, 2.0);
    PointCloud out = estimate_normals(plane, 0.12, viewpoint);
    REQUIRE(out.size() == plane.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        CHECK(out.positions[i] == plane.positions[i]);
        CHECK(out.normals[i].norm() == doctest::Approx(1.0).epsilon(1e-9));
        // The plane is z = 0, the viewpoint is above: normals must be +z.
        CHECK(out.normals[i].z() == doctest::Approx(1.0).epsilon(1e-6));
    }

    // Viewpoint below flips every normal.
    PointCloud flipped = estimate_normals(plane, 0.12, Vec3(0.5, 0.5, -2.0));
    for (const Vec3& n : flipped.normals) CHECK(n.z() == doctest::Approx(-1.0).epsilon(1e-6));
}

TEST_CASE("estimate_normals marks isolated points with the zero normal") {
    PointCloud c;
    c.positions = {Vec3(0, 0, 0), Vec3(0.01, 0, 0), Vec3(0.02, 0, 0), Vec3(10, 10, 10)};
    PointCloud out = estimate_normals(c, 0.05, Vec3(0, 0, 1));
    // The isolated point has only itself within radius: zero marker.
    CHECK(out.normals[3].norm() == 0.0);
    // Three collinear close points have >= 3 neighbors; a normal exists
    // (perpendicular to the line, some orientation).
    CHECK(out.normals[0].norm() == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(std::abs(out.normals[0].dot(Vec3::UnitX())) < 1e-9);
}

TEST_CASE("estimate_normals is independent of the thread count") {
    RngStream rng(32, 0);
    PointCloud c = random_cloud(400, rng);
    PointCloud base = estimate_normals(c, 0.3, Vec3::Zero(), 1);
    for (int threads : {2, 4, 16}) {
        PointCloud other = estimate_normals(c, 0.3, Vec3::Zero(), threads);
        REQUIRE(other.size() == base.size());
        for (std::size_t i = 0; i < base.size(); ++i) {
            CHECK(base.normals[i] == other.normals[i]);  // bitwise equal
        }
    }
}

TEST_CASE("estimate_normals rejects empty clouds") {
    PointCloud empty;
    CHECK_THROWS_AS(estimate_normals(empty, 0.1), EmptyCloud);
}
