#include <cmath>
#include <vector>

#include "doctest.h"
#include "loopkit/errors.hpp"
#include "loopkit/geometry.hpp"
#include "loopkit/rng.hpp"
#include "support/helpers.hpp"

using namespace loopkit;
using testing::random_cloud;
using testing::random_transform;
using testing::transform_distance;

TEST_CASE("compose and inverse obey the group laws") {
    RngStream rng(7, 0);
    for (int trial = 0; trial < 20; ++trial) {
        RigidTransform a = random_transform(rng);
        RigidTransform b = random_transform(rng);
        Vec3 p(rng.next_gaussian(), rng.next_gaussian(), rng.next_gaussian());

        CHECK((compose(a, b) * p - a * (b * p)).norm() == doctest::Approx(0.0).epsilon(1e-12));
        CHECK(transform_distance(compose(a, inverse(a)), RigidTransform::identity()) < 1e-12);
        CHECK(transform_distance(compose(inverse(a), a), RigidTransform::identity()) < 1e-12);
        CHECK(is_rigid(compose(a, b)));
    }
}

TEST_CASE("matrix round trip preserves the transform") {
    RngStream rng(8, 0);
    RigidTransform t = random_transform(rng);
    CHECK(transform_distance(RigidTransform::from_matrix(t.matrix()), t) == 0.0);
}

TEST_CASE("rotation_angle recovers axis-angle magnitudes") {
    RngStream rng(9, 0);
    for (double angle : {0.0, 1e-8, 0.3, 1.5, M_PI - 1e-6}) {
        Vec3 axis(rng.next_gaussian(), rng.next_gaussian(), rng.next_gaussian());
        axis.normalize();
        Mat3 r = Eigen::AngleAxisd(angle, axis).toRotationMatrix();
        CHECK(rotation_angle(r) == doctest::Approx(angle).epsilon(1e-6).scale(1.0));
    }
}

TEST_CASE("skew matches the cross product") {
    RngStream rng(10, 0);
    Vec3 v(rng.next_gaussian(), rng.next_gaussian(), rng.next_gaussian());
    Vec3 w(rng.next_gaussian(), rng.next_gaussian(), rng.next_gaussian());
    CHECK((skew(v) * w - v.cross(w)).norm() == doctest::Approx(0.0).epsilon(1e-12));
    CHECK((skew(v) + skew(v).transpose()).norm() == 0.0);
}

TEST_CASE("twist round trips exactly below the angle limit") {
    RngStream rng(11, 0);
    for (int trial = 0; trial < 50; ++trial) {
        Twist xi{rng.next_double(-0.4, 0.4), rng.next_double(-0.4, 0.4),
                 rng.next_double(-0.4, 0.4), rng.next_double(-2.0, 2.0),
                 rng.next_double(-2.0, 2.0), rng.next_double(-2.0, 2.0)};
        RigidTransform t = transform_from_twist(xi);
        CHECK(is_rigid(t));
        Twist back = twist_from_transform(t);
        CHECK((back.vector() - xi.vector()).cwiseAbs().maxCoeff() < 1e-9);

        RigidTransform again = transform_from_twist(back);
        CHECK(transform_distance(again, t) < 1e-12);
    }
}

TEST_CASE("transform_from_twist is first-order I + skew(omega)") {
    Twist xi{1e-5, -2e-5, 3e-5, 0.0, 0.0, 0.0};
    Mat3 r = transform_from_twist(xi).rotation;
    Mat3 approx = Mat3::Identity() + skew(Vec3(xi.alpha, xi.beta, xi.gamma));
    CHECK((r - approx).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("twist_from_transform rejects rotations at or past pi/2") {
    RigidTransform t;
    t.rotation = Eigen::AngleAxisd(M_PI / 2 + 0.01, Vec3::UnitY().eval()).toRotationMatrix();
    CHECK_THROWS_AS(twist_from_transform(t), RotationTooLarge);
    t.rotation = Eigen::AngleAxisd(M_PI / 2 - 0.01, Vec3::UnitY().eval()).toRotationMatrix();
    CHECK_NOTHROW(twist_from_transform(t));
}

TEST_CASE("kabsch recovers a rigid motion exactly") {
    RngStream rng(12, 0);
    for (int trial = 0; trial < 20; ++trial) {
        RigidTransform truth = random_transform(rng);
        PointCloud cloud = random_cloud(16, rng);
        std::vector<Vec3> dst;
        for (const Vec3& p : cloud.positions) dst.push_back(truth * p);

        RigidTransform fit = kabsch(cloud.positions, dst);
        CHECK(transform_distance(fit, truth) < 1e-9);
        CHECK(is_rigid(fit));
    }
}

TEST_CASE("kabsch is least squares under noise") {
    RngStream rng(13, 0);
    RigidTransform truth = random_transform(rng, 0.5, 0.5);
    PointCloud cloud = random_cloud(200, rng);
    std::vector<Vec3> dst;
    for (const Vec3& p : cloud.positions) {
        Vec3 noise(rng.next_gaussian(), rng.next_gaussian(), rng.next_gaussian());
        dst.push_back(truth * p + 0.01 * noise);
    }
    RigidTransform fit = kabsch(cloud.positions, dst);

    auto cost = [&](const RigidTransform& t) {
        double s = 0.0;
        for (std::size_t i = 0; i < cloud.size(); ++i) {
            s += (t * cloud.positions[i] - dst[i]).squaredNorm();
        }
        return s;
    };
    double at_fit = cost(fit);
    // No nearby perturbation of the fit may do better.
    RngStream prng(14, 0);
    for (int k = 0; k < 30; ++k) {
        Twist d{prng.next_double(-1e-3, 1e-3), prng.next_double(-1e-3, 1e-3),
                prng.next_double(-1e-3, 1e-3), prng.next_double(-1e-3, 1e-3),
                prng.next_double(-1e-3, 1e-3), prng.next_double(-1e-3, 1e-3)};
        CHECK(cost(compose(transform_from_twist(d), fit)) >= at_fit - 1e-12);
    }
}

TEST_CASE("kabsch rejects degenerate input") {
    std::vector<Vec3> two = {Vec3(0, 0, 0), Vec3(1, 0, 0)};
    CHECK_THROWS_AS(kabsch(two, two), TooFewPoints);

    std::vector<Vec3> src = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(2, 0, 0)};
    CHECK_THROWS_AS(kabsch(src, src), DegenerateConfiguration);

    std::vector<Vec3> coincident(4, Vec3(1, 2, 3));
    CHECK_THROWS_AS(kabsch(coincident, coincident), DegenerateConfiguration);

    std::vector<Vec3> four = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1)};
    std::vector<Vec3> three = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)};
    CHECK_THROWS_AS(kabsch(four, three), TooFewPoints);
}

TEST_CASE("transformed moves positions and rotates only valid normals") {
    RngStream rng(15, 0);
    PointCloud cloud = random_cloud(40, rng, -1.0, 1.0, true);
    cloud.normals[5] = Vec3::Zero();  // unestimated marker
    RigidTransform t = random_transform(rng);

    PointCloud out = transformed(cloud, t);
    REQUIRE(out.size() == cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        CHECK((out.positions[i] - t * cloud.positions[i]).norm() < 1e-12);
    }
    CHECK(out.normals[5].norm() == 0.0);
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        if (i == 5) continue;
        CHECK((out.normals[i] - t.rotation * cloud.normals[i]).norm() < 1e-12);
        CHECK(out.normals[i].norm() == doctest::Approx(1.0).epsilon(1e-9));
    }

    // Rigidity: pairwise distances survive.
    for (int k = 0; k < 10; ++k) {
        std::size_t a = rng.next_bounded(40), b = rng.next_bounded(40);
        double before = (cloud.positions[a] - cloud.positions[b]).norm();
        double after = (out.positions[a] - out.positions[b]).norm();
        CHECK(after == doctest::Approx(before).epsilon(1e-12));
    }
}

TEST_CASE("centroid averages positions and rejects empty clouds") {
    PointCloud c;
    CHECK_THROWS_AS(centroid(c), EmptyCloud);
    c.positions = {Vec3(1, 0, 0), Vec3(3, 2, -4)};
    CHECK((centroid(c) - Vec3(2, 1, -2)).norm() < 1e-15);
}

TEST_CASE("validate_cloud enforces the normals contract") {
    PointCloud c;
    c.positions = {Vec3(0, 0, 0), Vec3(1, 1, 1)};
    CHECK_NOTHROW(validate_cloud(c));
    c.normals = {Vec3::UnitX()};
    CHECK_THROWS_AS(validate_cloud(c), Error);  // not parallel
    c.normals = {Vec3::UnitX(), Vec3(0.5, 0, 0)};
    CHECK_THROWS_AS(validate_cloud(c), Error);  // neither unit nor zero
    c.normals = {Vec3::UnitX(), Vec3::Zero()};
    CHECK_NOTHROW(validate_cloud(c));
}
