#include <cmath>
#include <string>
#include <vector>

#include "doctest.h"
#include "loopkit/errors.hpp"
#include "loopkit/metrics.hpp"
#include "loopkit/rng.hpp"
#include "support/helpers.hpp"

using namespace loopkit;
using testing::random_transform;

namespace {

std::vector<TimedPose> line_trajectory(int n, double dt = 1.0) {
    std::vector<TimedPose> out;
    for (int i = 0; i < n; ++i) {
        TimedPose tp;
        tp.timestamp = dt * i;
        tp.pose.translation = Vec3(1.0 * i, 0.25 * i, std::sin(0.3 * i));
        out.push_back(tp);
    }
    return out;
}

LogEntry make_entry(int i, int j, int n, const RigidTransform& t) {
    LogEntry e;
    e.i = i;
    e.j = j;
    e.n = n;
    e.transform = t.matrix();
    return e;
}

}  // namespace

TEST_CASE("align_rigid recovers a planted transform and degrades to translation") {
    RngStream rng(31, 0);
    RigidTransform t = random_transform(rng, 2.0, 3.0);
    std::vector<Vec3> from, to;
    for (int i = 0; i < 20; ++i) {
        Vec3 p(rng.next_double(-1, 1), rng.next_double(-1, 1), rng.next_double(-1, 1));
        from.push_back(p);
        to.push_back(t * p);
    }
    RigidTransform fit = align_rigid(from, to);
    CHECK(testing::transform_distance(fit, t) < 1e-9);

    // Collinear support cannot fix a rotation: centroid translation fallback.
    std::vector<Vec3> line_from, line_to;
    for (int i = 0; i < 5; ++i) {
        line_from.emplace_back(1.0 * i, 0, 0);
        line_to.emplace_back(1.0 * i + 2.0, 1.0, 0);
    }
    RigidTransform fallback = align_rigid(line_from, line_to);
    CHECK((fallback.rotation - Mat3::Identity()).norm() == 0.0);
    CHECK((fallback.translation - Vec3(2, 1, 0)).norm() < 1e-12);

    // A single pair is likewise a pure translation.
    RigidTransform single = align_rigid(std::vector<Vec3>{Vec3(1, 1, 1)},
                                        std::vector<Vec3>{Vec3(0, 3, 1)});
    CHECK((single.translation - Vec3(-1, 2, 0)).norm() < 1e-12);
}

TEST_CASE("trajectory error is zero on identical input and matches a hand RMSE") {
    auto truth = line_trajectory(10);
    CHECK(eval_ate_rmse(truth, truth) < 1e-12);

    // Known perturbation, no alignment: RMSE by hand.
    auto est = truth;
    est[0].pose.translation += Vec3(0.3, 0, 0);
    est[5].pose.translation += Vec3(0, 0.4, 0);
    AteOptions raw;
    raw.align = false;
    double expect = std::sqrt((0.3 * 0.3 + 0.4 * 0.4) / 10.0);
    CHECK(eval_ate_rmse(est, truth, raw) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("trajectory error is invariant to a rigid motion of the estimate") {
    auto truth = line_trajectory(12);
    RngStream rng(37, 0);
    RigidTransform g = random_transform(rng, 2.5, 8.0);
    auto est = truth;
    for (TimedPose& tp : est) tp.pose = compose(g, tp.pose);

    CHECK(eval_ate_rmse(est, truth) < 1e-9);  // aligned: the motion is removed
    AteOptions raw;
    raw.align = false;
    CHECK(eval_ate_rmse(est, truth, raw) > 1.0);  // unaligned: it is not
}

TEST_CASE("trajectory association is nearest-in-time, one-to-one, within tolerance") {
    auto truth = line_trajectory(4);  // t = 0, 1, 2, 3
    auto est = truth;
    est[0].timestamp = 0.015;  // inside the 0.02 s default tolerance
    est[1].timestamp = 1.019;
    est[2].timestamp = 2.0;
    est[3].timestamp = 3.5;  // outside: this pose drops out
    est[3].pose.translation += Vec3(100, 0, 0);  // would dominate if included
    CHECK(eval_ate_rmse(est, truth) < 1e-9);

    // Two estimates compete for the same truth pose: the closer one wins and
    // the loser associates with nothing (one-to-one), leaving only 2 pairs.
    std::vector<TimedPose> sparse_truth(truth.begin(), truth.begin() + 3);
    std::vector<TimedPose> crowd = {est[2], est[2], est[2]};
    crowd[0].timestamp = 1.995;
    crowd[1].timestamp = 2.005;
    crowd[2].timestamp = 0.0;
    CHECK_THROWS_AS(eval_ate_rmse(crowd, sparse_truth), TooFewAssociations);

    // Disjoint time ranges: the error message carries the pair count.
    auto late = truth;
    for (TimedPose& tp : late) tp.timestamp += 100.0;
    try {
        eval_ate_rmse(late, truth);
        FAIL("expected TooFewAssociations");
    } catch (const TooFewAssociations& e) {
        CHECK(std::string(e.what()).find("0 associated pairs, need 3") != std::string::npos);
    }
}

TEST_CASE("surface error reproduces hand-computed directional distances") {
    PointCloud truth;
    truth.positions = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(2, 0, 0)};
    PointCloud recon;
    recon.positions = {Vec3(0, 0.1, 0), Vec3(1, 0, 0), Vec3(2, 0, 0.3), Vec3(5, 0, 0)};

    // Distances to nearest truth point: 0.1, 0, 0.3, 3 -> mean 0.85,
    // median (even count) = (0.1 + 0.3) / 2 = 0.2.
    SurfaceError err = eval_surface(recon, truth);
    CHECK(err.mean == doctest::Approx(0.85).epsilon(1e-12));
    CHECK(err.median == doctest::Approx(0.2).epsilon(1e-12));

    // Direction matters: scoring the truth against the reconstruction sees
    // no 3 m straggler (its nearest recon point is 1.4... away, not 3).
    SurfaceError reversed = eval_surface(truth, recon);
    CHECK(reversed.mean < err.mean);

    CHECK_THROWS_AS(eval_surface(PointCloud{}, truth), EmptyCloud);
    CHECK_THROWS_AS(eval_surface(truth, PointCloud{}), EmptyCloud);
}

TEST_CASE("surface median shrugs off a lone outlier that moves the mean") {
    RngStream rng(41, 0);
    PointCloud truth = testing::random_cloud(999, rng);
    PointCloud recon = truth;
    recon.positions.push_back(Vec3(50, 50, 50));  // 1 outlier among 999 exact hits

    SurfaceError err = eval_surface(recon, truth);
    CHECK(err.median == 0.0);
    CHECK(err.mean > 0.05);  // ~sqrt(3)*49/1000
}

TEST_CASE("registration scoring credits correct pairs once and gates on probe error") {
    RngStream rng(43, 0);
    RigidTransform t01 = random_transform(rng, 1.0, 1.0);
    RigidTransform t02 = random_transform(rng, 1.0, 1.0);
    RigidTransform t13 = random_transform(rng, 1.0, 1.0);
    std::vector<LogEntry> truth = {make_entry(1, 0, 4, t01), make_entry(2, 0, 4, t02),
                                   make_entry(3, 1, 4, t13)};

    RigidTransform near_t01 = t01;
    near_t01.translation += Vec3(0.05, 0, 0);  // 0.05 rmse < 0.2: still correct
    RigidTransform far_t02 = t02;
    far_t02.translation += Vec3(1.0, 0, 0);  // 1.0 rmse: wrong

    std::vector<LogEntry> results = {make_entry(1, 0, 4, near_t01), make_entry(2, 0, 4, far_t02),
                                     make_entry(2, 1, 4, t13)};  // pair (2,1) not in truth
    RegistrationScore s = eval_registration(results, truth);
    CHECK(s.correct == 1);
    CHECK(s.truth_count == 3);
    CHECK(s.result_count == 3);
    CHECK(s.recall == doctest::Approx(1.0 / 3.0));
    CHECK(s.precision == doctest::Approx(1.0 / 3.0));

    // The same correct answer twice is credited once; precision pays for it.
    std::vector<LogEntry> duped = {make_entry(1, 0, 4, t01), make_entry(1, 0, 4, t01)};
    s = eval_registration(duped, truth);
    CHECK(s.correct == 1);
    CHECK(s.recall == doctest::Approx(1.0 / 3.0));
    CHECK(s.precision == doctest::Approx(0.5));

    // Empty results: defined as zero recall and zero precision.
    s = eval_registration({}, truth);
    CHECK(s.recall == 0.0);
    CHECK(s.precision == 0.0);
    CHECK(s.correct == 0);
    CHECK(s.result_count == 0);
}

TEST_CASE("registration scoring measures the error where the probe points live") {
    // A 0.01 rad rotation error is harmless on the default 1 m cube but
    // fatal once the probe cloud sits on a 40 m lever arm.
    RigidTransform gt = RigidTransform::identity();
    RigidTransform est = gt;
    est.rotation = Eigen::AngleAxisd(0.01, Vec3::UnitZ().eval()).toRotationMatrix();

    std::vector<LogEntry> truth = {make_entry(2, 0, 3, gt)};
    std::vector<LogEntry> results = {make_entry(2, 0, 3, est)};

    RegistrationScore cube_score = eval_registration(results, truth);
    CHECK(cube_score.correct == 1);  // ~0.007 rmse on the cube corners

    std::vector<PointCloud> probes(1);
    for (int i = 0; i < 16; ++i) probes[0].positions.emplace_back(40.0, 0.1 * i, 0.0);
    RegistrationScore probe_score = eval_registration(results, truth, probes);
    CHECK(probe_score.correct == 0);  // ~0.4 rmse at the lever arm
}
