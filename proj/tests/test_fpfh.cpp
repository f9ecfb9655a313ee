#include <cmath>
#include <vector>

#include "doctest.h"
#include "loopkit/errors.hpp"
#include "loopkit/fpfh.hpp"
#include "loopkit/preprocess.hpp"
#include "loopkit/rng.hpp"
#include "support/helpers.hpp"

using namespace loopkit;
using testing::random_cloud;
using testing::random_transform;

namespace {

/// A bumpy patch with enough curvature for distinctive signatures.
PointCloud bumpy_patch(int n_side) {
    PointCloud c;
    for (int i = 0; i < n_side; ++i) {
        for (int j = 0; j < n_side; ++j) {
            double x = 0.04 * i, y = 0.04 * j;
            double z = 0.08 * std::sin(7.0 * x) * std::cos(5.0 * y);
            c.positions.emplace_back(x, y, z);
        }
    }
    return estimate_normals(c, 0.1, Vec3(0.5, 0.5, 5.0));
}

double feature_distance(const FpfhFeature& a, const FpfhFeature& b) {
    double d2 = 0.0;
    for (int k = 0; k < kFpfhDim; ++k) {
        double diff = static_cast<double>(a[k]) - static_cast<double>(b[k]);
        d2 += diff * diff;
    }
    return std::sqrt(d2);
}

}  // namespace

TEST_CASE("fpfh histograms are non-negative and finite") {
    PointCloud c = bumpy_patch(15);
    auto features = compute_fpfh(c, 0.15);
    REQUIRE(features.size() == c.size());
    for (const auto& f : features) {
        for (int k = 0; k < kFpfhDim; ++k) {
            CHECK(f[k] >= 0.0f);
            CHECK(std::isfinite(f[k]));
        }
    }
}

TEST_CASE("fpfh is invariant under rigid motion") {
    PointCloud c = bumpy_patch(13);
    auto base = compute_fpfh(c, 0.15);

    RngStream rng(41, 0);
    RigidTransform t = random_transform(rng, 2.0, 3.0);
    PointCloud moved = transformed(c, t);
    auto rotated = compute_fpfh(moved, 0.15);

    REQUIRE(rotated.size() == base.size());
    double worst = 0.0;
    for (std::size_t i = 0; i < base.size(); ++i) {
        worst = std::max(worst, feature_distance(base[i], rotated[i]));
    }
    // The angle binning is rotation invariant up to floating-point jitter at
    // bin boundaries; the signature scale is ~100 per angle histogram.
    CHECK(worst < 1.0);
}

TEST_CASE("fpfh distinguishes geometry classes") {
    // Flat plane vs. a sharp corner: their signatures must differ clearly.
    PointCloud plane;
    for (int i = 0; i < 12; ++i) {
        for (int j = 0; j < 12; ++j) plane.positions.emplace_back(0.04 * i, 0.04 * j, 0.0);
    }
    plane = estimate_normals(plane, 0.1, Vec3(0, 0, 5));

    PointCloud corner;
    for (int i = 0; i < 12; ++i) {
        for (int j = 0; j < 12; ++j) {
            corner.positions.emplace_back(0.04 * i, 0.04 * j, 0.0);
            corner.positions.emplace_back(0.04 * i, 0.0, 0.04 * j);
        }
    }
    corner = estimate_normals(corner, 0.1, Vec3(0.3, 1.0, 1.0));

    auto pf = compute_fpfh(plane, 0.15);
    auto cf = compute_fpfh(corner, 0.15);
    // Compare the feature at the plane's center vs. at the corner edge.
    double d = feature_distance(pf[12 * 6 + 6], cf[0]);
    CHECK(d > 10.0);
}

TEST_CASE("fpfh zeroes points without valid normals") {
    PointCloud c = bumpy_patch(8);
    c.normals[10] = Vec3::Zero();
    auto features = compute_fpfh(c, 0.15);
    float sum = 0.0f;
    for (int k = 0; k < kFpfhDim; ++k) sum += features[10][k];
    CHECK(sum == 0.0f);
}

TEST_CASE("fpfh is independent of the thread count") {
    PointCloud c = bumpy_patch(12);
    auto base = compute_fpfh(c, 0.15, 1);
    for (int threads : {2, 4, 16}) {
        auto other = compute_fpfh(c, 0.15, threads);
        REQUIRE(other.size() == base.size());
        for (std::size_t i = 0; i < base.size(); ++i) {
            for (int k = 0; k < kFpfhDim; ++k) CHECK(base[i][k] == other[i][k]);
        }
    }
}

TEST_CASE("fpfh input validation") {
    PointCloud empty;
    CHECK_THROWS_AS(compute_fpfh(empty, 0.1), EmptyCloud);
    RngStream rng(42, 0);
    PointCloud no_normals = random_cloud(10, rng);
    CHECK_THROWS_AS(compute_fpfh(no_normals, 0.1), MissingNormals);
}
