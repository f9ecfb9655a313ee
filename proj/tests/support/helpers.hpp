#pragma once

// Shared random-data builders for the unit tests.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>

#include "loopkit/geometry.hpp"
#include "loopkit/rng.hpp"

namespace loopkit::testing {

/// Uniform points in the axis-aligned box [lo, hi]^3.
inline PointCloud random_cloud(int n, RngStream& rng, double lo = -1.0, double hi = 1.0,
                               bool with_normals = false) {
    PointCloud c;
    for (int i = 0; i < n; ++i) {
        c.positions.emplace_back(rng.next_double(lo, hi), rng.next_double(lo, hi),
                                 rng.next_double(lo, hi));
    }
    if (with_normals) {
        for (int i = 0; i < n; ++i) {
            Vec3 v(rng.next_gaussian(), rng.next_gaussian(), rng.next_gaussian());
            double len = v.norm();
            c.normals.push_back(len > 1e-12 ? Vec3(v / len) : Vec3::UnitZ());
        }
    }
    return c;
}

/// Random rotation (axis-angle, angle <= max_angle) plus bounded translation.
inline RigidTransform random_transform(RngStream& rng, double max_angle = M_PI * 0.9,
                                       double max_trans = 1.0) {
    Vec3 axis(rng.next_gaussian(), rng.next_gaussian(), rng.next_gaussian());
    if (axis.norm() < 1e-12) axis = Vec3::UnitX();
    axis.normalize();
    double angle = rng.next_double(0.0, max_angle);
    RigidTransform t;
    t.rotation = Eigen::AngleAxisd(angle, axis).toRotationMatrix();
    t.translation = Vec3(rng.next_double(-max_trans, max_trans),
                         rng.next_double(-max_trans, max_trans),
                         rng.next_double(-max_trans, max_trans));
    return t;
}

inline double transform_distance(const RigidTransform& a, const RigidTransform& b) {
    return (a.matrix() - b.matrix()).cwiseAbs().maxCoeff();
}

/// Unique per-test scratch directory under the build tree, wiped on entry.
class TempDir {
public:
    explicit TempDir(const std::string& name)
        : path_(std::filesystem::temp_directory_path() / ("loopkit_test_" + name)) {
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    std::string file(const std::string& name) const { return (path_ / name).string(); }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

}  // namespace loopkit::testing
