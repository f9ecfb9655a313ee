#pragma once

// Serial brute-force counterparts of the accelerated kernels. They define
// the exact semantics the fast paths must reproduce; tests compare against
// them and the benchmark target reports the speed difference.

#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "loopkit/fpfh.hpp"
#include "loopkit/geometry.hpp"
#include "loopkit/grid.hpp"

namespace loopkit::reference {

inline std::optional<NnResult> nn_within(const PointCloud& cloud, const Vec3& query, double d_max) {
    double best_d2 = std::numeric_limits<double>::infinity();
    int best = -1;
    double d2_max = d_max * d_max;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        double d2 = (cloud.positions[i] - query).squaredNorm();
        if (d2 <= d2_max && d2 < best_d2) {
            best_d2 = d2;
            best = static_cast<int>(i);
        }
    }
    if (best < 0) return std::nullopt;
    return NnResult{best, std::sqrt(best_d2)};
}

inline NnResult nn_nearest(const PointCloud& cloud, const Vec3& query) {
    double best_d2 = std::numeric_limits<double>::infinity();
    int best = -1;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        double d2 = (cloud.positions[i] - query).squaredNorm();
        if (d2 < best_d2) {
            best_d2 = d2;
            best = static_cast<int>(i);
        }
    }
    return {best, std::sqrt(best_d2)};
}

inline std::vector<int> radius_search(const PointCloud& cloud, const Vec3& query, double radius) {
    std::vector<int> out;
    double r2 = radius * radius;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        if ((cloud.positions[i] - query).squaredNorm() <= r2) out.push_back(static_cast<int>(i));
    }
    return out;
}

/// Double-precision exhaustive feature matcher.
inline std::vector<int> feature_nn_cache(std::span<const FpfhFeature> source,
                                         std::span<const FpfhFeature> target) {
    std::vector<int> cache(source.size(), -1);
    for (std::size_t i = 0; i < source.size(); ++i) {
        double best_d2 = std::numeric_limits<double>::infinity();
        int best = -1;
        for (std::size_t j = 0; j < target.size(); ++j) {
            double d2 = 0.0;
            for (int b = 0; b < kFpfhDim; ++b) {
                double diff = static_cast<double>(source[i][b]) - static_cast<double>(target[j][b]);
                d2 += diff * diff;
            }
            if (d2 < best_d2) {
                best_d2 = d2;
                best = static_cast<int>(j);
            }
        }
        cache[i] = best;
    }
    return cache;
}

}  // namespace loopkit::reference
