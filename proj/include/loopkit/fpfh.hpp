#pragma once

#include <array>
#include <span>
#include <vector>

#include "loopkit/geometry.hpp"

namespace loopkit {

inline constexpr int kFpfhBinsPerAngle = 11;
inline constexpr int kFpfhDim = 3 * kFpfhBinsPerAngle;

/// 33-bin point signature: three concatenated 11-bin histograms over the
/// pair angles (alpha, phi, theta) of the neighborhood.
struct FpfhFeature {
    std::array<float, kFpfhDim> bins{};

    float& operator[](int i) { return bins[static_cast<std::size_t>(i)]; }
    float operator[](int i) const { return bins[static_cast<std::size_t>(i)]; }
};

/// Computes the feature at every point from neighbors within `radius`.
///
/// Per point, each neighbor pair contributes one vote per angle histogram
/// (source of the pair frame chosen so the source normal makes the smaller
/// angle with the connecting line). The per-point sub-histogram is scaled to
/// sum to 100 per angle, then features are blended with the neighbors'
/// sub-histograms weighted by 1/distance; the blended result is NOT
/// re-normalized. Points with no valid normal or no neighbors get all-zero
/// features. Throws EmptyCloud and MissingNormals.
std::vector<FpfhFeature> compute_fpfh(const PointCloud& cloud, double radius, int threads = 0);

}  // namespace loopkit
