#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "loopkit/geometry.hpp"

namespace loopkit {

struct FpfhFeature;

/// Integer cell of p in a grid anchored at `center`: floor((p - center) / cell).
Eigen::Vector3i grid_index(const Vec3& p, const Vec3& center, double cell_length);

/// Unbounded sparse voxel grid over a point set. Cells are keyed by their
/// integer triple; per-cell point indices are stored contiguously (CSR) in
/// ascending order, which all queries rely on for deterministic ties.
class SearchGrid {
public:
    SearchGrid() = default;

    double cell_length() const { return cell_length_; }
    const Vec3& center() const { return center_; }
    std::size_t size() const { return points_.size(); }
    const std::vector<Vec3>& points() const { return points_; }

    /// Indices stored in the given cell, ascending. Empty span if vacant.
    std::span<const int> cell(const Eigen::Vector3i& c) const;

    /// Inclusive bounds of occupied cells, valid only when size() > 0.
    const Eigen::Vector3i& cell_min() const { return cell_min_; }
    const Eigen::Vector3i& cell_max() const { return cell_max_; }

    friend SearchGrid build_grid(const PointCloud& cloud, double cell_length, const Vec3& center);

private:
    double cell_length_ = 1.0;
    Vec3 center_ = Vec3::Zero();
    std::vector<Vec3> points_;
    std::vector<int> cell_points_;
    std::unordered_map<std::uint64_t, std::pair<int, int>> cells_;  // key -> (start, count)
    Eigen::Vector3i cell_min_ = Eigen::Vector3i::Zero();
    Eigen::Vector3i cell_max_ = Eigen::Vector3i::Zero();
};

/// Builds the grid. Throws EmptyCloud and rejects cell_length <= 0.
SearchGrid build_grid(const PointCloud& cloud, double cell_length, const Vec3& center = Vec3::Zero());

struct NnResult {
    int index = -1;
    double distance = 0.0;
};

/// Exact nearest neighbor within d_max (inclusive), or nullopt.
/// Scans the (2c+1)^3 cell block with c = ceil(d_max / cell_length), so the
/// result is identical to a brute-force scan; ties go to the lowest index.
std::optional<NnResult> nn_within(const SearchGrid& grid, const Vec3& query, double d_max);

/// Exact unbounded nearest neighbor via expanding cell rings.
/// Throws EmptyCloud on an empty grid; ties go to the lowest index.
NnResult nn_nearest(const SearchGrid& grid, const Vec3& query);

/// Indices of all points within radius (inclusive), ascending.
std::vector<int> radius_search(const SearchGrid& grid, const Vec3& query, double radius);

/// For each source feature, the index of its L2-nearest target feature
/// (ties to the lowest index). Embarrassingly parallel over sources; the
/// per-source result does not depend on the thread count. Throws MissingData
/// when either side is empty.
std::vector<int> feature_nn_cache(std::span<const FpfhFeature> source,
                                  std::span<const FpfhFeature> target,
                                  int threads = 0);

}  // namespace loopkit
