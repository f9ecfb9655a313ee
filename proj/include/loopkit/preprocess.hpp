#pragma once

#include "loopkit/geometry.hpp"

namespace loopkit {

/// Voxel-grid decimation with origin-anchored cells of size `leaf`.
/// Each occupied voxel yields one point: the centroid of its members, with
/// the normalized mean of the members' valid normals (zero when no member
/// has one or the mean cancels). Output points are ordered by the smallest
/// input index each voxel contains, so the result is independent of any
/// internal container order. Throws EmptyCloud; leaf must be positive.
PointCloud voxel_downsample(const PointCloud& cloud, double leaf);

/// Covariance-based normals from all neighbors within `radius` (self
/// included): the eigenvector of the smallest eigenvalue, oriented to face
/// `viewpoint`. Points with fewer than 3 neighbors keep the zero marker.
/// Positions are copied unchanged. Parallel over points; results do not
/// depend on the thread count. Throws EmptyCloud.
PointCloud estimate_normals(const PointCloud& cloud, double radius,
                            const Vec3& viewpoint = Vec3::Zero(), int threads = 0);

}  // namespace loopkit
