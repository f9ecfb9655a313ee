#pragma once

#include <span>
#include <vector>

#include "loopkit/geometry.hpp"
#include "loopkit/io.hpp"

namespace loopkit {

struct AteOptions {
    double tolerance = 0.02;  // timestamp association tolerance, seconds
    bool align = true;        // rigidly align estimate to truth before scoring
};

/// Best rigid alignment mapping `from` onto `to` (least squares). Falls back
/// to a pure translation between centroids when the point sets are too
/// degenerate for a rotation fit.
RigidTransform align_rigid(std::span<const Vec3> from, std::span<const Vec3> to);

/// Absolute trajectory error. Poses are associated by nearest timestamp
/// within the tolerance (greedy, one-to-one); the estimate is aligned to the
/// truth over the associated positions; returns the RMSE of the remaining
/// translational differences. Throws TooFewAssociations when fewer than 3
/// pairs associate.
double eval_ate_rmse(std::span<const TimedPose> estimate, std::span<const TimedPose> truth,
                     const AteOptions& options = {});

struct SurfaceError {
    double mean = 0.0;
    double median = 0.0;
};

/// Directional reconstruction-to-truth surface error: for every reconstructed
/// point, the distance to its nearest neighbor in the truth cloud; returns the
/// mean and median. Throws EmptyCloud when either cloud is empty.
SurfaceError eval_surface(const PointCloud& recon, const PointCloud& truth);

struct RegistrationScore {
    double recall = 0.0;
    double precision = 0.0;
    int correct = 0;
    int truth_count = 0;
    int result_count = 0;
};

/// Scores a registration log against a ground-truth log. A result is correct
/// iff its (i, j) pair appears in the truth and the RMSE of the probe points
/// under the estimated transform, relative to the true transform, is below
/// rmse_max. Probe points for a pair are taken from probes[j] (the source
/// fragment's cloud) when available, otherwise the 8 corners of a 1 m cube.
/// Empty results score recall 0 and precision 0.
RegistrationScore eval_registration(std::span<const LogEntry> results,
                                    std::span<const LogEntry> truth,
                                    std::span<const PointCloud> probes = {},
                                    double rmse_max = 0.2);

}  // namespace loopkit
