#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "loopkit/geometry.hpp"

namespace loopkit {

struct Landmark {
    int id = 0;
    Vec3 position = Vec3::Zero();
};

/// One pixel measurement of a landmark from a keyframe; `sigma` scales the
/// residual (isotropic measurement noise in pixels).
struct Observation {
    int keyframe_id = 0;
    int landmark_id = 0;
    Vec2 pixel = Vec2::Zero();
    double sigma = 1.0;
};

/// Pinhole projection of world point X through the world-to-camera pose.
/// Returns nullopt when the camera-frame depth is <= 1e-6.
std::optional<Vec2> project(const CameraIntrinsics& k, const RigidTransform& world_to_camera,
                            const Vec3& x);

/// Huber loss of a scalar residual magnitude: 0.5 r^2 inside delta,
/// delta * (r - 0.5 delta) outside.
double huber(double r, double delta);

/// Residual and analytic Jacobians of one observation at a linearization
/// point. The pose Jacobian is taken w.r.t. a left-multiplied twist update
/// of the world-to-camera pose (y' = exp(delta) * (cam * X)); the point
/// Jacobian w.r.t. the world-frame landmark position.
struct ObservationLinearization {
    Vec2 residual = Vec2::Zero();                                          // (pixel - u)/sigma
    Eigen::Matrix<double, 2, 6> d_pose = Eigen::Matrix<double, 2, 6>::Zero();
    Eigen::Matrix<double, 2, 3> d_point = Eigen::Matrix<double, 2, 3>::Zero();
};

/// Returns nullopt when the landmark is behind (or too close to) the camera.
std::optional<ObservationLinearization> observation_jacobian(const CameraIntrinsics& k,
                                                             const RigidTransform& world_to_camera,
                                                             const Vec3& x, const Vec2& pixel,
                                                             double sigma);

struct BaConfig {
    double huber_delta = 2.45;  // in sigma-scaled pixel units
    int max_iterations = 50;
    double rel_tol = 1e-8;  // relative cost decrease that counts as converged
    double init_damping = 1e-6;
};

struct BaResult {
    double initial_cost = 0.0;
    double final_cost = 0.0;
    double final_rmse_px = 0.0;  // over observations active at the solution
    int iterations = 0;
    std::int64_t active_observations = 0;
};

/// Joint robust refinement of keyframe poses and landmark positions.
///
/// Residual per observation: (pixel - projection) / sigma, scored with the
/// Huber loss; IRLS weights (1 inside delta, delta/r outside) feed a damped
/// Gauss-Newton step with analytic Jacobians. The first keyframe is the
/// gauge and stays fixed. Observations whose landmark falls behind the
/// camera are dropped for that iteration. When #landmarks > 10 #keyframes
/// the landmark block is eliminated by its Schur complement, otherwise the
/// full dense system is solved. Steps are accepted only on cost decrease;
/// terminates on relative decrease < rel_tol or the iteration cap.
/// Throws MissingData (unknown or duplicate ids) and
/// InsufficientObservations (any landmark seen fewer than 2 times).
BaResult bundle_adjust(std::vector<Keyframe>& keyframes, std::vector<Landmark>& landmarks,
                       std::span<const Observation> observations, const CameraIntrinsics& k,
                       const BaConfig& config = {});

}  // namespace loopkit
