#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <vector>

#include "loopkit/errors.hpp"

namespace loopkit {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;

/// Rigid motion in SE(3): x -> rotation * x + translation.
struct RigidTransform {
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();

    static RigidTransform identity() { return {}; }

    Vec3 operator*(const Vec3& p) const { return rotation * p + translation; }

    Mat4 matrix() const {
        Mat4 m = Mat4::Identity();
        m.topLeftCorner<3, 3>() = rotation;
        m.topRightCorner<3, 1>() = translation;
        return m;
    }

    static RigidTransform from_matrix(const Mat4& m) {
        return {m.topLeftCorner<3, 3>(), m.topRightCorner<3, 1>()};
    }
};

/// compose(a, b) applies b first, then a (matrix product a * b).
RigidTransform compose(const RigidTransform& a, const RigidTransform& b);

RigidTransform inverse(const RigidTransform& t);

/// True iff rotation is orthonormal with determinant +1 within tol.
bool is_rigid(const RigidTransform& t, double tol = 1e-9);

/// Rotation angle in [0, pi] recovered from the trace.
double rotation_angle(const Mat3& r);

/// Small-motion parameterization (alpha, beta, gamma, x, y, z):
/// three Euler angles about the fixed x, y, z axes and a translation.
struct Twist {
    double alpha = 0.0;
    double beta = 0.0;
    double gamma = 0.0;
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    Vec6 vector() const {
        Vec6 v;
        v << alpha, beta, gamma, x, y, z;
        return v;
    }
    static Twist from_vector(const Vec6& v) { return {v[0], v[1], v[2], v[3], v[4], v[5]}; }
};

/// Exact inverse of transform_from_twist.
/// Throws RotationTooLarge when the rotation angle reaches pi/2, where
/// the Euler extraction (and the small-angle residual model) breaks down.
Twist twist_from_transform(const RigidTransform& t);

/// Rotation Rx(alpha) * Ry(beta) * Rz(gamma), translation (x, y, z).
/// To first order the rotation is I + [omega]_x with omega = (alpha, beta, gamma).
RigidTransform transform_from_twist(const Twist& xi);

/// Skew-symmetric matrix [v]_x with [v]_x * w = v cross w.
Mat3 skew(const Vec3& v);

/// Least-squares rigid fit: returns T minimizing sum |T * src_i - dst_i|^2.
/// SVD with reflection correction, so the result is always a proper rotation.
/// Throws TooFewPoints (< 3 pairs or size mismatch) and
/// DegenerateConfiguration (collinear or coincident points: the covariance
/// has rank < 2 and the rotation is not unique).
RigidTransform kabsch(std::span<const Vec3> src, std::span<const Vec3> dst);

/// Point set with optional per-point normals.
/// `normals` is either empty or parallel to `positions`. A stored normal is
/// either unit length (within 1e-6) or exactly zero, the marker for a point
/// whose normal could not be estimated.
struct PointCloud {
    std::vector<Vec3> positions;
    std::vector<Vec3> normals;

    std::size_t size() const { return positions.size(); }
    bool empty() const { return positions.empty(); }
    bool has_normals() const { return !normals.empty(); }
};

/// Throws if the normals array breaks the PointCloud contract.
void validate_cloud(const PointCloud& c);

/// Applies T to positions and T's rotation to valid normals.
PointCloud transformed(const PointCloud& c, const RigidTransform& t);

/// Mean position. Throws EmptyCloud.
Vec3 centroid(const PointCloud& c);

struct CameraIntrinsics {
    double fx = 0.0;
    double fy = 0.0;
    double cx = 0.0;
    double cy = 0.0;
    int width = 0;
    int height = 0;
};

/// Camera pose at a time stamp; `pose` maps camera coordinates to world.
struct Keyframe {
    int id = 0;
    double timestamp = 0.0;
    RigidTransform pose;
};

/// Oriented disk living in the map, with the time window of the frames
/// that contributed to it (`t0` first, `tu` last).
struct Surfel {
    Vec3 position = Vec3::Zero();
    Vec3 normal = Vec3::UnitZ();
    double radius = 0.0;
    double confidence = 0.0;
    double t0 = 0.0;
    double tu = 0.0;
};

}  // namespace loopkit
