#include "loopkit/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace loopkit {

RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
    return {a.rotation * b.rotation, a.rotation * b.translation + a.translation};
}

RigidTransform inverse(const RigidTransform& t) {
    Mat3 rt = t.rotation.transpose();
    return {rt, -(rt * t.translation)};
}

bool is_rigid(const RigidTransform& t, double tol) {
    Mat3 should_be_identity = t.rotation.transpose() * t.rotation - Mat3::Identity();
    if (should_be_identity.cwiseAbs().maxCoeff() > tol) return false;
    return std::abs(t.rotation.determinant() - 1.0) <= tol;
}

double rotation_angle(const Mat3& r) {
    double c = (r.trace() - 1.0) / 2.0;
    return std::acos(std::clamp(c, -1.0, 1.0));
}

Twist twist_from_transform(const RigidTransform& t) {
    if (rotation_angle(t.rotation) >= M_PI / 2.0) {
        throw RotationTooLarge("twist_from_transform: rotation angle >= pi/2");
    }
    const Mat3& r = t.rotation;
    Twist xi;
    // Inverts Rx(a) * Ry(b) * Rz(g); row 0 is
    // [cb*cg, -cb*sg, sb], column 2 is [sb, -sa*cb, ca*cb]^T.
    xi.beta = std::asin(std::clamp(r(0, 2), -1.0, 1.0));
    xi.alpha = std::atan2(-r(1, 2), r(2, 2));
    xi.gamma = std::atan2(-r(0, 1), r(0, 0));
    xi.x = t.translation.x();
    xi.y = t.translation.y();
    xi.z = t.translation.z();
    return xi;
}

RigidTransform transform_from_twist(const Twist& xi) {
    double ca = std::cos(xi.alpha), sa = std::sin(xi.alpha);
    double cb = std::cos(xi.beta), sb = std::sin(xi.beta);
    double cg = std::cos(xi.gamma), sg = std::sin(xi.gamma);
    Mat3 rx, ry, rz;
    rx << 1, 0, 0, 0, ca, -sa, 0, sa, ca;
    ry << cb, 0, sb, 0, 1, 0, -sb, 0, cb;
    rz << cg, -sg, 0, sg, cg, 0, 0, 0, 1;
    return {rx * ry * rz, Vec3(xi.x, xi.y, xi.z)};
}

Mat3 skew(const Vec3& v) {
    Mat3 m;
    m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
    return m;
}

RigidTransform kabsch(std::span<const Vec3> src, std::span<const Vec3> dst) {
    if (src.size() != dst.size() || src.size() < 3) {
        throw TooFewPoints("kabsch: need >= 3 point pairs of equal count");
    }
    Vec3 cs = Vec3::Zero(), cd = Vec3::Zero();
    for (const Vec3& p : src) cs += p;
    for (const Vec3& p : dst) cd += p;
    cs /= static_cast<double>(src.size());
    cd /= static_cast<double>(dst.size());

    Mat3 h = Mat3::Zero();
    for (std::size_t i = 0; i < src.size(); ++i) {
        h += (src[i] - cs) * (dst[i] - cd).transpose();
    }

    Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Vec3 sigma = svd.singularValues();
    // Rank < 2 means the points are collinear/coincident and the in-plane
    // rotation is unconstrained.
    double scale = std::max(sigma[0], 1.0);
    if (sigma[1] <= 1e-12 * scale) {
        throw DegenerateConfiguration("kabsch: covariance rank < 2");
    }
    Mat3 u = svd.matrixU();
    Mat3 v = svd.matrixV();
    Mat3 d = Mat3::Identity();
    d(2, 2) = (v * u.transpose()).determinant() < 0 ? -1.0 : 1.0;
    Mat3 r = v * d * u.transpose();
    return {r, cd - r * cs};
}

void validate_cloud(const PointCloud& c) {
    if (!c.normals.empty() && c.normals.size() != c.positions.size()) {
        throw MissingNormals("normals array must be empty or match positions");
    }
    for (const Vec3& n : c.normals) {
        double len = n.norm();
        if (len != 0.0 && std::abs(len - 1.0) > 1e-6) {
            throw MissingNormals("normals must be unit length or exactly zero");
        }
    }
}

PointCloud transformed(const PointCloud& c, const RigidTransform& t) {
    PointCloud out;
    out.positions.reserve(c.positions.size());
    for (const Vec3& p : c.positions) out.positions.push_back(t * p);
    out.normals.reserve(c.normals.size());
    for (const Vec3& n : c.normals) {
        out.normals.push_back(n.isZero() ? n : Vec3(t.rotation * n));
    }
    return out;
}

Vec3 centroid(const PointCloud& c) {
    if (c.empty()) throw EmptyCloud("centroid: empty cloud");
    Vec3 s = Vec3::Zero();
    for (const Vec3& p : c.positions) s += p;
    return s / static_cast<double>(c.size());
}

}  // namespace loopkit
