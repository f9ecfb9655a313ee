#include "loopkit/ba.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <unordered_map>

namespace loopkit {

std::optional<Vec2> project(const CameraIntrinsics& k, const RigidTransform& world_to_camera,
                            const Vec3& x) {
    Vec3 y = world_to_camera * x;
    if (y.z() <= 1e-6) return std::nullopt;
    return Vec2(k.fx * y.x() / y.z() + k.cx, k.fy * y.y() / y.z() + k.cy);
}

double huber(double r, double delta) {
    double a = std::abs(r);
    if (a <= delta) return 0.5 * r * r;
    return delta * (a - 0.5 * delta);
}

std::optional<ObservationLinearization> observation_jacobian(const CameraIntrinsics& k,
                                                             const RigidTransform& world_to_camera,
                                                             const Vec3& x, const Vec2& pixel,
                                                             double sigma) {
    Vec3 y = world_to_camera * x;
    if (y.z() <= 1e-6) return std::nullopt;
    double inv_sigma = 1.0 / sigma;
    double z_inv = 1.0 / y.z();
    Vec2 u(k.fx * y.x() * z_inv + k.cx, k.fy * y.y() * z_inv + k.cy);

    ObservationLinearization lin;
    lin.residual = (pixel - u) * inv_sigma;
    Eigen::Matrix<double, 2, 3> du_dy;
    du_dy << k.fx * z_inv, 0.0, -k.fx * y.x() * z_inv * z_inv,
             0.0, k.fy * z_inv, -k.fy * y.y() * z_inv * z_inv;
    // e = (pixel - u(y))/sigma with y = exp(delta) * cam * X; at delta = 0
    // the pose derivative of y is [-[y]_x | I].
    Eigen::Matrix<double, 3, 6> dy_dpose;
    dy_dpose.leftCols<3>() = -skew(y);
    dy_dpose.rightCols<3>() = Mat3::Identity();
    lin.d_pose = -inv_sigma * du_dy * dy_dpose;
    lin.d_point = -inv_sigma * du_dy * world_to_camera.rotation;
    return lin;
}

namespace {

constexpr double kBehindPenalty = 1e12;
constexpr double kMinDepth = 1e-6;

struct State {
    std::vector<RigidTransform> cam;  // world-to-camera per keyframe
    std::vector<Vec3> points;
};

struct ResolvedObs {
    int kf;  // keyframe index
    int lm;  // landmark index
    Vec2 pixel;
    double inv_sigma;
};

/// Robust cost of a state over a fixed active set; observations that fall
/// behind the camera in this state are charged a large constant so a step
/// that hides points is never accepted.
double state_cost(const State& s, const std::vector<ResolvedObs>& obs,
                  const std::vector<char>& active, const CameraIntrinsics& k, double delta) {
    double cost = 0.0;
    for (std::size_t o = 0; o < obs.size(); ++o) {
        if (!active[o]) continue;
        Vec3 y = s.cam[static_cast<std::size_t>(obs[o].kf)] * s.points[static_cast<std::size_t>(obs[o].lm)];
        if (y.z() <= kMinDepth) {
            cost += kBehindPenalty;
            continue;
        }
        Vec2 u(k.fx * y.x() / y.z() + k.cx, k.fy * y.y() / y.z() + k.cy);
        double r = ((obs[o].pixel - u) * obs[o].inv_sigma).norm();
        cost += huber(r, delta);
    }
    return cost;
}

}  // namespace

BaResult bundle_adjust(std::vector<Keyframe>& keyframes, std::vector<Landmark>& landmarks,
                       std::span<const Observation> observations, const CameraIntrinsics& k,
                       const BaConfig& config) {
    if (keyframes.empty() || landmarks.empty() || observations.empty()) {
        throw InsufficientObservations("bundle_adjust: empty problem");
    }
    std::unordered_map<int, int> kf_index, lm_index;
    for (std::size_t i = 0; i < keyframes.size(); ++i) {
        if (!kf_index.emplace(keyframes[i].id, static_cast<int>(i)).second) {
            throw MissingData("bundle_adjust: duplicate keyframe id");
        }
    }
    for (std::size_t i = 0; i < landmarks.size(); ++i) {
        if (!lm_index.emplace(landmarks[i].id, static_cast<int>(i)).second) {
            throw MissingData("bundle_adjust: duplicate landmark id");
        }
    }
    std::vector<ResolvedObs> obs;
    obs.reserve(observations.size());
    std::vector<int> lm_count(landmarks.size(), 0);
    for (const Observation& o : observations) {
        auto ki = kf_index.find(o.keyframe_id);
        auto li = lm_index.find(o.landmark_id);
        if (ki == kf_index.end() || li == lm_index.end()) {
            throw MissingData("bundle_adjust: observation references unknown id");
        }
        if (!(o.sigma > 0.0)) throw MissingData("bundle_adjust: sigma must be positive");
        obs.push_back({ki->second, li->second, o.pixel, 1.0 / o.sigma});
        lm_count[static_cast<std::size_t>(li->second)] += 1;
    }
    for (int c : lm_count) {
        if (c < 2) throw InsufficientObservations("bundle_adjust: landmark seen fewer than 2 times");
    }

    const int n_kf = static_cast<int>(keyframes.size());
    const int n_lm = static_cast<int>(landmarks.size());
    const int pose_unknowns = 6 * (n_kf - 1);  // keyframe 0 is the gauge
    const bool use_schur = n_lm > 10 * n_kf;

    State state;
    state.cam.reserve(keyframes.size());
    for (const Keyframe& kf : keyframes) state.cam.push_back(inverse(kf.pose));
    state.points.reserve(landmarks.size());
    for (const Landmark& lm : landmarks) state.points.push_back(lm.position);

    std::vector<char> active(obs.size(), 1);
    auto refresh_active = [&]() {
        for (std::size_t o = 0; o < obs.size(); ++o) {
            Vec3 y = state.cam[static_cast<std::size_t>(obs[o].kf)] * state.points[static_cast<std::size_t>(obs[o].lm)];
            active[o] = y.z() > kMinDepth ? 1 : 0;
        }
    };

    refresh_active();
    BaResult result;
    result.initial_cost = state_cost(state, obs, active, k, config.huber_delta);
    double cost = result.initial_cost;
    double damping = config.init_damping;

    for (int iter = 0; iter < config.max_iterations; ++iter) {
        refresh_active();
        cost = state_cost(state, obs, active, k, config.huber_delta);
        result.iterations = iter + 1;

        // Assemble the weighted normal equations. Landmark coupling is kept
        // as per-landmark strips so the Schur path can exploit sparsity.
        Eigen::MatrixXd hpp = Eigen::MatrixXd::Zero(pose_unknowns, pose_unknowns);
        Eigen::VectorXd gp = Eigen::VectorXd::Zero(pose_unknowns);
        std::vector<Mat3> hll(static_cast<std::size_t>(n_lm), Mat3::Zero());
        std::vector<Vec3> gl(static_cast<std::size_t>(n_lm), Vec3::Zero());
        struct Strip {
            int kf;
            Eigen::Matrix<double, 6, 3> block;
        };
        std::vector<std::vector<Strip>> strips(static_cast<std::size_t>(n_lm));

        for (std::size_t o = 0; o < obs.size(); ++o) {
            if (!active[o]) continue;
            const ResolvedObs& ob = obs[o];
            const RigidTransform& cam = state.cam[static_cast<std::size_t>(ob.kf)];
            auto lin = observation_jacobian(k, cam, state.points[static_cast<std::size_t>(ob.lm)],
                                            ob.pixel, 1.0 / ob.inv_sigma);
            if (!lin) continue;
            double r = lin->residual.norm();
            double w = r <= config.huber_delta ? 1.0 : config.huber_delta / r;

            auto li = static_cast<std::size_t>(ob.lm);
            hll[li] += w * (lin->d_point.transpose() * lin->d_point);
            gl[li] += w * (lin->d_point.transpose() * lin->residual);
            if (ob.kf > 0) {
                int bp = (ob.kf - 1) * 6;
                hpp.block<6, 6>(bp, bp) += w * (lin->d_pose.transpose() * lin->d_pose);
                gp.segment<6>(bp) += w * (lin->d_pose.transpose() * lin->residual);
                strips[li].push_back({ob.kf, w * (lin->d_pose.transpose() * lin->d_point)});
            }
        }

        bool accepted = false;
        while (damping <= 1e12) {
            Eigen::VectorXd delta_p = Eigen::VectorXd::Zero(pose_unknowns);
            std::vector<Vec3> delta_l(static_cast<std::size_t>(n_lm), Vec3::Zero());
            bool solved = true;

            if (use_schur && pose_unknowns > 0) {
                Eigen::MatrixXd s = hpp;
                s.diagonal().array() += damping;
                Eigen::VectorXd rhs = -gp;
                std::vector<Mat3> hll_inv(static_cast<std::size_t>(n_lm));
                for (int l = 0; l < n_lm; ++l) {
                    Mat3 h = hll[static_cast<std::size_t>(l)];
                    h.diagonal().array() += damping;
                    hll_inv[static_cast<std::size_t>(l)] = h.inverse();
                    const auto& st = strips[static_cast<std::size_t>(l)];
                    for (const Strip& a : st) {
                        Eigen::Matrix<double, 6, 3> a_hinv = a.block * hll_inv[static_cast<std::size_t>(l)];
                        rhs.segment<6>((a.kf - 1) * 6) += a_hinv * gl[static_cast<std::size_t>(l)];
                        for (const Strip& b : st) {
                            s.block<6, 6>((a.kf - 1) * 6, (b.kf - 1) * 6) -= a_hinv * b.block.transpose();
                        }
                    }
                }
                Eigen::LDLT<Eigen::MatrixXd> ldlt(s);
                if (ldlt.info() != Eigen::Success) {
                    solved = false;
                } else {
                    delta_p = ldlt.solve(rhs);
                    solved = delta_p.allFinite();
                }
                if (solved) {
                    for (int l = 0; l < n_lm; ++l) {
                        Vec3 back = gl[static_cast<std::size_t>(l)];
                        for (const Strip& a : strips[static_cast<std::size_t>(l)]) {
                            back += a.block.transpose() * delta_p.segment<6>((a.kf - 1) * 6);
                        }
                        delta_l[static_cast<std::size_t>(l)] = -(hll_inv[static_cast<std::size_t>(l)] * back);
                    }
                }
            } else {
                const int unknowns = pose_unknowns + 3 * n_lm;
                Eigen::MatrixXd h = Eigen::MatrixXd::Zero(unknowns, unknowns);
                Eigen::VectorXd g = Eigen::VectorXd::Zero(unknowns);
                h.topLeftCorner(pose_unknowns, pose_unknowns) = hpp;
                g.head(pose_unknowns) = gp;
                for (int l = 0; l < n_lm; ++l) {
                    int bl = pose_unknowns + 3 * l;
                    h.block<3, 3>(bl, bl) = hll[static_cast<std::size_t>(l)];
                    g.segment<3>(bl) = gl[static_cast<std::size_t>(l)];
                    for (const Strip& a : strips[static_cast<std::size_t>(l)]) {
                        h.block<6, 3>((a.kf - 1) * 6, bl) = a.block;
                        h.block<3, 6>(bl, (a.kf - 1) * 6) = a.block.transpose();
                    }
                }
                h.diagonal().array() += damping;
                Eigen::LDLT<Eigen::MatrixXd> ldlt(h);
                if (ldlt.info() != Eigen::Success) {
                    solved = false;
                } else {
                    Eigen::VectorXd delta = ldlt.solve(-g);
                    solved = delta.allFinite();
                    if (solved) {
                        delta_p = delta.head(pose_unknowns);
                        for (int l = 0; l < n_lm; ++l) {
                            delta_l[static_cast<std::size_t>(l)] = delta.segment<3>(pose_unknowns + 3 * l);
                        }
                    }
                }
            }

            if (!solved) {
                damping *= 10.0;
                continue;
            }
            State candidate = state;
            for (int c = 1; c < n_kf; ++c) {
                Vec6 d = delta_p.segment<6>((c - 1) * 6);
                candidate.cam[static_cast<std::size_t>(c)] =
                    compose(transform_from_twist(Twist::from_vector(d)), candidate.cam[static_cast<std::size_t>(c)]);
            }
            for (int l = 0; l < n_lm; ++l) {
                candidate.points[static_cast<std::size_t>(l)] += delta_l[static_cast<std::size_t>(l)];
            }
            double new_cost = state_cost(candidate, obs, active, k, config.huber_delta);
            if (new_cost < cost) {
                state = std::move(candidate);
                damping = std::max(damping * 0.5, 1e-12);
                accepted = true;
                bool converged = (cost - new_cost) < config.rel_tol * std::max(cost, 1e-300);
                cost = new_cost;
                if (converged) iter = config.max_iterations;  // exit outer loop
                break;
            }
            damping *= 10.0;
        }
        if (!accepted) break;  // no decreasing step exists at any damping
    }

    for (int c = 0; c < n_kf; ++c) keyframes[static_cast<std::size_t>(c)].pose = inverse(state.cam[static_cast<std::size_t>(c)]);
    for (int l = 0; l < n_lm; ++l) landmarks[static_cast<std::size_t>(l)].position = state.points[static_cast<std::size_t>(l)];

    refresh_active();
    result.final_cost = state_cost(state, obs, active, k, config.huber_delta);
    double sq_px = 0.0;
    std::int64_t n_active = 0;
    for (std::size_t o = 0; o < obs.size(); ++o) {
        if (!active[o]) continue;
        Vec3 y = state.cam[static_cast<std::size_t>(obs[o].kf)] * state.points[static_cast<std::size_t>(obs[o].lm)];
        Vec2 u(k.fx * y.x() / y.z() + k.cx, k.fy * y.y() / y.z() + k.cy);
        sq_px += (obs[o].pixel - u).squaredNorm();
        n_active += 1;
    }
    result.active_observations = n_active;
    result.final_rmse_px = n_active > 0 ? std::sqrt(sq_px / static_cast<double>(n_active)) : 0.0;
    return result;
}

}  // namespace loopkit
