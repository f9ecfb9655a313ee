#include "loopkit/line_process.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "loopkit/grid.hpp"

namespace loopkit {

EdgeInfo edge_info(const PointCloud& cloud_i, const PointCloud& cloud_j,
                   const RigidTransform& t_i, const RigidTransform& t_j, double epsilon) {
    if (cloud_i.empty() || cloud_j.empty()) throw EmptyCloud("edge_info: empty cloud");

    PointCloud posed_j;
    posed_j.positions.reserve(cloud_j.size());
    for (const Vec3& q : cloud_j.positions) posed_j.positions.push_back(t_j * q);
    SearchGrid grid = build_grid(posed_j, epsilon);

    EdgeInfo out;
    for (const Vec3& p : cloud_i.positions) {
        if (!nn_within(grid, t_i * p, epsilon)) continue;
        // G_p = [-[p]_x | I] with p in cloud_i's local frame; accumulate G^T G.
        Mat3 a = -skew(p);
        out.info.topLeftCorner<3, 3>() += a.transpose() * a;
        out.info.topRightCorner<3, 3>() += a.transpose();
        out.info.bottomLeftCorner<3, 3>() += a;
        out.info.bottomRightCorner<3, 3>() += Mat3::Identity();
        out.pair_count += 1;
    }
    if (out.pair_count == 0) throw NoCorrespondences("edge_info: no points within epsilon");
    return out;
}

double edge_residual(const RigidTransform& t_i, const RigidTransform& t_j,
                     const RigidTransform& rel, const EdgeInfo& info) {
    RigidTransform delta = compose(rel, compose(inverse(t_j), t_i));
    Vec6 xi = twist_from_transform(delta).vector();
    return xi.dot(info.info * xi);
}

double update_weight(double f, double mu) {
    if (!(mu > 0.0)) return 0.0;
    double r = mu / (mu + std::max(f, 0.0));
    return std::clamp(r * r, 0.0, 1.0);
}

namespace {

/// Residual of a loop edge, or nullopt outside the small-angle regime.
std::optional<double> loop_residual(const PoseGraph& graph, const LoopEdge& e) {
    const RigidTransform& t_i = graph.poses[static_cast<std::size_t>(e.i)];
    const RigidTransform& t_j = graph.poses[static_cast<std::size_t>(e.j)];
    RigidTransform delta = compose(e.rel, compose(inverse(t_j), t_i));
    if (rotation_angle(delta.rotation) >= M_PI / 2.0) return std::nullopt;
    Vec6 xi = twist_from_transform(delta).vector();
    return xi.dot(e.info.info * xi);
}

/// Sets every loop weight to its closed-form optimum at the current poses.
void update_all_weights(PoseGraph& graph, double mu_tau) {
    for (LoopEdge& e : graph.loops) {
        double mu = mu_tau * static_cast<double>(e.info.pair_count);
        auto f = loop_residual(graph, e);
        e.weight = f ? update_weight(*f, mu) : 0.0;
    }
}

/// Joint energy: weighted residual cost plus the line-process prior.
double total_energy(const PoseGraph& graph, const LineProcessOptions& opts) {
    double energy = graph_cost(graph, opts.lambda_odo);
    for (const LoopEdge& e : graph.loops) {
        double mu = opts.mu_tau * static_cast<double>(e.info.pair_count);
        double s = std::sqrt(std::clamp(e.weight, 0.0, 1.0)) - 1.0;
        energy += mu * s * s;
    }
    return energy;
}

}  // namespace

LineProcessResult optimize_line_process(PoseGraph& graph, const LineProcessOptions& opts) {
    if (graph.poses.size() < 2) throw SingularSystem("optimize_line_process: need >= 2 poses");
    detail::check_connected(graph);

    LineProcessResult result;
    double damping = opts.init_damping;
    for (int round = 0; round < opts.max_rounds; ++round) {
        update_all_weights(graph, opts.mu_tau);
        double cost = graph_cost(graph, opts.lambda_odo);  // weights changed
        double max_update = 0.0;
        bool stepped = detail::pose_step(graph, opts.lambda_odo, damping, cost, max_update);
        result.rounds = round + 1;
        if (!stepped || max_update < opts.update_tol) {
            result.converged = true;
            break;
        }
    }

    update_all_weights(graph, opts.mu_tau);
    result.accepted.reserve(graph.loops.size());
    for (const LoopEdge& e : graph.loops) result.accepted.push_back(e.weight >= opts.reject_threshold);
    result.final_energy = total_energy(graph, opts);
    return result;
}

bool refresh_info(PoseGraph& graph, std::span<const PointCloud> local_clouds, double epsilon,
                  int every) {
    if (local_clouds.size() != graph.poses.size()) {
        throw MissingData("refresh_info: one local cloud per pose required");
    }
    if (static_cast<int>(graph.poses.size()) - graph.last_refresh_count < every) return false;

    auto recompute = [&](int i, int j, EdgeInfo& info) {
        try {
            info = edge_info(local_clouds[static_cast<std::size_t>(i)], local_clouds[static_cast<std::size_t>(j)],
                             graph.poses[static_cast<std::size_t>(i)], graph.poses[static_cast<std::size_t>(j)],
                             epsilon);
        } catch (const NoCorrespondences&) {
            info = EdgeInfo{};  // vacuous; may gain correspondences on a later refresh
        }
    };
    for (OdometryEdge& e : graph.odometry) recompute(e.from, e.to, e.info);
    for (LoopEdge& e : graph.loops) recompute(e.i, e.j, e.info);
    graph.last_refresh_count = static_cast<int>(graph.poses.size());
    return true;
}

}  // namespace loopkit
