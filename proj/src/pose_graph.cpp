#include "loopkit/pose_graph.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <vector>

namespace loopkit {

namespace {

constexpr double kRegimePenalty = 1e12;  // cost of an edge outside the twist regime
constexpr double kMinWeight = 0.0;       // edges with weight <= this are inactive
constexpr double kFdStep = 1e-5;

std::optional<Vec6> edge_twist(const RigidTransform& rel, const RigidTransform& t_i,
                               const RigidTransform& t_j) {
    RigidTransform delta = compose(rel, compose(inverse(t_j), t_i));
    if (rotation_angle(delta.rotation) >= M_PI / 2.0) return std::nullopt;
    return twist_from_transform(delta).vector();
}

struct EdgeRef {
    int i;
    int j;
    const RigidTransform* rel;
    const Mat6* info;
    double weight;
};

std::vector<EdgeRef> active_edges(const PoseGraph& graph, double lambda_odo) {
    std::vector<EdgeRef> edges;
    edges.reserve(graph.odometry.size() + graph.loops.size());
    for (const OdometryEdge& e : graph.odometry) {
        edges.push_back({e.from, e.to, &e.rel, &e.info.info, lambda_odo});
    }
    for (const LoopEdge& e : graph.loops) {
        if (e.weight > kMinWeight) edges.push_back({e.i, e.j, &e.rel, &e.info.info, e.weight});
    }
    return edges;
}

double edges_cost(const PoseGraph& graph, const std::vector<EdgeRef>& edges) {
    double cost = 0.0;
    for (const EdgeRef& e : edges) {
        auto xi = edge_twist(*e.rel, graph.poses[static_cast<std::size_t>(e.i)],
                             graph.poses[static_cast<std::size_t>(e.j)]);
        if (!xi) {
            cost += e.weight * kRegimePenalty;
            continue;
        }
        cost += e.weight * xi->dot(*e.info * *xi);
    }
    return cost;
}

RigidTransform perturbed(const RigidTransform& t, int component, double h) {
    Vec6 d = Vec6::Zero();
    d[component] = h;
    return compose(transform_from_twist(Twist::from_vector(d)), t);
}

/// Central-difference Jacobian of the residual twist in one endpoint's
/// left-perturbation; falls back to one-sided differences at the regime
/// boundary and to a zero column when both probes leave it.
Eigen::Matrix<double, 6, 6> endpoint_jacobian(const RigidTransform& rel, const RigidTransform& t_i,
                                              const RigidTransform& t_j, bool wrt_i,
                                              const Vec6& xi_base) {
    Eigen::Matrix<double, 6, 6> jac = Eigen::Matrix<double, 6, 6>::Zero();
    for (int k = 0; k < 6; ++k) {
        auto probe = [&](double h) {
            return wrt_i ? edge_twist(rel, perturbed(t_i, k, h), t_j)
                         : edge_twist(rel, t_i, perturbed(t_j, k, h));
        };
        auto plus = probe(kFdStep);
        auto minus = probe(-kFdStep);
        if (plus && minus) {
            jac.col(k) = (*plus - *minus) / (2.0 * kFdStep);
        } else if (plus) {
            jac.col(k) = (*plus - xi_base) / kFdStep;
        } else if (minus) {
            jac.col(k) = (xi_base - *minus) / kFdStep;
        }
    }
    return jac;
}

}  // namespace

double graph_cost(const PoseGraph& graph, double lambda_odo) {
    return edges_cost(graph, active_edges(graph, lambda_odo));
}

namespace detail {

void check_connected(const PoseGraph& graph) {
    const int n = static_cast<int>(graph.poses.size());
    std::vector<int> parent(static_cast<std::size_t>(n));
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int x) {
        while (parent[static_cast<std::size_t>(x)] != x) {
            parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
            x = parent[static_cast<std::size_t>(x)];
        }
        return x;
    };
    auto unite = [&](int a, int b) { parent[static_cast<std::size_t>(find(a))] = find(b); };
    for (const OdometryEdge& e : graph.odometry) unite(e.from, e.to);
    for (const LoopEdge& e : graph.loops) {
        if (e.weight > kMinWeight) unite(e.i, e.j);
    }
    for (int i = 0; i < n; ++i) {
        if (find(i) != find(0)) throw SingularSystem("pose graph is disconnected");
    }
}

bool pose_step(PoseGraph& graph, double lambda_odo, double& damping, double& cost,
               double& max_update) {
    max_update = 0.0;
    const int n = static_cast<int>(graph.poses.size());
    const int unknowns = 6 * (n - 1);  // pose 0 is the gauge
    if (unknowns <= 0) return false;

    std::vector<EdgeRef> edges = active_edges(graph, lambda_odo);
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(unknowns, unknowns);
    Eigen::VectorXd g = Eigen::VectorXd::Zero(unknowns);
    for (const EdgeRef& e : edges) {
        const RigidTransform& t_i = graph.poses[static_cast<std::size_t>(e.i)];
        const RigidTransform& t_j = graph.poses[static_cast<std::size_t>(e.j)];
        auto xi = edge_twist(*e.rel, t_i, t_j);
        if (!xi) continue;  // scored as a constant penalty; no gradient
        Eigen::Matrix<double, 6, 6> j_i = endpoint_jacobian(*e.rel, t_i, t_j, true, *xi);
        Eigen::Matrix<double, 6, 6> j_j = endpoint_jacobian(*e.rel, t_i, t_j, false, *xi);
        Vec6 lam_xi = *e.info * *xi;
        int bi = (e.i - 1) * 6;
        int bj = (e.j - 1) * 6;
        if (e.i > 0) {
            g.segment<6>(bi) += e.weight * (j_i.transpose() * lam_xi);
            h.block<6, 6>(bi, bi) += e.weight * (j_i.transpose() * *e.info * j_i);
        }
        if (e.j > 0) {
            g.segment<6>(bj) += e.weight * (j_j.transpose() * lam_xi);
            h.block<6, 6>(bj, bj) += e.weight * (j_j.transpose() * *e.info * j_j);
        }
        if (e.i > 0 && e.j > 0) {
            Eigen::Matrix<double, 6, 6> hij = e.weight * (j_i.transpose() * *e.info * j_j);
            h.block<6, 6>(bi, bj) += hij;
            h.block<6, 6>(bj, bi) += hij.transpose();
        }
    }

    while (damping <= 1e12) {
        Eigen::MatrixXd h_damped = h;
        h_damped.diagonal().array() += damping;
        Eigen::LDLT<Eigen::MatrixXd> ldlt(h_damped);
        if (ldlt.info() != Eigen::Success) {
            damping *= 10.0;
            continue;
        }
        Eigen::VectorXd delta = ldlt.solve(-g);
        if (!delta.allFinite()) {
            damping *= 10.0;
            continue;
        }

        std::vector<RigidTransform> candidate = graph.poses;
        for (int p = 1; p < n; ++p) {
            Vec6 d = delta.segment<6>((p - 1) * 6);
            candidate[static_cast<std::size_t>(p)] =
                compose(transform_from_twist(Twist::from_vector(d)), candidate[static_cast<std::size_t>(p)]);
        }
        PoseGraph trial;  // shallow scoring view: same edges, candidate poses
        trial.poses = candidate;
        trial.odometry = graph.odometry;
        trial.loops = graph.loops;
        double new_cost = edges_cost(trial, active_edges(trial, lambda_odo));
        if (new_cost < cost) {
            graph.poses = std::move(candidate);
            cost = new_cost;
            max_update = delta.cwiseAbs().maxCoeff();
            damping = std::max(damping * 0.5, 1e-12);
            return true;
        }
        damping *= 10.0;
    }
    return false;
}

}  // namespace detail

SolveStats pose_graph_optimize(PoseGraph& graph, const SolveOptions& opts) {
    if (graph.poses.empty()) throw SingularSystem("pose_graph_optimize: no poses");
    detail::check_connected(graph);

    SolveStats stats;
    stats.initial_cost = graph_cost(graph, opts.lambda_odo);
    double cost = stats.initial_cost;
    double damping = opts.init_damping;
    for (int round = 0; round < opts.max_rounds; ++round) {
        double max_update = 0.0;
        bool stepped = detail::pose_step(graph, opts.lambda_odo, damping, cost, max_update);
        stats.rounds = round + 1;
        if (!stepped || max_update < opts.update_tol) {
            stats.converged = true;
            break;
        }
    }
    stats.final_cost = cost;
    return stats;
}

}  // namespace loopkit
