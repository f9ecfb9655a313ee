#pragma once

#include <cstdint>
#include <vector>

#include "loopkit/geometry.hpp"

namespace loopkit {

/// Information matrix of a relative-pose constraint: sum of G_p^T G_p over
/// the correspondence points p (in the first endpoint's local frame), with
/// G_p = [-[p]_x | I], plus the correspondence count.
struct EdgeInfo {
    Mat6 info = Mat6::Zero();
    std::int64_t pair_count = 0;
};

/// Constraint between consecutive poses; `rel` maps frame `to` into `from`.
struct OdometryEdge {
    int from = 0;
    int to = 0;
    RigidTransform rel;
    EdgeInfo info;
};

/// Loop-closure constraint between poses i < j; `rel` maps j into i.
/// `weight` is the line-process variable l in [0, 1].
struct LoopEdge {
    int i = 0;
    int j = 0;
    RigidTransform rel;
    EdgeInfo info;
    double weight = 1.0;
};

struct PoseGraph {
    std::vector<RigidTransform> poses;
    std::vector<OdometryEdge> odometry;
    std::vector<LoopEdge> loops;
    /// Pose count at the time edge informations were last recomputed.
    int last_refresh_count = 0;
};

struct SolveOptions {
    double lambda_odo = 1000.0;
    int max_rounds = 100;
    double update_tol = 1e-6;  // convergence: max twist-update magnitude
    double init_damping = 1e-6;
};

struct SolveStats {
    int rounds = 0;
    double initial_cost = 0.0;
    double final_cost = 0.0;
    bool converged = false;
};

/// Weighted residual cost of the graph at its current poses:
/// sum over odometry edges of lambda_odo * f_e plus sum over loop edges of
/// weight_e * f_e, where f_e is the squared Mahalanobis twist residual.
double graph_cost(const PoseGraph& graph, double lambda_odo);

/// Damped Gauss-Newton over all poses with the first pose held fixed and
/// all edge weights frozen. Jacobians are central differences of the
/// residual twist in the left-perturbation parameters of both endpoints.
/// Steps are accepted only when the cost decreases (damping grows
/// otherwise). Throws SingularSystem when the graph does not connect every
/// pose to pose 0 or the normal equations cannot be factorized.
SolveStats pose_graph_optimize(PoseGraph& graph, const SolveOptions& opts = {});

namespace detail {

/// One accept-or-reject damped GN step shared by pose_graph_optimize and
/// the line-process optimizer. Returns false when no step could decrease
/// the cost (damping exhausted). `max_update` reports the largest twist
/// component actually applied.
bool pose_step(PoseGraph& graph, double lambda_odo, double& damping, double& cost,
               double& max_update);

/// Throws SingularSystem unless every pose reaches pose 0 through odometry
/// edges or loop edges with positive weight.
void check_connected(const PoseGraph& graph);

}  // namespace detail

}  // namespace loopkit
