#pragma once

#include <span>
#include <vector>

#include "loopkit/geometry.hpp"
#include "loopkit/pose_graph.hpp"

namespace loopkit {

/// Builds the information of the constraint between two posed clouds:
/// every point of cloud_i whose nearest point of cloud_j lies within
/// `epsilon` in world coordinates (under t_i, t_j) contributes G_p^T G_p,
/// with p the point in cloud_i's local frame. Throws NoCorrespondences when
/// nothing falls within epsilon, and EmptyCloud.
EdgeInfo edge_info(const PointCloud& cloud_i, const PointCloud& cloud_j,
                   const RigidTransform& t_i, const RigidTransform& t_j, double epsilon);

/// Squared Mahalanobis residual f = xi^T Lambda xi of an edge, where
/// xi = twist(rel * t_j^-1 * t_i). Propagates RotationTooLarge.
double edge_residual(const RigidTransform& t_i, const RigidTransform& t_j,
                     const RigidTransform& rel, const EdgeInfo& info);

/// Closed-form line-process minimizer l = (mu / (mu + f))^2, clamped to
/// [0, 1]; mu <= 0 (a vacuous edge) yields 0.
double update_weight(double f, double mu);

struct LineProcessOptions {
    double lambda_odo = 1000.0;
    double mu_tau = 0.2;             // mu = mu_tau * pair_count
    double reject_threshold = 0.25;  // accepted iff final l >= threshold
    int max_rounds = 100;
    double update_tol = 1e-6;
    double init_damping = 1e-6;
};

struct LineProcessResult {
    std::vector<bool> accepted;  // parallel to graph.loops
    int rounds = 0;
    double final_energy = 0.0;
    bool converged = false;
};

/// Alternating minimization of the joint pose/line-process energy
///   sum_odo lambda_odo * f_e  +  sum_loops ( l_e * f_e + mu_e (sqrt(l_e)-1)^2 ).
/// Each round first sets every l_e to its closed-form optimum at the current
/// poses, then takes one damped GN pose step with the weights frozen, so the
/// energy never increases across a round. A loop edge whose residual
/// rotation leaves the small-angle regime is given l = 0 for that round
/// (maximally inconsistent) and re-examined on the next. Labels are computed
/// from the converged poses. Throws SingularSystem on a disconnected graph.
LineProcessResult optimize_line_process(PoseGraph& graph, const LineProcessOptions& opts = {});

/// When the pose count has grown by at least `every` since the last
/// refresh, recomputes every edge information from the current poses and
/// the fragments' local clouds (indexed by pose id) and returns true.
/// Edges with no correspondences become vacuous (zero info, zero count)
/// rather than an error, so a later refresh can revive them.
bool refresh_info(PoseGraph& graph, std::span<const PointCloud> local_clouds, double epsilon,
                  int every);

}  // namespace loopkit
