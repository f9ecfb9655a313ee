#include "loopkit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>

#include "loopkit/errors.hpp"
#include "loopkit/grid.hpp"

namespace loopkit {

RigidTransform align_rigid(std::span<const Vec3> from, std::span<const Vec3> to) {
    try {
        return kabsch(from, to);
    } catch (const Error&) {
        // Coincident or collinear support: translation between centroids.
        RigidTransform t;
        if (!from.empty()) {
            Vec3 cf = Vec3::Zero(), ct = Vec3::Zero();
            for (const Vec3& p : from) cf += p;
            for (const Vec3& p : to) ct += p;
            t.translation = ct / static_cast<double>(to.size()) - cf / static_cast<double>(from.size());
        }
        return t;
    }
}

namespace {

/// Greedy one-to-one association by ascending |dt|; deterministic tiebreak on
/// the (estimate, truth) index pair.
std::vector<std::pair<std::size_t, std::size_t>> associate(std::span<const TimedPose> est,
                                                           std::span<const TimedPose> truth,
                                                           double tol) {
    std::vector<std::tuple<double, std::size_t, std::size_t>> candidates;
    for (std::size_t e = 0; e < est.size(); ++e) {
        for (std::size_t t = 0; t < truth.size(); ++t) {
            double dt = std::abs(est[e].timestamp - truth[t].timestamp);
            if (dt <= tol) candidates.emplace_back(dt, e, t);
        }
    }
    std::sort(candidates.begin(), candidates.end());
    std::vector<char> used_e(est.size(), 0), used_t(truth.size(), 0);
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (const auto& [dt, e, t] : candidates) {
        (void)dt;
        if (used_e[e] || used_t[t]) continue;
        used_e[e] = used_t[t] = 1;
        pairs.emplace_back(e, t);
    }
    std::sort(pairs.begin(), pairs.end());
    return pairs;
}

}  // namespace

double eval_ate_rmse(std::span<const TimedPose> estimate, std::span<const TimedPose> truth,
                     const AteOptions& options) {
    auto pairs = associate(estimate, truth, options.tolerance);
    if (pairs.size() < 3) {
        throw TooFewAssociations("eval_ate_rmse: " + std::to_string(pairs.size()) +
                                 " associated pairs, need 3");
    }
    std::vector<Vec3> est_pos, truth_pos;
    est_pos.reserve(pairs.size());
    truth_pos.reserve(pairs.size());
    for (const auto& [e, t] : pairs) {
        est_pos.push_back(estimate[e].pose.translation);
        truth_pos.push_back(truth[t].pose.translation);
    }
    RigidTransform a;
    if (options.align) a = align_rigid(est_pos, truth_pos);
    double sq = 0.0;
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        sq += (a * est_pos[k] - truth_pos[k]).squaredNorm();
    }
    return std::sqrt(sq / static_cast<double>(pairs.size()));
}

SurfaceError eval_surface(const PointCloud& recon, const PointCloud& truth) {
    if (recon.empty() || truth.empty()) throw EmptyCloud("eval_surface: empty cloud");

    // Cell length tuned to the truth cloud's density so nearest-neighbor
    // shells stay shallow; any positive value is correct.
    Vec3 lo = truth.positions.front(), hi = lo;
    for (const Vec3& p : truth.positions) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    Vec3 extent = hi - lo;
    double volume = std::max(extent.x(), 1e-3) * std::max(extent.y(), 1e-3) *
                    std::max(extent.z(), 1e-3);
    double cell = std::cbrt(volume / static_cast<double>(truth.size()));
    cell = std::clamp(cell, 1e-3, 1.0);
    SearchGrid grid = build_grid(truth, cell);

    std::vector<double> dist;
    dist.reserve(recon.size());
    for (const Vec3& p : recon.positions) {
        NnResult nn = nn_nearest(grid, p);
        dist.push_back((truth.positions[static_cast<std::size_t>(nn.index)] - p).norm());
    }
    double sum = 0.0;
    for (double d : dist) sum += d;
    std::sort(dist.begin(), dist.end());
    std::size_t n = dist.size();
    double median = n % 2 == 1 ? dist[n / 2] : 0.5 * (dist[n / 2 - 1] + dist[n / 2]);
    return {sum / static_cast<double>(n), median};
}

RegistrationScore eval_registration(std::span<const LogEntry> results,
                                    std::span<const LogEntry> truth,
                                    std::span<const PointCloud> probes, double rmse_max) {
    RegistrationScore score;
    score.truth_count = static_cast<int>(truth.size());
    score.result_count = static_cast<int>(results.size());
    if (truth.empty()) return score;
    if (results.empty()) return score;  // recall 0, precision 0 by convention

    const Vec3 cube[8] = {{-0.5, -0.5, -0.5}, {0.5, -0.5, -0.5}, {-0.5, 0.5, -0.5},
                          {0.5, 0.5, -0.5},   {-0.5, -0.5, 0.5}, {0.5, -0.5, 0.5},
                          {-0.5, 0.5, 0.5},   {0.5, 0.5, 0.5}};

    auto pair_rmse = [&](const LogEntry& est, const LogEntry& gt) {
        RigidTransform t_est = RigidTransform::from_matrix(est.transform);
        RigidTransform t_gt = RigidTransform::from_matrix(gt.transform);
        const Vec3* pts = cube;
        std::size_t count = 8;
        if (est.j >= 0 && static_cast<std::size_t>(est.j) < probes.size() &&
            !probes[static_cast<std::size_t>(est.j)].empty()) {
            pts = probes[static_cast<std::size_t>(est.j)].positions.data();
            count = probes[static_cast<std::size_t>(est.j)].size();
        }
        double sq = 0.0;
        for (std::size_t p = 0; p < count; ++p) {
            sq += (t_est * pts[p] - t_gt * pts[p]).squaredNorm();
        }
        return std::sqrt(sq / static_cast<double>(count));
    };

    std::vector<char> credited(truth.size(), 0);
    for (const LogEntry& est : results) {
        for (std::size_t t = 0; t < truth.size(); ++t) {
            if (credited[t] || truth[t].i != est.i || truth[t].j != est.j) continue;
            if (pair_rmse(est, truth[t]) < rmse_max) {
                credited[t] = 1;
                score.correct += 1;
            }
            break;
        }
    }
    score.recall = static_cast<double>(score.correct) / static_cast<double>(truth.size());
    score.precision = static_cast<double>(score.correct) / static_cast<double>(results.size());
    return score;
}

}  // namespace loopkit
