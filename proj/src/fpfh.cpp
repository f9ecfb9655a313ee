#include "loopkit/fpfh.hpp"

#include <cmath>
#include <omp.h>
#include <vector>

#include "loopkit/grid.hpp"

namespace loopkit {

namespace {

/// Pair angles (alpha, phi, theta) in the Darboux frame of the pair, with
/// the frame source chosen as the point whose normal makes the smaller
/// angle with the connecting line. Returns false for degenerate pairs
/// (zero baseline or normal parallel to it), which cast no vote.
bool pair_angles(const Vec3& p1, const Vec3& n1, const Vec3& p2, const Vec3& n2, double& alpha,
                 double& phi, double& theta) {
    Vec3 d = p2 - p1;
    double dist = d.norm();
    if (dist <= 0.0) return false;

    double angle1 = n1.dot(d) / dist;
    double angle2 = n2.dot(d) / dist;
    Vec3 ps = p1, ns = n1, nt = n2;
    Vec3 line = d;
    double cos_line = angle1;
    if (std::acos(std::abs(angle1)) > std::acos(std::abs(angle2))) {
        ps = p2;
        ns = n2;
        nt = n1;
        line = -d;
        cos_line = -angle2;
    }
    (void)ps;

    Vec3 u = ns;
    Vec3 v = line.cross(u);
    double v_len = v.norm();
    if (v_len <= 1e-12 * dist) return false;
    v /= v_len;
    Vec3 w = u.cross(v);

    alpha = v.dot(nt);
    phi = cos_line;
    theta = std::atan2(w.dot(nt), u.dot(nt));
    return true;
}

int bin_index(double value, double lo, double hi) {
    int b = static_cast<int>(std::floor(kFpfhBinsPerAngle * (value - lo) / (hi - lo)));
    return std::clamp(b, 0, kFpfhBinsPerAngle - 1);
}

}  // namespace

std::vector<FpfhFeature> compute_fpfh(const PointCloud& cloud, double radius, int threads) {
    if (cloud.empty()) throw EmptyCloud("compute_fpfh: empty cloud");
    if (!cloud.has_normals()) throw MissingNormals("compute_fpfh: cloud has no normals");
    validate_cloud(cloud);

    const int n = static_cast<int>(cloud.size());
    SearchGrid grid = build_grid(cloud, radius);
    if (threads <= 0) threads = omp_get_max_threads();

    // Neighbor lists (self excluded), CSR layout, ascending per point.
    std::vector<int> nbr_offset(static_cast<std::size_t>(n) + 1, 0);
    std::vector<std::vector<int>> nbr_tmp(static_cast<std::size_t>(n));
#pragma omp parallel for schedule(static) num_threads(threads)
    for (int i = 0; i < n; ++i) {
        std::vector<int> nbrs = radius_search(grid, cloud.positions[static_cast<std::size_t>(i)], radius);
        std::erase(nbrs, i);
        nbr_tmp[static_cast<std::size_t>(i)] = std::move(nbrs);
    }
    for (int i = 0; i < n; ++i) {
        nbr_offset[static_cast<std::size_t>(i) + 1] =
            nbr_offset[static_cast<std::size_t>(i)] + static_cast<int>(nbr_tmp[static_cast<std::size_t>(i)].size());
    }
    std::vector<int> nbr(static_cast<std::size_t>(nbr_offset[static_cast<std::size_t>(n)]));
    for (int i = 0; i < n; ++i) {
        std::copy(nbr_tmp[static_cast<std::size_t>(i)].begin(), nbr_tmp[static_cast<std::size_t>(i)].end(),
                  nbr.begin() + nbr_offset[static_cast<std::size_t>(i)]);
    }
    nbr_tmp.clear();
    nbr_tmp.shrink_to_fit();

    // Pass 1: per-point sub-histograms, each angle block scaled to sum 100.
    std::vector<std::array<double, kFpfhDim>> spfh(static_cast<std::size_t>(n));
#pragma omp parallel for schedule(static) num_threads(threads)
    for (int i = 0; i < n; ++i) {
        auto& h = spfh[static_cast<std::size_t>(i)];
        h.fill(0.0);
        const Vec3& p = cloud.positions[static_cast<std::size_t>(i)];
        const Vec3& np = cloud.normals[static_cast<std::size_t>(i)];
        if (np.isZero()) continue;
        int votes = 0;
        for (int k = nbr_offset[static_cast<std::size_t>(i)]; k < nbr_offset[static_cast<std::size_t>(i) + 1]; ++k) {
            int j = nbr[static_cast<std::size_t>(k)];
            const Vec3& nq = cloud.normals[static_cast<std::size_t>(j)];
            if (nq.isZero()) continue;
            double alpha, phi, theta;
            if (!pair_angles(p, np, cloud.positions[static_cast<std::size_t>(j)], nq, alpha, phi, theta)) {
                continue;
            }
            h[static_cast<std::size_t>(bin_index(alpha, -1.0, 1.0))] += 1.0;
            h[static_cast<std::size_t>(kFpfhBinsPerAngle + bin_index(phi, -1.0, 1.0))] += 1.0;
            h[static_cast<std::size_t>(2 * kFpfhBinsPerAngle + bin_index(theta, -M_PI, M_PI))] += 1.0;
            votes += 1;
        }
        if (votes > 0) {
            for (double& v : h) v *= 100.0 / static_cast<double>(votes);
        }
    }

    // Pass 2: blend each point's sub-histogram with its neighbors',
    // weighted by inverse distance; no final normalization.
    std::vector<FpfhFeature> out(static_cast<std::size_t>(n));
#pragma omp parallel for schedule(static) num_threads(threads)
    for (int i = 0; i < n; ++i) {
        const Vec3& p = cloud.positions[static_cast<std::size_t>(i)];
        if (cloud.normals[static_cast<std::size_t>(i)].isZero()) continue;  // stays all-zero
        std::array<double, kFpfhDim> acc{};
        int k_count = 0;
        for (int k = nbr_offset[static_cast<std::size_t>(i)]; k < nbr_offset[static_cast<std::size_t>(i) + 1]; ++k) {
            int j = nbr[static_cast<std::size_t>(k)];
            if (cloud.normals[static_cast<std::size_t>(j)].isZero()) continue;
            double w = (cloud.positions[static_cast<std::size_t>(j)] - p).norm();
            if (w <= 0.0) continue;
            const auto& hj = spfh[static_cast<std::size_t>(j)];
            for (int b = 0; b < kFpfhDim; ++b) acc[static_cast<std::size_t>(b)] += hj[static_cast<std::size_t>(b)] / w;
            k_count += 1;
        }
        const auto& hi = spfh[static_cast<std::size_t>(i)];
        for (int b = 0; b < kFpfhDim; ++b) {
            double blended = hi[static_cast<std::size_t>(b)];
            if (k_count > 0) blended += acc[static_cast<std::size_t>(b)] / static_cast<double>(k_count);
            out[static_cast<std::size_t>(i)][b] = static_cast<float>(blended);
        }
    }
    return out;
}

}  // namespace loopkit
