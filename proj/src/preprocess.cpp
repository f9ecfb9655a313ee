#include "loopkit/preprocess.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <omp.h>
#include <unordered_map>

#include "loopkit/grid.hpp"

namespace loopkit {

PointCloud voxel_downsample(const PointCloud& cloud, double leaf) {
    if (cloud.empty()) throw EmptyCloud("voxel_downsample: empty cloud");
    if (!(leaf > 0.0)) throw Error("voxel_downsample: leaf must be positive");
    validate_cloud(cloud);

    struct Accum {
        Vec3 pos_sum = Vec3::Zero();
        Vec3 normal_sum = Vec3::Zero();
        int count = 0;
        int min_index = 0;
    };
    std::unordered_map<std::uint64_t, Accum> voxels;
    voxels.reserve(cloud.size());

    for (std::size_t i = 0; i < cloud.size(); ++i) {
        Eigen::Vector3i c = grid_index(cloud.positions[i], Vec3::Zero(), leaf);
        auto x = static_cast<std::uint64_t>(c.x() + (1 << 20));
        auto y = static_cast<std::uint64_t>(c.y() + (1 << 20));
        auto z = static_cast<std::uint64_t>(c.z() + (1 << 20));
        std::uint64_t key = (x << 42) | (y << 21) | z;
        auto [it, inserted] = voxels.try_emplace(key);
        Accum& a = it->second;
        if (inserted) a.min_index = static_cast<int>(i);
        a.pos_sum += cloud.positions[i];
        if (cloud.has_normals() && !cloud.normals[i].isZero()) a.normal_sum += cloud.normals[i];
        a.count += 1;
    }

    std::vector<const Accum*> order;
    order.reserve(voxels.size());
    for (const auto& [key, a] : voxels) order.push_back(&a);
    std::sort(order.begin(), order.end(),
              [](const Accum* a, const Accum* b) { return a->min_index < b->min_index; });

    PointCloud out;
    out.positions.reserve(order.size());
    if (cloud.has_normals()) out.normals.reserve(order.size());
    for (const Accum* a : order) {
        out.positions.push_back(a->pos_sum / static_cast<double>(a->count));
        if (cloud.has_normals()) {
            double len = a->normal_sum.norm();
            out.normals.push_back(len > 1e-12 ? Vec3(a->normal_sum / len) : Vec3::Zero());
        }
    }
    return out;
}

PointCloud estimate_normals(const PointCloud& cloud, double radius, const Vec3& viewpoint,
                            int threads) {
    if (cloud.empty()) throw EmptyCloud("estimate_normals: empty cloud");
    SearchGrid grid = build_grid(cloud, radius);

    PointCloud out;
    out.positions = cloud.positions;
    out.normals.assign(cloud.size(), Vec3::Zero());

    const int n = static_cast<int>(cloud.size());
    if (threads <= 0) threads = omp_get_max_threads();
#pragma omp parallel for schedule(static) num_threads(threads)
    for (int i = 0; i < n; ++i) {
        const Vec3& p = cloud.positions[static_cast<std::size_t>(i)];
        std::vector<int> nbrs = radius_search(grid, p, radius);
        if (nbrs.size() < 3) continue;

        Vec3 mean = Vec3::Zero();
        for (int j : nbrs) mean += cloud.positions[static_cast<std::size_t>(j)];
        mean /= static_cast<double>(nbrs.size());
        Mat3 cov = Mat3::Zero();
        for (int j : nbrs) {
            Vec3 d = cloud.positions[static_cast<std::size_t>(j)] - mean;
            cov += d * d.transpose();
        }

        Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
        Vec3 normal = eig.eigenvectors().col(0);  // smallest eigenvalue first
        double len = normal.norm();
        if (!(len > 0.0) || !std::isfinite(len)) continue;
        normal /= len;
        if (normal.dot(viewpoint - p) < 0.0) normal = -normal;
        out.normals[static_cast<std::size_t>(i)] = normal;
    }
    return out;
}

}  // namespace loopkit
