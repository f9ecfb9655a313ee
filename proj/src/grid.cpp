#include "loopkit/grid.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <omp.h>

#include "loopkit/fpfh.hpp"

namespace loopkit {

namespace {

constexpr std::int64_t kKeyOffset = 1 << 20;  // 21-bit signed range per axis

std::uint64_t pack_key(const Eigen::Vector3i& c) {
    auto x = static_cast<std::uint64_t>(c.x() + kKeyOffset);
    auto y = static_cast<std::uint64_t>(c.y() + kKeyOffset);
    auto z = static_cast<std::uint64_t>(c.z() + kKeyOffset);
    return (x << 42) | (y << 21) | z;
}

}  // namespace

Eigen::Vector3i grid_index(const Vec3& p, const Vec3& center, double cell_length) {
    Vec3 q = (p - center) / cell_length;
    return {static_cast<int>(std::floor(q.x())), static_cast<int>(std::floor(q.y())),
            static_cast<int>(std::floor(q.z()))};
}

SearchGrid build_grid(const PointCloud& cloud, double cell_length, const Vec3& center) {
    if (cloud.empty()) throw EmptyCloud("build_grid: empty cloud");
    if (!(cell_length > 0.0)) throw Error("build_grid: cell_length must be positive");

    SearchGrid g;
    g.cell_length_ = cell_length;
    g.center_ = center;
    g.points_ = cloud.positions;

    const int n = static_cast<int>(cloud.size());
    std::vector<std::uint64_t> keys(static_cast<std::size_t>(n));
    g.cell_min_ = Eigen::Vector3i::Constant(std::numeric_limits<int>::max());
    g.cell_max_ = Eigen::Vector3i::Constant(std::numeric_limits<int>::min());
    for (int i = 0; i < n; ++i) {
        Eigen::Vector3i c = grid_index(cloud.positions[static_cast<std::size_t>(i)], center, cell_length);
        g.cell_min_ = g.cell_min_.cwiseMin(c);
        g.cell_max_ = g.cell_max_.cwiseMax(c);
        keys[static_cast<std::size_t>(i)] = pack_key(c);
        auto [it, inserted] = g.cells_.try_emplace(keys[static_cast<std::size_t>(i)], 0, 0);
        it->second.second += 1;
    }
    int start = 0;
    for (auto& [key, range] : g.cells_) {
        range.first = start;
        start += range.second;
        range.second = 0;  // reused as fill cursor
    }
    g.cell_points_.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        auto& range = g.cells_[keys[static_cast<std::size_t>(i)]];
        g.cell_points_[static_cast<std::size_t>(range.first + range.second)] = i;
        range.second += 1;
    }
    return g;
}

std::span<const int> SearchGrid::cell(const Eigen::Vector3i& c) const {
    auto it = cells_.find(pack_key(c));
    if (it == cells_.end()) return {};
    return {cell_points_.data() + it->second.first, static_cast<std::size_t>(it->second.second)};
}

namespace {

/// Scans the cell block within Chebyshev distance c of the query's cell,
/// keeping the (distance^2, index)-minimal point within d2_max.
void scan_block(const SearchGrid& grid, const Vec3& query, int c, double d2_max, double& best_d2,
                int& best_idx) {
    Eigen::Vector3i q_cell = grid_index(query, grid.center(), grid.cell_length());
    Eigen::Vector3i lo = (q_cell - Eigen::Vector3i::Constant(c)).cwiseMax(grid.cell_min());
    Eigen::Vector3i hi = (q_cell + Eigen::Vector3i::Constant(c)).cwiseMin(grid.cell_max());
    for (int x = lo.x(); x <= hi.x(); ++x) {
        for (int y = lo.y(); y <= hi.y(); ++y) {
            for (int z = lo.z(); z <= hi.z(); ++z) {
                for (int idx : grid.cell({x, y, z})) {
                    double d2 = (grid.points()[static_cast<std::size_t>(idx)] - query).squaredNorm();
                    if (d2 > d2_max) continue;
                    if (d2 < best_d2 || (d2 == best_d2 && idx < best_idx)) {
                        best_d2 = d2;
                        best_idx = idx;
                    }
                }
            }
        }
    }
}

}  // namespace

std::optional<NnResult> nn_within(const SearchGrid& grid, const Vec3& query, double d_max) {
    if (grid.size() == 0) return std::nullopt;
    int c = static_cast<int>(std::ceil(d_max / grid.cell_length()));
    double best_d2 = std::numeric_limits<double>::infinity();
    int best_idx = std::numeric_limits<int>::max();
    scan_block(grid, query, c, d_max * d_max, best_d2, best_idx);
    if (best_idx == std::numeric_limits<int>::max()) return std::nullopt;
    return NnResult{best_idx, std::sqrt(best_d2)};
}

NnResult nn_nearest(const SearchGrid& grid, const Vec3& query) {
    if (grid.size() == 0) throw EmptyCloud("nn_nearest: empty grid");
    Eigen::Vector3i q_cell = grid_index(query, grid.center(), grid.cell_length());
    // Largest ring that still intersects the occupied bounding box.
    int max_ring = 0;
    for (int a = 0; a < 3; ++a) {
        max_ring = std::max(max_ring, q_cell[a] - grid.cell_min()[a]);
        max_ring = std::max(max_ring, grid.cell_max()[a] - q_cell[a]);
    }
    double best_d2 = std::numeric_limits<double>::infinity();
    int best_idx = std::numeric_limits<int>::max();
    const double cell = grid.cell_length();
    for (int ring = 0; ring <= max_ring; ++ring) {
        // Any point in ring r lies at distance >= (r-1)*cell, so once the
        // current best is strictly below that bound no later ring can win
        // or tie it.
        if (best_idx != std::numeric_limits<int>::max() &&
            best_d2 < std::pow(static_cast<double>(ring - 1) * cell, 2.0)) {
            break;
        }
        Eigen::Vector3i lo = q_cell - Eigen::Vector3i::Constant(ring);
        Eigen::Vector3i hi = q_cell + Eigen::Vector3i::Constant(ring);
        for (int x = lo.x(); x <= hi.x(); ++x) {
            for (int y = lo.y(); y <= hi.y(); ++y) {
                for (int z = lo.z(); z <= hi.z(); ++z) {
                    bool on_shell = x == lo.x() || x == hi.x() || y == lo.y() || y == hi.y() ||
                                    z == lo.z() || z == hi.z();
                    if (!on_shell && ring > 0) continue;
                    for (int idx : grid.cell({x, y, z})) {
                        double d2 = (grid.points()[static_cast<std::size_t>(idx)] - query).squaredNorm();
                        if (d2 < best_d2 || (d2 == best_d2 && idx < best_idx)) {
                            best_d2 = d2;
                            best_idx = idx;
                        }
                    }
                }
            }
        }
    }
    return {best_idx, std::sqrt(best_d2)};
}

std::vector<int> radius_search(const SearchGrid& grid, const Vec3& query, double radius) {
    std::vector<int> out;
    if (grid.size() == 0) return out;
    int c = static_cast<int>(std::ceil(radius / grid.cell_length()));
    double r2 = radius * radius;
    Eigen::Vector3i q_cell = grid_index(query, grid.center(), grid.cell_length());
    Eigen::Vector3i lo = (q_cell - Eigen::Vector3i::Constant(c)).cwiseMax(grid.cell_min());
    Eigen::Vector3i hi = (q_cell + Eigen::Vector3i::Constant(c)).cwiseMin(grid.cell_max());
    for (int x = lo.x(); x <= hi.x(); ++x) {
        for (int y = lo.y(); y <= hi.y(); ++y) {
            for (int z = lo.z(); z <= hi.z(); ++z) {
                for (int idx : grid.cell({x, y, z})) {
                    if ((grid.points()[static_cast<std::size_t>(idx)] - query).squaredNorm() <= r2) {
                        out.push_back(idx);
                    }
                }
            }
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<int> feature_nn_cache(std::span<const FpfhFeature> source,
                                  std::span<const FpfhFeature> target, int threads) {
    if (source.empty() || target.empty()) {
        throw MissingData("feature_nn_cache: empty feature set");
    }
    const int np = static_cast<int>(source.size());
    const int nq = static_cast<int>(target.size());

    // d^2(p, q) = |p|^2 - 2 p.q + |q|^2; |p|^2 is constant per source, so
    // the argmin only needs |q|^2 - 2 p.q, computed as one mat-vec per source.
    Eigen::MatrixXf q_mat(kFpfhDim, nq);
    for (int j = 0; j < nq; ++j) {
        q_mat.col(j) = Eigen::Map<const Eigen::Matrix<float, kFpfhDim, 1>>(target[static_cast<std::size_t>(j)].bins.data());
    }
    Eigen::VectorXf q_norm2 = q_mat.colwise().squaredNorm();

    std::vector<int> cache(static_cast<std::size_t>(np), -1);
    if (threads <= 0) threads = omp_get_max_threads();
#pragma omp parallel num_threads(threads)
    {
        Eigen::VectorXf score(nq);
#pragma omp for schedule(static)
        for (int i = 0; i < np; ++i) {
            Eigen::Map<const Eigen::Matrix<float, kFpfhDim, 1>> f(source[static_cast<std::size_t>(i)].bins.data());
            score.noalias() = q_norm2 - 2.0f * (q_mat.transpose() * f);
            int best = 0;
            float best_s = score[0];
            for (int j = 1; j < nq; ++j) {
                if (score[j] < best_s) {
                    best_s = score[j];
                    best = j;
                }
            }
            cache[static_cast<std::size_t>(i)] = best;
        }
    }
    return cache;
}

}  // namespace loopkit
