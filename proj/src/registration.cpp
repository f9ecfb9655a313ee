#include "loopkit/registration.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <omp.h>

#include "loopkit/preprocess.hpp"

namespace loopkit {

namespace {

double now_seconds() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

}  // namespace

QuadrupleSample sample_quadruple(int source_size, std::span<const int> target_cache, RngStream& rng) {
    if (source_size < 4) throw TooFewPoints("sample_quadruple: need >= 4 source points");
    if (target_cache.size() != static_cast<std::size_t>(source_size)) {
        throw MissingData("sample_quadruple: cache size mismatch");
    }
    QuadrupleSample s;
    for (int k = 0; k < 4; ++k) {
        while (true) {
            int idx = static_cast<int>(rng.next_bounded(static_cast<std::uint32_t>(source_size)));
            bool dup = false;
            for (int m = 0; m < k; ++m) dup = dup || s.source[static_cast<std::size_t>(m)] == idx;
            if (!dup) {
                s.source[static_cast<std::size_t>(k)] = idx;
                break;
            }
        }
        s.target[static_cast<std::size_t>(k)] = target_cache[static_cast<std::size_t>(s.source[static_cast<std::size_t>(k)])];
    }
    return s;
}

bool prerejected(const std::array<Vec3, 4>& src, const std::array<Vec3, 4>& dst, double tau) {
    // Compares the four sides of the sampled quadrilateral (cyclic pairs k, k+1 mod 4).
    for (int a = 0; a < 4; ++a) {
        int b = (a + 1) & 3;
        double es = (src[static_cast<std::size_t>(a)] - src[static_cast<std::size_t>(b)]).norm();
        double ed = (dst[static_cast<std::size_t>(a)] - dst[static_cast<std::size_t>(b)]).norm();
        if (es < tau * ed || ed < tau * es) return true;
    }
    return false;
}

std::pair<double, double> evaluate_hypothesis(const RigidTransform& t, const PointCloud& source,
                                              const PointCloud& target,
                                              const SearchGrid& target_grid,
                                              const RegistrationParams& params) {
    if (source.empty() || target.empty()) throw EmptyCloud("evaluate_hypothesis: empty cloud");
    if (!source.has_normals() || !target.has_normals()) {
        throw MissingNormals("evaluate_hypothesis: both clouds need normals");
    }
    const double cos_max = std::cos(params.normal_angle_max);
    std::int64_t inliers = 0;
    double sq_sum = 0.0;
    for (std::size_t i = 0; i < source.size(); ++i) {
        Vec3 y = t * source.positions[i];
        auto nn = nn_within(target_grid, y, params.d_max);
        if (!nn) continue;
        Vec3 ns = source.normals[i];
        const Vec3& nt = target.normals[static_cast<std::size_t>(nn->index)];
        if (ns.isZero() || nt.isZero()) continue;
        if ((t.rotation * ns).dot(nt) < cos_max) continue;
        inliers += 1;
        sq_sum += nn->distance * nn->distance;
    }
    double ratio = static_cast<double>(inliers) / static_cast<double>(source.size());
    double fitness = inliers > 0 ? sq_sum / static_cast<double>(inliers) : 0.0;
    return {ratio, fitness};
}

EvalGrid build_eval_grid(const PointCloud& target, double d_max) {
    if (target.empty()) throw EmptyCloud("build_eval_grid: empty target");
    EvalGrid g;
    g.cell = d_max;
    Vec3 lo = target.positions[0], hi = target.positions[0];
    for (const Vec3& p : target.positions) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    // One pad cell per side guarantees that any point within d_max of a
    // target point maps to an in-range cell.
    g.origin = lo - Vec3::Constant(g.cell);
    Vec3 extent = hi - g.origin + Vec3::Constant(g.cell);
    g.nx = static_cast<int>(std::floor(extent.x() / g.cell)) + 2;
    g.ny = static_cast<int>(std::floor(extent.y() / g.cell)) + 2;
    g.nz = static_cast<int>(std::floor(extent.z() / g.cell)) + 2;

    const auto ncells = static_cast<std::size_t>(g.nx) * static_cast<std::size_t>(g.ny) *
                        static_cast<std::size_t>(g.nz);
    auto cell_of = [&](const Vec3& p) {
        int ix = static_cast<int>(std::floor((p.x() - g.origin.x()) / g.cell));
        int iy = static_cast<int>(std::floor((p.y() - g.origin.y()) / g.cell));
        int iz = static_cast<int>(std::floor((p.z() - g.origin.z()) / g.cell));
        return std::array<int, 3>{ix, iy, iz};
    };
    auto flat = [&](int ix, int iy, int iz) {
        return (static_cast<std::size_t>(ix) * static_cast<std::size_t>(g.ny) +
                static_cast<std::size_t>(iy)) *
                   static_cast<std::size_t>(g.nz) +
               static_cast<std::size_t>(iz);
    };

    const int n = static_cast<int>(target.size());
    std::vector<std::int32_t> counts(ncells + 1, 0);
    std::vector<std::size_t> cell_idx(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        auto [ix, iy, iz] = cell_of(target.positions[static_cast<std::size_t>(i)]);
        cell_idx[static_cast<std::size_t>(i)] = flat(ix, iy, iz);
        counts[cell_idx[static_cast<std::size_t>(i)] + 1] += 1;
    }
    g.start.resize(ncells + 1);
    g.start[0] = 0;
    for (std::size_t c = 0; c < ncells; ++c) g.start[c + 1] = g.start[c] + counts[c + 1];
    g.index.resize(static_cast<std::size_t>(n));
    g.slot_position.resize(static_cast<std::size_t>(n));
    g.slot_normal.assign(static_cast<std::size_t>(n), Vec3::Zero());
    std::vector<std::int32_t> cursor(g.start.begin(), g.start.end() - 1);
    for (int i = 0; i < n; ++i) {
        std::int32_t slot = cursor[cell_idx[static_cast<std::size_t>(i)]]++;
        g.index[static_cast<std::size_t>(slot)] = i;
        g.slot_position[static_cast<std::size_t>(slot)] = target.positions[static_cast<std::size_t>(i)];
        if (target.has_normals()) g.slot_normal[static_cast<std::size_t>(slot)] = target.normals[static_cast<std::size_t>(i)];
    }

    g.near_occupied.assign(ncells, 0);
    for (int i = 0; i < n; ++i) {
        auto [ix, iy, iz] = cell_of(target.positions[static_cast<std::size_t>(i)]);
        for (int dx = -1; dx <= 1; ++dx) {
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dz = -1; dz <= 1; ++dz) {
                    int x = ix + dx, y = iy + dy, z = iz + dz;
                    if (x < 0 || y < 0 || z < 0 || x >= g.nx || y >= g.ny || z >= g.nz) continue;
                    g.near_occupied[flat(x, y, z)] = 1;
                }
            }
        }
    }
    return g;
}

namespace {

/// Exact evaluation against the dense grid with a miss budget: returns
/// nullopt as soon as the hypothesis can no longer reach min_inlier_ratio.
/// Identical to evaluate_hypothesis for every hypothesis it fully scores.
std::optional<std::pair<double, double>> evaluate_against_grid(const EvalGrid& g,
                                                               const PointCloud& source,
                                                               const RigidTransform& t,
                                                               double d_max, double cos_max,
                                                               std::int64_t miss_budget) {
    const double d2_max = d_max * d_max;
    const auto n = static_cast<std::int64_t>(source.size());
    std::int64_t inliers = 0, misses = 0;
    double sq_sum = 0.0;
    const std::size_t plane = static_cast<std::size_t>(g.ny) * static_cast<std::size_t>(g.nz);
    for (std::int64_t i = 0; i < n; ++i) {
        Vec3 y = t * source.positions[static_cast<std::size_t>(i)];
        int ix = static_cast<int>(std::floor((y.x() - g.origin.x()) / g.cell));
        int iy = static_cast<int>(std::floor((y.y() - g.origin.y()) / g.cell));
        int iz = static_cast<int>(std::floor((y.z() - g.origin.z()) / g.cell));
        bool miss = true;
        if (ix >= 0 && iy >= 0 && iz >= 0 && ix < g.nx && iy < g.ny && iz < g.nz) {
            std::size_t c = static_cast<std::size_t>(ix) * plane +
                            static_cast<std::size_t>(iy) * static_cast<std::size_t>(g.nz) +
                            static_cast<std::size_t>(iz);
            if (g.near_occupied[c]) {
                double best_d2 = std::numeric_limits<double>::infinity();
                std::int32_t best_slot = -1;
                int best_index = std::numeric_limits<int>::max();
                int x0 = std::max(ix - 1, 0), x1 = std::min(ix + 1, g.nx - 1);
                int y0 = std::max(iy - 1, 0), y1 = std::min(iy + 1, g.ny - 1);
                int z0 = std::max(iz - 1, 0), z1 = std::min(iz + 1, g.nz - 1);
                for (int x = x0; x <= x1; ++x) {
                    for (int yy = y0; yy <= y1; ++yy) {
                        std::size_t row = static_cast<std::size_t>(x) * plane +
                                          static_cast<std::size_t>(yy) * static_cast<std::size_t>(g.nz);
                        std::int32_t s0 = g.start[row + static_cast<std::size_t>(z0)];
                        std::int32_t s1 = g.start[row + static_cast<std::size_t>(z1) + 1];
                        for (std::int32_t s = s0; s < s1; ++s) {
                            double d2 = (g.slot_position[static_cast<std::size_t>(s)] - y).squaredNorm();
                            if (d2 > d2_max) continue;
                            int orig = g.index[static_cast<std::size_t>(s)];
                            if (d2 < best_d2 || (d2 == best_d2 && orig < best_index)) {
                                best_d2 = d2;
                                best_slot = s;
                                best_index = orig;
                            }
                        }
                    }
                }
                if (best_slot >= 0) {
                    const Vec3& ns = source.normals[static_cast<std::size_t>(i)];
                    const Vec3& nt = g.slot_normal[static_cast<std::size_t>(best_slot)];
                    if (!ns.isZero() && !nt.isZero() && (t.rotation * ns).dot(nt) >= cos_max) {
                        miss = false;
                        inliers += 1;
                        sq_sum += best_d2;
                    }
                }
            }
        }
        if (miss) {
            misses += 1;
            if (misses > miss_budget) return std::nullopt;
        }
    }
    double ratio = static_cast<double>(inliers) / static_cast<double>(n);
    double fitness = inliers > 0 ? sq_sum / static_cast<double>(inliers) : 0.0;
    return std::make_pair(ratio, fitness);
}

}  // namespace

RegistrationContext prepare_registration(const PointCloud& source_cloud,
                                         const PointCloud& target_cloud,
                                         const RegistrationParams& params) {
    RegistrationContext ctx;
    ctx.source = voxel_downsample(source_cloud, params.leaf);
    ctx.target = voxel_downsample(target_cloud, params.leaf);
    if (ctx.source.size() < 4 || ctx.target.size() < 4) {
        throw TooFewPoints("register_global: fewer than 4 points after downsampling");
    }
    if (!ctx.source.has_normals()) {
        ctx.source = estimate_normals(ctx.source, params.normal_radius, Vec3::Zero(), params.threads);
    }
    if (!ctx.target.has_normals()) {
        ctx.target = estimate_normals(ctx.target, params.normal_radius, Vec3::Zero(), params.threads);
    }
    auto usable = [](const PointCloud& c) {
        std::size_t k = 0;
        for (const Vec3& normal : c.normals) k += normal.isZero() ? 0u : 1u;
        return k;
    };
    if (usable(ctx.source) < 4 || usable(ctx.target) < 4) {
        throw MissingData("register_global: fewer than 4 points with usable normals");
    }
    ctx.source_features = compute_fpfh(ctx.source, params.feature_radius, params.threads);
    ctx.target_features = compute_fpfh(ctx.target, params.feature_radius, params.threads);
    ctx.cache = feature_nn_cache(ctx.source_features, ctx.target_features, params.threads);
    ctx.eval = build_eval_grid(ctx.target, params.d_max);
    return ctx;
}

std::optional<RegistrationResult> run_hypotheses(const RegistrationContext& ctx,
                                                 const RegistrationParams& params,
                                                 HypothesisStats* stats) {
    const auto n_src = static_cast<int>(ctx.source.size());
    const double cos_max = std::cos(params.normal_angle_max);
    const double max_fitness = params.resolved_max_fitness();
    const auto miss_budget =
        static_cast<std::int64_t>(ctx.source.size()) -
        static_cast<std::int64_t>(std::ceil(params.min_inlier_ratio * static_cast<double>(ctx.source.size())));

    struct Best {
        double ratio = -1.0;
        double fitness = std::numeric_limits<double>::infinity();
        std::int64_t index = std::numeric_limits<std::int64_t>::max();
        RigidTransform transform;
        bool valid = false;
    };
    // Strict total order over qualified hypotheses; the winner is the same
    // under any merge order, so the parallel reduction is schedule-free.
    auto better = [](const Best& a, const Best& b) {
        if (a.ratio != b.ratio) return a.ratio > b.ratio;
        if (a.fitness != b.fitness) return a.fitness < b.fitness;
        return a.index < b.index;
    };

    Best global;
    std::int64_t prerejected_count = 0, degenerate_count = 0, evaluated_count = 0, qualified_count = 0;
    int threads = params.threads > 0 ? params.threads : omp_get_max_threads();
    double t0 = now_seconds();

#pragma omp parallel num_threads(threads) reduction(+ : prerejected_count, degenerate_count, evaluated_count, qualified_count)
    {
        Best local;
#pragma omp for schedule(dynamic, 256)
        for (std::int64_t i = 0; i < params.hypothesis_count; ++i) {
            RngStream rng(params.seed, static_cast<std::uint64_t>(i));
            QuadrupleSample s = sample_quadruple(n_src, ctx.cache, rng);
            std::array<Vec3, 4> src, dst;
            for (int k = 0; k < 4; ++k) {
                src[static_cast<std::size_t>(k)] = ctx.source.positions[static_cast<std::size_t>(s.source[static_cast<std::size_t>(k)])];
                dst[static_cast<std::size_t>(k)] = ctx.target.positions[static_cast<std::size_t>(s.target[static_cast<std::size_t>(k)])];
            }
            if (prerejected(src, dst, params.similarity_tau)) {
                prerejected_count += 1;
                continue;
            }
            RigidTransform t;
            try {
                t = kabsch(src, dst);
            } catch (const DegenerateConfiguration&) {
                degenerate_count += 1;
                continue;
            }
            evaluated_count += 1;
            auto scored = evaluate_against_grid(ctx.eval, ctx.source, t, params.d_max, cos_max, miss_budget);
            if (!scored) continue;
            auto [ratio, fitness] = *scored;
            if (ratio < params.min_inlier_ratio || fitness > max_fitness) continue;
            qualified_count += 1;
            Best cand{ratio, fitness, i, t, true};
            if (!local.valid || better(cand, local)) local = cand;
        }
#pragma omp critical(loopkit_reg_best)
        {
            if (local.valid && (!global.valid || better(local, global))) global = local;
        }
    }

    double t1 = now_seconds();
    if (stats) {
        stats->sampled = params.hypothesis_count;
        stats->prerejected = prerejected_count;
        stats->degenerate = degenerate_count;
        stats->evaluated = evaluated_count;
        stats->qualified = qualified_count;
        stats->hypothesis_seconds = t1 - t0;
    }
    if (!global.valid) return std::nullopt;
    return RegistrationResult{global.transform, global.ratio, global.fitness, global.index};
}

std::optional<RegistrationResult> register_global(const PointCloud& source_cloud,
                                                  const PointCloud& target_cloud,
                                                  const RegistrationParams& params,
                                                  HypothesisStats* stats) {
    double t0 = now_seconds();
    RegistrationContext ctx = prepare_registration(source_cloud, target_cloud, params);
    double t1 = now_seconds();
    if (stats) stats->prepare_seconds = t1 - t0;
    return run_hypotheses(ctx, params, stats);
}

}  // namespace loopkit
