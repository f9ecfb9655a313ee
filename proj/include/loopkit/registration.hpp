#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "loopkit/fpfh.hpp"
#include "loopkit/geometry.hpp"
#include "loopkit/grid.hpp"
#include "loopkit/rng.hpp"

namespace loopkit {

struct RegistrationParams {
    double leaf = 0.05;
    double normal_radius = 0.1;
    double feature_radius = 0.25;
    std::int64_t hypothesis_count = 4'000'000;
    double similarity_tau = 0.9;
    double d_max = 0.075;
    double min_inlier_ratio = 0.25;
    /// Mean squared inlier distance cap; defaults to d_max^2 / 2.
    std::optional<double> max_fitness;
    double normal_angle_max = 30.0 * M_PI / 180.0;
    std::uint64_t seed = 0;
    int threads = 0;

    double resolved_max_fitness() const { return max_fitness.value_or(d_max * d_max / 2.0); }
};

struct RegistrationResult {
    RigidTransform transform;  // maps source coordinates into the target frame
    double inlier_ratio = 0.0;
    double fitness = 0.0;
    std::int64_t hypothesis_index = -1;
};

struct QuadrupleSample {
    std::array<int, 4> source{};
    std::array<int, 4> target{};
};

/// Draws 4 distinct source indices uniformly and maps them through the
/// feature-match cache. Pure function of the rng stream state.
QuadrupleSample sample_quadruple(int source_size, std::span<const int> target_cache, RngStream& rng);

/// True iff the quadruple fails the edge-similarity test: one of the four
/// sides of the sampled quadrilateral (vertices k and k+1 mod 4) has
/// |e_src| < tau * |e_dst| or |e_dst| < tau * |e_src|.
bool prerejected(const std::array<Vec3, 4>& src, const std::array<Vec3, 4>& dst, double tau);

/// Exact (inlier_ratio, fitness) of a candidate transform. A source point is
/// an inlier iff its nearest target point under T lies within d_max and the
/// normals agree within normal_angle_max; fitness is the mean squared
/// distance over inliers (0 when there are none). `target_grid` must be
/// built over `target.positions`.
std::pair<double, double> evaluate_hypothesis(const RigidTransform& t, const PointCloud& source,
                                              const PointCloud& target,
                                              const SearchGrid& target_grid,
                                              const RegistrationParams& params);

/// Dense cell structure over the target for the hypothesis loop: CSR point
/// slots plus a dilated occupancy mask so that a scan can reject a miss with
/// one byte load. Queries are exact (cell size >= d_max and one-cell pad).
struct EvalGrid {
    Vec3 origin = Vec3::Zero();
    double cell = 1.0;
    int nx = 0, ny = 0, nz = 0;
    std::vector<std::int32_t> start;
    std::vector<std::int32_t> index;     // original target indices, CSR order
    std::vector<Vec3> slot_position;     // target data re-laid in CSR order
    std::vector<Vec3> slot_normal;
    std::vector<std::uint8_t> near_occupied;
};

EvalGrid build_eval_grid(const PointCloud& target, double d_max);

/// Everything register_global precomputes before the hypothesis loop.
struct RegistrationContext {
    PointCloud source;  // downsampled, with normals
    PointCloud target;
    std::vector<FpfhFeature> source_features;
    std::vector<FpfhFeature> target_features;
    std::vector<int> cache;  // source index -> matched target index
    EvalGrid eval;
};

struct HypothesisStats {
    std::int64_t sampled = 0;
    std::int64_t prerejected = 0;
    std::int64_t degenerate = 0;
    std::int64_t evaluated = 0;
    std::int64_t qualified = 0;
    double prepare_seconds = 0.0;
    double hypothesis_seconds = 0.0;
};

/// Downsample, ensure normals (estimated from the origin viewpoint when the
/// input carries none), compute features and the match cache, build the
/// evaluation grid. Throws TooFewPoints (< 4 points after downsampling) and
/// MissingData (< 4 points with usable normals on either side).
RegistrationContext prepare_registration(const PointCloud& source_cloud,
                                         const PointCloud& target_cloud,
                                         const RegistrationParams& params);

/// Samples, pre-rejects, fits and scores `params.hypothesis_count`
/// hypotheses; returns the qualifying result with the highest inlier ratio
/// (ties: lower fitness, then lower hypothesis index), or nullopt.
///
/// Hypothesis i draws from rng stream (seed, i), so results are a pure
/// function of the inputs: independent of the thread count and prefix-stable
/// in hypothesis_count.
std::optional<RegistrationResult> run_hypotheses(const RegistrationContext& ctx,
                                                 const RegistrationParams& params,
                                                 HypothesisStats* stats = nullptr);

/// prepare_registration + run_hypotheses.
std::optional<RegistrationResult> register_global(const PointCloud& source_cloud,
                                                  const PointCloud& target_cloud,
                                                  const RegistrationParams& params,
                                                  HypothesisStats* stats = nullptr);

}  // namespace loopkit
