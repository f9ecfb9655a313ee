#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "loopkit/ba.hpp"
#include "loopkit/fragments.hpp"
#include "loopkit/io.hpp"
#include "loopkit/line_process.hpp"
#include "loopkit/registration.hpp"
#include "loopkit/surfel_map.hpp"

namespace loopkit {

struct PipelineConfig {
    int k = 50;                 // frames per fragment
    int keyframe_every = 5;     // used only when no BA problem supplies keyframes
    RegistrationParams registration;
    double mu_tau = 0.2;
    double lambda_odo = 1000.0;
    double reject_l = 0.25;
    int refresh_every = 50;
    LoopParams overlap;
    double epsilon = 0.05;      // correspondence radius for edge informations
    bool propose = true;        // proposal generation toggle
    bool evaluate = true;       // compute metrics when truth is present
    BaConfig ba;
};

/// Reads the flat "key = value" pipeline configuration; unknown keys are
/// ignored so dataset and run configs can share a file.
PipelineConfig pipeline_config_from(const std::map<std::string, std::string>& kv);

/// A batch dataset: drifted odometry with per-frame camera-local clouds,
/// plus whatever truth and side products are available.
struct PipelineInput {
    std::vector<double> timestamps;
    std::vector<RigidTransform> odometry;  // camera-to-world per frame
    std::vector<PointCloud> clouds;        // camera-local
    std::vector<TimedPose> truth;          // empty when absent
    std::optional<BaProblem> ba;
    std::optional<SurfelMap> map;
    PointCloud scene_points;               // truth surface; empty when absent
    int keyframe_every = 5;
};

/// Loads odometry.txt + clouds/cloud_%06d.ply and the optional side files
/// (groundtruth.txt, ba.json, map.ply + map_vis.txt, scene.ply, dataset.cfg).
PipelineInput load_dataset(const std::filesystem::path& dir);

/// One loop candidate's life: proposed -> registered -> verified.
struct LoopRecord {
    int i = 0;  // earlier fragment
    int j = 0;  // later fragment
    double overlap = 0.0;
    bool registered = false;
    double inlier_ratio = 0.0;
    double fitness = 0.0;
    double weight = 0.0;
    bool accepted = false;
};

struct PipelineReport {
    int frames = 0;
    int fragments = 0;
    int keyframes = 0;
    int proposals = 0;
    int registered = 0;
    int accepted = 0;
    int rejected = 0;
    int refreshes = 0;
    int ba_runs = 0;
    bool corrected = false;
    std::vector<LoopRecord> loops;
    // Metrics are negative when not evaluated (no truth available).
    double ate_odometry = -1.0;
    double ate_pipeline = -1.0;
    double surface_mean_before = -1.0;
    double surface_median_before = -1.0;
    double surface_mean_after = -1.0;
    double surface_median_after = -1.0;
    std::vector<std::pair<std::string, double>> timings;

    /// Key-value lines; identical for identical inputs except for the
    /// trailing timing_* block.
    std::string text() const;
};

struct PipelineResult {
    std::vector<TimedPose> trajectory;  // one pose per input frame
    SurfelMap map;                      // corrected copy of the input map
    std::vector<LogEntry> loop_log;     // accepted loops, (i < j, rel maps j into i)
    PipelineReport report;
};

/// End-to-end loop back-end over a batch dataset. Fragments are processed in
/// order; after each new fragment, loop proposals against all earlier
/// fragments are registered and line-process verified, newly accepted loops
/// trigger keyframe pose-graph optimization, bundle adjustment (when a BA
/// problem is present), and surfel-map correction. A failed registration
/// never aborts the run. With proposals disabled the output trajectory is
/// the input odometry, byte for byte.
PipelineResult run_pipeline(const PipelineInput& input, const PipelineConfig& config);

}  // namespace loopkit
