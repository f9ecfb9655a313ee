#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "loopkit/ba.hpp"
#include "loopkit/errors.hpp"
#include "loopkit/fragments.hpp"
#include "loopkit/io.hpp"
#include "loopkit/line_process.hpp"
#include "loopkit/metrics.hpp"
#include "loopkit/pipeline.hpp"
#include "loopkit/pose_graph.hpp"
#include "loopkit/registration.hpp"
#include "loopkit/surfel_map.hpp"
#include "loopkit/synth.hpp"

namespace fs = std::filesystem;
using namespace loopkit;

namespace {

void print_matrix(const Mat4& m) {
    for (int r = 0; r < 4; ++r) {
        std::printf("%.17g %.17g %.17g %.17g\n", m(r, 0), m(r, 1), m(r, 2), m(r, 3));
    }
}

/// Loads fragment_%04d.ply files until the numbering stops.
std::vector<PointCloud> load_fragment_clouds(const fs::path& dir) {
    std::vector<PointCloud> clouds;
    for (int i = 0;; ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "fragment_%04d.ply", i);
        fs::path p = dir / name;
        if (!fs::exists(p)) break;
        clouds.push_back(read_ply(p.string()));
    }
    if (clouds.empty()) throw MissingData("no fragment_%04d.ply files in " + dir.string());
    return clouds;
}

/// A trajectory file read as a keyframe table: line index = keyframe id.
std::vector<Keyframe> keyframes_from(const std::string& path) {
    std::vector<Keyframe> kfs;
    auto traj = read_trajectory(path);
    for (std::size_t i = 0; i < traj.size(); ++i) {
        kfs.push_back({static_cast<int>(i), traj[i].timestamp, traj[i].pose});
    }
    return kfs;
}

int cmd_register(const std::string& source_path, const std::string& target_path,
                 const RegistrationParams& params) {
    PointCloud source = read_ply(source_path);
    PointCloud target = read_ply(target_path);
    auto result = register_global(source, target, params);
    if (!result) {
        std::printf("no-alignment\n");
        return 2;
    }
    print_matrix(result->transform.matrix());
    std::printf("inlier_ratio %.17g\nfitness %.17g\n", result->inlier_ratio, result->fitness);
    return 0;
}

int cmd_fragments(const std::string& traj_path, const std::string& clouds_dir, int k,
                  const std::string& out_dir, double leaf, int keyframe_every, double epsilon) {
    auto traj = read_trajectory(traj_path);
    if (traj.empty()) throw MissingData("empty trajectory " + traj_path);
    std::vector<FrameData> frames;
    for (std::size_t i = 0; i < traj.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "cloud_%06zu.ply", i);
        frames.push_back({static_cast<int>(i), traj[i].timestamp, traj[i].pose,
                          read_ply((fs::path(clouds_dir) / name).string())});
    }
    std::vector<Keyframe> keyframes;
    for (std::size_t i = 0; i < traj.size(); i += static_cast<std::size_t>(keyframe_every)) {
        keyframes.push_back({static_cast<int>(i) / keyframe_every, traj[i].timestamp,
                             traj[i].pose});
    }
    auto fragments = make_fragments(frames, keyframes, k, leaf);

    fs::create_directories(out_dir);
    FILE* sidecar = std::fopen((fs::path(out_dir) / "anchors.txt").string().c_str(), "w");
    if (!sidecar) throw Error("cannot open for writing: " + out_dir + "/anchors.txt");
    PoseGraph graph;
    for (const Fragment& f : fragments) {
        char name[32];
        std::snprintf(name, sizeof(name), "fragment_%04d.ply", f.id);
        write_ply((fs::path(out_dir) / name).string(), f.cloud, true);
        std::fprintf(sidecar, "%d %d %d %d\n", f.id, f.first_frame, f.last_frame,
                     f.anchor_keyframe);
        graph.poses.push_back(f.pose);
    }
    std::fclose(sidecar);
    for (std::size_t f = 1; f < fragments.size(); ++f) {
        RigidTransform rel = compose(inverse(fragments[f - 1].pose), fragments[f].pose);
        EdgeInfo info;
        try {
            info = edge_info(fragments[f - 1].cloud, fragments[f].cloud, fragments[f - 1].pose,
                             fragments[f].pose, epsilon);
        } catch (const NoCorrespondences&) {
        }
        graph.odometry.push_back({static_cast<int>(f) - 1, static_cast<int>(f), rel, info});
    }
    write_graph_json((fs::path(out_dir) / "graph.json").string(), graph);
    std::printf("fragments %zu\n", fragments.size());
    return 0;
}

int cmd_loops(const std::string& frags_dir, const std::string& graph_path,
              const LoopParams& params) {
    auto clouds = load_fragment_clouds(frags_dir);
    PoseGraph graph = read_graph_json(graph_path);
    std::vector<Fragment> fragments(clouds.size());
    for (std::size_t i = 0; i < clouds.size(); ++i) {
        fragments[i].id = static_cast<int>(i);
        fragments[i].cloud = std::move(clouds[i]);
        if (i < graph.poses.size()) fragments[i].pose = graph.poses[i];
    }
    for (const LoopProposal& p : propose_loops(fragments, graph, params)) {
        std::printf("%d %d %.6f\n", p.i, p.j, p.overlap);
    }
    return 0;
}

int cmd_verify(const std::string& graph_path, const std::string& frags_dir, double mu_tau,
               double lambda, double reject, int refresh_every, double epsilon) {
    PoseGraph graph = read_graph_json(graph_path);
    auto clouds = load_fragment_clouds(frags_dir);
    refresh_info(graph, clouds, epsilon, refresh_every);
    LineProcessOptions opts;
    opts.lambda_odo = lambda;
    opts.mu_tau = mu_tau;
    opts.reject_threshold = reject;
    LineProcessResult res = optimize_line_process(graph, opts);
    for (std::size_t e = 0; e < graph.loops.size(); ++e) {
        std::printf("%d %d %.6f %d\n", graph.loops[e].i, graph.loops[e].j,
                    graph.loops[e].weight, res.accepted[e] ? 1 : 0);
    }
    write_graph_json(graph_path, graph);
    return 0;
}

int cmd_optimize(const std::string& graph_path, const std::string& ba_path,
                 const std::string& out_path, double lambda) {
    PoseGraph graph = read_graph_json(graph_path);
    SolveOptions opts;
    opts.lambda_odo = lambda;
    pose_graph_optimize(graph, opts);

    std::vector<TimedPose> traj;
    if (!ba_path.empty()) {
        BaProblem problem = read_ba_json(ba_path);
        if (problem.keyframes.size() != graph.poses.size()) {
            throw MissingData("graph poses and BA keyframes must correspond one-to-one");
        }
        // Landmarks ride their first observer's pose change before the solve.
        std::vector<RigidTransform> input_poses;
        for (const Keyframe& kf : problem.keyframes) input_poses.push_back(kf.pose);
        for (std::size_t i = 0; i < problem.keyframes.size(); ++i) {
            problem.keyframes[i].pose = graph.poses[i];
        }
        std::map<int, std::size_t> kf_slot;
        for (std::size_t i = 0; i < problem.keyframes.size(); ++i) {
            kf_slot[problem.keyframes[i].id] = i;
        }
        std::map<int, int> first_observer;
        for (const Observation& ob : problem.observations) {
            first_observer.emplace(ob.landmark_id, ob.keyframe_id);
        }
        for (Landmark& lm : problem.landmarks) {
            std::size_t slot = kf_slot.at(first_observer.at(lm.id));
            lm.position = compose(graph.poses[slot], inverse(input_poses[slot])) * lm.position;
        }
        bundle_adjust(problem.keyframes, problem.landmarks, problem.observations,
                      problem.intrinsics);
        for (const Keyframe& kf : problem.keyframes) traj.push_back({kf.timestamp, kf.pose});
    } else {
        for (std::size_t i = 0; i < graph.poses.size(); ++i) {
            traj.push_back({static_cast<double>(i), graph.poses[i]});
        }
    }
    write_trajectory(out_path, traj);
    std::printf("poses %zu\n", traj.size());
    return 0;
}

int cmd_correct_map(const std::string& map_path, const std::string& vis_path,
                    const std::string& old_path, const std::string& new_path,
                    const std::string& out_path) {
    SurfelMap map = read_surfel_map(map_path, vis_path);
    auto old_kfs = keyframes_from(old_path);
    auto new_kfs = keyframes_from(new_path);
    SurfelMap corrected = correct_surfels(map, old_kfs, new_kfs);
    std::string vis_out = out_path;
    if (vis_out.size() > 4 && vis_out.substr(vis_out.size() - 4) == ".ply") {
        vis_out = vis_out.substr(0, vis_out.size() - 4);
    }
    vis_out += "_vis.txt";
    write_surfel_map(out_path, vis_out, corrected);
    std::printf("surfels %zu\n", corrected.surfels.size());
    return 0;
}

int cmd_evaluate_ate(const std::string& est, const std::string& truth, bool no_align,
                     double tolerance) {
    AteOptions opts;
    opts.align = !no_align;
    opts.tolerance = tolerance;
    double rmse = eval_ate_rmse(read_trajectory(est), read_trajectory(truth), opts);
    std::printf("ate_rmse %.17g\n", rmse);
    return 0;
}

int cmd_evaluate_surface(const std::string& recon, const std::string& truth) {
    SurfaceError err = eval_surface(read_ply(recon), read_ply(truth));
    std::printf("mean %.17g\nmedian %.17g\n", err.mean, err.median);
    return 0;
}

int cmd_evaluate_registration(const std::string& est, const std::string& truth,
                              const std::string& frags_dir, double rmse_max) {
    std::vector<PointCloud> probes;
    if (!frags_dir.empty()) probes = load_fragment_clouds(frags_dir);
    RegistrationScore score = eval_registration(read_registration_log(est),
                                                read_registration_log(truth), probes, rmse_max);
    std::printf("recall %.17g\nprecision %.17g\ncorrect %d\n", score.recall, score.precision,
                score.correct);
    return 0;
}

int cmd_synth(const std::string& config_path, const std::string& out_dir) {
    SynthConfig config = synth_config_from(read_config(config_path));
    SynthDataset dataset = synth_scene(config);
    write_dataset(dataset, out_dir);
    std::printf("frames %d\nkeyframes %zu\nsurfels %zu\nlandmarks %zu\n", config.frames,
                dataset.keyframe_frames.size(), dataset.map.surfels.size(),
                dataset.ba.landmarks.size());
    return 0;
}

int cmd_pipeline(const std::string& dataset_dir, const std::string& config_path,
                 const std::string& out_dir) {
    PipelineInput input = load_dataset(dataset_dir);
    PipelineConfig config =
        config_path.empty() ? PipelineConfig{} : pipeline_config_from(read_config(config_path));
    PipelineResult result = run_pipeline(input, config);

    fs::create_directories(out_dir);
    write_trajectory((fs::path(out_dir) / "trajectory.txt").string(), result.trajectory);
    if (!result.map.surfels.empty()) {
        write_surfel_map((fs::path(out_dir) / "map.ply").string(),
                         (fs::path(out_dir) / "map_vis.txt").string(), result.map);
    }
    write_registration_log((fs::path(out_dir) / "loops.log").string(), result.loop_log);
    std::string text = result.report.text();
    FILE* rep = std::fopen((fs::path(out_dir) / "report.txt").string().c_str(), "w");
    if (!rep) throw Error("cannot open for writing: " + out_dir + "/report.txt");
    std::fwrite(text.data(), 1, text.size(), rep);
    std::fclose(rep);
    std::fputs(text.c_str(), stdout);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Loop-closure back-end for RGB-D fragment maps"};
    app.require_subcommand(1);

    // register
    auto* reg = app.add_subcommand("register", "Globally align two point clouds");
    std::string reg_source, reg_target;
    RegistrationParams reg_params;
    double reg_max_fitness = -1.0;
    reg->add_option("--source", reg_source, "Source cloud (PLY)")->required();
    reg->add_option("--target", reg_target, "Target cloud (PLY)")->required();
    reg->add_option("--hypotheses", reg_params.hypothesis_count, "Hypothesis count");
    reg->add_option("--seed", reg_params.seed, "RNG seed");
    reg->add_option("--leaf", reg_params.leaf, "Downsampling leaf size (m)");
    reg->add_option("--dmax", reg_params.d_max, "Max inlier correspondence distance (m)");
    reg->add_option("--normal-radius", reg_params.normal_radius, "Normal estimation radius (m)");
    reg->add_option("--feature-radius", reg_params.feature_radius, "Feature radius (m)");
    reg->add_option("--similarity-tau", reg_params.similarity_tau, "Pre-rejection similarity");
    reg->add_option("--min-inlier-ratio", reg_params.min_inlier_ratio, "Acceptance threshold");
    reg->add_option("--max-fitness", reg_max_fitness, "Fitness cap (m^2), default dmax^2/2");
    reg->add_option("--normal-angle-max", reg_params.normal_angle_max,
                    "Max normal angle at inliers (rad)");
    reg->add_option("--threads", reg_params.threads, "Worker threads (0 = all)");

    // fragments
    auto* frag = app.add_subcommand("fragments", "Fuse a sequence into fragments");
    std::string frag_traj, frag_clouds, frag_out;
    int frag_k = 50, frag_ke = 5;
    double frag_leaf = 0.05, frag_eps = 0.05;
    frag->add_option("--trajectory", frag_traj, "Odometry trajectory (TUM)")->required();
    frag->add_option("--clouds", frag_clouds, "Directory of cloud_%06d.ply")->required();
    frag->add_option("--k", frag_k, "Frames per fragment");
    frag->add_option("--out", frag_out, "Output directory")->required();
    frag->add_option("--leaf", frag_leaf, "Fusion leaf size (m)");
    frag->add_option("--keyframe-every", frag_ke, "Keyframe stride (frames)");
    frag->add_option("--epsilon", frag_eps, "Edge-info correspondence radius (m)");

    // loops
    auto* loops = app.add_subcommand("loops", "Propose loop candidates from overlap");
    std::string loops_frags, loops_graph;
    LoopParams loop_params;
    loops->add_option("--frags", loops_frags, "Fragment directory")->required();
    loops->add_option("--graph", loops_graph, "Pose graph (JSON)")->required();
    loops->add_option("--overlap-radius", loop_params.overlap_radius, "Overlap distance (m)");
    loops->add_option("--min-overlap", loop_params.min_overlap, "Minimum overlap fraction");

    // verify
    auto* verify = app.add_subcommand("verify", "Line-process verification of loop edges");
    std::string verify_graph, verify_frags;
    double verify_mu = 0.2, verify_lambda = 1000.0, verify_reject = 0.25, verify_eps = 0.05;
    int verify_refresh = 50;
    verify->add_option("--graph", verify_graph, "Pose graph (JSON), updated in place")->required();
    verify->add_option("--frags", verify_frags, "Fragment directory")->required();
    verify->add_option("--mu-tau", verify_mu, "Line-process mu per correspondence");
    verify->add_option("--lambda", verify_lambda, "Odometry weight");
    verify->add_option("--reject", verify_reject, "Rejection threshold on l");
    verify->add_option("--refresh-every", verify_refresh, "Info refresh period (fragments)");
    verify->add_option("--epsilon", verify_eps, "Edge-info correspondence radius (m)");

    // optimize
    auto* opt = app.add_subcommand("optimize", "Pose-graph optimization plus bundle adjustment");
    std::string opt_graph, opt_ba, opt_out;
    double opt_lambda = 1000.0;
    opt->add_option("--graph", opt_graph, "Keyframe pose graph (JSON)")->required();
    opt->add_option("--ba-problem", opt_ba, "Bundle-adjustment problem (JSON)");
    opt->add_option("--out", opt_out, "Output trajectory (TUM)")->required();
    opt->add_option("--lambda", opt_lambda, "Odometry weight");

    // correct-map
    auto* cmap = app.add_subcommand("correct-map", "Carry a surfel map across pose updates");
    std::string cm_map, cm_vis, cm_old, cm_new, cm_out;
    cmap->add_option("--map", cm_map, "Surfel map (PLY)")->required();
    cmap->add_option("--visibility", cm_vis, "Visibility sidecar")->required();
    cmap->add_option("--old", cm_old, "Keyframe poses before correction (TUM)")->required();
    cmap->add_option("--new", cm_new, "Keyframe poses after correction (TUM)")->required();
    cmap->add_option("--out", cm_out, "Corrected map (PLY)")->required();

    // evaluate
    auto* eval = app.add_subcommand("evaluate", "Trajectory, surface, or registration metrics");
    std::string eval_mode, eval_est, eval_truth, eval_recon, eval_frags;
    bool eval_no_align = false;
    double eval_tol = 0.02, eval_rmse_max = 0.2;
    eval->add_option("--mode", eval_mode, "ate | surface | registration")->required();
    eval->add_option("--est", eval_est, "Estimated trajectory or log");
    eval->add_option("--truth", eval_truth, "Ground-truth trajectory, cloud, or log");
    eval->add_option("--recon", eval_recon, "Reconstructed cloud (surface mode)");
    eval->add_option("--frags", eval_frags, "Fragment directory for probe points");
    eval->add_flag("--no-align", eval_no_align, "Skip rigid alignment (ate mode)");
    eval->add_option("--tolerance", eval_tol, "Timestamp association tolerance (s)");
    eval->add_option("--rmse-max", eval_rmse_max, "Correctness RMSE bound (m)");

    // synth
    auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
    std::string synth_config, synth_out;
    synth->add_option("--config", synth_config, "Flat key=value scene config")->required();
    synth->add_option("--out", synth_out, "Output dataset directory")->required();

    // pipeline
    auto* pipe = app.add_subcommand("pipeline", "End-to-end loop back-end over a dataset");
    std::string pipe_dataset, pipe_config, pipe_out;
    pipe->add_option("--dataset", pipe_dataset, "Dataset directory")->required();
    pipe->add_option("--config", pipe_config, "Flat key=value run config");
    pipe->add_option("--out", pipe_out, "Results directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (reg->parsed()) {
            if (reg_max_fitness >= 0.0) reg_params.max_fitness = reg_max_fitness;
            return cmd_register(reg_source, reg_target, reg_params);
        }
        if (frag->parsed()) {
            return cmd_fragments(frag_traj, frag_clouds, frag_k, frag_out, frag_leaf, frag_ke,
                                 frag_eps);
        }
        if (loops->parsed()) return cmd_loops(loops_frags, loops_graph, loop_params);
        if (verify->parsed()) {
            return cmd_verify(verify_graph, verify_frags, verify_mu, verify_lambda,
                              verify_reject, verify_refresh, verify_eps);
        }
        if (opt->parsed()) return cmd_optimize(opt_graph, opt_ba, opt_out, opt_lambda);
        if (cmap->parsed()) return cmd_correct_map(cm_map, cm_vis, cm_old, cm_new, cm_out);
        if (eval->parsed()) {
            if (eval_mode == "ate") {
                return cmd_evaluate_ate(eval_est, eval_truth, eval_no_align, eval_tol);
            }
            if (eval_mode == "surface") return cmd_evaluate_surface(eval_recon, eval_truth);
            if (eval_mode == "registration") {
                return cmd_evaluate_registration(eval_est, eval_truth, eval_frags, eval_rmse_max);
            }
            std::fprintf(stderr, "unknown mode '%s'\n", eval_mode.c_str());
            return 1;
        }
        if (synth->parsed()) return cmd_synth(synth_config, synth_out);
        if (pipe->parsed()) return cmd_pipeline(pipe_dataset, pipe_config, pipe_out);
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
