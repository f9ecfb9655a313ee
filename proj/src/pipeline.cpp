#include "loopkit/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <set>
#include <unordered_map>

#include "loopkit/errors.hpp"
#include "loopkit/metrics.hpp"
#include "loopkit/pose_graph.hpp"

namespace loopkit {

namespace {

double get_f(const std::map<std::string, std::string>& kv, const std::string& key, double dflt) {
    auto it = kv.find(key);
    return it == kv.end() ? dflt : std::stod(it->second);
}

std::int64_t get_i(const std::map<std::string, std::string>& kv, const std::string& key,
                   std::int64_t dflt) {
    auto it = kv.find(key);
    return it == kv.end() ? dflt : std::stoll(it->second);
}

double now_s() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

}  // namespace

PipelineConfig pipeline_config_from(const std::map<std::string, std::string>& kv) {
    PipelineConfig c;
    c.k = static_cast<int>(get_i(kv, "k", c.k));
    c.keyframe_every = static_cast<int>(get_i(kv, "keyframe_every", c.keyframe_every));
    c.registration.leaf = get_f(kv, "leaf", c.registration.leaf);
    c.registration.normal_radius = get_f(kv, "normal_radius", c.registration.normal_radius);
    c.registration.feature_radius = get_f(kv, "feature_radius", c.registration.feature_radius);
    c.registration.hypothesis_count = get_i(kv, "hypotheses", c.registration.hypothesis_count);
    c.registration.similarity_tau = get_f(kv, "similarity_tau", c.registration.similarity_tau);
    c.registration.d_max = get_f(kv, "dmax", c.registration.d_max);
    c.registration.min_inlier_ratio = get_f(kv, "min_inlier_ratio", c.registration.min_inlier_ratio);
    if (kv.count("max_fitness")) c.registration.max_fitness = get_f(kv, "max_fitness", 0.0);
    c.registration.normal_angle_max = get_f(kv, "normal_angle_max", c.registration.normal_angle_max);
    c.registration.seed = static_cast<std::uint64_t>(get_i(kv, "seed", 0));
    c.registration.threads = static_cast<int>(get_i(kv, "threads", c.registration.threads));
    c.mu_tau = get_f(kv, "mu_tau", c.mu_tau);
    c.lambda_odo = get_f(kv, "lambda", c.lambda_odo);
    c.reject_l = get_f(kv, "reject_l", c.reject_l);
    c.refresh_every = static_cast<int>(get_i(kv, "refresh_every", c.refresh_every));
    c.overlap.overlap_radius = get_f(kv, "overlap_radius", c.overlap.overlap_radius);
    c.overlap.min_overlap = get_f(kv, "min_overlap", c.overlap.min_overlap);
    c.epsilon = get_f(kv, "epsilon", c.epsilon);
    c.propose = get_i(kv, "propose", c.propose ? 1 : 0) != 0;
    c.evaluate = get_i(kv, "evaluate", c.evaluate ? 1 : 0) != 0;
    c.ba.huber_delta = get_f(kv, "huber_delta", c.ba.huber_delta);
    c.ba.max_iterations = static_cast<int>(get_i(kv, "ba_iterations", c.ba.max_iterations));
    return c;
}

PipelineInput load_dataset(const std::filesystem::path& dir) {
    PipelineInput input;
    auto odom = read_trajectory((dir / "odometry.txt").string());
    if (odom.empty()) throw MissingData("load_dataset: empty odometry " + dir.string());
    input.timestamps.reserve(odom.size());
    input.odometry.reserve(odom.size());
    for (const TimedPose& p : odom) {
        input.timestamps.push_back(p.timestamp);
        input.odometry.push_back(p.pose);
    }
    input.clouds.reserve(odom.size());
    for (std::size_t i = 0; i < odom.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "cloud_%06zu.ply", i);
        input.clouds.push_back(read_ply((dir / "clouds" / name).string()));
    }
    if (std::filesystem::exists(dir / "groundtruth.txt")) {
        input.truth = read_trajectory((dir / "groundtruth.txt").string());
    }
    if (std::filesystem::exists(dir / "ba.json")) {
        input.ba = read_ba_json((dir / "ba.json").string());
    }
    if (std::filesystem::exists(dir / "map.ply") && std::filesystem::exists(dir / "map_vis.txt")) {
        input.map = read_surfel_map((dir / "map.ply").string(), (dir / "map_vis.txt").string());
    }
    if (std::filesystem::exists(dir / "scene.ply")) {
        input.scene_points = read_ply((dir / "scene.ply").string());
    }
    if (std::filesystem::exists(dir / "dataset.cfg")) {
        auto kv = read_config((dir / "dataset.cfg").string());
        input.keyframe_every = static_cast<int>(get_i(kv, "keyframe_every", input.keyframe_every));
    }
    return input;
}

std::string PipelineReport::text() const {
    std::string out;
    char line[256];
    auto add_i = [&](const char* key, std::int64_t v) {
        std::snprintf(line, sizeof(line), "%s %lld\n", key, static_cast<long long>(v));
        out += line;
    };
    auto add_f = [&](const char* key, double v) {
        std::snprintf(line, sizeof(line), "%s %.17g\n", key, v);
        out += line;
    };
    add_i("frames", frames);
    add_i("fragments", fragments);
    add_i("keyframes", keyframes);
    add_i("proposals", proposals);
    add_i("registered", registered);
    add_i("accepted", accepted);
    add_i("rejected", rejected);
    add_i("refreshes", refreshes);
    add_i("ba_runs", ba_runs);
    add_i("corrected", corrected ? 1 : 0);
    for (std::size_t r = 0; r < loops.size(); ++r) {
        const LoopRecord& l = loops[r];
        std::snprintf(line, sizeof(line), "loop_%zu %d %d %.6f %d %.6f %.9g %.6f %d\n", r, l.i,
                      l.j, l.overlap, l.registered ? 1 : 0, l.inlier_ratio, l.fitness, l.weight,
                      l.accepted ? 1 : 0);
        out += line;
    }
    if (ate_odometry >= 0.0) add_f("ate_odometry", ate_odometry);
    if (ate_pipeline >= 0.0) add_f("ate_pipeline", ate_pipeline);
    if (surface_mean_before >= 0.0) {
        add_f("surface_mean_before", surface_mean_before);
        add_f("surface_median_before", surface_median_before);
        add_f("surface_mean_after", surface_mean_after);
        add_f("surface_median_after", surface_median_after);
    }
    for (const auto& [key, v] : timings) add_f(("timing_" + key).c_str(), v);
    return out;
}

namespace {

struct KeyframeTable {
    std::vector<int> ids;         // table index -> keyframe id
    std::vector<double> stamps;   // table index -> timestamp
    std::vector<int> frame_of;    // table index -> frame index
    std::vector<RigidTransform> poses;

    std::vector<Keyframe> as_keyframes() const {
        std::vector<Keyframe> out;
        out.reserve(ids.size());
        for (std::size_t i = 0; i < ids.size(); ++i) {
            out.push_back({ids[i], stamps[i], poses[i]});
        }
        return out;
    }
};

/// Keyframes come from the BA problem when present (its ids are the ones the
/// surfel map's visibility references); otherwise every keyframe_every-th
/// frame becomes a keyframe. Frames are matched by nearest timestamp.
KeyframeTable build_keyframe_table(const PipelineInput& input, int keyframe_every) {
    KeyframeTable t;
    if (input.ba) {
        for (const Keyframe& kf : input.ba->keyframes) {
            t.ids.push_back(kf.id);
            t.stamps.push_back(kf.timestamp);
            std::size_t best = 0;
            double best_dt = std::abs(input.timestamps[0] - kf.timestamp);
            for (std::size_t f = 1; f < input.timestamps.size(); ++f) {
                double dt = std::abs(input.timestamps[f] - kf.timestamp);
                if (dt < best_dt) {
                    best_dt = dt;
                    best = f;
                }
            }
            t.frame_of.push_back(static_cast<int>(best));
            t.poses.push_back(input.odometry[best]);
        }
    } else {
        int next_id = 0;
        for (std::size_t f = 0; f < input.odometry.size();
             f += static_cast<std::size_t>(keyframe_every)) {
            t.ids.push_back(next_id++);
            t.stamps.push_back(input.timestamps[f]);
            t.frame_of.push_back(static_cast<int>(f));
            t.poses.push_back(input.odometry[f]);
        }
    }
    return t;
}

struct EdgeStatus {
    static constexpr int kPending = 0;
    static constexpr int kAccepted = 1;
    static constexpr int kRejected = 2;
};

}  // namespace

PipelineResult run_pipeline(const PipelineInput& input, const PipelineConfig& config) {
    const std::size_t n = input.odometry.size();
    if (n == 0 || input.timestamps.size() != n || input.clouds.size() != n) {
        throw MissingData("run_pipeline: timestamps, odometry, and clouds must align");
    }

    PipelineResult result;
    PipelineReport& report = result.report;
    report.frames = static_cast<int>(n);
    double t_start = now_s();
    double t_register = 0.0, t_verify = 0.0, t_optimize = 0.0, t_ba = 0.0, t_map = 0.0;

    KeyframeTable kfs = build_keyframe_table(input, input.keyframe_every);
    report.keyframes = static_cast<int>(kfs.ids.size());
    std::unordered_map<int, std::size_t> kf_index;
    for (std::size_t i = 0; i < kfs.ids.size(); ++i) kf_index[kfs.ids[i]] = i;

    double t0 = now_s();
    std::vector<FrameData> frames;
    frames.reserve(n);
    for (std::size_t f = 0; f < n; ++f) {
        frames.push_back({static_cast<int>(f), input.timestamps[f], input.odometry[f],
                          input.clouds[f]});
    }
    std::vector<Keyframe> anchor_candidates = kfs.as_keyframes();
    std::vector<Fragment> fragments =
        make_fragments(frames, anchor_candidates, config.k, config.registration.leaf);
    const int total_fragments = static_cast<int>(fragments.size());
    report.fragments = total_fragments;
    report.timings.emplace_back("fragments", now_s() - t0);

    // built_pose: each fragment's anchor pose at build time; the graph pose of
    // fragment f at any later moment composes with its inverse to carry any
    // frame of that fragment.
    std::vector<RigidTransform> built_pose;
    std::vector<PointCloud> frag_clouds;
    for (const Fragment& f : fragments) {
        built_pose.push_back(f.pose);
        frag_clouds.push_back(f.cloud);
    }

    PoseGraph master;
    std::vector<int> status;           // per master loop edge
    std::vector<std::size_t> record_of;  // master loop edge -> report record
    std::set<std::pair<int, int>> attempted;
    int last_refresh = 0;
    bool corrected_any = false;
    SurfelMap map = input.map ? *input.map : SurfelMap{};

    // Keyframe-chain odometry informations are computed at the odometry
    // placement (measurements never move), so they are cached on first use.
    std::vector<std::optional<EdgeInfo>> kf_chain_info(
        kfs.ids.size() > 0 ? kfs.ids.size() - 1 : 0);
    auto chain_info = [&](std::size_t a) -> EdgeInfo {
        if (!kf_chain_info[a]) {
            const std::size_t fa = static_cast<std::size_t>(kfs.frame_of[a]);
            const std::size_t fb = static_cast<std::size_t>(kfs.frame_of[a + 1]);
            try {
                kf_chain_info[a] = edge_info(input.clouds[fa], input.clouds[fb],
                                             input.odometry[fa], input.odometry[fb],
                                             config.epsilon);
            } catch (const NoCorrespondences&) {
                EdgeInfo weak;  // keeps the chain constrained when views share nothing
                weak.info = Mat6::Identity() * 100.0;
                weak.pair_count = 100;
                kf_chain_info[a] = weak;
            }
        }
        return *kf_chain_info[a];
    };

    for (int f = 0; f < total_fragments; ++f) {
        master.poses.push_back(built_pose[static_cast<std::size_t>(f)]);
        if (f > 0) {
            RigidTransform rel = compose(inverse(built_pose[static_cast<std::size_t>(f - 1)]),
                                         built_pose[static_cast<std::size_t>(f)]);
            EdgeInfo info;
            try {
                info = edge_info(frag_clouds[static_cast<std::size_t>(f - 1)],
                                 frag_clouds[static_cast<std::size_t>(f)],
                                 built_pose[static_cast<std::size_t>(f - 1)],
                                 built_pose[static_cast<std::size_t>(f)], config.epsilon);
            } catch (const NoCorrespondences&) {
            }
            master.odometry.push_back({f - 1, f, rel, info});
        }
        if (!config.propose) continue;

        // --- Proposal + registration for the newly completed fragment. ---
        std::size_t built = static_cast<std::size_t>(f) + 1;
        std::vector<LoopProposal> proposals;
        if (f >= 2) {
            PoseGraph view;
            view.poses = master.poses;
            view.loops = master.loops;
            proposals = propose_loops(std::span<const Fragment>(fragments.data(), built), view,
                                      config.overlap);
        }
        bool added_edges = false;
        for (const LoopProposal& prop : proposals) {
            int later = prop.i, earlier = prop.j;
            if (!attempted.insert({earlier, later}).second) continue;
            report.proposals += 1;

            LoopRecord rec;
            rec.i = earlier;
            rec.j = later;
            rec.overlap = prop.overlap;

            double tr0 = now_s();
            std::optional<RegistrationResult> reg;
            try {
                reg = register_global(frag_clouds[static_cast<std::size_t>(later)],
                                      frag_clouds[static_cast<std::size_t>(earlier)],
                                      config.registration);
            } catch (const Error&) {
                // A degenerate candidate is a failed registration, not a crash.
            }
            t_register += now_s() - tr0;

            if (!reg) {
                report.loops.push_back(rec);
                continue;
            }
            rec.registered = true;
            rec.inlier_ratio = reg->inlier_ratio;
            rec.fitness = reg->fitness;
            report.registered += 1;

            // rel maps the later fragment into the earlier one; the edge info
            // is linearized at the measurement-consistent placement.
            RigidTransform rel = reg->transform;
            EdgeInfo info;
            try {
                RigidTransform t_i = master.poses[static_cast<std::size_t>(earlier)];
                info = edge_info(frag_clouds[static_cast<std::size_t>(earlier)],
                                 frag_clouds[static_cast<std::size_t>(later)], t_i,
                                 compose(t_i, rel), config.epsilon);
            } catch (const NoCorrespondences&) {
            }
            master.loops.push_back({earlier, later, rel, info, 1.0});
            status.push_back(EdgeStatus::kPending);
            record_of.push_back(report.loops.size());
            report.loops.push_back(rec);
            added_edges = true;
        }

        // --- Verification round (line process over the fragment graph). ---
        bool refresh_due = config.propose && static_cast<int>(built) - last_refresh >=
                                                 config.refresh_every;
        if ((added_edges || refresh_due) && master.poses.size() >= 2) {
            double tv0 = now_s();
            PoseGraph sub;
            sub.poses = master.poses;
            sub.odometry = master.odometry;
            sub.last_refresh_count = last_refresh;
            std::vector<std::size_t> sub_to_master;
            for (std::size_t e = 0; e < master.loops.size(); ++e) {
                if (status[e] == EdgeStatus::kRejected && !refresh_due) continue;
                sub_to_master.push_back(e);
                sub.loops.push_back(master.loops[e]);
            }
            if (refresh_info(sub, std::span<const PointCloud>(frag_clouds.data(), built),
                             config.epsilon, config.refresh_every)) {
                report.refreshes += 1;
                last_refresh = sub.last_refresh_count;
                master.odometry = sub.odometry;
                for (std::size_t s = 0; s < sub_to_master.size(); ++s) {
                    master.loops[sub_to_master[s]].info = sub.loops[s].info;
                    if (status[sub_to_master[s]] == EdgeStatus::kRejected) {
                        status[sub_to_master[s]] = EdgeStatus::kPending;
                    }
                }
            }

            int newly_accepted = 0;
            bool poses_changed = false;
            if (!sub.loops.empty()) {
                LineProcessOptions lp;
                lp.lambda_odo = config.lambda_odo;
                lp.mu_tau = config.mu_tau;
                lp.reject_threshold = config.reject_l;
                LineProcessResult res = optimize_line_process(sub, lp);
                for (std::size_t p = 0; p < master.poses.size(); ++p) {
                    if (!(master.poses[p].rotation.array() == sub.poses[p].rotation.array())
                             .all() ||
                        !(master.poses[p].translation.array() ==
                          sub.poses[p].translation.array())
                             .all()) {
                        poses_changed = true;
                        break;
                    }
                }
                std::vector<RigidTransform> pre = master.poses;
                master.poses = sub.poses;
                for (std::size_t s = 0; s < sub_to_master.size(); ++s) {
                    std::size_t m = sub_to_master[s];
                    master.loops[m].weight = sub.loops[s].weight;
                    LoopRecord& rec = report.loops[record_of[m]];
                    rec.weight = sub.loops[s].weight;
                    if (res.accepted[s]) {
                        if (status[m] != EdgeStatus::kAccepted) {
                            status[m] = EdgeStatus::kAccepted;
                            newly_accepted += 1;
                        }
                        rec.accepted = true;
                    } else if (status[m] != EdgeStatus::kAccepted) {
                        // Once rejected, an edge sits out until a refresh
                        // recomputes its information.
                        status[m] = EdgeStatus::kRejected;
                        master.loops[m].weight = 0.0;
                        rec.accepted = false;
                    }
                }

                std::vector<Keyframe> kf_before = kfs.as_keyframes();
                if (poses_changed) {
                    // Carry every keyframe of an already-built fragment by its
                    // fragment's correction this round.
                    for (std::size_t ki = 0; ki < kfs.ids.size(); ++ki) {
                        std::size_t frag = static_cast<std::size_t>(kfs.frame_of[ki]) /
                                           static_cast<std::size_t>(config.k);
                        if (frag >= built) continue;
                        kfs.poses[ki] = compose(master.poses[frag],
                                                compose(inverse(pre[frag]), kfs.poses[ki]));
                    }
                }
                t_verify += now_s() - tv0;

                if (newly_accepted > 0) {
                    corrected_any = true;
                    // --- Keyframe pose graph with the accepted loops. ---
                    double to0 = now_s();
                    PoseGraph kf_graph;
                    kf_graph.poses = kfs.poses;
                    for (std::size_t a = 0; a + 1 < kfs.ids.size(); ++a) {
                        std::size_t fa = static_cast<std::size_t>(kfs.frame_of[a]);
                        std::size_t fb = static_cast<std::size_t>(kfs.frame_of[a + 1]);
                        RigidTransform rel =
                            compose(inverse(input.odometry[fa]), input.odometry[fb]);
                        kf_graph.odometry.push_back({static_cast<int>(a),
                                                     static_cast<int>(a + 1), rel,
                                                     chain_info(a)});
                    }
                    for (std::size_t m = 0; m < master.loops.size(); ++m) {
                        if (status[m] != EdgeStatus::kAccepted) continue;
                        const LoopEdge& e = master.loops[m];
                        auto ai = kf_index.at(
                            fragments[static_cast<std::size_t>(e.i)].anchor_keyframe);
                        auto aj = kf_index.at(
                            fragments[static_cast<std::size_t>(e.j)].anchor_keyframe);
                        if (ai == aj) continue;
                        double w = e.weight > 0.0 ? e.weight : config.reject_l;
                        kf_graph.loops.push_back({static_cast<int>(ai), static_cast<int>(aj),
                                                  e.rel, e.info, w});
                    }
                    SolveOptions so;
                    so.lambda_odo = config.lambda_odo;
                    pose_graph_optimize(kf_graph, so);
                    kfs.poses = kf_graph.poses;
                    t_optimize += now_s() - to0;

                    // --- Bundle adjustment at the refreshed keyframes. ---
                    if (input.ba && !input.ba->observations.empty()) {
                        double tb0 = now_s();
                        std::vector<Keyframe> ba_kfs = kfs.as_keyframes();
                        std::unordered_map<int, RigidTransform> input_pose;
                        for (const Keyframe& kf : input.ba->keyframes) {
                            input_pose[kf.id] = kf.pose;
                        }
                        std::unordered_map<int, int> first_observer;
                        for (const Observation& ob : input.ba->observations) {
                            first_observer.emplace(ob.landmark_id, ob.keyframe_id);
                        }
                        // Landmarks ride their first observer's correction so
                        // the problem stays consistent with the new poses.
                        std::vector<Landmark> landmarks = input.ba->landmarks;
                        for (Landmark& lm : landmarks) {
                            int kf_id = first_observer.at(lm.id);
                            RigidTransform carry =
                                compose(kfs.poses[kf_index.at(kf_id)],
                                        inverse(input_pose.at(kf_id)));
                            lm.position = carry * lm.position;
                        }
                        bundle_adjust(ba_kfs, landmarks, input.ba->observations,
                                      input.ba->intrinsics, config.ba);
                        for (std::size_t ki = 0; ki < ba_kfs.size(); ++ki) {
                            kfs.poses[kf_index.at(ba_kfs[ki].id)] = ba_kfs[ki].pose;
                        }
                        report.ba_runs += 1;
                        t_ba += now_s() - tb0;
                    }

                    // Anchor keyframes feed the refined poses back into the
                    // fragment graph for the next round's proposals.
                    for (std::size_t frag = 0; frag < built; ++frag) {
                        master.poses[frag] =
                            kfs.poses[kf_index.at(fragments[frag].anchor_keyframe)];
                    }
                }

                // The map follows pose updates only once a loop has been
                // accepted; pure rejection rounds leave it untouched.
                if (input.map && corrected_any && (poses_changed || newly_accepted > 0)) {
                    double tm0 = now_s();
                    std::vector<Keyframe> kf_after = kfs.as_keyframes();
                    map = correct_surfels(map, kf_before, kf_after);
                    t_map += now_s() - tm0;
                }
            } else {
                t_verify += now_s() - tv0;
            }
        }
    }

    report.accepted = static_cast<int>(std::count(status.begin(), status.end(),
                                                  EdgeStatus::kAccepted));
    report.rejected = static_cast<int>(status.size()) - report.accepted;
    report.corrected = corrected_any;

    // --- Outputs. ---
    result.trajectory.reserve(n);
    if (!corrected_any) {
        // Exact passthrough: without a single accepted loop the back-end has
        // no evidence against the input odometry, which is returned verbatim.
        for (std::size_t t = 0; t < n; ++t) {
            result.trajectory.push_back({input.timestamps[t], input.odometry[t]});
        }
    } else {
        for (std::size_t t = 0; t < n; ++t) {
            std::size_t best = 0;
            int best_d = std::abs(kfs.frame_of[0] - static_cast<int>(t));
            for (std::size_t ki = 1; ki < kfs.ids.size(); ++ki) {
                int d = std::abs(kfs.frame_of[ki] - static_cast<int>(t));
                if (d < best_d) {
                    best_d = d;
                    best = ki;
                }
            }
            RigidTransform carry = compose(
                kfs.poses[best],
                inverse(input.odometry[static_cast<std::size_t>(kfs.frame_of[best])]));
            result.trajectory.push_back({input.timestamps[t], compose(carry, input.odometry[t])});
        }
    }
    result.map = std::move(map);

    for (std::size_t m = 0; m < master.loops.size(); ++m) {
        if (status[m] != EdgeStatus::kAccepted) continue;
        const LoopEdge& e = master.loops[m];
        result.loop_log.push_back({e.i, e.j, total_fragments, e.rel.matrix()});
    }

    if (config.evaluate && input.truth.size() >= 3) {
        std::vector<TimedPose> odom;
        odom.reserve(n);
        for (std::size_t t = 0; t < n; ++t) odom.push_back({input.timestamps[t], input.odometry[t]});
        report.ate_odometry = eval_ate_rmse(odom, input.truth);
        report.ate_pipeline = eval_ate_rmse(result.trajectory, input.truth);
        if (input.map && !input.scene_points.empty() && !input.map->surfels.empty()) {
            auto cloud_of = [](const SurfelMap& sm) {
                PointCloud c;
                c.positions.reserve(sm.surfels.size());
                for (const Surfel& s : sm.surfels) c.positions.push_back(s.position);
                return c;
            };
            SurfaceError before = eval_surface(cloud_of(*input.map), input.scene_points);
            SurfaceError after = eval_surface(cloud_of(result.map), input.scene_points);
            report.surface_mean_before = before.mean;
            report.surface_median_before = before.median;
            report.surface_mean_after = after.mean;
            report.surface_median_after = after.median;
        }
    }

    report.timings.emplace_back("register", t_register);
    report.timings.emplace_back("verify", t_verify);
    report.timings.emplace_back("optimize", t_optimize);
    report.timings.emplace_back("ba", t_ba);
    report.timings.emplace_back("map_correct", t_map);
    report.timings.emplace_back("total", now_s() - t_start);
    return result;
}

}  // namespace loopkit
