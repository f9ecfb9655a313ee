#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "loopkit/errors.hpp"
#include "loopkit/pipeline.hpp"
#include "loopkit/synth.hpp"
#include "support/helpers.hpp"

using namespace loopkit;
using testing::TempDir;

namespace {

PipelineInput input_of(const SynthDataset& d) {
    PipelineInput in;
    in.timestamps = d.timestamps;
    in.odometry = d.odometry;
    in.clouds = d.clouds;
    for (std::size_t i = 0; i < d.truth.size(); ++i) {
        in.truth.push_back({d.timestamps[i], d.truth[i]});
    }
    in.ba = d.ba;
    in.map = d.map;
    in.scene_points = d.scene_points;
    in.keyframe_every = d.config.keyframe_every;
    return in;
}

/// A short, loop-free sequence that renders in well under a second.
const SynthDataset& small_dataset() {
    static SynthDataset d = [] {
        SynthConfig c;
        c.seed = 3;
        c.frames = 12;
        c.keyframe_every = 4;
        c.stride = 8;
        c.boxes = 3;
        c.landmark_attempts = 60;
        c.scene_density = 150.0;
        return synth_scene(c);
    }();
    return d;
}

/// A drifted orbit whose last quarter revisits the first, plus the pipeline
/// run over it (shared across the test cases below, computed once).
struct DriftedRun {
    SynthDataset data;
    PipelineConfig config;
    PipelineResult result;
};

const DriftedRun& drifted_run() {
    static DriftedRun r = [] {
        DriftedRun run;
        SynthConfig c;
        c.seed = 5;
        c.frames = 75;
        c.keyframe_every = 5;
        c.orbits = 1.25;        // the last quarter orbit retraces the first
        c.noise = 0.003;
        c.drift_yaw = 0.004;    // ~0.3 rad accumulated over the orbit
        c.drift_trans = 0.002;  // ~0.15 m accumulated
        c.boxes = 5;
        c.landmark_attempts = 200;
        c.scene_density = 300.0;
        run.data = synth_scene(c);

        run.config.k = 15;  // 5 fragments over the orbit
        run.config.registration.hypothesis_count = 150'000;
        run.config.registration.seed = 9;
        run.config.overlap.min_overlap = 0.15;
        run.config.overlap.overlap_radius = 0.25;  // drifted revisit sits ~0.3 m off
        run.result = run_pipeline(input_of(run.data), run.config);
        return run;
    }();
    return r;
}

}  // namespace

TEST_CASE("pipeline config parses known keys and ignores unknown ones") {
    PipelineConfig c = pipeline_config_from({{"k", "25"},
                                             {"hypotheses", "5000"},
                                             {"dmax", "0.1"},
                                             {"propose", "0"},
                                             {"mu_tau", "0.4"},
                                             {"max_fitness", "0.003"},
                                             {"frames", "90"}});  // dataset key: ignored
    CHECK(c.k == 25);
    CHECK(c.registration.hypothesis_count == 5000);
    CHECK(c.registration.d_max == 0.1);
    CHECK(c.registration.max_fitness.has_value());
    CHECK(*c.registration.max_fitness == 0.003);
    CHECK(c.mu_tau == 0.4);
    CHECK(!c.propose);
    CHECK(c.keyframe_every == 5);  // untouched default

    PipelineConfig d = pipeline_config_from({});
    CHECK(!d.registration.max_fitness.has_value());
    CHECK(d.propose);
}

TEST_CASE("synthetic dataset round trips through its on-disk layout") {
    const SynthDataset& d = small_dataset();
    TempDir dir("pipeline_dataset");
    write_dataset(d, dir.path());
    PipelineInput in = load_dataset(dir.path());

    REQUIRE(in.timestamps.size() == d.timestamps.size());
    REQUIRE(in.odometry.size() == d.odometry.size());
    REQUIRE(in.clouds.size() == d.clouds.size());
    for (std::size_t i = 0; i < d.timestamps.size(); ++i) {
        CHECK(in.timestamps[i] == d.timestamps[i]);  // exact text round trip
        CHECK(in.odometry[i].translation == d.odometry[i].translation);
        CHECK((in.odometry[i].rotation - d.odometry[i].rotation).cwiseAbs().maxCoeff() < 1e-14);
        REQUIRE(in.clouds[i].size() == d.clouds[i].size());
        CHECK(in.clouds[i].has_normals());
        // Cloud files hold float32: compare at that precision.
        for (std::size_t p = 0; p < d.clouds[i].size(); p += 17) {
            CHECK(in.clouds[i].positions[p].cast<float>() ==
                  d.clouds[i].positions[p].cast<float>());
        }
    }

    REQUIRE(in.truth.size() == d.truth.size());
    CHECK(in.truth[3].pose.translation == d.truth[3].translation);

    REQUIRE(in.ba.has_value());
    CHECK(in.ba->intrinsics.fx == d.ba.intrinsics.fx);
    REQUIRE(in.ba->keyframes.size() == d.ba.keyframes.size());
    REQUIRE(in.ba->landmarks.size() == d.ba.landmarks.size());
    REQUIRE(in.ba->observations.size() == d.ba.observations.size());
    for (std::size_t i = 0; i < d.ba.observations.size(); ++i) {
        CHECK(in.ba->observations[i].pixel == d.ba.observations[i].pixel);  // json: exact
        CHECK(in.ba->observations[i].keyframe_id == d.ba.observations[i].keyframe_id);
        CHECK(in.ba->observations[i].landmark_id == d.ba.observations[i].landmark_id);
    }
    for (std::size_t i = 0; i < d.ba.landmarks.size(); ++i) {
        CHECK(in.ba->landmarks[i].position == d.ba.landmarks[i].position);
    }

    REQUIRE(in.map.has_value());
    REQUIRE(in.map->size() == d.map.size());
    for (std::size_t i = 0; i < d.map.size(); i += 23) {
        CHECK(in.map->surfels[i].position.cast<float>() == d.map.surfels[i].position.cast<float>());
        CHECK(in.map->visibility[i] == d.map.visibility[i]);
    }
    CHECK(in.scene_points.size() == d.scene_points.size());
    CHECK(in.keyframe_every == d.config.keyframe_every);

    CHECK_THROWS_AS(load_dataset(dir.path() / "missing"), ParseError);
}

TEST_CASE("identical seeds reproduce the dataset bitwise") {
    const SynthDataset& a = small_dataset();
    SynthDataset b = synth_scene(a.config);
    REQUIRE(b.clouds.size() == a.clouds.size());
    for (std::size_t i = 0; i < a.clouds.size(); ++i) {
        REQUIRE(b.clouds[i].size() == a.clouds[i].size());
        for (std::size_t p = 0; p < a.clouds[i].size(); ++p) {
            CHECK(b.clouds[i].positions[p] == a.clouds[i].positions[p]);
        }
    }
    for (std::size_t i = 0; i < a.odometry.size(); ++i) {
        CHECK(b.odometry[i].matrix() == a.odometry[i].matrix());
    }
    REQUIRE(b.map.size() == a.map.size());
    CHECK(b.ba.observations.size() == a.ba.observations.size());
}

TEST_CASE("pipeline with proposals disabled returns the odometry byte for byte") {
    PipelineInput in = input_of(small_dataset());
    PipelineConfig config;
    config.propose = false;

    PipelineResult res = run_pipeline(in, config);
    REQUIRE(res.trajectory.size() == in.odometry.size());
    for (std::size_t i = 0; i < in.odometry.size(); ++i) {
        CHECK(res.trajectory[i].timestamp == in.timestamps[i]);
        CHECK(res.trajectory[i].pose.translation == in.odometry[i].translation);
        CHECK((res.trajectory[i].pose.rotation.array() == in.odometry[i].rotation.array()).all());
    }
    CHECK(!res.report.corrected);
    CHECK(res.report.accepted == 0);
    CHECK(res.report.proposals == 0);
    CHECK(res.loop_log.empty());

    // The map passes through untouched as well.
    REQUIRE(res.map.size() == in.map->size());
    for (std::size_t i = 0; i < res.map.size(); ++i) {
        CHECK((res.map.surfels[i].position.array() == in.map->surfels[i].position.array()).all());
    }

    // Truth was present, so both trajectory metrics exist and agree exactly.
    CHECK(res.report.ate_odometry >= 0.0);
    CHECK(res.report.ate_pipeline == res.report.ate_odometry);
}

TEST_CASE("pipeline closes loops on a drifted orbit and reduces trajectory error") {
    const DriftedRun& run = drifted_run();
    const PipelineReport& report = run.result.report;

    CHECK(report.frames == 75);
    CHECK(report.fragments == 5);
    CHECK(report.proposals >= 1);
    CHECK(report.accepted >= 1);
    CHECK(report.corrected);

    REQUIRE(report.ate_odometry > 0.0);
    REQUIRE(report.ate_pipeline >= 0.0);
    CHECK(report.ate_pipeline < report.ate_odometry);

    // The corrected map should not be farther from the truth surface than
    // the drifted input map.
    REQUIRE(report.surface_mean_before > 0.0);
    CHECK(report.surface_mean_after < report.surface_mean_before);

    REQUIRE(run.result.trajectory.size() == 75);
    for (std::size_t i = 0; i < run.result.trajectory.size(); ++i) {
        CHECK(run.result.trajectory[i].timestamp == run.data.timestamps[i]);
    }

    // The loop log lists exactly the accepted loops, earlier index first,
    // with the run's fragment count on every record.
    REQUIRE(static_cast<int>(run.result.loop_log.size()) == report.accepted);
    for (const LogEntry& e : run.result.loop_log) {
        CHECK(e.i < e.j);
        CHECK(e.i >= 0);
        CHECK(e.j < report.fragments);
        CHECK(e.n == report.fragments);
    }

    // Report records agree with the counters.
    int registered = 0, accepted = 0;
    for (const LoopRecord& rec : report.loops) {
        registered += rec.registered ? 1 : 0;
        accepted += rec.accepted ? 1 : 0;
        CHECK(rec.i < rec.j);
        if (rec.accepted) CHECK(rec.weight >= run.config.reject_l);
    }
    CHECK(registered == report.registered);
    CHECK(accepted == report.accepted);
    CHECK(report.proposals == static_cast<int>(report.loops.size()));
}

TEST_CASE("pipeline output is deterministic apart from the timing block") {
    const DriftedRun& run = drifted_run();
    PipelineResult again = run_pipeline(input_of(run.data), run.config);

    auto strip_timings = [](const std::string& text) {
        std::istringstream in(text);
        std::string line, out;
        while (std::getline(in, line)) {
            if (line.rfind("timing_", 0) != 0) out += line + "\n";
        }
        return out;
    };
    CHECK(strip_timings(again.report.text()) == strip_timings(run.result.report.text()));

    REQUIRE(again.trajectory.size() == run.result.trajectory.size());
    for (std::size_t i = 0; i < again.trajectory.size(); ++i) {
        CHECK((again.trajectory[i].pose.matrix().array() ==
               run.result.trajectory[i].pose.matrix().array())
                  .all());
    }
    REQUIRE(again.map.size() == run.result.map.size());
    for (std::size_t i = 0; i < again.map.size(); i += 31) {
        CHECK((again.map.surfels[i].position.array() ==
               run.result.map.surfels[i].position.array())
                  .all());
    }
    REQUIRE(again.loop_log.size() == run.result.loop_log.size());
    for (std::size_t i = 0; i < again.loop_log.size(); ++i) {
        CHECK(again.loop_log[i].transform == run.result.loop_log[i].transform);
    }
}
