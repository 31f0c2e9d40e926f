#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <map>
#include <set>
#include <utility>
#include <vector>

#include "posetrack/graph.hpp"
#include "posetrack/ilp.hpp"
#include "posetrack/potentials.hpp"
#include "posetrack/solver.hpp"
#include "posetrack/tracker.hpp"

#include "helpers.hpp"

using namespace posetrack;
using testutil::det;

namespace {

std::map<int, Detection> index_by_id(const std::vector<Detection>& dets) {
    std::map<int, Detection> out;
    for (const Detection& d : dets) out.emplace(d.id, d);
    return out;
}

struct Scene {
    std::vector<Detection> dets;
    CorrespondenceSet corr;
    LogisticModel temporal;
    SpatialParams spatial;
};

// Two static persons 1000px apart, two joint types each, one detection per
// joint per frame. The temporal model reads only the point-match ratio and the
// spatial model only the normalized distance, so same-person edges get
// attractive costs and cross-person edges repulsive ones.
Scene two_person_scene(int frames, int tau) {
    Scene s;
    const Vec2 joints[2][2] = {{{100.0, 100.0}, {100.0, 130.0}},
                               {{1100.0, 100.0}, {1100.0, 130.0}}};
    int id = 0;
    for (int f = 0; f < frames; ++f)
        for (int person = 0; person < 2; ++person)
            for (int joint = 0; joint < 2; ++joint)
                s.dets.push_back(det(id++, f, joint, joints[person][joint].x,
                                     joints[person][joint].y, 0.75));

    std::vector<Vec2> points;
    for (int person = 0; person < 2; ++person)
        for (int joint = 0; joint < 2; ++joint) points.push_back(joints[person][joint]);
    for (int f = 0; f < frames; ++f)
        for (int gap = 1; gap <= tau && f + gap < frames; ++gap)
            s.corr.add(Correspondence{f, f + gap, points, points});

    s.temporal.weights = {4.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0};
    s.temporal.bias = -2.0;

    LogisticModel spatial_model;
    spatial_model.weights = {0.0, 0.0, -3.5, 0.0};
    spatial_model.bias = 3.5;
    s.spatial.model = spatial_model;
    s.spatial.joint_count = 2;
    return s;
}

TrackerConfig scene_config(int tau, int batch_size) {
    TrackerConfig cfg;
    cfg.tau = tau;
    cfg.batch_size = batch_size;
    cfg.min_frames = 7;
    cfg.min_avg_nodes = 2.0;
    return cfg;
}

// One-shot reference pipeline: solve the whole sequence as a single instance,
// then decode, filter, order, and merge exactly as the tracker specifies.
PoseTracks one_shot(const Scene& s, const TrackerConfig& cfg) {
    const std::vector<Detection> dets = nms(s.dets, cfg.nms_iou);
    const std::map<int, Detection> by_id = index_by_id(dets);
    const SpatioTemporalGraph g = build_graph(dets, cfg.tau);
    const PotentialTable pot = build_potentials(g, s.corr, s.temporal, s.spatial);
    const IlpInstance inst = build_instance(g, pot, {}, cfg.families);
    const Assignment a = solve(inst, cfg.solver);
    const std::vector<Partition> parts = extract_partitions(g, a);
    std::vector<Partition> kept = filter_partitions(parts, by_id, cfg);

    const auto first_frame = [&](const Partition& p) {
        int lo = by_id.at(p.members.front()).frame;
        for (int m : p.members) lo = std::min(lo, by_id.at(m).frame);
        return lo;
    };
    std::sort(kept.begin(), kept.end(), [&](const Partition& x, const Partition& y) {
        return std::pair(first_frame(x), x.members.front()) <
               std::pair(first_frame(y), y.members.front());
    });
    PoseTracks out;
    int next_id = 0;
    for (const Partition& p : kept)
        out.tracks.push_back(Track{next_id++, merge_duplicates(p, by_id)});
    return out;
}

}  // namespace

TEST_CASE("tracker configuration validation") {
    CHECK_NOTHROW(validate(TrackerConfig{}));
    TrackerConfig cfg;
    cfg.batch_size = 0;
    CHECK_THROWS_AS(validate(cfg), std::invalid_argument);
    cfg = TrackerConfig{};
    cfg.tau = 0;
    CHECK_THROWS_AS(validate(cfg), std::invalid_argument);
    cfg = TrackerConfig{};
    cfg.min_frames = 0;
    CHECK_THROWS_AS(validate(cfg), std::invalid_argument);
    cfg = TrackerConfig{};
    cfg.min_avg_nodes = -0.5;
    CHECK_THROWS_AS(validate(cfg), std::invalid_argument);
    cfg = TrackerConfig{};
    cfg.nms_iou = 1.5;
    CHECK_THROWS_AS(validate(cfg), std::invalid_argument);
    cfg.nms_iou = -0.1;
    CHECK_THROWS_AS(validate(cfg), std::invalid_argument);
}

TEST_CASE("extract_partitions decodes connected components of active variables") {
    // Two same-type detections one frame apart: vars are [node0, node1, t(0,1)].
    const std::vector<Detection> pair_dets{det(0, 0, 0, 0.0, 0.0), det(1, 1, 0, 0.0, 0.0)};
    const SpatioTemporalGraph g = build_graph(pair_dets, 1);
    REQUIRE(g.temporal_edges.size() == 1);

    SECTION("all zeros yields no partitions") {
        Assignment a;
        a.values = {0, 0, 0};
        CHECK(extract_partitions(g, a).empty());
    }
    SECTION("an active edge joins its endpoints") {
        Assignment a;
        a.values = {1, 1, 1};
        const auto parts = extract_partitions(g, a);
        REQUIRE(parts.size() == 1);
        CHECK(parts[0].members == std::vector<int>{0, 1});
    }
    SECTION("active nodes without an edge stay separate, ordered by smallest id") {
        Assignment a;
        a.values = {1, 1, 0};
        const auto parts = extract_partitions(g, a);
        REQUIRE(parts.size() == 2);
        CHECK(parts[0].members == std::vector<int>{0});
        CHECK(parts[1].members == std::vector<int>{1});
    }
    SECTION("inactive nodes are excluded") {
        Assignment a;
        a.values = {1, 0, 0};
        const auto parts = extract_partitions(g, a);
        REQUIRE(parts.size() == 1);
        CHECK(parts[0].members == std::vector<int>{0});
    }
    SECTION("assignment size must match the variable count") {
        Assignment a;
        a.values = {1, 1};
        CHECK_THROWS_AS(extract_partitions(g, a), std::invalid_argument);
    }
}

TEST_CASE("merge_duplicates collapses same-frame same-type members") {
    SECTION("score-weighted mean is exact for exactly representable weights") {
        const auto by_id = index_by_id(
            {det(0, 0, 0, 0.0, 0.0, 0.6), det(1, 0, 0, 10.0, 0.0, 0.4)});
        const auto entries = merge_duplicates(Partition{{0, 1}}, by_id);
        REQUIRE(entries.size() == 1);
        CHECK(entries[0].frame == 0);
        CHECK(entries[0].joint.id == 0);
        CHECK(entries[0].pos.x == 4.0);
        CHECK(entries[0].pos.y == 0.0);
        CHECK(entries[0].score == 0.6);
    }
    SECTION("equal scores average positions exactly") {
        const auto by_id = index_by_id(
            {det(0, 0, 0, 0.0, 0.0, 0.8), det(1, 0, 0, 2.0, 2.0, 0.8)});
        const auto entries = merge_duplicates(Partition{{0, 1}}, by_id);
        REQUIRE(entries.size() == 1);
        CHECK(entries[0].pos.x == 1.0);
        CHECK(entries[0].pos.y == 1.0);
        CHECK(entries[0].score == 0.8);
    }
    SECTION("a singleton member passes through unchanged") {
        const auto by_id = index_by_id({det(3, 5, 2, 3.7, -2.25, 0.5)});
        const auto entries = merge_duplicates(Partition{{3}}, by_id);
        REQUIRE(entries.size() == 1);
        CHECK(entries[0] == TrackEntry{5, JointType{2}, Vec2{3.7, -2.25}, 0.5});
    }
    SECTION("entries come back sorted by frame then joint type") {
        const auto by_id = index_by_id({det(0, 1, 1, 1.0, 0.0), det(1, 0, 2, 2.0, 0.0),
                                        det(2, 0, 0, 3.0, 0.0)});
        const auto entries = merge_duplicates(Partition{{0, 1, 2}}, by_id);
        REQUIRE(entries.size() == 3);
        CHECK(entries[0].frame == 0);
        CHECK(entries[0].joint.id == 0);
        CHECK(entries[1].frame == 0);
        CHECK(entries[1].joint.id == 2);
        CHECK(entries[2].frame == 1);
        CHECK(entries[2].joint.id == 1);
    }
    SECTION("unknown members are an error") {
        const auto by_id = index_by_id({det(0, 0, 0, 0.0, 0.0)});
        CHECK_THROWS_AS(merge_duplicates(Partition{{0, 42}}, by_id), std::invalid_argument);
    }
}

TEST_CASE("filter_partitions applies inclusive span and density thresholds") {
    std::vector<Detection> dets;
    for (int f = 0; f < 10; ++f) dets.push_back(det(f, f, 0, 0.0, 0.0));
    dets.push_back(det(100, 0, 1, 0.0, 0.0));
    dets.push_back(det(101, 1, 1, 0.0, 0.0));
    const auto by_id = index_by_id(dets);

    SECTION("frame span below min_frames is dropped, at min_frames kept") {
        TrackerConfig cfg;
        cfg.min_frames = 7;
        cfg.min_avg_nodes = 1.0;
        const Partition span6{{0, 1, 2, 3, 4, 5}};
        const Partition span7{{0, 1, 2, 3, 4, 5, 6}};
        CHECK(filter_partitions({span6}, by_id, cfg).empty());
        CHECK(filter_partitions({span7}, by_id, cfg).size() == 1);
        CHECK(filter_partitions({span6, span7}, by_id, cfg) ==
              std::vector<Partition>{span7});
    }
    SECTION("members per occupied frame below min_avg_nodes is dropped, at it kept") {
        TrackerConfig cfg;
        cfg.min_frames = 1;
        cfg.min_avg_nodes = 2.0;
        // Frames 0 and 1 hold two detections each (joint types 0 and 1).
        const Partition dense{{0, 1, 100, 101}};  // 4 members over 2 frames
        const Partition sparse{{0, 1, 100}};      // 3 members over 2 frames
        CHECK(filter_partitions({dense}, by_id, cfg).size() == 1);
        CHECK(filter_partitions({sparse}, by_id, cfg).empty());
    }
    SECTION("empty partitions are skipped") {
        TrackerConfig cfg;
        cfg.min_frames = 1;
        cfg.min_avg_nodes = 0.0;
        CHECK(filter_partitions({Partition{}}, by_id, cfg).empty());
    }
}

TEST_CASE("track on an empty detection set returns no tracks") {
    Scene s = two_person_scene(8, 2);
    TrackReport report;
    const PoseTracks out =
        track({}, s.corr, s.temporal, s.spatial, scene_config(2, 31), &report);
    CHECK(out.tracks.empty());
    CHECK(report.windows.empty());
    CHECK(report.selected_nodes.empty());
}

TEST_CASE("track separates well-separated persons into pure tracks") {
    const Scene s = two_person_scene(8, 2);
    TrackReport report;
    const PoseTracks out =
        track(s.dets, s.corr, s.temporal, s.spatial, scene_config(2, 31), &report);

    REQUIRE(out.tracks.size() == 2);
    CHECK(out.tracks[0].track_id == 0);
    CHECK(out.tracks[1].track_id == 1);
    CHECK(report.non_optimal_windows == 0);
    CHECK(report.partitions_before_filter == 2);
    CHECK(report.partitions_after_filter == 2);
    CHECK(report.final_partitions.size() == 2);
    CHECK(report.selected_nodes.size() == s.dets.size());

    for (const Track& t : out.tracks) {
        CHECK(t.entries.size() == 16);  // 8 frames x 2 joints
        // Entries are unique per (frame, joint) and share one person's x.
        std::set<std::pair<int, int>> keys;
        const double person_x = t.entries.front().pos.x;
        for (const TrackEntry& e : t.entries) {
            CHECK(keys.insert({e.frame, e.joint.id}).second);
            CHECK(e.pos.x == person_x);
            CHECK(e.score == 0.75);
        }
    }
    // Track 0 starts at the smaller detection id, which belongs to the person
    // at x = 100.
    CHECK(out.tracks[0].entries.front().pos.x == 100.0);
    CHECK(out.tracks[1].entries.front().pos.x == 1100.0);
}

TEST_CASE("windowed tracking equals the one-shot pipeline") {
    const Scene s = two_person_scene(8, 2);
    const PoseTracks reference = one_shot(s, scene_config(2, 31));
    REQUIRE(reference.tracks.size() == 2);

    SECTION("a single window covering every frame") {
        CHECK(track(s.dets, s.corr, s.temporal, s.spatial, scene_config(2, 31)) == reference);
    }
    SECTION("three-frame windows") {
        TrackReport report;
        const PoseTracks out =
            track(s.dets, s.corr, s.temporal, s.spatial, scene_config(2, 3), &report);
        CHECK(out == reference);
        CHECK(report.windows.size() == 3);
        CHECK(report.windows[0].num_fixed == 0);
        CHECK(report.windows[1].num_fixed > 0);
        CHECK(report.windows[2].num_fixed > 0);
    }
    SECTION("single-frame windows") {
        CHECK(track(s.dets, s.corr, s.temporal, s.spatial, scene_config(2, 1)) == reference);
    }
}

TEST_CASE("track is deterministic") {
    const Scene s = two_person_scene(8, 2);
    const TrackerConfig cfg = scene_config(2, 3);
    const PoseTracks a = track(s.dets, s.corr, s.temporal, s.spatial, cfg);
    const PoseTracks b = track(s.dets, s.corr, s.temporal, s.spatial, cfg);
    CHECK(a == b);
}

TEST_CASE("track suppresses overlapping duplicate detections before solving") {
    Scene s = two_person_scene(8, 2);
    const PoseTracks baseline = track(s.dets, s.corr, s.temporal, s.spatial, scene_config(2, 31));

    // A lower-scoring copy 2px from an existing joint overlaps it far beyond
    // the NMS threshold, so the output must not change.
    Scene noisy = s;
    noisy.dets.push_back(det(1000, 0, 0, 102.0, 100.0, 0.6));
    const PoseTracks out =
        track(noisy.dets, noisy.corr, noisy.temporal, noisy.spatial, scene_config(2, 31));
    CHECK(out == baseline);
}

TEST_CASE("raising min_frames never adds tracks") {
    const Scene s = two_person_scene(8, 2);
    TrackerConfig loose = scene_config(2, 31);
    loose.min_frames = 1;
    TrackerConfig strict = scene_config(2, 31);
    strict.min_frames = 9;
    const auto n_loose = track(s.dets, s.corr, s.temporal, s.spatial, loose).tracks.size();
    const auto n_strict = track(s.dets, s.corr, s.temporal, s.spatial, strict).tracks.size();
    CHECK(n_strict <= n_loose);
    CHECK(n_strict == 0);  // the whole sequence spans only 8 frames
    CHECK(n_loose == 2);
}

TEST_CASE("track rejects invalid configurations") {
    const Scene s = two_person_scene(3, 1);
    TrackerConfig cfg = scene_config(1, 31);
    cfg.batch_size = 0;
    CHECK_THROWS_AS(track(s.dets, s.corr, s.temporal, s.spatial, cfg), std::invalid_argument);
}
