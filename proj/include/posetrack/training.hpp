#pragma once

#include <map>
#include <unordered_map>
#include <vector>

#include "posetrack/graph.hpp"
#include "posetrack/logistic.hpp"
#include "posetrack/metrics.hpp"
#include "posetrack/potentials.hpp"

namespace posetrack {

namespace detail {

// Assigns each detection to the ground-truth person whose same-type joint is
// nearest in threshold-normalized distance, requiring the distance to be
// within the person's PCKh threshold; ties prefer the smaller person id.
// Detections with no qualifying person are absent from the result.
inline std::unordered_map<int, int> assign_detections_to_gt(
    const std::vector<Detection>& dets, const std::vector<GroundTruthPose>& gt,
    double pckh_ratio) {
    std::map<int, std::vector<const GroundTruthPose*>> gt_by_frame;
    for (const GroundTruthPose& p : gt) gt_by_frame[p.frame].push_back(&p);
    for (auto& [frame, poses] : gt_by_frame)
        std::sort(poses.begin(), poses.end(),
                  [](const GroundTruthPose* a, const GroundTruthPose* b) {
                      return a->person_id < b->person_id;
                  });

    std::unordered_map<int, int> assigned;
    for (const Detection& d : dets) {
        const auto fit = gt_by_frame.find(d.frame);
        if (fit == gt_by_frame.end()) continue;
        int best_person = -1;
        double best_norm = 0.0;
        for (const GroundTruthPose* p : fit->second) {
            const GtJoint* j = p->find_joint(d.joint);
            if (j == nullptr) continue;
            const double thr = pckh_threshold(*p, pckh_ratio);
            const double norm = (d.pos - j->pos).norm() / thr;
            if (norm > 1.0) continue;
            if (best_person < 0 || norm < best_norm) {
                best_person = p->person_id;
                best_norm = norm;
            }
        }
        if (best_person >= 0) assigned.emplace(d.id, best_person);
    }
    return assigned;
}

}  // namespace detail

// One training sample per temporal edge, in graph edge order. A sample is
// positive iff both endpoint detections are assigned to the same ground-truth
// person (same-type joints within the PCKh threshold).
inline std::vector<TrainSample> make_temporal_samples(const SpatioTemporalGraph& g,
                                                      const CorrespondenceSet& corr,
                                                      const std::vector<GroundTruthPose>& gt,
                                                      double pckh_ratio = 0.2) {
    const std::unordered_map<int, int> assigned =
        detail::assign_detections_to_gt(g.nodes, gt, pckh_ratio);
    std::vector<TrainSample> samples;
    samples.reserve(g.temporal_edges.size());
    for (const TemporalEdge& e : g.temporal_edges) {
        const Detection& a = g.node_by_id(e.a);
        const Detection& b = g.node_by_id(e.b);
        const TemporalFeatures f = temporal_features(a, b, corr.find(a.frame, b.frame));
        const auto ia = assigned.find(e.a);
        const auto ib = assigned.find(e.b);
        const int label =
            ia != assigned.end() && ib != assigned.end() && ia->second == ib->second ? 1 : 0;
        samples.push_back(TrainSample{f.vector(), label});
    }
    return samples;
}

// One training sample per cross-type spatial edge, in graph edge order (edges
// joining two detections of the same type are scored by box overlap, not by
// the learned model, and contribute no samples). A sample is positive iff both
// endpoints are assigned to the same ground-truth person.
inline std::vector<TrainSample> make_spatial_samples(const SpatioTemporalGraph& g,
                                                     const std::vector<GroundTruthPose>& gt,
                                                     double pckh_ratio = 0.2,
                                                     int joint_count = kDefaultJointCount) {
    const std::unordered_map<int, int> assigned =
        detail::assign_detections_to_gt(g.nodes, gt, pckh_ratio);
    std::vector<TrainSample> samples;
    for (const SpatialEdge& e : g.spatial_edges) {
        const Detection& a = g.node_by_id(e.a);
        const Detection& b = g.node_by_id(e.b);
        if (a.joint == b.joint) continue;
        const auto ia = assigned.find(e.a);
        const auto ib = assigned.find(e.b);
        const int label =
            ia != assigned.end() && ib != assigned.end() && ia->second == ib->second ? 1 : 0;
        samples.push_back(TrainSample{cross_type_features(a, b, joint_count), label});
    }
    return samples;
}

}  // namespace posetrack
