#pragma once

#include <algorithm>
#include <compare>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "posetrack/geometry.hpp"

namespace posetrack {

inline constexpr int kDefaultJointCount = 14;

// Confidences are kept strictly inside (0, 1) so log-odds stay finite.
inline constexpr double kScoreEps = 1e-6;

// Joint bounding-box side at detection scale 1; side = kBoxSideAtUnitScale / scale.
inline constexpr double kBoxSideAtUnitScale = 70.0;

// Body-joint category; ids are contiguous and start at 0.
struct JointType {
    int id = 0;
    friend auto operator<=>(const JointType&, const JointType&) = default;
};

inline double clamp_score(double p) {
    return std::min(1.0 - kScoreEps, std::max(kScoreEps, p));
}

// One joint candidate in one frame.
struct Detection {
    int id = 0;
    int frame = 0;
    JointType joint;
    Vec2 pos;
    double score = 0.5;  // clamped into (kScoreEps, 1 - kScoreEps) on ingest
    double scale = 1.0;  // positive

    friend bool operator==(const Detection&, const Detection&) = default;
};

struct GtJoint {
    JointType type;
    Vec2 pos;
    bool occluded = false;

    friend bool operator==(const GtJoint&, const GtJoint&) = default;
};

// Annotated pose of one person in one frame; joint types are unique and
// truncated joints are simply absent.
struct GroundTruthPose {
    int frame = 0;
    int person_id = 0;
    Rect head_box;  // positive width and height
    std::vector<GtJoint> joints;

    const GtJoint* find_joint(JointType t) const {
        for (const GtJoint& j : joints)
            if (j.type == t) return &j;
        return nullptr;
    }

    friend bool operator==(const GroundTruthPose&, const GroundTruthPose&) = default;
};

// Point matches between two distinct frames; points_a[i] pairs with points_b[i].
struct Correspondence {
    int frame_a = 0;
    int frame_b = 0;
    std::vector<Vec2> points_a;
    std::vector<Vec2> points_b;

    friend bool operator==(const Correspondence&, const Correspondence&) = default;
};

// Correspondence records keyed by unordered frame pair.
class CorrespondenceSet {
public:
    CorrespondenceSet() = default;

    explicit CorrespondenceSet(std::vector<Correspondence> records) {
        for (Correspondence& c : records) add(std::move(c));
    }

    void add(Correspondence c) {
        const auto key = std::minmax(c.frame_a, c.frame_b);
        if (!by_pair_.emplace(key, records_.size()).second)
            throw std::runtime_error("duplicate correspondence record for frame pair (" +
                                     std::to_string(key.first) + ", " + std::to_string(key.second) + ")");
        records_.push_back(std::move(c));
    }

    bool has(int frame_a, int frame_b) const {
        return by_pair_.count(std::minmax(frame_a, frame_b)) != 0;
    }

    // Throws naming the pair when no record covers it.
    const Correspondence& find(int frame_a, int frame_b) const {
        const auto it = by_pair_.find(std::minmax(frame_a, frame_b));
        if (it == by_pair_.end())
            throw std::runtime_error("missing correspondence record for frame pair (" +
                                     std::to_string(frame_a) + ", " + std::to_string(frame_b) + ")");
        return records_[it->second];
    }

    const std::vector<Correspondence>& records() const { return records_; }

private:
    std::vector<Correspondence> records_;
    std::map<std::pair<int, int>, std::size_t> by_pair_;
};

struct TrackEntry {
    int frame = 0;
    JointType joint;
    Vec2 pos;
    double score = 0.0;

    friend bool operator==(const TrackEntry&, const TrackEntry&) = default;
};

struct Track {
    int track_id = 0;
    std::vector<TrackEntry> entries;  // at most one entry per (frame, joint)

    friend bool operator==(const Track&, const Track&) = default;
};

struct PoseTracks {
    std::vector<Track> tracks;  // unique track ids

    friend bool operator==(const PoseTracks&, const PoseTracks&) = default;
};

}  // namespace posetrack
