#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "posetrack/io.hpp"
#include "posetrack/model.hpp"

namespace posetrack {

struct PckhConfig {
    double ratio = 0.2;  // fraction of the head-box diagonal
};

// Distance threshold for joint correctness: ratio times the head-box diagonal.
inline double pckh_threshold(const GroundTruthPose& gt, double ratio = 0.2) {
    if (!(ratio > 0.0)) throw std::invalid_argument("pckh ratio must be > 0");
    if (!(gt.head_box.width() > 0.0) || !(gt.head_box.height() > 0.0))
        throw std::invalid_argument("degenerate head box for person " +
                                    std::to_string(gt.person_id));
    return ratio * gt.head_box.diagonal();
}

// One predicted pose in one frame: the entries a track contributes there.
struct PosePrediction {
    int track_id = 0;
    std::vector<TrackEntry> joints;  // unique joint types, sorted by type

    double score() const {
        double sum = 0.0;
        for (const TrackEntry& e : joints) sum += e.score;
        return joints.empty() ? 0.0 : sum / static_cast<double>(joints.size());
    }

    const TrackEntry* find_joint(JointType t) const {
        for (const TrackEntry& e : joints)
            if (e.joint == t) return &e;
        return nullptr;
    }
};

// Groups track entries into per-frame poses; poses within a frame are ordered
// by track id.
inline std::map<int, std::vector<PosePrediction>> poses_by_frame(const PoseTracks& tracks) {
    std::map<int, std::vector<PosePrediction>> out;
    for (const Track& t : tracks.tracks) {
        std::map<int, PosePrediction> per_frame;
        for (const TrackEntry& e : t.entries) {
            PosePrediction& p = per_frame[e.frame];
            p.track_id = t.track_id;
            p.joints.push_back(e);
        }
        for (auto& [frame, pose] : per_frame) {
            std::sort(pose.joints.begin(), pose.joints.end(),
                      [](const TrackEntry& a, const TrackEntry& b) { return a.joint < b.joint; });
            out[frame].push_back(std::move(pose));
        }
    }
    for (auto& [frame, poses] : out)
        std::sort(poses.begin(), poses.end(), [](const PosePrediction& a, const PosePrediction& b) {
            return a.track_id < b.track_id;
        });
    return out;
}

// Greedy one-to-one pose assignment within a frame. Predictions are visited by
// descending pose score (ties: smaller track id); each takes the unmatched
// ground-truth pose with the most joints within the PCKh threshold (at least
// one required), ties broken by smaller mean normalized distance over shared
// joint types, then smaller person id. Returns, per input prediction, the
// index of the assigned ground-truth pose or -1.
inline std::vector<int> match_poses(const std::vector<PosePrediction>& preds,
                                    const std::vector<GroundTruthPose>& gts,
                                    const PckhConfig& cfg = {}) {
    std::vector<std::size_t> order(preds.size());
    for (std::size_t i = 0; i < preds.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const double sa = preds[a].score();
        const double sb = preds[b].score();
        if (sa != sb) return sa > sb;
        return preds[a].track_id < preds[b].track_id;
    });

    std::vector<int> result(preds.size(), -1);
    std::vector<bool> taken(gts.size(), false);
    for (std::size_t i : order) {
        int best = -1;
        int best_count = 0;
        double best_dist = 0.0;
        int best_person = 0;
        for (std::size_t g = 0; g < gts.size(); ++g) {
            if (taken[g]) continue;
            const double thr = pckh_threshold(gts[g], cfg.ratio);
            int count = 0;
            int shared = 0;
            double sum_norm = 0.0;
            for (const TrackEntry& e : preds[i].joints) {
                const GtJoint* j = gts[g].find_joint(e.joint);
                if (j == nullptr) continue;
                ++shared;
                const double d = (e.pos - j->pos).norm();
                sum_norm += d / thr;
                if (d <= thr) ++count;
            }
            if (count < 1) continue;
            const double mean_norm = sum_norm / static_cast<double>(shared);
            const bool better =
                best < 0 || count > best_count ||
                (count == best_count &&
                 (mean_norm < best_dist ||
                  (mean_norm == best_dist && gts[g].person_id < best_person)));
            if (better) {
                best = static_cast<int>(g);
                best_count = count;
                best_dist = mean_norm;
                best_person = gts[g].person_id;
            }
        }
        if (best >= 0) {
            result[i] = best;
            taken[static_cast<std::size_t>(best)] = true;
        }
    }
    return result;
}

// One scored prediction in a ranked average-precision list.
struct RankedPrediction {
    double score = 0.0;
    bool true_positive = false;
    int frame = 0;     // tie-break after score
    int track_id = 0;  // final tie-break
};

// Average precision in [0, 1] with the step-wise interpolated precision
// envelope: AP = sum over recall steps of (r_i - r_{i-1}) * max precision at
// recall >= r_i. Ranking is by score descending, ties by (frame, track id).
inline double average_precision(std::vector<RankedPrediction> items, std::int64_t num_gt) {
    if (num_gt <= 0) throw std::invalid_argument("average_precision requires num_gt > 0");
    std::sort(items.begin(), items.end(), [](const RankedPrediction& a, const RankedPrediction& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.frame != b.frame) return a.frame < b.frame;
        return a.track_id < b.track_id;
    });
    const std::size_t n = items.size();
    std::vector<double> precision(n);
    std::vector<double> recall(n);
    std::int64_t tp = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (items[i].true_positive) ++tp;
        precision[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
        recall[i] = static_cast<double>(tp) / static_cast<double>(num_gt);
    }
    for (std::size_t i = n; i-- > 1;) precision[i - 1] = std::max(precision[i - 1], precision[i]);
    double ap = 0.0;
    double prev_recall = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (items[i].true_positive) {
            ap += (recall[i] - prev_recall) * precision[i];
            prev_recall = recall[i];
        }
    }
    return ap;
}

struct PoseMapResult {
    double map = 0.0;                    // percent
    std::map<int, double> per_joint_ap;  // percent, per joint type with counted ground truth
};

// Joint-detection average precision per joint type, after per-frame pose
// assignment. A predicted joint of a matched pose is a true positive iff it
// lies within the matched pose's threshold of the same-type ground-truth
// joint; all other predicted joints are false positives. In occlusion-aware
// mode an occluded ground-truth joint with no same-type prediction in its
// matched pose (or with its pose unmatched) leaves the denominator entirely.
inline PoseMapResult pose_map(const PoseTracks& tracks, const std::vector<GroundTruthPose>& gt,
                              const PckhConfig& cfg = {}, bool occlusion_aware = false) {
    std::map<int, std::vector<GroundTruthPose>> gt_by_frame;
    for (const GroundTruthPose& p : gt) gt_by_frame[p.frame].push_back(p);
    for (auto& [frame, poses] : gt_by_frame)
        std::sort(poses.begin(), poses.end(),
                  [](const GroundTruthPose& a, const GroundTruthPose& b) {
                      return a.person_id < b.person_id;
                  });
    const std::map<int, std::vector<PosePrediction>> preds_by_frame = poses_by_frame(tracks);

    std::set<int> frames;
    for (const auto& [f, _] : gt_by_frame) frames.insert(f);
    for (const auto& [f, _] : preds_by_frame) frames.insert(f);

    std::map<int, std::vector<RankedPrediction>> ranked;  // joint type -> predictions
    std::map<int, std::int64_t> num_gt;                   // joint type -> denominator
    bool any_prediction = false;

    static const std::vector<PosePrediction> no_preds;
    static const std::vector<GroundTruthPose> no_gts;
    for (int f : frames) {
        const auto pit = preds_by_frame.find(f);
        const auto git = gt_by_frame.find(f);
        const std::vector<PosePrediction>& preds = pit == preds_by_frame.end() ? no_preds : pit->second;
        const std::vector<GroundTruthPose>& gts = git == gt_by_frame.end() ? no_gts : git->second;
        const std::vector<int> assigned = match_poses(preds, gts, cfg);

        for (std::size_t i = 0; i < preds.size(); ++i) {
            const GroundTruthPose* g =
                assigned[i] >= 0 ? &gts[static_cast<std::size_t>(assigned[i])] : nullptr;
            const double thr = g != nullptr ? pckh_threshold(*g, cfg.ratio) : 0.0;
            for (const TrackEntry& e : preds[i].joints) {
                any_prediction = true;
                bool tp = false;
                if (g != nullptr) {
                    const GtJoint* j = g->find_joint(e.joint);
                    if (j != nullptr && (e.pos - j->pos).norm() <= thr) tp = true;
                }
                ranked[e.joint.id].push_back(RankedPrediction{e.score, tp, f, preds[i].track_id});
            }
        }

        std::vector<int> pred_of_gt(gts.size(), -1);
        for (std::size_t i = 0; i < preds.size(); ++i)
            if (assigned[i] >= 0) pred_of_gt[static_cast<std::size_t>(assigned[i])] = static_cast<int>(i);
        for (std::size_t g = 0; g < gts.size(); ++g) {
            for (const GtJoint& j : gts[g].joints) {
                bool counted = true;
                if (occlusion_aware && j.occluded) {
                    const int pi = pred_of_gt[g];
                    counted = pi >= 0 &&
                              preds[static_cast<std::size_t>(pi)].find_joint(j.type) != nullptr;
                }
                if (counted) ++num_gt[j.type.id];
            }
        }
    }

    PoseMapResult result;
    double sum = 0.0;
    int countable = 0;
    for (const auto& [type, denom] : num_gt) {
        if (denom <= 0) continue;
        const auto it = ranked.find(type);
        const double ap =
            it == ranked.end() || it->second.empty() ? 0.0 : average_precision(it->second, denom);
        result.per_joint_ap[type] = 100.0 * ap;
        sum += ap;
        ++countable;
    }
    if (countable > 0)
        result.map = 100.0 * (sum / static_cast<double>(countable));
    else
        result.map = any_prediction ? 0.0 : 100.0;
    return result;
}

// Cost of a pair that must never be matched; dwarfs any real distance so the
// assignment first maximizes the number of real matches, then minimizes their
// total distance.
inline constexpr double kUnmatchable = 1e12;

// Exact minimum-cost assignment on a square cost matrix (shortest augmenting
// path formulation). Returns the column assigned to each row. Deterministic:
// rows are inserted in order and ties follow column scan order.
inline std::vector<int> min_cost_assignment(const std::vector<std::vector<double>>& cost) {
    const int n = static_cast<int>(cost.size());
    for (const auto& row : cost)
        if (static_cast<int>(row.size()) != n)
            throw std::invalid_argument("cost matrix must be square");
    if (n == 0) return {};
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(static_cast<std::size_t>(n) + 1, 0.0);
    std::vector<double> v(static_cast<std::size_t>(n) + 1, 0.0);
    std::vector<int> p(static_cast<std::size_t>(n) + 1, 0);
    std::vector<int> way(static_cast<std::size_t>(n) + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(static_cast<std::size_t>(n) + 1, inf);
        std::vector<bool> used(static_cast<std::size_t>(n) + 1, false);
        do {
            used[static_cast<std::size_t>(j0)] = true;
            const int i0 = p[static_cast<std::size_t>(j0)];
            int j1 = -1;
            double delta = inf;
            for (int j = 1; j <= n; ++j) {
                if (used[static_cast<std::size_t>(j)]) continue;
                const double cur = cost[static_cast<std::size_t>(i0 - 1)][static_cast<std::size_t>(j - 1)] -
                                   u[static_cast<std::size_t>(i0)] - v[static_cast<std::size_t>(j)];
                if (cur < minv[static_cast<std::size_t>(j)]) {
                    minv[static_cast<std::size_t>(j)] = cur;
                    way[static_cast<std::size_t>(j)] = j0;
                }
                if (minv[static_cast<std::size_t>(j)] < delta) {
                    delta = minv[static_cast<std::size_t>(j)];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[static_cast<std::size_t>(j)]) {
                    u[static_cast<std::size_t>(p[static_cast<std::size_t>(j)])] += delta;
                    v[static_cast<std::size_t>(j)] -= delta;
                } else {
                    minv[static_cast<std::size_t>(j)] -= delta;
                }
            }
            j0 = j1;
        } while (p[static_cast<std::size_t>(j0)] != 0);
        do {
            const int j1 = way[static_cast<std::size_t>(j0)];
            p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<int> row_to_col(static_cast<std::size_t>(n), -1);
    for (int j = 1; j <= n; ++j)
        if (p[static_cast<std::size_t>(j)] > 0)
            row_to_col[static_cast<std::size_t>(p[static_cast<std::size_t>(j)] - 1)] = j - 1;
    return row_to_col;
}

struct TrackMetrics {
    double mota = 0.0;
    double motp = 0.0;
    double recall = 0.0;
    double precision = 0.0;
    int mostly_tracked = 0;
    int mostly_lost = 0;
    int id_switches = 0;
    int fragments = 0;
    std::int64_t true_positives = 0;
    std::int64_t false_positives = 0;
    std::int64_t false_negatives = 0;
    std::int64_t gt_count = 0;
    int trajectories = 0;
};

// CLEAR-style tracking measures where each ground-truth (person, joint type)
// trajectory is one target. Per frame and joint type, the previous frame's
// match is kept when still within the current threshold; the remaining
// candidates get an exact minimum-distance one-to-one assignment restricted to
// pairs within threshold. In occlusion-aware mode an occluded, unmatched
// ground-truth joint is neither counted nor a false negative, and trajectory
// lengths count only counted frames.
inline TrackMetrics track_metrics(const PoseTracks& tracks, const std::vector<GroundTruthPose>& gt,
                                  const PckhConfig& cfg = {}, bool occlusion_aware = false) {
    struct GtItem {
        int person = 0;
        Vec2 pos{};
        bool occluded = false;
        double threshold = 0.0;
    };
    struct PredItem {
        int track = 0;
        Vec2 pos{};
    };

    // frame -> joint type -> items
    std::map<int, std::map<int, std::vector<GtItem>>> gt_items;
    for (const GroundTruthPose& p : gt) {
        const double thr = pckh_threshold(p, cfg.ratio);
        for (const GtJoint& j : p.joints)
            gt_items[p.frame][j.type.id].push_back(GtItem{p.person_id, j.pos, j.occluded, thr});
    }
    for (auto& [f, by_type] : gt_items)
        for (auto& [t, items] : by_type)
            std::sort(items.begin(), items.end(),
                      [](const GtItem& a, const GtItem& b) { return a.person < b.person; });

    std::map<int, std::map<int, std::vector<PredItem>>> pred_items;
    for (const Track& t : tracks.tracks)
        for (const TrackEntry& e : t.entries)
            pred_items[e.frame][e.joint.id].push_back(PredItem{t.track_id, e.pos});
    for (auto& [f, by_type] : pred_items)
        for (auto& [t, items] : by_type)
            std::sort(items.begin(), items.end(),
                      [](const PredItem& a, const PredItem& b) { return a.track < b.track; });

    std::set<int> frames;
    for (const auto& [f, _] : gt_items) frames.insert(f);
    for (const auto& [f, _] : pred_items) frames.insert(f);

    struct TargetState {
        int last_track = -1;       // last matched track id, across gaps
        int prev_frame_track = -1; // track matched in the immediately previous frame
        std::int64_t counted_frames = 0;
        std::int64_t matched_frames = 0;
        bool ever_matched = false;
        bool gap_after_match = false;
    };
    std::map<std::pair<int, int>, TargetState> targets;  // (person, joint type)

    TrackMetrics m;
    double motp_sum = 0.0;

    int prev_frame = 0;
    bool have_prev_frame = false;
    for (int f : frames) {
        const bool consecutive = have_prev_frame && f == prev_frame + 1;
        // A skipped frame value breaks every per-frame persistence link.
        if (!consecutive)
            for (auto& [key, st] : targets) st.prev_frame_track = -1;

        std::set<int> types;
        const auto gfit = gt_items.find(f);
        const auto pfit = pred_items.find(f);
        if (gfit != gt_items.end())
            for (const auto& [t, _] : gfit->second) types.insert(t);
        if (pfit != pred_items.end())
            for (const auto& [t, _] : pfit->second) types.insert(t);

        std::map<std::pair<int, int>, int> this_frame_match;  // target -> track id

        for (int t : types) {
            static const std::vector<GtItem> no_gt;
            static const std::vector<PredItem> no_pred;
            const std::vector<GtItem>& gis =
                gfit != gt_items.end() && gfit->second.count(t) ? gfit->second.at(t) : no_gt;
            const std::vector<PredItem>& pis =
                pfit != pred_items.end() && pfit->second.count(t) ? pfit->second.at(t) : no_pred;

            std::vector<bool> gt_done(gis.size(), false);
            std::vector<bool> pred_done(pis.size(), false);
            std::vector<std::pair<std::size_t, std::size_t>> matches;  // (gt idx, pred idx)

            // persistence pass, in ground-truth person order
            for (std::size_t gi = 0; gi < gis.size(); ++gi) {
                const auto key = std::make_pair(gis[gi].person, t);
                const auto ts = targets.find(key);
                if (ts == targets.end() || ts->second.prev_frame_track < 0) continue;
                for (std::size_t pi = 0; pi < pis.size(); ++pi) {
                    if (pred_done[pi] || pis[pi].track != ts->second.prev_frame_track) continue;
                    if ((gis[gi].pos - pis[pi].pos).norm() <= gis[gi].threshold) {
                        matches.emplace_back(gi, pi);
                        gt_done[gi] = true;
                        pred_done[pi] = true;
                    }
                    break;
                }
            }

            // optimal assignment over the remainder
            std::vector<std::size_t> rest_gt;
            std::vector<std::size_t> rest_pred;
            for (std::size_t gi = 0; gi < gis.size(); ++gi)
                if (!gt_done[gi]) rest_gt.push_back(gi);
            for (std::size_t pi = 0; pi < pis.size(); ++pi)
                if (!pred_done[pi]) rest_pred.push_back(pi);
            if (!rest_gt.empty() && !rest_pred.empty()) {
                const std::size_t side = std::max(rest_gt.size(), rest_pred.size());
                std::vector<std::vector<double>> cost(side,
                                                      std::vector<double>(side, kUnmatchable));
                for (std::size_t r = 0; r < rest_gt.size(); ++r)
                    for (std::size_t c = 0; c < rest_pred.size(); ++c) {
                        const double d =
                            (gis[rest_gt[r]].pos - pis[rest_pred[c]].pos).norm();
                        if (d <= gis[rest_gt[r]].threshold) cost[r][c] = d;
                    }
                const std::vector<int> row_to_col = min_cost_assignment(cost);
                for (std::size_t r = 0; r < rest_gt.size(); ++r) {
                    const int c = row_to_col[r];
                    if (c < 0 || static_cast<std::size_t>(c) >= rest_pred.size()) continue;
                    if (cost[r][static_cast<std::size_t>(c)] >= kUnmatchable) continue;
                    matches.emplace_back(rest_gt[r], rest_pred[static_cast<std::size_t>(c)]);
                    gt_done[rest_gt[r]] = true;
                    pred_done[rest_pred[static_cast<std::size_t>(c)]] = true;
                }
            }

            for (const auto& [gi, pi] : matches) {
                const auto key = std::make_pair(gis[gi].person, t);
                TargetState& st = targets[key];
                const double d = (gis[gi].pos - pis[pi].pos).norm();
                ++m.true_positives;
                ++m.gt_count;
                ++st.counted_frames;
                ++st.matched_frames;
                motp_sum += 1.0 - d / gis[gi].threshold;
                if (st.last_track >= 0 && st.last_track != pis[pi].track) ++m.id_switches;
                st.last_track = pis[pi].track;
                if (st.gap_after_match) {
                    ++m.fragments;
                    st.gap_after_match = false;
                }
                st.ever_matched = true;
                this_frame_match[key] = pis[pi].track;
            }
            for (std::size_t gi = 0; gi < gis.size(); ++gi) {
                if (gt_done[gi]) continue;
                const auto key = std::make_pair(gis[gi].person, t);
                TargetState& st = targets[key];
                if (occlusion_aware && gis[gi].occluded) continue;  // neither counted nor an error
                ++m.false_negatives;
                ++m.gt_count;
                ++st.counted_frames;
                if (st.ever_matched) st.gap_after_match = true;
            }
            for (std::size_t pi = 0; pi < pis.size(); ++pi)
                if (!pred_done[pi]) ++m.false_positives;
        }

        for (auto& [key, st] : targets) {
            const auto it = this_frame_match.find(key);
            st.prev_frame_track = it == this_frame_match.end() ? -1 : it->second;
        }
        prev_frame = f;
        have_prev_frame = true;
    }

    for (const auto& [key, st] : targets) {
        if (st.counted_frames == 0) continue;
        ++m.trajectories;
        // matched/counted >= 0.8 and <= 0.2, evaluated exactly in integers
        if (5 * st.matched_frames >= 4 * st.counted_frames) ++m.mostly_tracked;
        if (5 * st.matched_frames <= st.counted_frames) ++m.mostly_lost;
    }

    const std::int64_t errors = m.false_negatives + m.false_positives + m.id_switches;
    m.mota = m.gt_count > 0
                 ? 100.0 * (1.0 - static_cast<double>(errors) / static_cast<double>(m.gt_count))
                 : 100.0;
    m.motp = m.true_positives > 0
                 ? 100.0 * (motp_sum / static_cast<double>(m.true_positives))
                 : 0.0;
    m.recall = m.gt_count > 0
                   ? 100.0 * static_cast<double>(m.true_positives) / static_cast<double>(m.gt_count)
                   : 100.0;
    const std::int64_t predicted = m.true_positives + m.false_positives;
    m.precision = predicted > 0
                      ? 100.0 * static_cast<double>(m.true_positives) / static_cast<double>(predicted)
                      : 100.0;
    return m;
}

struct EvalReport {
    double map = 0.0;
    std::map<int, double> per_joint_ap;
    double mota = 0.0;
    double motp = 0.0;
    double recall = 0.0;
    double precision = 0.0;
    int mostly_tracked = 0;
    int mostly_lost = 0;
    int id_switches = 0;
    int fragments = 0;

    friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

inline EvalReport evaluate(const PoseTracks& tracks, const std::vector<GroundTruthPose>& gt,
                           const PckhConfig& cfg = {}, bool occlusion_aware = false) {
    EvalReport r;
    const PoseMapResult pm = pose_map(tracks, gt, cfg, occlusion_aware);
    r.map = pm.map;
    r.per_joint_ap = pm.per_joint_ap;
    const TrackMetrics tm = track_metrics(tracks, gt, cfg, occlusion_aware);
    r.mota = tm.mota;
    r.motp = tm.motp;
    r.recall = tm.recall;
    r.precision = tm.precision;
    r.mostly_tracked = tm.mostly_tracked;
    r.mostly_lost = tm.mostly_lost;
    r.id_switches = tm.id_switches;
    r.fragments = tm.fragments;
    return r;
}

inline std::string report_to_string(const EvalReport& r) {
    json doc;
    doc["mAP"] = r.map;
    json per_joint = json::object();
    for (const auto& [type, ap] : r.per_joint_ap) per_joint[std::to_string(type)] = ap;
    doc["per_joint_ap"] = per_joint;
    doc["MOTA"] = r.mota;
    doc["MOTP"] = r.motp;
    doc["Rcll"] = r.recall;
    doc["Prcn"] = r.precision;
    doc["MT"] = r.mostly_tracked;
    doc["ML"] = r.mostly_lost;
    doc["IDs"] = r.id_switches;
    doc["FM"] = r.fragments;
    return doc.dump(2) + "\n";
}

inline void write_report(const std::string& path, const EvalReport& r) {
    atomic_write(path, report_to_string(r));
}

}  // namespace posetrack
