#pragma once

#include <algorithm>
#include <map>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "posetrack/io.hpp"
#include "posetrack/model.hpp"

namespace posetrack {

inline constexpr int kDefaultTau = 3;
inline constexpr double kDefaultNmsIou = 0.7;

// Box side shrinks as detection scale grows.
inline BoundingBox derive_bbox(const Detection& d) {
    return BoundingBox{d.pos, kBoxSideAtUnitScale / d.scale};
}

// Within-frame edge; frame(a) == frame(b) and a < b.
struct SpatialEdge {
    int a = 0;
    int b = 0;
    friend auto operator<=>(const SpatialEdge&, const SpatialEdge&) = default;
};

// Cross-frame edge between same-type detections; frame(a) < frame(b).
struct TemporalEdge {
    int a = 0;
    int b = 0;
    friend auto operator<=>(const TemporalEdge&, const TemporalEdge&) = default;
};

// Nodes sorted by (frame, id); spatial edges sorted by (frame, a, b); temporal
// edges sorted by (frame(a), frame(b), a, b). Spatial edges connect every
// within-frame pair; temporal edges connect same-type pairs 1..tau frames apart.
struct SpatioTemporalGraph {
    std::vector<Detection> nodes;
    std::vector<SpatialEdge> spatial_edges;
    std::vector<TemporalEdge> temporal_edges;
    int tau = kDefaultTau;

    int node_pos(int id) const {
        const auto it = pos_by_id.find(id);
        if (it == pos_by_id.end())
            throw std::out_of_range("unknown detection id " + std::to_string(id));
        return it->second;
    }

    const Detection& node_by_id(int id) const { return nodes[static_cast<std::size_t>(node_pos(id))]; }

    std::unordered_map<int, int> pos_by_id;
};

// Greedy per (frame, joint type): sort by score descending (ties: lower id),
// keep a detection iff its box overlaps every kept one with IoU <= threshold.
// Kept detections are returned in ascending id order.
inline std::vector<Detection> nms(const std::vector<Detection>& dets, double iou_threshold) {
    std::map<std::pair<int, int>, std::vector<const Detection*>> groups;
    for (const Detection& d : dets) groups[{d.frame, d.joint.id}].push_back(&d);

    std::vector<Detection> kept;
    for (auto& [key, group] : groups) {
        std::sort(group.begin(), group.end(), [](const Detection* a, const Detection* b) {
            if (a->score != b->score) return a->score > b->score;
            return a->id < b->id;
        });
        std::vector<const Detection*> accepted;
        for (const Detection* d : group) {
            bool ok = true;
            for (const Detection* k : accepted) {
                if (iou(derive_bbox(*d), derive_bbox(*k)) > iou_threshold) {
                    ok = false;
                    break;
                }
            }
            if (ok) accepted.push_back(d);
        }
        for (const Detection* d : accepted) kept.push_back(*d);
    }
    std::sort(kept.begin(), kept.end(),
              [](const Detection& a, const Detection& b) { return a.id < b.id; });
    return kept;
}

// Detections are expected to be NMS-filtered already; tau >= 1.
inline SpatioTemporalGraph build_graph(const std::vector<Detection>& dets, int tau) {
    if (tau < 1) throw std::invalid_argument("tau must be >= 1");
    SpatioTemporalGraph g;
    g.tau = tau;
    g.nodes = dets;
    std::sort(g.nodes.begin(), g.nodes.end(), [](const Detection& a, const Detection& b) {
        if (a.frame != b.frame) return a.frame < b.frame;
        return a.id < b.id;
    });
    g.pos_by_id.reserve(g.nodes.size());
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
        if (!g.pos_by_id.emplace(g.nodes[i].id, static_cast<int>(i)).second)
            throw std::runtime_error("duplicate detection id " + std::to_string(g.nodes[i].id));
    }

    // frame -> ids ascending
    std::map<int, std::vector<int>> by_frame;
    for (const Detection& d : g.nodes) by_frame[d.frame].push_back(d.id);
    for (auto& [frame, ids] : by_frame) std::sort(ids.begin(), ids.end());

    for (const auto& [frame, ids] : by_frame) {
        for (std::size_t i = 0; i < ids.size(); ++i)
            for (std::size_t j = i + 1; j < ids.size(); ++j)
                g.spatial_edges.push_back(SpatialEdge{ids[i], ids[j]});
    }

    for (const auto& [frame, ids] : by_frame) {
        for (int gap = 1; gap <= tau; ++gap) {
            const auto it = by_frame.find(frame + gap);
            if (it == by_frame.end()) continue;
            for (int a : ids)
                for (int b : it->second)
                    if (g.node_by_id(a).joint == g.node_by_id(b).joint)
                        g.temporal_edges.push_back(TemporalEdge{a, b});
        }
    }
    // Temporal edges are emitted per source frame in gap order; restore the
    // canonical (frame(a), frame(b), a, b) order.
    std::sort(g.temporal_edges.begin(), g.temporal_edges.end(),
              [&](const TemporalEdge& x, const TemporalEdge& y) {
                  const int fxa = g.node_by_id(x.a).frame, fxb = g.node_by_id(x.b).frame;
                  const int fya = g.node_by_id(y.a).frame, fyb = g.node_by_id(y.b).frame;
                  if (fxa != fya) return fxa < fya;
                  if (fxb != fyb) return fxb < fyb;
                  if (x.a != y.a) return x.a < y.a;
                  return x.b < y.b;
              });
    return g;
}

// ---- debug serialization ----------------------------------------------------
// Line-delimited JSON: one {"tau": t} line, then {"node": {...}} lines, then
// {"spatial": [a, b]} and {"temporal": [a, b]} lines.

inline std::string graph_to_string(const SpatioTemporalGraph& g) {
    std::string out;
    {
        json j;
        j["tau"] = g.tau;
        out += j.dump();
        out += '\n';
    }
    for (const Detection& d : g.nodes) {
        json n;
        n["id"] = d.id;
        n["frame"] = d.frame;
        n["joint"] = d.joint.id;
        n["x"] = d.pos.x;
        n["y"] = d.pos.y;
        n["score"] = d.score;
        n["scale"] = d.scale;
        json j;
        j["node"] = std::move(n);
        out += j.dump();
        out += '\n';
    }
    for (const SpatialEdge& e : g.spatial_edges) {
        json j;
        j["spatial"] = {e.a, e.b};
        out += j.dump();
        out += '\n';
    }
    for (const TemporalEdge& e : g.temporal_edges) {
        json j;
        j["temporal"] = {e.a, e.b};
        out += j.dump();
        out += '\n';
    }
    return out;
}

inline void write_graph(const std::filesystem::path& path, const SpatioTemporalGraph& g) {
    atomic_write(path, graph_to_string(g));
}

// Rebuilds the graph from the node and tau lines; edge lines, when present,
// are verified against the rebuilt edge sets.
inline SpatioTemporalGraph read_graph(const std::filesystem::path& path) {
    int tau = -1;
    std::vector<Detection> nodes;
    std::vector<SpatialEdge> spatial;
    std::vector<TemporalEdge> temporal;
    bool had_edge_lines = false;
    detail::for_each_json_line(path, [&](const json& j, std::size_t line) {
        if (j.contains("tau")) {
            if (tau >= 0) detail::line_error(path, line, "repeated tau line");
            tau = j.at("tau").get<int>();
            if (tau < 1) detail::line_error(path, line, "tau must be >= 1");
        } else if (j.contains("node")) {
            const json& n = j.at("node");
            Detection d;
            d.id = detail::int_field(n, "id", path, line);
            d.frame = detail::int_field(n, "frame", path, line);
            if (d.frame < 0) detail::line_error(path, line, "frame must be >= 0");
            d.joint.id = detail::int_field(n, "joint", path, line);
            if (d.joint.id < 0) detail::line_error(path, line, "joint must be >= 0");
            d.pos.x = detail::finite_number(n, "x", path, line);
            d.pos.y = detail::finite_number(n, "y", path, line);
            d.score = clamp_score(detail::finite_number(n, "score", path, line));
            d.scale = detail::finite_number(n, "scale", path, line);
            if (d.scale <= 0.0) detail::line_error(path, line, "scale must be positive");
            nodes.push_back(d);
        } else if (j.contains("spatial")) {
            had_edge_lines = true;
            spatial.push_back(SpatialEdge{j.at("spatial").at(0).get<int>(), j.at("spatial").at(1).get<int>()});
        } else if (j.contains("temporal")) {
            had_edge_lines = true;
            temporal.push_back(TemporalEdge{j.at("temporal").at(0).get<int>(), j.at("temporal").at(1).get<int>()});
        } else {
            detail::line_error(path, line, "unrecognized record");
        }
    });
    if (tau < 1) throw std::runtime_error(path.string() + ": missing tau line");
    SpatioTemporalGraph g = build_graph(nodes, tau);
    if (had_edge_lines) {
        std::sort(spatial.begin(), spatial.end());
        std::vector<SpatialEdge> want = g.spatial_edges;
        std::sort(want.begin(), want.end());
        if (spatial != want)
            throw std::runtime_error(path.string() + ": spatial edge lines do not match the graph");
        std::sort(temporal.begin(), temporal.end());
        std::vector<TemporalEdge> wantt = g.temporal_edges;
        std::sort(wantt.begin(), wantt.end());
        if (temporal != wantt)
            throw std::runtime_error(path.string() + ": temporal edge lines do not match the graph");
    }
    return g;
}

}  // namespace posetrack
