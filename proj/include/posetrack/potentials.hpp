#pragma once

#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "posetrack/graph.hpp"
#include "posetrack/logistic.hpp"
#include "posetrack/model.hpp"

namespace posetrack {

// Log-odds cost: negative for confident units, positive for unlikely ones.
inline double unary_cost(double p) {
    if (!(p > 0.0) || !(p < 1.0)) throw std::invalid_argument("probability must lie in (0, 1)");
    return std::log((1.0 - p) / p);
}

// ---- cross-type spatial model ------------------------------------------------

// Index of the unordered pair (a, b), a < b, among all distinct-type pairs.
inline int joint_pair_index(int a, int b, int joint_count) {
    if (a > b) std::swap(a, b);
    if (a < 0 || b >= joint_count || a == b)
        throw std::invalid_argument("invalid joint pair (" + std::to_string(a) + ", " +
                                    std::to_string(b) + ") for " + std::to_string(joint_count) +
                                    " joint types");
    return a * joint_count - a * (a + 1) / 2 + (b - a - 1);
}

inline int cross_type_feature_dim(int joint_count) {
    return 3 + joint_count * (joint_count - 1) / 2;
}

// Geometric features for a within-frame pair of different joint types:
// [dx, dy, dist] normalized by the mean box side, then a one-hot of the
// unordered joint-type pair. The pair is oriented by ascending joint id so the
// features do not depend on argument order.
inline std::vector<double> cross_type_features(const Detection& a, const Detection& b,
                                               int joint_count) {
    if (a.joint == b.joint) throw std::invalid_argument("cross_type_features needs distinct types");
    const Detection& lo = a.joint.id < b.joint.id ? a : b;
    const Detection& hi = a.joint.id < b.joint.id ? b : a;
    const double mean_side = (derive_bbox(lo).side + derive_bbox(hi).side) / 2.0;
    std::vector<double> f(static_cast<std::size_t>(cross_type_feature_dim(joint_count)), 0.0);
    f[0] = (lo.pos.x - hi.pos.x) / mean_side;
    f[1] = (lo.pos.y - hi.pos.y) / mean_side;
    f[2] = std::hypot(f[0], f[1]);
    f[static_cast<std::size_t>(3 + joint_pair_index(lo.joint.id, hi.joint.id, joint_count))] = 1.0;
    return f;
}

// Per-edge probabilities keyed by unordered detection id pair.
class EdgeProbTable {
public:
    void set(int a, int b, double p) {
        if (a == b) throw std::invalid_argument("edge endpoints must differ");
        probs_[std::minmax(a, b)] = p;
    }

    const double* find(int a, int b) const {
        const auto it = probs_.find(std::minmax(a, b));
        return it == probs_.end() ? nullptr : &it->second;
    }

    std::size_t size() const { return probs_.size(); }
    const std::map<std::pair<int, int>, double>& entries() const { return probs_; }

private:
    std::map<std::pair<int, int>, double> probs_;
};

// ---- edge-probability file: {"a","b","p"} ------------------------------------

inline EdgeProbTable read_edge_probs(const std::filesystem::path& path) {
    EdgeProbTable t;
    detail::for_each_json_line(path, [&](const json& j, std::size_t line) {
        const int a = detail::int_field(j, "a", path, line);
        const int b = detail::int_field(j, "b", path, line);
        if (a == b) detail::line_error(path, line, "edge endpoints must differ");
        const double p = detail::finite_number(j, "p", path, line);
        t.set(a, b, clamp_score(p));
    });
    return t;
}

inline void write_edge_probs(const std::filesystem::path& path, const EdgeProbTable& t) {
    std::string out;
    for (const auto& [key, p] : t.entries()) {
        json j;
        j["a"] = key.first;
        j["b"] = key.second;
        j["p"] = p;
        out += j.dump();
        out += '\n';
    }
    atomic_write(path, out);
}

// Source of cross-type spatial probabilities: an explicit per-edge table, a
// geometric logistic model, or both (the table wins where it has an entry).
struct SpatialParams {
    std::optional<EdgeProbTable> table;
    std::optional<LogisticModel> model;
    int joint_count = kDefaultJointCount;
};

// Same-type pairs use box IoU; different-type pairs use the configured source.
// The result is clamped into (kScoreEps, 1 - kScoreEps).
inline double spatial_probability(const Detection& a, const Detection& b,
                                  const SpatialParams& params) {
    if (a.frame != b.frame)
        throw std::invalid_argument("spatial probability needs a within-frame pair");
    if (a.joint == b.joint) return clamp_score(iou(derive_bbox(a), derive_bbox(b)));
    if (params.table) {
        if (const double* p = params.table->find(a.id, b.id)) return clamp_score(*p);
        if (!params.model)
            throw std::runtime_error("no edge probability for detection pair (" +
                                     std::to_string(std::min(a.id, b.id)) + ", " +
                                     std::to_string(std::max(a.id, b.id)) + ")");
    }
    if (params.model) {
        const std::vector<double> f = cross_type_features(a, b, params.joint_count);
        if (static_cast<int>(f.size()) != params.model->feature_dim())
            throw std::runtime_error("spatial model dimension " +
                                     std::to_string(params.model->feature_dim()) +
                                     " does not match joint count " +
                                     std::to_string(params.joint_count));
        return clamp_score(params.model->predict(f));
    }
    throw std::runtime_error("no cross-type spatial probability source configured");
}

// ---- temporal features --------------------------------------------------------

struct TemporalFeatures {
    double match_ratio = 0.0;  // shared point matches over covered point matches
    double min_score = 0.0;
    double dx = 0.0;  // (pos(a) - pos(b)) / mean box side
    double dy = 0.0;
    double dist = 0.0;

    static constexpr int dim = 10;

    // Base features followed by their element-wise squares.
    std::vector<double> vector() const {
        return {match_ratio, min_score, dx, dy, dist,
                match_ratio * match_ratio, min_score * min_score, dx * dx, dy * dy, dist * dist};
    }
};

// The record must cover the unordered frame pair of (a, b). A matched point
// pair counts in the intersection iff its point in frame(a) lies in a's box
// and its point in frame(b) lies in b's box; it counts in the union iff either
// does. The ratio is 0 when the union is empty.
inline TemporalFeatures temporal_features(const Detection& a, const Detection& b,
                                          const Correspondence& corr) {
    if (a.frame == b.frame) throw std::invalid_argument("temporal features need distinct frames");
    const bool forward = corr.frame_a == a.frame && corr.frame_b == b.frame;
    const bool backward = corr.frame_a == b.frame && corr.frame_b == a.frame;
    if (!forward && !backward)
        throw std::invalid_argument("correspondence record covers frame pair (" +
                                    std::to_string(corr.frame_a) + ", " +
                                    std::to_string(corr.frame_b) + "), not (" +
                                    std::to_string(a.frame) + ", " + std::to_string(b.frame) + ")");
    const std::vector<Vec2>& pts_a = forward ? corr.points_a : corr.points_b;
    const std::vector<Vec2>& pts_b = forward ? corr.points_b : corr.points_a;

    const BoundingBox box_a = derive_bbox(a);
    const BoundingBox box_b = derive_bbox(b);
    long shared = 0;
    long covered = 0;
    for (std::size_t i = 0; i < pts_a.size(); ++i) {
        const bool in_a = box_a.contains(pts_a[i]);
        const bool in_b = box_b.contains(pts_b[i]);
        if (in_a && in_b) ++shared;
        if (in_a || in_b) ++covered;
    }

    TemporalFeatures f;
    f.match_ratio = covered == 0 ? 0.0 : static_cast<double>(shared) / static_cast<double>(covered);
    f.min_score = std::min(a.score, b.score);
    const double mean_side = (box_a.side + box_b.side) / 2.0;
    f.dx = (a.pos.x - b.pos.x) / mean_side;
    f.dy = (a.pos.y - b.pos.y) / mean_side;
    f.dist = std::hypot(f.dx, f.dy);
    return f;
}

// Clamped into (kScoreEps, 1 - kScoreEps) so the cost stays finite.
inline double temporal_probability(const TemporalFeatures& f, const LogisticModel& m) {
    if (m.feature_dim() != TemporalFeatures::dim)
        throw std::invalid_argument("temporal model must have dimension " +
                                    std::to_string(TemporalFeatures::dim));
    return clamp_score(m.predict(f.vector()));
}

// Costs aligned with the graph: node_cost[i] pairs with nodes[i], and likewise
// for the edge lists.
struct PotentialTable {
    std::vector<double> node_cost;
    std::vector<double> spatial_cost;
    std::vector<double> temporal_cost;
};

inline PotentialTable build_potentials(const SpatioTemporalGraph& g, const CorrespondenceSet& corr,
                                       const LogisticModel& temporal_model,
                                       const SpatialParams& spatial_params) {
    PotentialTable t;
    t.node_cost.reserve(g.nodes.size());
    for (const Detection& d : g.nodes) t.node_cost.push_back(unary_cost(d.score));
    t.spatial_cost.reserve(g.spatial_edges.size());
    for (const SpatialEdge& e : g.spatial_edges) {
        const double p = spatial_probability(g.node_by_id(e.a), g.node_by_id(e.b), spatial_params);
        t.spatial_cost.push_back(unary_cost(p));
    }
    t.temporal_cost.reserve(g.temporal_edges.size());
    for (const TemporalEdge& e : g.temporal_edges) {
        const Detection& a = g.node_by_id(e.a);
        const Detection& b = g.node_by_id(e.b);
        const TemporalFeatures f = temporal_features(a, b, corr.find(a.frame, b.frame));
        t.temporal_cost.push_back(unary_cost(temporal_probability(f, temporal_model)));
    }
    return t;
}

// ---- potentials file ----------------------------------------------------------
// Lines: {"node": id, "cost": c}, {"spatial": [a, b], "cost": c},
// {"temporal": [a, b], "cost": c}.

inline std::string potentials_to_string(const SpatioTemporalGraph& g, const PotentialTable& t) {
    if (t.node_cost.size() != g.nodes.size() || t.spatial_cost.size() != g.spatial_edges.size() ||
        t.temporal_cost.size() != g.temporal_edges.size())
        throw std::invalid_argument("potential table does not match the graph");
    std::string out;
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
        json j;
        j["node"] = g.nodes[i].id;
        j["cost"] = t.node_cost[i];
        out += j.dump();
        out += '\n';
    }
    for (std::size_t i = 0; i < g.spatial_edges.size(); ++i) {
        json j;
        j["spatial"] = {g.spatial_edges[i].a, g.spatial_edges[i].b};
        j["cost"] = t.spatial_cost[i];
        out += j.dump();
        out += '\n';
    }
    for (std::size_t i = 0; i < g.temporal_edges.size(); ++i) {
        json j;
        j["temporal"] = {g.temporal_edges[i].a, g.temporal_edges[i].b};
        j["cost"] = t.temporal_cost[i];
        out += j.dump();
        out += '\n';
    }
    return out;
}

inline void write_potentials(const std::filesystem::path& path, const SpatioTemporalGraph& g,
                             const PotentialTable& t) {
    atomic_write(path, potentials_to_string(g, t));
}

// Aligns file entries to the graph; missing or unknown entries are errors that
// name the offending nodes or edges.
inline PotentialTable read_potentials(const std::filesystem::path& path,
                                      const SpatioTemporalGraph& g) {
    PotentialTable t;
    t.node_cost.assign(g.nodes.size(), 0.0);
    t.spatial_cost.assign(g.spatial_edges.size(), 0.0);
    t.temporal_cost.assign(g.temporal_edges.size(), 0.0);
    std::vector<bool> node_seen(g.nodes.size(), false);
    std::vector<bool> spatial_seen(g.spatial_edges.size(), false);
    std::vector<bool> temporal_seen(g.temporal_edges.size(), false);

    std::map<std::pair<int, int>, std::size_t> spatial_pos;
    for (std::size_t i = 0; i < g.spatial_edges.size(); ++i)
        spatial_pos[{g.spatial_edges[i].a, g.spatial_edges[i].b}] = i;
    std::map<std::pair<int, int>, std::size_t> temporal_pos;
    for (std::size_t i = 0; i < g.temporal_edges.size(); ++i)
        temporal_pos[{g.temporal_edges[i].a, g.temporal_edges[i].b}] = i;

    detail::for_each_json_line(path, [&](const json& j, std::size_t line) {
        const double cost = detail::finite_number(j, "cost", path, line);
        if (j.contains("node")) {
            const int id = j.at("node").get<int>();
            const auto it = g.pos_by_id.find(id);
            if (it == g.pos_by_id.end())
                detail::line_error(path, line, "unknown node " + std::to_string(id));
            const auto pos = static_cast<std::size_t>(it->second);
            if (node_seen[pos])
                detail::line_error(path, line, "repeated node " + std::to_string(id));
            node_seen[pos] = true;
            t.node_cost[pos] = cost;
        } else if (j.contains("spatial") || j.contains("temporal")) {
            const bool is_spatial = j.contains("spatial");
            const json& arr = is_spatial ? j.at("spatial") : j.at("temporal");
            const std::pair<int, int> key{arr.at(0).get<int>(), arr.at(1).get<int>()};
            const auto& pos_map = is_spatial ? spatial_pos : temporal_pos;
            const auto it = pos_map.find(key);
            if (it == pos_map.end())
                detail::line_error(path, line, std::string("unknown ") +
                                                   (is_spatial ? "spatial" : "temporal") +
                                                   " edge (" + std::to_string(key.first) + ", " +
                                                   std::to_string(key.second) + ")");
            auto& seen = is_spatial ? spatial_seen : temporal_seen;
            if (seen[it->second])
                detail::line_error(path, line, "repeated edge entry");
            seen[it->second] = true;
            (is_spatial ? t.spatial_cost : t.temporal_cost)[it->second] = cost;
        } else {
            detail::line_error(path, line, "unrecognized record");
        }
    });

    std::string missing;
    for (std::size_t i = 0; i < node_seen.size(); ++i)
        if (!node_seen[i]) missing += " node " + std::to_string(g.nodes[i].id);
    for (std::size_t i = 0; i < spatial_seen.size(); ++i)
        if (!spatial_seen[i])
            missing += " spatial (" + std::to_string(g.spatial_edges[i].a) + ", " +
                       std::to_string(g.spatial_edges[i].b) + ")";
    for (std::size_t i = 0; i < temporal_seen.size(); ++i)
        if (!temporal_seen[i])
            missing += " temporal (" + std::to_string(g.temporal_edges[i].a) + ", " +
                       std::to_string(g.temporal_edges[i].b) + ")";
    if (!missing.empty())
        throw std::runtime_error(path.string() + ": missing potential entries:" + missing);
    return t;
}

}  // namespace posetrack
