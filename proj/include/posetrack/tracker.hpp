#pragma once

#include <cstdint>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "posetrack/graph.hpp"
#include "posetrack/potentials.hpp"
#include "posetrack/solver.hpp"

namespace posetrack {

struct TrackerConfig {
    int batch_size = 31;  // frames per window
    int tau = kDefaultTau;
    int min_frames = 7;          // minimum partition frame span
    double min_avg_nodes = 6.0;  // minimum members per occupied frame
    double nms_iou = kDefaultNmsIou;
    ConstraintFamilies families{};
    SolverConfig solver{};
};

inline void validate(const TrackerConfig& cfg) {
    if (cfg.batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (cfg.tau < 1) throw std::invalid_argument("tau must be >= 1");
    if (cfg.min_frames < 1) throw std::invalid_argument("min_frames must be >= 1");
    if (cfg.min_avg_nodes < 0.0) throw std::invalid_argument("min_avg_nodes must be >= 0");
    if (!(cfg.nms_iou >= 0.0 && cfg.nms_iou <= 1.0))
        throw std::invalid_argument("nms_iou must be in [0, 1]");
}

struct Partition {
    std::vector<int> members;  // detection ids, ascending

    friend bool operator==(const Partition&, const Partition&) = default;
};

struct WindowReport {
    int first_frame = 0;
    int last_frame = 0;
    int num_vars = 0;
    int num_fixed = 0;
    SolveStats solve;
};

struct TrackReport {
    std::vector<WindowReport> windows;
    int non_optimal_windows = 0;
    std::vector<int> selected_nodes;  // active detection ids, ascending
    int partitions_before_filter = 0;
    int partitions_after_filter = 0;
    std::vector<Partition> final_partitions;  // kept partitions, in track id order
};

// Connected components of the graph restricted to active nodes and active
// edges. Components are ordered by their smallest member detection id.
inline std::vector<Partition> extract_partitions(const SpatioTemporalGraph& g,
                                                 const Assignment& assignment) {
    const VarIndex index(g);
    if (assignment.values.size() != static_cast<std::size_t>(index.total()))
        throw std::invalid_argument("assignment size does not match graph variable count");

    const int n = static_cast<int>(g.nodes.size());
    std::vector<int> parent(static_cast<std::size_t>(n));
    std::iota(parent.begin(), parent.end(), 0);
    const auto find = [&](int x) {
        while (parent[static_cast<std::size_t>(x)] != x) {
            parent[static_cast<std::size_t>(x)] =
                parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
            x = parent[static_cast<std::size_t>(x)];
        }
        return x;
    };
    const auto unite = [&](int a, int b) {
        a = find(a);
        b = find(b);
        if (a != b) parent[static_cast<std::size_t>(std::max(a, b))] = std::min(a, b);
    };

    for (const SpatialEdge& e : g.spatial_edges)
        if (assignment.values[static_cast<std::size_t>(index.spatial_var(e.a, e.b))])
            unite(g.node_pos(e.a), g.node_pos(e.b));
    for (const TemporalEdge& e : g.temporal_edges)
        if (assignment.values[static_cast<std::size_t>(index.temporal_var(e.a, e.b))])
            unite(g.node_pos(e.a), g.node_pos(e.b));

    std::map<int, std::vector<int>> components;  // smallest member id -> members
    for (int pos = 0; pos < n; ++pos) {
        const int id = g.nodes[static_cast<std::size_t>(pos)].id;
        if (!assignment.values[static_cast<std::size_t>(index.node_var(id))]) continue;
        const int root_id = g.nodes[static_cast<std::size_t>(find(pos))].id;
        components[root_id].push_back(id);
    }

    std::vector<Partition> parts;
    parts.reserve(components.size());
    for (auto& [root, members] : components) {
        std::sort(members.begin(), members.end());
        parts.push_back(Partition{std::move(members)});
    }
    return parts;
}

// Collapses multiple same-frame same-type members into one joint at the
// score-weighted mean position with the maximum member score. Entries come
// back sorted by (frame, joint type).
inline std::vector<TrackEntry> merge_duplicates(const Partition& p,
                                                const std::map<int, Detection>& dets_by_id) {
    std::map<std::pair<int, int>, std::vector<const Detection*>> groups;
    for (int id : p.members) {
        const auto it = dets_by_id.find(id);
        if (it == dets_by_id.end())
            throw std::invalid_argument("partition member " + std::to_string(id) +
                                        " is not a known detection");
        groups[{it->second.frame, it->second.joint.id}].push_back(&it->second);
    }
    std::vector<TrackEntry> entries;
    entries.reserve(groups.size());
    for (const auto& [key, members] : groups) {
        double weight = 0.0;
        Vec2 sum{0.0, 0.0};
        double best = 0.0;
        for (const Detection* d : members) {
            weight += d->score;
            sum = sum + d->score * d->pos;
            best = std::max(best, d->score);
        }
        entries.push_back(
            TrackEntry{key.first, JointType{key.second}, Vec2{sum.x / weight, sum.y / weight}, best});
    }
    return entries;
}

namespace detail {

struct PartitionShape {
    int first_frame = 0;
    int span = 0;
    int distinct_frames = 0;
};

inline PartitionShape partition_shape(const Partition& p,
                                      const std::map<int, Detection>& dets_by_id) {
    PartitionShape shape;
    int lo = 0;
    int hi = 0;
    bool first = true;
    std::vector<int> frames;
    frames.reserve(p.members.size());
    for (int id : p.members) {
        const auto it = dets_by_id.find(id);
        if (it == dets_by_id.end())
            throw std::invalid_argument("partition member " + std::to_string(id) +
                                        " is not a known detection");
        const int f = it->second.frame;
        frames.push_back(f);
        lo = first ? f : std::min(lo, f);
        hi = first ? f : std::max(hi, f);
        first = false;
    }
    std::sort(frames.begin(), frames.end());
    frames.erase(std::unique(frames.begin(), frames.end()), frames.end());
    shape.first_frame = lo;
    shape.span = hi - lo + 1;
    shape.distinct_frames = static_cast<int>(frames.size());
    return shape;
}

}  // namespace detail

// Keeps a partition iff its frame span (max - min + 1) reaches min_frames and
// its member count per occupied frame reaches min_avg_nodes, both inclusive.
inline std::vector<Partition> filter_partitions(const std::vector<Partition>& parts,
                                                const std::map<int, Detection>& dets_by_id,
                                                const TrackerConfig& cfg) {
    std::vector<Partition> kept;
    for (const Partition& p : parts) {
        if (p.members.empty()) continue;
        const detail::PartitionShape shape = detail::partition_shape(p, dets_by_id);
        const double avg =
            static_cast<double>(p.members.size()) / static_cast<double>(shape.distinct_frames);
        if (shape.span >= cfg.min_frames && avg >= cfg.min_avg_nodes) kept.push_back(p);
    }
    return kept;
}

namespace detail {

// Cost lookup tables keyed by detection id so window instances reuse the
// full-graph potentials bit for bit.
struct CostLookup {
    std::unordered_map<int, double> node;
    std::unordered_map<std::uint64_t, double> spatial;
    std::unordered_map<std::uint64_t, double> temporal;

    static std::uint64_t key(int a, int b) {
        return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
               static_cast<std::uint32_t>(b);
    }

    CostLookup(const SpatioTemporalGraph& g, const PotentialTable& pot) {
        for (std::size_t i = 0; i < g.nodes.size(); ++i) node[g.nodes[i].id] = pot.node_cost[i];
        for (std::size_t i = 0; i < g.spatial_edges.size(); ++i)
            spatial[key(g.spatial_edges[i].a, g.spatial_edges[i].b)] = pot.spatial_cost[i];
        for (std::size_t i = 0; i < g.temporal_edges.size(); ++i)
            temporal[key(g.temporal_edges[i].a, g.temporal_edges[i].b)] = pot.temporal_cost[i];
    }

    PotentialTable table_for(const SpatioTemporalGraph& g) const {
        PotentialTable t;
        t.node_cost.reserve(g.nodes.size());
        for (const Detection& d : g.nodes) t.node_cost.push_back(node.at(d.id));
        t.spatial_cost.reserve(g.spatial_edges.size());
        for (const SpatialEdge& e : g.spatial_edges) t.spatial_cost.push_back(spatial.at(key(e.a, e.b)));
        t.temporal_cost.reserve(g.temporal_edges.size());
        for (const TemporalEdge& e : g.temporal_edges)
            t.temporal_cost.push_back(temporal.at(key(e.a, e.b)));
        return t;
    }
};

// Global decided values addressed by the full-graph variable index. Windows
// write every variable they solve; fixed variables must agree.
class GlobalAssignment {
public:
    explicit GlobalAssignment(int total) : values_(static_cast<std::size_t>(total), -1) {}

    void record(int var, std::uint8_t value) {
        std::int8_t& slot = values_[static_cast<std::size_t>(var)];
        if (slot >= 0 && slot != static_cast<std::int8_t>(value))
            throw std::logic_error("window solutions disagree on a shared variable");
        slot = static_cast<std::int8_t>(value);
    }

    bool decided(int var) const { return values_[static_cast<std::size_t>(var)] >= 0; }
    std::uint8_t value(int var) const {
        const std::int8_t v = values_[static_cast<std::size_t>(var)];
        if (v < 0) throw std::logic_error("variable not decided yet");
        return static_cast<std::uint8_t>(v);
    }

    std::vector<std::uint8_t> finish() const {
        std::vector<std::uint8_t> out(values_.size());
        for (std::size_t i = 0; i < values_.size(); ++i) {
            if (values_[i] < 0) throw std::logic_error("variable left undecided by windowing");
            out[i] = static_cast<std::uint8_t>(values_[i]);
        }
        return out;
    }

private:
    std::vector<std::int8_t> values_;
};

}  // namespace detail

// Full pipeline: suppress overlapping detections, then process frames in
// windows of batch_size. Each window's instance holds its own frames'
// detections plus every already-decided detection within the trailing tau
// frames, fixed to its decided value (selected 1, rejected 0), along with the
// edges among those carried detections fixed the same way. New temporal edges
// tie carried nodes to the window's detections. After the last window the
// accumulated assignment is decoded into partitions, duplicates are merged,
// short or sparse partitions are dropped, and track ids are assigned by first
// frame (ties: smallest member detection id).
inline PoseTracks track(const std::vector<Detection>& raw_dets, const CorrespondenceSet& corr,
                        const LogisticModel& temporal_model, const SpatialParams& spatial_params,
                        const TrackerConfig& cfg = {}, TrackReport* report = nullptr) {
    validate(cfg);
    if (report != nullptr) *report = TrackReport{};

    const std::vector<Detection> dets = nms(raw_dets, cfg.nms_iou);
    if (dets.empty()) return PoseTracks{};

    std::map<int, Detection> dets_by_id;
    for (const Detection& d : dets) dets_by_id.emplace(d.id, d);

    const SpatioTemporalGraph full = build_graph(dets, cfg.tau);
    const PotentialTable full_pot = build_potentials(full, corr, temporal_model, spatial_params);
    const VarIndex full_index(full);
    const detail::CostLookup costs(full, full_pot);
    detail::GlobalAssignment global(full_index.total());

    int lo_frame = dets.front().frame;
    int hi_frame = dets.front().frame;
    for (const Detection& d : dets) {
        lo_frame = std::min(lo_frame, d.frame);
        hi_frame = std::max(hi_frame, d.frame);
    }

    for (int win_lo = lo_frame; win_lo <= hi_frame; win_lo += cfg.batch_size) {
        const int win_hi = win_lo + cfg.batch_size - 1;  // inclusive
        std::vector<Detection> instance_dets;
        bool any_own = false;
        for (const Detection& d : dets) {
            if (d.frame >= win_lo - cfg.tau && d.frame < win_lo)
                instance_dets.push_back(d);  // carried, already decided
            else if (d.frame >= win_lo && d.frame <= win_hi) {
                instance_dets.push_back(d);
                any_own = true;
            }
        }
        if (!any_own) continue;

        const SpatioTemporalGraph g = build_graph(instance_dets, cfg.tau);
        const PotentialTable pot = costs.table_for(g);
        const VarIndex index(g);

        const auto carried = [&](int id) { return dets_by_id.at(id).frame < win_lo; };
        std::vector<std::pair<int, int>> fixed;
        for (const Detection& d : g.nodes)
            if (carried(d.id))
                fixed.emplace_back(index.node_var(d.id),
                                   global.value(full_index.node_var(d.id)));
        for (const SpatialEdge& e : g.spatial_edges)
            if (carried(e.a) && carried(e.b))
                fixed.emplace_back(index.spatial_var(e.a, e.b),
                                   global.value(full_index.spatial_var(e.a, e.b)));
        for (const TemporalEdge& e : g.temporal_edges)
            if (carried(e.a) && carried(e.b))
                fixed.emplace_back(index.temporal_var(e.a, e.b),
                                   global.value(full_index.temporal_var(e.a, e.b)));

        const IlpInstance inst = build_instance(g, pot, fixed, cfg.families);
        SolveStats solve_stats;
        const Assignment a = solve(inst, cfg.solver, &solve_stats);

        for (const Detection& d : g.nodes)
            global.record(full_index.node_var(d.id),
                          a.values[static_cast<std::size_t>(index.node_var(d.id))]);
        for (const SpatialEdge& e : g.spatial_edges)
            global.record(full_index.spatial_var(e.a, e.b),
                          a.values[static_cast<std::size_t>(index.spatial_var(e.a, e.b))]);
        for (const TemporalEdge& e : g.temporal_edges)
            global.record(full_index.temporal_var(e.a, e.b),
                          a.values[static_cast<std::size_t>(index.temporal_var(e.a, e.b))]);

        if (report != nullptr) {
            WindowReport w;
            w.first_frame = win_lo;
            w.last_frame = std::min(win_hi, hi_frame);
            w.num_vars = index.total();
            w.num_fixed = static_cast<int>(fixed.size());
            w.solve = solve_stats;
            report->windows.push_back(w);
            if (!solve_stats.proven_optimal) ++report->non_optimal_windows;
        }
    }

    Assignment final_assignment;
    final_assignment.values = global.finish();
    {
        double obj = 0.0;
        for (std::size_t i = 0; i < final_assignment.values.size(); ++i)
            if (final_assignment.values[i]) obj += [&] {
                const int var = static_cast<int>(i);
                if (var < full_index.num_nodes())
                    return full_pot.node_cost[i];
                if (var < full_index.num_nodes() + full_index.num_spatial())
                    return full_pot.spatial_cost[i - static_cast<std::size_t>(full_index.num_nodes())];
                return full_pot.temporal_cost[i - static_cast<std::size_t>(full_index.num_nodes()) -
                                              static_cast<std::size_t>(full_index.num_spatial())];
            }();
        final_assignment.objective = obj;
    }

    const std::vector<Partition> parts = extract_partitions(full, final_assignment);
    const std::vector<Partition> kept = filter_partitions(parts, dets_by_id, cfg);
    if (report != nullptr) {
        report->partitions_before_filter = static_cast<int>(parts.size());
        report->partitions_after_filter = static_cast<int>(kept.size());
        for (const Detection& d : full.nodes)
            if (final_assignment.values[static_cast<std::size_t>(full_index.node_var(d.id))])
                report->selected_nodes.push_back(d.id);
        std::sort(report->selected_nodes.begin(), report->selected_nodes.end());
    }

    // Track ids in order of first frame, ties by smallest member detection id.
    std::vector<std::pair<std::pair<int, int>, const Partition*>> ordered;
    ordered.reserve(kept.size());
    for (const Partition& p : kept) {
        const detail::PartitionShape shape = detail::partition_shape(p, dets_by_id);
        ordered.push_back({{shape.first_frame, p.members.front()}, &p});
    }
    std::sort(ordered.begin(), ordered.end(),
              [](const auto& x, const auto& y) { return x.first < y.first; });

    PoseTracks out;
    int next_id = 0;
    for (const auto& [key, part] : ordered) {
        Track t;
        t.track_id = next_id++;
        t.entries = merge_duplicates(*part, dets_by_id);
        out.tracks.push_back(std::move(t));
        if (report != nullptr) report->final_partitions.push_back(*part);
    }
    return out;
}

}  // namespace posetrack
