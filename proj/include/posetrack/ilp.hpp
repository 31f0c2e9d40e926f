#pragma once

#include <cstdint>
#include <map>
#include <ostream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "posetrack/graph.hpp"
#include "posetrack/potentials.hpp"

namespace posetrack {

enum class ConstraintKind {
    coupling_spatial,
    coupling_temporal,
    transitivity_spatial,
    transitivity_temporal,
    transitivity_spatio_temporal,
    consistency_spatio_temporal,
};

// Row of the form sum(coef * var) <= rhs with coefficients in {-1, +1}.
struct Constraint {
    ConstraintKind kind = ConstraintKind::coupling_spatial;
    std::vector<std::pair<int, int>> terms;  // (variable, coefficient)
    int rhs = 0;
};

// Coupling rows are always generated; the closure families can be toggled for
// ablation runs.
struct ConstraintFamilies {
    bool transitivity_spatial = true;
    bool transitivity_temporal = true;
    bool transitivity_spatio_temporal = true;
    bool consistency_spatio_temporal = true;
};

// Contiguous variable layout: node variables first (graph node order), then
// spatial edges, then temporal edges, both in canonical graph order.
class VarIndex {
public:
    VarIndex() = default;

    explicit VarIndex(const SpatioTemporalGraph& g) {
        num_nodes_ = static_cast<int>(g.nodes.size());
        num_spatial_ = static_cast<int>(g.spatial_edges.size());
        num_temporal_ = static_cast<int>(g.temporal_edges.size());
        int max_id = -1;
        for (const Detection& d : g.nodes) max_id = std::max(max_id, d.id);
        node_var_by_id_.assign(static_cast<std::size_t>(max_id + 1), -1);
        for (int i = 0; i < num_nodes_; ++i)
            node_var_by_id_[static_cast<std::size_t>(g.nodes[static_cast<std::size_t>(i)].id)] = i;
        spatial_by_pair_.reserve(static_cast<std::size_t>(num_spatial_));
        for (int i = 0; i < num_spatial_; ++i) {
            const SpatialEdge& e = g.spatial_edges[static_cast<std::size_t>(i)];
            spatial_by_pair_.emplace(pair_key(e.a, e.b), num_nodes_ + i);
        }
        temporal_by_pair_.reserve(static_cast<std::size_t>(num_temporal_));
        for (int i = 0; i < num_temporal_; ++i) {
            const TemporalEdge& e = g.temporal_edges[static_cast<std::size_t>(i)];
            temporal_by_pair_.emplace(pair_key(e.a, e.b), num_nodes_ + num_spatial_ + i);
        }
    }

    int node_var(int detection_id) const {
        if (detection_id < 0 || detection_id >= static_cast<int>(node_var_by_id_.size()) ||
            node_var_by_id_[static_cast<std::size_t>(detection_id)] < 0)
            throw std::out_of_range("unknown detection id " + std::to_string(detection_id));
        return node_var_by_id_[static_cast<std::size_t>(detection_id)];
    }

    int spatial_var(int a, int b) const {
        const auto it = spatial_by_pair_.find(pair_key(a, b));
        if (it == spatial_by_pair_.end())
            throw std::out_of_range("unknown spatial edge (" + std::to_string(a) + ", " +
                                    std::to_string(b) + ")");
        return it->second;
    }

    int temporal_var(int a, int b) const {
        const auto it = temporal_by_pair_.find(pair_key(a, b));
        if (it == temporal_by_pair_.end())
            throw std::out_of_range("unknown temporal edge (" + std::to_string(a) + ", " +
                                    std::to_string(b) + ")");
        return it->second;
    }

    int num_nodes() const { return num_nodes_; }
    int num_spatial() const { return num_spatial_; }
    int num_temporal() const { return num_temporal_; }
    int total() const { return num_nodes_ + num_spatial_ + num_temporal_; }

private:
    static std::uint64_t pair_key(int a, int b) {
        if (a > b) std::swap(a, b);
        return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
               static_cast<std::uint32_t>(b);
    }

    int num_nodes_ = 0;
    int num_spatial_ = 0;
    int num_temporal_ = 0;
    std::vector<int> node_var_by_id_;
    std::unordered_map<std::uint64_t, int> spatial_by_pair_;
    std::unordered_map<std::uint64_t, int> temporal_by_pair_;
};

// Groupings shared by the constraint enumerators; holds ids only, so instances
// copy safely.
struct ConstraintCache {
    std::vector<std::vector<int>> frame_nodes;                     // per frame: ids ascending
    std::vector<std::pair<int, std::vector<int>>> type_nodes;      // per type: ids by (frame, id)
    std::map<std::pair<int, int>, std::vector<int>> type_frame;    // (type, frame) -> ids ascending
    std::vector<std::vector<int>> frame_pair_edges;                // temporal edge positions per (fa, fb)

    ConstraintCache() = default;

    explicit ConstraintCache(const SpatioTemporalGraph& g) {
        std::map<int, std::vector<int>> by_frame;
        std::map<int, std::vector<int>> by_type;
        for (const Detection& d : g.nodes) {
            by_frame[d.frame].push_back(d.id);
            by_type[d.joint.id].push_back(d.id);  // nodes are already (frame, id) sorted
            type_frame[{d.joint.id, d.frame}].push_back(d.id);
        }
        for (auto& [frame, ids] : by_frame) {
            std::sort(ids.begin(), ids.end());
            frame_nodes.push_back(std::move(ids));
        }
        for (auto& [type, ids] : by_type) type_nodes.emplace_back(type, std::move(ids));
        for (auto& [key, ids] : type_frame) std::sort(ids.begin(), ids.end());

        std::map<std::pair<int, int>, std::vector<int>> by_pair;
        for (std::size_t i = 0; i < g.temporal_edges.size(); ++i) {
            const TemporalEdge& e = g.temporal_edges[i];
            by_pair[{g.node_by_id(e.a).frame, g.node_by_id(e.b).frame}].push_back(static_cast<int>(i));
        }
        for (auto& [key, positions] : by_pair) frame_pair_edges.push_back(std::move(positions));
    }
};

struct IlpInstance {
    SpatioTemporalGraph graph;
    VarIndex index;
    std::vector<double> costs;                  // indexed by variable
    std::vector<std::pair<int, int>> fixed;     // (variable, value in {0, 1})
    ConstraintFamilies families;
    ConstraintCache cache;
};

inline IlpInstance build_instance(const SpatioTemporalGraph& g, const PotentialTable& pot,
                                  std::vector<std::pair<int, int>> fixed = {},
                                  ConstraintFamilies families = {}) {
    if (pot.node_cost.size() != g.nodes.size() || pot.spatial_cost.size() != g.spatial_edges.size() ||
        pot.temporal_cost.size() != g.temporal_edges.size())
        throw std::invalid_argument(
            "potential table does not match the graph: nodes " + std::to_string(pot.node_cost.size()) +
            "/" + std::to_string(g.nodes.size()) + ", spatial " +
            std::to_string(pot.spatial_cost.size()) + "/" + std::to_string(g.spatial_edges.size()) +
            ", temporal " + std::to_string(pot.temporal_cost.size()) + "/" +
            std::to_string(g.temporal_edges.size()));
    IlpInstance inst;
    inst.graph = g;
    inst.index = VarIndex(inst.graph);
    inst.costs.reserve(static_cast<std::size_t>(inst.index.total()));
    inst.costs.insert(inst.costs.end(), pot.node_cost.begin(), pot.node_cost.end());
    inst.costs.insert(inst.costs.end(), pot.spatial_cost.begin(), pot.spatial_cost.end());
    inst.costs.insert(inst.costs.end(), pot.temporal_cost.begin(), pot.temporal_cost.end());
    inst.families = families;
    inst.cache = ConstraintCache(inst.graph);
    for (const auto& [var, value] : fixed) {
        if (var < 0 || var >= inst.index.total())
            throw std::invalid_argument("fixed variable " + std::to_string(var) + " out of range");
        if (value != 0 && value != 1)
            throw std::invalid_argument("fixed value must be 0 or 1");
    }
    inst.fixed = std::move(fixed);
    return inst;
}

namespace detail {

// Enumerators visit rows in a fixed canonical order and stop early when the
// callback returns false. The Constraint buffer is reused between rows.

template <class F>
bool emit_row(Constraint& row, ConstraintKind kind, std::initializer_list<std::pair<int, int>> terms,
              int rhs, F&& f) {
    row.kind = kind;
    row.terms.assign(terms);
    row.rhs = rhs;
    return f(static_cast<const Constraint&>(row));
}

template <class F>
bool each_coupling(const SpatioTemporalGraph& g, const VarIndex& idx, F&& f) {
    Constraint row;
    for (const SpatialEdge& e : g.spatial_edges) {
        const int s = idx.spatial_var(e.a, e.b);
        if (!emit_row(row, ConstraintKind::coupling_spatial, {{s, 1}, {idx.node_var(e.a), -1}}, 0, f))
            return false;
        if (!emit_row(row, ConstraintKind::coupling_spatial, {{s, 1}, {idx.node_var(e.b), -1}}, 0, f))
            return false;
    }
    for (const TemporalEdge& e : g.temporal_edges) {
        const int t = idx.temporal_var(e.a, e.b);
        if (!emit_row(row, ConstraintKind::coupling_temporal, {{t, 1}, {idx.node_var(e.a), -1}}, 0, f))
            return false;
        if (!emit_row(row, ConstraintKind::coupling_temporal, {{t, 1}, {idx.node_var(e.b), -1}}, 0, f))
            return false;
    }
    return true;
}

// Three rotations of the triangle inequality on edges (x, y), (y, z), (x, z).
template <class F>
bool emit_triangle(Constraint& row, ConstraintKind kind, int e_xy, int e_yz, int e_xz, F&& f) {
    if (!emit_row(row, kind, {{e_xy, 1}, {e_yz, 1}, {e_xz, -1}}, 1, f)) return false;
    if (!emit_row(row, kind, {{e_xy, 1}, {e_xz, 1}, {e_yz, -1}}, 1, f)) return false;
    if (!emit_row(row, kind, {{e_yz, 1}, {e_xz, 1}, {e_xy, -1}}, 1, f)) return false;
    return true;
}

template <class F>
bool each_transitivity_spatial(const VarIndex& idx, const ConstraintCache& cache, F&& f) {
    Constraint row;
    for (const std::vector<int>& ids : cache.frame_nodes) {
        const std::size_t n = ids.size();
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j)
                for (std::size_t k = j + 1; k < n; ++k) {
                    const int ab = idx.spatial_var(ids[i], ids[j]);
                    const int bc = idx.spatial_var(ids[j], ids[k]);
                    const int ac = idx.spatial_var(ids[i], ids[k]);
                    if (!emit_triangle(row, ConstraintKind::transitivity_spatial, ab, bc, ac, f))
                        return false;
                }
    }
    return true;
}

template <class F>
bool each_transitivity_temporal(const SpatioTemporalGraph& g, const VarIndex& idx,
                                const ConstraintCache& cache, F&& f) {
    Constraint row;
    for (const auto& [type, ids] : cache.type_nodes) {
        const std::size_t n = ids.size();
        for (std::size_t i = 0; i < n; ++i) {
            const int fi = g.node_by_id(ids[i]).frame;
            for (std::size_t j = i + 1; j < n; ++j) {
                const int fj = g.node_by_id(ids[j]).frame;
                if (fj == fi) continue;
                if (fj - fi > g.tau - 1) break;  // ids are (frame, id) sorted
                for (std::size_t k = j + 1; k < n; ++k) {
                    const int fk = g.node_by_id(ids[k]).frame;
                    if (fk == fj) continue;
                    if (fk - fi > g.tau) break;
                    const int ab = idx.temporal_var(ids[i], ids[j]);
                    const int bc = idx.temporal_var(ids[j], ids[k]);
                    const int ac = idx.temporal_var(ids[i], ids[k]);
                    if (!emit_triangle(row, ConstraintKind::transitivity_temporal, ab, bc, ac, f))
                        return false;
                }
            }
        }
    }
    return true;
}

template <class F>
bool each_transitivity_spatio_temporal(const SpatioTemporalGraph& g, const VarIndex& idx,
                                       const ConstraintCache& cache, F&& f) {
    Constraint row;
    for (const Detection& d : g.nodes) {
        for (int other = d.frame - g.tau; other <= d.frame + g.tau; ++other) {
            if (other == d.frame) continue;
            const auto it = cache.type_frame.find({d.joint.id, other});
            if (it == cache.type_frame.end()) continue;
            const std::vector<int>& peers = it->second;
            for (std::size_t i = 0; i < peers.size(); ++i)
                for (std::size_t j = i + 1; j < peers.size(); ++j) {
                    const int t1 = idx.temporal_var(d.id, peers[i]);
                    const int t2 = idx.temporal_var(d.id, peers[j]);
                    const int s = idx.spatial_var(peers[i], peers[j]);
                    if (!emit_triangle(row, ConstraintKind::transitivity_spatio_temporal, t1, t2, s, f))
                        return false;
                }
        }
    }
    return true;
}

template <class F>
bool each_consistency(const SpatioTemporalGraph& g, const VarIndex& idx,
                      const ConstraintCache& cache, F&& f) {
    Constraint row;
    for (const std::vector<int>& group : cache.frame_pair_edges) {
        for (std::size_t i = 0; i < group.size(); ++i) {
            const TemporalEdge& e1 = g.temporal_edges[static_cast<std::size_t>(group[i])];
            for (std::size_t j = i + 1; j < group.size(); ++j) {
                const TemporalEdge& e2 = g.temporal_edges[static_cast<std::size_t>(group[j])];
                if (e1.a == e2.a || e1.b == e2.b) continue;
                const int t1 = idx.temporal_var(e1.a, e1.b);
                const int t2 = idx.temporal_var(e2.a, e2.b);
                const int s_src = idx.spatial_var(e1.a, e2.a);
                const int s_dst = idx.spatial_var(e1.b, e2.b);
                if (!emit_row(row, ConstraintKind::consistency_spatio_temporal,
                              {{t1, 1}, {t2, 1}, {s_src, 1}, {s_dst, -1}}, 2, f))
                    return false;
                if (!emit_row(row, ConstraintKind::consistency_spatio_temporal,
                              {{t1, 1}, {t2, 1}, {s_dst, 1}, {s_src, -1}}, 2, f))
                    return false;
            }
        }
    }
    return true;
}

}  // namespace detail

// Visits enabled constraint families in the fixed order: coupling (spatial,
// temporal), spatial transitivity, temporal transitivity, spatio-temporal
// transitivity, spatio-temporal consistency. Stops when f returns false.
template <class F>
bool for_each_constraint(const IlpInstance& inst, F&& f) {
    if (!detail::each_coupling(inst.graph, inst.index, f)) return false;
    if (inst.families.transitivity_spatial &&
        !detail::each_transitivity_spatial(inst.index, inst.cache, f))
        return false;
    if (inst.families.transitivity_temporal &&
        !detail::each_transitivity_temporal(inst.graph, inst.index, inst.cache, f))
        return false;
    if (inst.families.transitivity_spatio_temporal &&
        !detail::each_transitivity_spatio_temporal(inst.graph, inst.index, inst.cache, f))
        return false;
    if (inst.families.consistency_spatio_temporal &&
        !detail::each_consistency(inst.graph, inst.index, inst.cache, f))
        return false;
    return true;
}

namespace detail {

template <class Each>
std::vector<Constraint> materialize(Each&& each) {
    std::vector<Constraint> out;
    each([&](const Constraint& c) {
        out.push_back(c);
        return true;
    });
    return out;
}

}  // namespace detail

inline std::vector<Constraint> coupling_constraints(const SpatioTemporalGraph& g) {
    const VarIndex idx(g);
    return detail::materialize([&](auto&& f) { return detail::each_coupling(g, idx, f); });
}

inline std::vector<Constraint> transitivity_spatial(const SpatioTemporalGraph& g) {
    const VarIndex idx(g);
    const ConstraintCache cache(g);
    return detail::materialize(
        [&](auto&& f) { return detail::each_transitivity_spatial(idx, cache, f); });
}

inline std::vector<Constraint> transitivity_temporal(const SpatioTemporalGraph& g) {
    const VarIndex idx(g);
    const ConstraintCache cache(g);
    return detail::materialize(
        [&](auto&& f) { return detail::each_transitivity_temporal(g, idx, cache, f); });
}

inline std::vector<Constraint> transitivity_spatio_temporal(const SpatioTemporalGraph& g) {
    const VarIndex idx(g);
    const ConstraintCache cache(g);
    return detail::materialize(
        [&](auto&& f) { return detail::each_transitivity_spatio_temporal(g, idx, cache, f); });
}

inline std::vector<Constraint> consistency_spatio_temporal(const SpatioTemporalGraph& g) {
    const VarIndex idx(g);
    const ConstraintCache cache(g);
    return detail::materialize([&](auto&& f) { return detail::each_consistency(g, idx, cache, f); });
}

inline std::vector<Constraint> all_constraints(const IlpInstance& inst) {
    return detail::materialize([&](auto&& f) { return for_each_constraint(inst, f); });
}

inline bool constraint_satisfied(const Constraint& c, const std::vector<std::uint8_t>& values) {
    int lhs = 0;
    for (const auto& [var, coef] : c.terms) lhs += coef * static_cast<int>(values[static_cast<std::size_t>(var)]);
    return lhs <= c.rhs;
}

// Scans families in canonical order and returns the first violated rows, up to
// limit. An empty result means the assignment satisfies every enabled row.
inline std::vector<Constraint> violated_constraints(const IlpInstance& inst,
                                                    const std::vector<std::uint8_t>& values,
                                                    std::size_t limit) {
    if (values.size() != static_cast<std::size_t>(inst.index.total()))
        throw std::invalid_argument("assignment size does not match variable count");
    std::vector<Constraint> out;
    if (limit == 0) return out;
    for_each_constraint(inst, [&](const Constraint& c) {
        if (!constraint_satisfied(c, values)) {
            out.push_back(c);
            if (out.size() >= limit) return false;
        }
        return true;
    });
    return out;
}

// Plain-text LP dump: objective, materialized rows, fixed-variable bounds, and
// binary declarations. Intended for debugging and external solvers.
inline void write_lp(const IlpInstance& inst, std::ostream& os) {
    const auto coef_str = [](double c) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.17g", c);
        return std::string(buf);
    };
    os << "Minimize\n obj:";
    for (int v = 0; v < inst.index.total(); ++v) {
        const double c = inst.costs[static_cast<std::size_t>(v)];
        os << (c < 0 ? " - " : " + ") << coef_str(std::abs(c)) << " x" << v;
    }
    os << "\nSubject To\n";
    std::size_t row_id = 0;
    for_each_constraint(inst, [&](const Constraint& c) {
        os << " r" << row_id++ << ":";
        for (const auto& [var, coef] : c.terms) os << (coef < 0 ? " - " : " + ") << "x" << var;
        os << " <= " << c.rhs << "\n";
        return true;
    });
    if (!inst.fixed.empty()) {
        os << "Bounds\n";
        for (const auto& [var, value] : inst.fixed) os << " x" << var << " = " << value << "\n";
    }
    os << "Binaries\n";
    for (int v = 0; v < inst.index.total(); ++v) os << " x" << v;
    os << "\nEnd\n";
}

}  // namespace posetrack
