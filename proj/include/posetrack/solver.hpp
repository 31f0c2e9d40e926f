#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <chrono>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "posetrack/ilp.hpp"

namespace posetrack {

struct Assignment {
    std::vector<std::uint8_t> values;  // indexed by variable
    double objective = 0.0;

    friend bool operator==(const Assignment&, const Assignment&) = default;
};

struct SolverConfig {
    double time_limit_seconds = 0.0;  // 0 disables the limit
    std::int64_t node_limit = 0;      // 0 disables the limit
    int separation_batch = 512;       // violated rows added per separation round
};

struct SolveStats {
    std::int64_t nodes_explored = 0;
    std::int64_t constraints_added = 0;
    double wall_time_seconds = 0.0;
    bool proven_optimal = false;
};

// Index-ordered dot product; solve and brute_force both report objectives
// through this exact summation so their results are comparable bit for bit.
inline double objective_value(const IlpInstance& inst, const std::vector<std::uint8_t>& values) {
    if (values.size() != static_cast<std::size_t>(inst.index.total()))
        throw std::invalid_argument("assignment size does not match variable count");
    double obj = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i)
        if (values[i]) obj += inst.costs[i];
    return obj;
}

// True iff values are binary, fixed variables hold their values, and every
// enabled constraint row is satisfied.
inline bool check(const IlpInstance& inst, const Assignment& a) {
    if (a.values.size() != static_cast<std::size_t>(inst.index.total())) return false;
    for (std::uint8_t v : a.values)
        if (v > 1) return false;
    for (const auto& [var, value] : inst.fixed)
        if (a.values[static_cast<std::size_t>(var)] != value) return false;
    return for_each_constraint(inst, [&](const Constraint& c) { return constraint_satisfied(c, a.values); });
}

struct BruteForceResult {
    Assignment best;
    std::int64_t feasible_count = 0;
};

// Exhaustive reference solver for instances with at most 24 variables. Ties on
// the objective keep the lexicographically smallest bit vector.
inline BruteForceResult brute_force(const IlpInstance& inst) {
    const int n = inst.index.total();
    if (n > 24) throw std::invalid_argument("brute force supports at most 24 variables, got " +
                                            std::to_string(n));

    // Every row has coefficients in {-1, +1}, so it is violated exactly when
    // all +1 variables are 1 and all -1 variables are 0.
    struct MaskRow {
        std::uint32_t pos = 0;
        std::uint32_t neg = 0;
    };
    std::vector<MaskRow> rows;
    for_each_constraint(inst, [&](const Constraint& c) {
        int max_lhs = 0;
        MaskRow r;
        for (const auto& [var, coef] : c.terms) {
            max_lhs += coef > 0 ? 1 : 0;
            (coef > 0 ? r.pos : r.neg) |= 1u << var;
        }
        if (max_lhs > c.rhs) rows.push_back(r);  // rows no assignment can violate are dropped
        return true;
    });

    std::uint32_t care = 0;
    std::uint32_t want = 0;
    for (const auto& [var, value] : inst.fixed) {
        care |= 1u << var;
        if (value == 1) want |= 1u << var;
    }

    BruteForceResult result;
    double best_obj = std::numeric_limits<double>::infinity();
    std::uint32_t best_bits = 0;
    bool found = false;

    const std::uint64_t limit = std::uint64_t{1} << n;
    for (std::uint64_t a64 = 0; a64 < limit; ++a64) {
        const auto a = static_cast<std::uint32_t>(a64);
        if ((a & care) != want) continue;
        bool feasible = true;
        for (const MaskRow& r : rows) {
            if ((a & r.pos) == r.pos && (a & r.neg) == 0) {
                feasible = false;
                break;
            }
        }
        if (!feasible) continue;
        ++result.feasible_count;
        double obj = 0.0;
        for (int i = 0; i < n; ++i)
            if (a & (1u << i)) obj += inst.costs[static_cast<std::size_t>(i)];
        bool better = obj < best_obj;
        if (!better && found && obj == best_obj && a != best_bits) {
            // Lexicographic order over values[0..n): the vector with 0 at the
            // first differing index is smaller.
            const std::uint32_t diff = a ^ best_bits;
            const int first = std::countr_zero(diff);
            better = (a & (1u << first)) == 0;
        }
        if (!found || better) {
            found = true;
            best_obj = obj;
            best_bits = a;
        }
    }
    if (!found) throw std::runtime_error("no feasible assignment exists for the fixed set");

    result.best.values.assign(static_cast<std::size_t>(n), 0);
    for (int i = 0; i < n; ++i)
        if (best_bits & (1u << i)) result.best.values[static_cast<std::size_t>(i)] = 1;
    result.best.objective = objective_value(inst, result.best.values);
    return result;
}

namespace detail {

// Depth-first branch and bound with structural coupling propagation and unit
// propagation over the active row set, wrapped in separation rounds: each
// round solves to optimality against the rows collected so far, then scans all
// enabled families at that single optimum. A clean scan proves global
// optimality (the active set is a relaxation); otherwise the violated rows
// join the active set and the search restarts. Each round propagates every
// active row from the root, so no round can terminate at a candidate that
// violates an already-active row.
class BranchAndBound {
public:
    BranchAndBound(const IlpInstance& inst, const SolverConfig& cfg) : inst_(inst), cfg_(cfg) {
        n_ = inst.index.total();
        values_.assign(static_cast<std::size_t>(n_), -1);
        order_.resize(static_cast<std::size_t>(n_));
        for (int i = 0; i < n_; ++i) order_[static_cast<std::size_t>(i)] = i;
        std::sort(order_.begin(), order_.end(), [&](int a, int b) {
            const double ca = inst_.costs[static_cast<std::size_t>(a)];
            const double cb = inst_.costs[static_cast<std::size_t>(b)];
            if (ca != cb) return ca < cb;
            return a < b;
        });
        neg_free_ = 0.0;
        for (int i = 0; i < n_; ++i) {
            const double c = inst_.costs[static_cast<std::size_t>(i)];
            if (c < 0.0) neg_free_ += c;
        }
        build_adjacency();
        rows_by_var_.assign(static_cast<std::size_t>(n_), {});
    }

    Assignment run(SolveStats* stats) {
        start_ = std::chrono::steady_clock::now();
        stopped_ = false;

        if (!apply_fixed()) throw std::runtime_error("infeasible fixed assignments");
        if (!inst_.fixed.empty()) ensure_completable();

        Assignment result;
        bool have_result = false;
        bool proven = false;
        while (!have_result) {
            // Re-propagate the root state against rows added last round; the
            // resulting assignments are permanent for the whole round.
            qhead_ = 0;
            if (!propagate()) throw std::runtime_error("infeasible fixed assignments");
            root_mark_ = trail_.size();

            init_round_incumbent();
            dfs();
            if (stopped_) {
                // Anytime behavior: fall back to the best fully verified
                // feasible assignment known so far.
                if (has_incumbent_ && fully_feasible(incumbent_)) {
                    result.values = incumbent_;
                    have_result = true;
                } else if (have_fallback_) {
                    result.values = fallback_;
                    have_result = true;
                } else {
                    throw std::runtime_error("no feasible assignment found within limits");
                }
                break;
            }
            if (!has_incumbent_)
                throw std::runtime_error("no feasible assignment exists for the fixed set");

            violated_.clear();
            for_each_constraint(inst_, [&](const Constraint& c) {
                if (!constraint_satisfied(c, incumbent_)) {
                    violated_.push_back(c);
                    if (violated_.size() >= static_cast<std::size_t>(cfg_.separation_batch))
                        return false;
                }
                return true;
            });
            if (violated_.empty()) {
                result.values = incumbent_;
                have_result = true;
                proven = true;
            } else {
                for (const Constraint& c : violated_) add_active_row(c);
            }
        }

        if (stats != nullptr) {
            stats->nodes_explored = nodes_;
            stats->constraints_added = static_cast<std::int64_t>(active_.size());
            stats->proven_optimal = proven;
            const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - start_;
            stats->wall_time_seconds = dt.count();
        }
        result.objective = objective_value(inst_, result.values);
        return result;
    }

private:
    struct ActiveRow {
        std::array<int, 4> var{};
        std::array<std::int8_t, 4> coef{};
        int size = 0;
        int rhs = 0;
    };

    void build_adjacency() {
        incident_.assign(static_cast<std::size_t>(inst_.index.num_nodes()), {});
        endpoint1_.assign(static_cast<std::size_t>(n_), -1);
        endpoint2_.assign(static_cast<std::size_t>(n_), -1);
        for (const SpatialEdge& e : inst_.graph.spatial_edges) {
            const int v = inst_.index.spatial_var(e.a, e.b);
            attach_edge(v, inst_.index.node_var(e.a), inst_.index.node_var(e.b));
        }
        for (const TemporalEdge& e : inst_.graph.temporal_edges) {
            const int v = inst_.index.temporal_var(e.a, e.b);
            attach_edge(v, inst_.index.node_var(e.a), inst_.index.node_var(e.b));
        }
    }

    void attach_edge(int edge_var, int node_a, int node_b) {
        incident_[static_cast<std::size_t>(node_a)].push_back(edge_var);
        incident_[static_cast<std::size_t>(node_b)].push_back(edge_var);
        endpoint1_[static_cast<std::size_t>(edge_var)] = node_a;
        endpoint2_[static_cast<std::size_t>(edge_var)] = node_b;
    }

    bool assign(int var, std::int8_t value) {
        std::int8_t& slot = values_[static_cast<std::size_t>(var)];
        if (slot >= 0) return slot == value;
        slot = value;
        trail_.push_back(var);
        const double c = inst_.costs[static_cast<std::size_t>(var)];
        if (value == 1) partial_ += c;
        if (c < 0.0) neg_free_ -= c;
        return true;
    }

    bool propagate() {
        while (qhead_ < trail_.size()) {
            const int var = trail_[qhead_++];
            const std::int8_t val = values_[static_cast<std::size_t>(var)];
            if (var < inst_.index.num_nodes()) {
                if (val == 0)
                    for (int e : incident_[static_cast<std::size_t>(var)])
                        if (!assign(e, 0)) return false;
            } else if (val == 1) {
                if (!assign(endpoint1_[static_cast<std::size_t>(var)], 1)) return false;
                if (!assign(endpoint2_[static_cast<std::size_t>(var)], 1)) return false;
            }
            for (int row_idx : rows_by_var_[static_cast<std::size_t>(var)])
                if (!propagate_row(active_[static_cast<std::size_t>(row_idx)])) return false;
        }
        return true;
    }

    bool propagate_row(const ActiveRow& row) {
        int min_lhs = 0;
        for (int i = 0; i < row.size; ++i) {
            const std::int8_t v = values_[static_cast<std::size_t>(row.var[static_cast<std::size_t>(i)])];
            if (v >= 0)
                min_lhs += row.coef[static_cast<std::size_t>(i)] * v;
            else if (row.coef[static_cast<std::size_t>(i)] < 0)
                min_lhs -= 1;
        }
        if (min_lhs > row.rhs) return false;
        if (min_lhs + 1 > row.rhs) {
            for (int i = 0; i < row.size; ++i) {
                const int var = row.var[static_cast<std::size_t>(i)];
                if (values_[static_cast<std::size_t>(var)] >= 0) continue;
                // raising this term would violate the row, so it is forced to
                // its LHS-minimizing value
                if (!assign(var, row.coef[static_cast<std::size_t>(i)] > 0 ? 0 : 1)) return false;
            }
        }
        return true;
    }

    bool apply_fixed() {
        for (const auto& [var, value] : inst_.fixed)
            if (!assign(var, static_cast<std::int8_t>(value))) return false;
        return propagate();
    }

    // Throws when some row exceeds its bound even with every free variable at
    // its LHS-minimizing value; no completion of the fixed set is feasible.
    void ensure_completable() const {
        for_each_constraint(inst_, [&](const Constraint& c) {
            int min_lhs = 0;
            for (const auto& [var, coef] : c.terms) {
                const std::int8_t v = values_[static_cast<std::size_t>(var)];
                if (v >= 0)
                    min_lhs += coef * v;
                else if (coef < 0)
                    min_lhs -= 1;
            }
            if (min_lhs > c.rhs) throw std::runtime_error("infeasible fixed assignments");
            return true;
        });
    }

    bool fully_feasible(const std::vector<std::uint8_t>& candidate) const {
        return for_each_constraint(
            inst_, [&](const Constraint& c) { return constraint_satisfied(c, candidate); });
    }

    // The all-zeros completion of the root state seeds the round's incumbent
    // whenever it satisfies every enabled row; it also becomes the fallback
    // returned when a limit interrupts the search.
    void init_round_incumbent() {
        std::vector<std::uint8_t> zero(static_cast<std::size_t>(n_), 0);
        for (int i = 0; i < n_; ++i)
            if (values_[static_cast<std::size_t>(i)] > 0) zero[static_cast<std::size_t>(i)] = 1;
        if (fully_feasible(zero)) {
            incumbent_obj_ = objective_value(inst_, zero);
            incumbent_ = std::move(zero);
            has_incumbent_ = true;
            if (!have_fallback_ || incumbent_obj_ < fallback_obj_) {
                fallback_ = incumbent_;
                fallback_obj_ = incumbent_obj_;
                have_fallback_ = true;
            }
        } else {
            incumbent_.clear();
            incumbent_obj_ = std::numeric_limits<double>::infinity();
            has_incumbent_ = false;
        }
    }

    bool over_limits() {
        if (cfg_.node_limit > 0 && nodes_ >= cfg_.node_limit) return true;
        if (cfg_.time_limit_seconds > 0.0 && nodes_ % 256 == 0) {
            const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - start_;
            if (dt.count() >= cfg_.time_limit_seconds) return true;
        }
        return false;
    }

    bool try_value(int var, std::int8_t value) {
        if (!assign(var, value)) return false;
        if (!propagate()) return false;
        return !has_incumbent_ || partial_ + neg_free_ < incumbent_obj_;
    }

    void undo_to(std::size_t mark) {
        while (trail_.size() > mark) {
            values_[static_cast<std::size_t>(trail_.back())] = -1;
            trail_.pop_back();
        }
        qhead_ = mark;
    }

    // One round of exact depth-first search against the active row set.
    // Leaves are feasible for every active row by propagation, so they only
    // update the incumbent. Restores the root state before returning.
    void dfs() {
        struct Level {
            int var;
            bool tried_zero;
            std::size_t trail_mark;
            double partial;
            double neg_free;
            std::size_t cursor;
        };
        std::vector<Level> levels;
        const double root_partial = partial_;
        const double root_neg_free = neg_free_;

        std::size_t cursor = 0;
        bool descend = !has_incumbent_ || partial_ + neg_free_ < incumbent_obj_;
        while (true) {
            if (descend) {
                while (cursor < order_.size() &&
                       values_[static_cast<std::size_t>(order_[cursor])] >= 0)
                    ++cursor;
                if (cursor == order_.size()) {
                    accept_leaf();
                    descend = false;
                    continue;
                }
                if (over_limits()) {
                    stopped_ = true;
                    break;
                }
                levels.push_back(
                    Level{order_[cursor], false, trail_.size(), partial_, neg_free_, cursor});
                ++nodes_;
                descend = try_value(order_[cursor], 1);
                continue;
            }
            if (levels.empty()) break;
            Level& top = levels.back();
            undo_to(top.trail_mark);
            partial_ = top.partial;
            neg_free_ = top.neg_free;
            cursor = top.cursor;
            if (!top.tried_zero) {
                top.tried_zero = true;
                if (over_limits()) {
                    stopped_ = true;
                    break;
                }
                ++nodes_;
                descend = try_value(top.var, 0);
            } else {
                levels.pop_back();
            }
        }
        undo_to(root_mark_);
        partial_ = root_partial;
        neg_free_ = root_neg_free;
    }

    void accept_leaf() {
        std::vector<std::uint8_t> candidate(values_.begin(), values_.end());
        const double obj = objective_value(inst_, candidate);
        if (!has_incumbent_ || obj < incumbent_obj_) {
            incumbent_ = std::move(candidate);
            incumbent_obj_ = obj;
            has_incumbent_ = true;
        }
    }

    void add_active_row(const Constraint& c) {
        ActiveRow row;
        row.size = static_cast<int>(c.terms.size());
        row.rhs = c.rhs;
        for (int i = 0; i < row.size; ++i) {
            row.var[static_cast<std::size_t>(i)] = c.terms[static_cast<std::size_t>(i)].first;
            row.coef[static_cast<std::size_t>(i)] =
                static_cast<std::int8_t>(c.terms[static_cast<std::size_t>(i)].second);
        }
        const int row_idx = static_cast<int>(active_.size());
        active_.push_back(row);
        for (int i = 0; i < row.size; ++i)
            rows_by_var_[static_cast<std::size_t>(row.var[static_cast<std::size_t>(i)])].push_back(
                row_idx);
    }

    const IlpInstance& inst_;
    const SolverConfig& cfg_;
    int n_ = 0;
    std::vector<std::int8_t> values_;
    std::vector<int> order_;
    std::vector<int> trail_;
    std::size_t qhead_ = 0;
    std::size_t root_mark_ = 0;
    double partial_ = 0.0;
    double neg_free_ = 0.0;
    std::vector<std::vector<int>> incident_;
    std::vector<int> endpoint1_;
    std::vector<int> endpoint2_;
    std::vector<ActiveRow> active_;
    std::vector<std::vector<int>> rows_by_var_;
    std::vector<Constraint> violated_;
    std::vector<std::uint8_t> incumbent_;
    double incumbent_obj_ = std::numeric_limits<double>::infinity();
    bool has_incumbent_ = false;
    std::vector<std::uint8_t> fallback_;
    double fallback_obj_ = std::numeric_limits<double>::infinity();
    bool have_fallback_ = false;
    std::chrono::steady_clock::time_point start_;
    bool stopped_ = false;
    std::int64_t nodes_ = 0;
};

}  // namespace detail

// Exact deterministic solver. Branches on the most negative cost first (ties:
// lower index), tries value 1 before 0, prunes on the admissible bound
// partial objective + sum of negative free costs, and separates violated rows
// lazily at integral optima of the active relaxation. Under an active node or
// time limit the best verified incumbent is returned with
// proven_optimal = false.
inline Assignment solve(const IlpInstance& inst, const SolverConfig& cfg = {},
                        SolveStats* stats = nullptr) {
    if (cfg.separation_batch < 1) throw std::invalid_argument("separation_batch must be >= 1");
    detail::BranchAndBound search(inst, cfg);
    return search.run(stats);
}

}  // namespace posetrack
