#pragma once

// Enumeration of canonical trees up to a given order, the structural filters
// for additive-noise and separable problems, and the root-shift equivalence
// classes used by the quadratic-invariant reduction.

#include <algorithm>
#include <map>
#include <set>
#include <stdexcept>
#include <vector>

#include "tree.hpp"

namespace sprk {

struct EnumerationCapExceeded : std::runtime_error {
    explicit EnumerationCapExceeded(long long cap)
        : std::runtime_error("tree enumeration exceeded the configured cap of " + std::to_string(cap)) {}
};

struct EnumerateOptions {
    long long cap = 1'000'000;
    // Tabulation convention used by the classic tree-count tables: a drift
    // node never directly follows a drift node of the same partition. Off by
    // default; plain enumeration counts every isomorphism class.
    bool prune_same_shape_drift_edges = false;
};

// All canonical trees with rho <= max_order, sorted by (rho, canonical order).
inline std::vector<Tree> enumerate_trees(int Q, int M, Half max_order,
                                         const EnumerateOptions& opt = {}) {
    if (Q < 1) throw std::invalid_argument("Q must be >= 1");
    if (M < 0) throw std::invalid_argument("M must be >= 0");
    if (max_order < Half::halves(1)) throw std::invalid_argument("max_order must be >= 1/2");

    const int budget = max_order.twice;  // node costs in half units: drift 2, noise 1
    std::vector<Tree> pool;              // sorted by (cost asc, canonical asc)
    long long produced = 0;

    std::vector<Tree> scratch;
    std::vector<std::vector<Tree>> by_cost(static_cast<std::size_t>(budget) + 1);

    // multisets of pool entries (index non-decreasing) with exact remaining cost
    auto emit = [&](int shape, int color, std::vector<Tree> kids) {
        Tree t = Tree::node(shape, color, std::move(kids));
        by_cost[static_cast<std::size_t>(t.order().twice)].push_back(t);
        if (++produced > opt.cap) throw EnumerationCapExceeded(opt.cap);
    };

    for (int cost = 1; cost <= budget; ++cost) {
        for (int q = 1; q <= Q; ++q) {
            for (int m = 0; m <= M; ++m) {
                int root_cost = m == 0 ? 2 : 1;
                int remaining = cost - root_cost;
                if (remaining < 0) continue;
                if (remaining == 0) {
                    emit(q, m, {});
                    continue;
                }
                // children chosen as a non-decreasing sequence of pool indices
                scratch.clear();
                auto rec = [&](auto&& self, std::size_t start, int left) -> void {
                    if (left == 0) {
                        emit(q, m, scratch);
                        return;
                    }
                    for (std::size_t i = start; i < pool.size(); ++i) {
                        const Tree& cand = pool[i];
                        if (cand.order().twice > left) break;  // pool sorted by cost
                        if (opt.prune_same_shape_drift_edges && m == 0 && cand.color() == 0 &&
                            cand.shape() == q)
                            continue;
                        scratch.push_back(cand);
                        self(self, i, left - cand.order().twice);
                        scratch.pop_back();
                    }
                };
                rec(rec, 0, remaining);
            }
        }
        // newly built trees of this cost join the pool (keeps pool cost-sorted)
        auto& fresh = by_cost[static_cast<std::size_t>(cost)];
        std::sort(fresh.begin(), fresh.end());
        pool.insert(pool.end(), fresh.begin(), fresh.end());
    }

    std::vector<Tree> out;
    out.reserve(static_cast<std::size_t>(produced));
    for (auto& bucket : by_cost) out.insert(out.end(), bucket.begin(), bucket.end());
    return out;
}

inline std::map<Half, long long> count_by_order(const std::vector<Tree>& trees) {
    std::map<Half, long long> counts;
    for (const Tree& t : trees) ++counts[t.order()];
    return counts;
}

// ---------------------------------------------------------------------------
// Structural filters

// No edge joins two nodes of the same shape (the TS property).
inline bool is_ts(const Tree& t) {
    for (const Tree& c : t.children()) {
        if (c.shape() == t.shape()) return false;
        if (!is_ts(c)) return false;
    }
    return true;
}

namespace detail {
inline bool noise_shapes_within(const Tree& t, const std::set<int>& noisy) {
    if (t.color() != 0 && !noisy.count(t.shape())) return false;
    for (const Tree& c : t.children())
        if (!noise_shapes_within(c, noisy)) return false;
    return true;
}
}  // namespace detail

// Separable systems: drops trees with a same-shape edge, and trees carrying a
// noise node in a partition outside `noisy_partitions`.
inline std::vector<Tree> filter_separable(const std::vector<Tree>& trees,
                                          const std::set<int>& noisy_partitions) {
    std::vector<Tree> out;
    for (const Tree& t : trees)
        if (is_ts(t) && detail::noise_shapes_within(t, noisy_partitions)) out.push_back(t);
    return out;
}

namespace detail {
// Additive-noise convention with partition 3 reserved for time:
//  - no noise nodes of shape 3,
//  - drift nodes of shape 3 are childless,
//  - noise nodes (shape 1 or 2) only have (3,0) children.
inline bool additive_ok(const Tree& t) {
    if (t.shape() == 3 && t.color() != 0) return false;
    if (t.shape() == 3 && t.color() == 0 && !t.is_leaf()) return false;
    if (t.color() != 0) {
        for (const Tree& c : t.children())
            if (!(c.shape() == 3 && c.color() == 0)) return false;
    }
    for (const Tree& c : t.children())
        if (!additive_ok(c)) return false;
    return true;
}
}  // namespace detail

inline std::vector<Tree> filter_additive(const std::vector<Tree>& trees) {
    std::vector<Tree> out;
    for (const Tree& t : trees)
        if (detail::additive_ok(t)) out.push_back(t);
    return out;
}

// ---------------------------------------------------------------------------
// Root shifting

// Which edges a root may travel across when forming equivalence classes.
// `noise_edges_only` is the convention of the classic count tables: the root
// only moves across edges touching at least one noise node. `any_edge` takes
// the full set of rootings of the underlying unrooted tree.
enum class RootShiftPolicy { any_edge, noise_edges_only };

struct UnrootedClass {
    std::vector<Tree> members;  // sorted, unique
    const Tree& representative() const { return members.front(); }
};

namespace detail {

struct FlatTree {
    struct FlatNode {
        int shape = 0, color = 0;
        std::vector<int> adj;
    };
    std::vector<FlatNode> nodes;

    static int add(FlatTree& f, const Tree& t, int parent) {
        int id = static_cast<int>(f.nodes.size());
        f.nodes.push_back({t.shape(), t.color(), {}});
        if (parent >= 0) {
            f.nodes[static_cast<std::size_t>(id)].adj.push_back(parent);
            f.nodes[static_cast<std::size_t>(parent)].adj.push_back(id);
        }
        for (const Tree& c : t.children()) add(f, c, id);
        return id;
    }

    Tree rooted_at(int root) const {
        auto rec = [&](auto&& self, int v, int from) -> Tree {
            std::vector<Tree> kids;
            for (int w : nodes[static_cast<std::size_t>(v)].adj)
                if (w != from) kids.push_back(self(self, w, v));
            return Tree::node(nodes[static_cast<std::size_t>(v)].shape,
                              nodes[static_cast<std::size_t>(v)].color, std::move(kids));
        };
        return rec(rec, root, -1);
    }
};

}  // namespace detail

inline UnrootedClass root_shift_class(const Tree& t,
                                      RootShiftPolicy policy = RootShiftPolicy::any_edge) {
    if (!is_ts(t))
        throw std::invalid_argument("root_shift_class requires a tree without same-shape edges: " + t.str());
    detail::FlatTree flat;
    detail::FlatTree::add(flat, t, -1);
    const int n = static_cast<int>(flat.nodes.size());
    std::vector<bool> reach(static_cast<std::size_t>(n), false);
    std::vector<int> stack{0};
    reach[0] = true;
    while (!stack.empty()) {
        int v = stack.back();
        stack.pop_back();
        for (int w : flat.nodes[static_cast<std::size_t>(v)].adj) {
            if (reach[static_cast<std::size_t>(w)]) continue;
            if (policy == RootShiftPolicy::noise_edges_only &&
                flat.nodes[static_cast<std::size_t>(v)].color == 0 &&
                flat.nodes[static_cast<std::size_t>(w)].color == 0)
                continue;
            reach[static_cast<std::size_t>(w)] = true;
            stack.push_back(w);
        }
    }
    std::set<Tree> members;
    for (int v = 0; v < n; ++v)
        if (reach[static_cast<std::size_t>(v)]) members.insert(flat.rooted_at(v));
    UnrootedClass cls;
    cls.members.assign(members.begin(), members.end());
    return cls;
}

// One smallest representative per root-shift class.
inline std::vector<Tree> qi_representatives(const std::vector<Tree>& trees,
                                            RootShiftPolicy policy = RootShiftPolicy::noise_edges_only) {
    std::set<Tree> reps;
    for (const Tree& t : trees) reps.insert(root_shift_class(t, policy).representative());
    std::vector<Tree> out(reps.begin(), reps.end());
    std::stable_sort(out.begin(), out.end(), [](const Tree& a, const Tree& b) {
        if (a.order() != b.order()) return a.order() < b.order();
        return a < b;
    });
    return out;
}

}  // namespace sprk
