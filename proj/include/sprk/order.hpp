#pragma once

// Strong (mean-square) and weak order decisions for a tableau.
//
// With Delta(tau) = Phi(tau) - phi(tau), the method has mean-square global
// order p when
//   leading_order E[Delta(tau)^2] >= 2p+1   for all trees with rho <= p,
//   leading_order E[Delta(tau)]   >= p+1    for all trees with rho <= p+1/2,
// and weak consistency of order p when
//   leading_order( E prod Phi(tau_k) - E prod phi(tau_k) ) >= p+1
// over multisets with sum rho <= p+1/2. Orders are decided level by level in
// half-integer steps, so the report carries a maximal passed order.

#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "bseries.hpp"
#include "enumerate.hpp"
#include "tableau.hpp"

namespace sprk {

enum class FilterKind { all, separable, additive3 };
enum class CheckKind { strong, weak, both };

struct TreeFilterSpec {
    FilterKind kind = FilterKind::all;
    std::set<int> noisy_partitions;  // separable only; empty means "all partitions"
    bool qi_reduce = false;          // collapse root-shift classes (strong conditions only)
    RootShiftPolicy qi_policy = RootShiftPolicy::noise_edges_only;

    std::string describe() const {
        switch (kind) {
            case FilterKind::all:
                return qi_reduce ? "all+qi" : "all";
            case FilterKind::additive3:
                return qi_reduce ? "additive3+qi" : "additive3";
            case FilterKind::separable: {
                std::string s = "separable{";
                bool first = true;
                for (int q : noisy_partitions) {
                    if (!first) s += ",";
                    s += std::to_string(q);
                    first = false;
                }
                s += "}";
                if (qi_reduce) s += "+qi";
                return s;
            }
        }
        return "?";
    }
};

struct OrderQuery {
    Tableau tableau;
    Mode mode = Mode::ito;
    Half p = Half::whole(1);
    TreeFilterSpec filter;
    CheckKind kind = CheckKind::both;
    long long weak_cap = 200'000;
    long long tree_cap = 1'000'000;
};

struct StrongTreeRecord {
    Tree tree;
    Half rho;
    std::optional<Half> l2_leading;    // nullopt = +infinity (condition exact)
    std::optional<Half> mean_leading;  // nullopt = +infinity
};

struct WeakRecord {
    std::vector<Tree> multiset;
    Half rho_sum;
    std::optional<Half> diff_leading;
};

struct LevelVerdict {
    Half level;
    bool pass = false;
    std::vector<std::string> witnesses;  // failing trees / multisets
};

struct OrderReport {
    std::string tableau_name;
    Mode mode = Mode::ito;
    Half p;
    CheckKind kind = CheckKind::both;
    std::string filter_desc;
    bool qi_reduced = false;

    std::vector<std::string> growth_violations;  // trees breaking Phi(tau) = O(h^rho)
    std::vector<std::string> notes;

    std::vector<StrongTreeRecord> strong_records;
    std::vector<LevelVerdict> strong_levels;
    std::optional<Half> max_strong_passed;

    std::vector<WeakRecord> weak_records;
    std::vector<LevelVerdict> weak_levels;
    std::optional<Half> max_weak_passed;

    bool requested_passed() const {
        bool ok = true;
        if (kind != CheckKind::weak) ok = ok && max_strong_passed && *max_strong_passed >= p;
        if (kind != CheckKind::strong) ok = ok && max_weak_passed && *max_weak_passed >= p;
        return ok;
    }

    std::string text() const;
    nlohmann::json to_json() const;
};

struct WeakCapExceeded : std::runtime_error {
    long long count_estimate;
    explicit WeakCapExceeded(long long estimate)
        : std::runtime_error("weak multiset enumeration would visit about " +
                             std::to_string(estimate) + " multisets; raise weak_cap to proceed"),
          count_estimate(estimate) {}
};

namespace order_detail {

inline std::vector<Tree> apply_filter(const std::vector<Tree>& trees, const TreeFilterSpec& f,
                                      int Q) {
    switch (f.kind) {
        case FilterKind::all:
            return trees;
        case FilterKind::additive3:
            if (Q != 3)
                throw std::invalid_argument(
                    "the additive-noise filter uses the three-partition convention (partition 3 "
                    "is time); the tableau has Q=" +
                    std::to_string(Q));
            return filter_additive(trees);
        case FilterKind::separable: {
            std::set<int> noisy = f.noisy_partitions;
            if (noisy.empty())
                for (int q = 1; q <= Q; ++q) noisy.insert(q);
            return filter_separable(trees, noisy);
        }
    }
    return trees;
}

inline bool leading_at_least(const std::optional<Half>& lead, Half bound) {
    return !lead || *lead >= bound;
}

inline std::string opt_half_str(const std::optional<Half>& h) {
    return h ? h->decimal_str() : "inf";
}

}  // namespace order_detail

// Strong check. Also evaluates the growth premise leading E[Phi(tau)^2] >=
// 2 rho(tau) on every enumerated (unfiltered) tree; violations are reported
// but do not enter the verdict.
inline OrderReport check_strong(const OrderQuery& query) {
    const Tableau& tab = query.tableau;
    if (query.p < Half::halves(1)) throw std::invalid_argument("target order must be >= 1/2");
    OrderReport rep;
    rep.tableau_name = tab.name;
    rep.mode = query.mode;
    rep.p = query.p;
    rep.kind = CheckKind::strong;
    rep.filter_desc = query.filter.describe();
    rep.qi_reduced = query.filter.qi_reduce;

    EnumerateOptions eopt;
    eopt.cap = query.tree_cap;
    std::vector<Tree> universe = enumerate_trees(tab.Q, tab.M, query.p + Half::halves(1), eopt);
    std::vector<Tree> filtered = order_detail::apply_filter(universe, query.filter, tab.Q);

    std::vector<Tree> used = filtered;
    if (query.filter.qi_reduce) {
        if (query.mode != Mode::stratonovich)
            throw std::invalid_argument(
                "quadratic-invariant reduction is only valid in Stratonovich mode");
        QiReport qi = check_quadratic_invariant(tab);
        if (!qi.holds)
            throw std::invalid_argument(
                "quadratic-invariant reduction requires a tableau satisfying the invariant "
                "condition; it does not (" +
                std::to_string(qi.witnesses.size()) + " violations)");
        for (const Tree& t : filtered)
            if (!is_ts(t))
                throw std::invalid_argument(
                    "quadratic-invariant reduction requires trees without same-shape edges");
        used = qi_representatives(filtered, query.filter.qi_policy);
        rep.notes.push_back(
            "class representatives are certified level by level; a class collapse at order q "
            "relies on every lower level having passed in full");
        rep.notes.push_back(
            "the reduction theorem states both clauses as O(h^(p+1/2)); verdict aggregation "
            "applies the mean-square thresholds (L2 leading >= 2p+1, mean leading >= p+1)");
    }

    ExactWeights exact(query.mode);
    MethodWeights method(tab);

    for (const Tree& t : universe) {
        auto lead = leading_order(expected_product(method.Phi(t), method.Phi(t)));
        if (!order_detail::leading_at_least(lead, 2 * t.order()))
            rep.growth_violations.push_back(t.str());
    }
    rep.notes.push_back(
        "growth premise checked on enumerated trees only; the infinite tail is assumed");

    for (const Tree& t : used) {
        AlgebraElement delta = method.Phi(t) - exact.phi(t);
        StrongTreeRecord rec;
        rec.tree = t;
        rec.rho = t.order();
        rec.l2_leading = leading_order(expected_product(delta, delta));
        rec.mean_leading = leading_order(delta.expectation());
        rep.strong_records.push_back(std::move(rec));
    }

    for (Half level = Half::halves(1); level <= query.p; level += Half::halves(1)) {
        LevelVerdict v;
        v.level = level;
        v.pass = true;
        for (const auto& rec : rep.strong_records) {
            bool l2_ok = rec.rho > level ||
                         order_detail::leading_at_least(rec.l2_leading, 2 * level + Half::whole(1));
            bool mean_ok = rec.rho > level + Half::halves(1) ||
                           order_detail::leading_at_least(rec.mean_leading, level + Half::whole(1));
            if (!l2_ok || !mean_ok) {
                v.pass = false;
                std::string why = rec.tree.str() + " (rho=" + rec.rho.decimal_str();
                if (!l2_ok) why += ", L2 leading " + order_detail::opt_half_str(rec.l2_leading);
                if (!mean_ok) why += ", mean leading " + order_detail::opt_half_str(rec.mean_leading);
                v.witnesses.push_back(why + ")");
            }
        }
        if (v.pass) rep.max_strong_passed = level;
        bool stop = !v.pass;
        rep.strong_levels.push_back(std::move(v));
        if (stop) break;  // conditions are nested, higher levels cannot pass
    }
    return rep;
}

// Weak check over multisets of filtered trees.
inline OrderReport check_weak(const OrderQuery& query) {
    const Tableau& tab = query.tableau;
    if (query.p < Half::halves(1)) throw std::invalid_argument("target order must be >= 1/2");
    if (query.p > Half::whole(2))
        throw std::invalid_argument("weak checks are capped at p = 2");
    OrderReport rep;
    rep.tableau_name = tab.name;
    rep.mode = query.mode;
    rep.p = query.p;
    rep.kind = CheckKind::weak;
    rep.filter_desc = query.filter.describe();

    EnumerateOptions eopt;
    eopt.cap = query.tree_cap;
    Half budget = query.p + Half::halves(1);
    std::vector<Tree> universe = enumerate_trees(tab.Q, tab.M, budget, eopt);
    std::vector<Tree> pool = order_detail::apply_filter(universe, query.filter, tab.Q);
    if (query.filter.qi_reduce)
        rep.notes.push_back(
            "quadratic-invariant reduction applies to per-tree strong conditions; weak products "
            "use the unreduced tree set");

    // count first, then generate
    long long count = 0;
    {
        auto count_rec = [&](auto&& self, std::size_t start, int left) -> void {
            for (std::size_t i = start; i < pool.size(); ++i) {
                if (pool[i].order().twice > left) break;
                ++count;
                self(self, i, left - pool[i].order().twice);
            }
        };
        count_rec(count_rec, 0, budget.twice);
        if (count > query.weak_cap) throw WeakCapExceeded(count);
    }

    ExactWeights exact(query.mode);
    MethodWeights method(tab);

    std::vector<Tree> current;
    auto emit = [&](const std::vector<Tree>& multiset) {
        // fold all but the final factor, then take the expectation through the
        // last product directly
        AlgebraElement num_prod = AlgebraElement::one();
        AlgebraElement exact_prod = AlgebraElement::one();
        Half rho_sum = Half::whole(0);
        for (std::size_t i = 0; i + 1 < multiset.size(); ++i) {
            num_prod *= method.Phi(multiset[i]);
            exact_prod *= exact.phi(multiset[i]);
        }
        for (const Tree& t : multiset) rho_sum += t.order();
        const Tree& last = multiset.back();
        HPolynomial diff = expected_product(num_prod, method.Phi(last)) -
                           expected_product(exact_prod, exact.phi(last));
        WeakRecord rec;
        rec.multiset = multiset;
        rec.rho_sum = rho_sum;
        rec.diff_leading = leading_order(diff);
        rep.weak_records.push_back(std::move(rec));
    };
    auto rec = [&](auto&& self, std::size_t start, int left) -> void {
        for (std::size_t i = start; i < pool.size(); ++i) {
            if (pool[i].order().twice > left) break;
            current.push_back(pool[i]);
            emit(current);
            self(self, i, left - pool[i].order().twice);
            current.pop_back();
        }
    };
    rec(rec, 0, budget.twice);

    for (Half level = Half::halves(1); level <= query.p; level += Half::halves(1)) {
        LevelVerdict v;
        v.level = level;
        v.pass = true;
        for (const auto& r : rep.weak_records) {
            if (r.rho_sum > level + Half::halves(1)) continue;
            if (!order_detail::leading_at_least(r.diff_leading, level + Half::whole(1))) {
                v.pass = false;
                std::string why = "{";
                for (std::size_t i = 0; i < r.multiset.size(); ++i) {
                    if (i) why += ", ";
                    why += r.multiset[i].str();
                }
                why += "} (sum rho=" + r.rho_sum.decimal_str() + ", diff leading " +
                       order_detail::opt_half_str(r.diff_leading) + ")";
                v.witnesses.push_back(why);
            }
        }
        if (v.pass) rep.max_weak_passed = level;
        bool stop = !v.pass;
        rep.weak_levels.push_back(std::move(v));
        if (stop) break;
    }
    return rep;
}

inline OrderReport check_orders(const OrderQuery& query) {
    if (query.kind == CheckKind::strong) return check_strong(query);
    if (query.kind == CheckKind::weak) return check_weak(query);
    OrderReport strong = check_strong(query);
    OrderQuery wq = query;
    wq.kind = CheckKind::weak;
    OrderReport weak = check_weak(wq);
    strong.kind = CheckKind::both;
    strong.weak_records = std::move(weak.weak_records);
    strong.weak_levels = std::move(weak.weak_levels);
    strong.max_weak_passed = weak.max_weak_passed;
    for (auto& n : weak.notes) strong.notes.push_back(n);
    return strong;
}

// Full symbolic trace for one tree under one tableau.
struct TreeExplanation {
    Tree tree;
    Half rho;
    AlgebraElement phi_value;
    AlgebraElement method_value;
    AlgebraElement delta;
    HPolynomial mean_delta;
    HPolynomial l2_delta;
    bool exact_match = false;

    std::string text() const {
        std::ostringstream os;
        os << "tree      " << tree.str() << "\n";
        os << "rho       " << rho.decimal_str() << "\n";
        os << "phi       " << phi_value.str() << "\n";
        os << "Phi       " << method_value.str() << "\n";
        os << "Delta     " << (exact_match ? "0" : delta.str()) << "\n";
        os << "E[Delta]  " << mean_delta.str() << "\n";
        os << "E[Delta^2] " << l2_delta.str() << "\n";
        return os.str();
    }
};

inline TreeExplanation explain_tree(const Tableau& tab, const Tree& t, Mode mode) {
    TreeExplanation ex;
    ex.tree = t;
    ex.rho = t.order();
    ex.phi_value = phi(t, mode);
    ex.method_value = Phi(t, tab);
    ex.delta = ex.method_value - ex.phi_value;
    ex.mean_delta = ex.delta.expectation();
    ex.l2_delta = (ex.delta * ex.delta).expectation();
    ex.exact_match = ex.delta.is_zero_random_variable();
    return ex;
}

// qi_representatives with the hypothesis gates of the reduction theorem.
inline std::vector<Tree> reduce_by_qi(const std::vector<Tree>& trees, const Tableau& tab,
                                      RootShiftPolicy policy = RootShiftPolicy::noise_edges_only) {
    QiReport qi = check_quadratic_invariant(tab);
    if (!qi.holds)
        throw std::invalid_argument(
            "tableau does not satisfy the quadratic-invariant condition; no reduction");
    for (const Tree& t : trees)
        if (!is_ts(t))
            throw std::invalid_argument("reduction requires trees without same-shape edges: " + t.str());
    return qi_representatives(trees, policy);
}

// ---------------------------------------------------------------------------
// Rendering

inline std::string OrderReport::text() const {
    std::ostringstream os;
    os << "tableau  " << tableau_name << "\n";
    os << "mode     " << mode_str(mode) << "\n";
    os << "filter   " << filter_desc << "\n";
    os << "target p " << p.decimal_str() << "\n";
    if (kind != CheckKind::weak) {
        os << "strong order passed: "
           << (max_strong_passed ? max_strong_passed->decimal_str() : "none") << "\n";
        for (const auto& lv : strong_levels) {
            os << "  level " << lv.level.decimal_str() << ": " << (lv.pass ? "pass" : "FAIL") << "\n";
            for (const auto& w : lv.witnesses) os << "    witness " << w << "\n";
        }
    }
    if (kind != CheckKind::strong) {
        os << "weak order passed: " << (max_weak_passed ? max_weak_passed->decimal_str() : "none")
           << "\n";
        for (const auto& lv : weak_levels) {
            os << "  level " << lv.level.decimal_str() << ": " << (lv.pass ? "pass" : "FAIL") << "\n";
            for (const auto& w : lv.witnesses) os << "    witness " << w << "\n";
        }
    }
    if (!growth_violations.empty()) {
        os << "growth premise violations:\n";
        for (const auto& g : growth_violations) os << "  " << g << "\n";
    }
    for (const auto& n : notes) os << "note: " << n << "\n";
    return os.str();
}

inline nlohmann::json OrderReport::to_json() const {
    nlohmann::json j;
    j["tableau"] = tableau_name;
    j["mode"] = mode_str(mode);
    j["p"] = p.value();
    j["kind"] = kind == CheckKind::strong ? "strong" : (kind == CheckKind::weak ? "weak" : "both");
    j["filter"] = filter_desc;
    j["qi_reduced"] = qi_reduced;
    j["growth_premise_violations"] = growth_violations;
    j["notes"] = notes;
    auto half_or_null = [](const std::optional<Half>& h) {
        return h ? nlohmann::json(h->value()) : nlohmann::json(nullptr);
    };
    if (kind != CheckKind::weak) {
        j["strong"]["max_order_passed"] = half_or_null(max_strong_passed);
        nlohmann::json levels = nlohmann::json::array();
        for (const auto& lv : strong_levels)
            levels.push_back({{"level", lv.level.value()}, {"pass", lv.pass}, {"witnesses", lv.witnesses}});
        j["strong"]["levels"] = levels;
        nlohmann::json recs = nlohmann::json::array();
        for (const auto& r : strong_records) {
            nlohmann::json rec;
            rec["tree"] = r.tree.str();
            rec["rho"] = r.rho.value();
            rec["l2_leading"] = r.l2_leading ? nlohmann::json(r.l2_leading->value()) : nlohmann::json(nullptr);
            rec["mean_leading"] =
                r.mean_leading ? nlohmann::json(r.mean_leading->value()) : nlohmann::json(nullptr);
            recs.push_back(rec);
        }
        j["strong"]["trees"] = recs;
    }
    if (kind != CheckKind::strong) {
        j["weak"]["max_order_passed"] = half_or_null(max_weak_passed);
        nlohmann::json levels = nlohmann::json::array();
        for (const auto& lv : weak_levels)
            levels.push_back({{"level", lv.level.value()}, {"pass", lv.pass}, {"witnesses", lv.witnesses}});
        j["weak"]["levels"] = levels;
        nlohmann::json recs = nlohmann::json::array();
        for (const auto& r : weak_records) {
            nlohmann::json rec;
            nlohmann::json ms = nlohmann::json::array();
            for (const auto& t : r.multiset) ms.push_back(t.str());
            rec["multiset"] = ms;
            rec["rho_sum"] = r.rho_sum.value();
            rec["diff_leading"] =
                r.diff_leading ? nlohmann::json(r.diff_leading->value()) : nlohmann::json(nullptr);
            recs.push_back(rec);
        }
        j["weak"]["multisets"] = recs;
    }
    return j;
}

// Plain-text weight table: No, tau, rho, phi, Phi (optionally the symbolic
// elementary differential).
inline std::string weight_table(const std::vector<Tree>& trees, const Tableau& tab, Mode mode,
                                bool with_differential = false) {
    ExactWeights exact(mode);
    MethodWeights method(tab);
    std::ostringstream os;
    os << "No\ttau\trho\tphi\tPhi";
    if (with_differential) os << "\tF";
    os << "\n";
    int no = 1;
    for (const Tree& t : trees) {
        os << no++ << "\t" << t.str() << "\t" << t.order().decimal_str() << "\t"
           << exact.phi(t).str() << "\t" << method.Phi(t).str();
        if (with_differential) os << "\t" << t.elementary_differential_str();
        os << "\n";
    }
    return os.str();
}

}  // namespace sprk
