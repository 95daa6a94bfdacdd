#pragma once

// Elementary weight functions.
//
// phi(tau): the weight of tau in the B-series of the exact one-step flow,
//   phi(leaf(q,m)) = dW_m, phi([t1..tk]_(q,m)) = int prod phi(tj) *dW_m.
// In Stratonovich mode the outer integration picks up the usual 1/2
// correction when the inner representation's last letter matches m.
//
// Psi_i(tau), Phi(tau): the corresponding weights of the stage values and of
// the numerical one-step map,
//   Psi_i(leaf) = sum_j Z_ij,  Psi_i([t1..tk]) = sum_j Z_ij prod_k Psi_j(tk),
//   Phi(leaf)   = sum_i g_i,   Phi([t1..tk])   = sum_i g_i prod_k Psi_i(tk).
// Tableau coefficients are plain random variables, so Phi/Psi need no mode
// correction; only phi's integration step is mode-sensitive.

#include <unordered_map>
#include <vector>

#include "algebra.hpp"
#include "tableau.hpp"
#include "tree.hpp"

namespace sprk {

enum class Mode { ito, stratonovich };

inline std::string mode_str(Mode m) { return m == Mode::ito ? "ito" : "stratonovich"; }

// One integration step of the exact-weight recursion: int P(s) *dW_m(s) for a
// pure word combination P.
inline AlgebraElement integrate_weight(const AlgebraElement& p, Letter m, Mode mode) {
    AlgebraElement out;
    for (const auto& [key, c] : p.terms()) {
        if (key.first != 0)
            throw std::logic_error("exact weights must be pure word combinations");
        Word w = key.second;
        w.push_back(m);
        out.add_term(0, std::move(w), c);
        if (mode == Mode::stratonovich && m != 0 && !key.second.empty() && key.second.back() == m) {
            Word corr(key.second.begin(), key.second.end() - 1);
            corr.push_back(0);
            out.add_term(0, std::move(corr), c / 2);
        }
    }
    return out;
}

// Exact-solution weights with memoization. Cached values equal fresh
// recomputation; the cache is per-instance.
class ExactWeights {
  public:
    explicit ExactWeights(Mode mode) : mode_(mode) {}

    Mode mode() const { return mode_; }

    const AlgebraElement& phi(const Tree& t) {
        auto it = cache_.find(t);
        if (it != cache_.end()) return it->second;
        AlgebraElement prod = AlgebraElement::one();
        for (const Tree& c : t.children()) prod *= phi(c);
        AlgebraElement val = integrate_weight(prod, t.color(), mode_);
        return cache_.emplace(t, std::move(val)).first->second;
    }

  private:
    Mode mode_;
    std::unordered_map<Tree, AlgebraElement, TreeHash> cache_;
};

inline AlgebraElement phi(const Tree& t, Mode mode) {
    ExactWeights w(mode);
    return w.phi(t);
}

// Numerical weights of a fixed tableau (held by value, so a temporary can be
// passed safely).
class MethodWeights {
  public:
    explicit MethodWeights(Tableau tab)
        : tab_(std::move(tab)), psi_cache_(static_cast<std::size_t>(tab_.s)) {}

    const Tableau& tableau() const { return tab_; }

    const AlgebraElement& psi(int stage, const Tree& t) {
        if (stage < 1 || stage > tab_.s) throw std::out_of_range("stage index");
        auto& cache = psi_cache_[static_cast<std::size_t>(stage - 1)];
        auto it = cache.find(t);
        if (it != cache.end()) return it->second;
        check_tree(t);
        AlgebraElement val;
        for (int j = 1; j <= tab_.s; ++j) {
            const AlgebraElement& zij = tab_.z(t.shape(), t.color(), stage, j);
            if (zij.empty()) continue;
            AlgebraElement prod = zij;
            for (const Tree& c : t.children()) prod *= psi(j, c);
            val += prod;
        }
        return cache.emplace(t, std::move(val)).first->second;
    }

    const AlgebraElement& Phi(const Tree& t) {
        auto it = phi_cache_.find(t);
        if (it != phi_cache_.end()) return it->second;
        check_tree(t);
        AlgebraElement val;
        for (int i = 1; i <= tab_.s; ++i) {
            const AlgebraElement& gi = tab_.g(t.shape(), t.color(), i);
            if (gi.empty()) continue;
            AlgebraElement prod = gi;
            for (const Tree& c : t.children()) prod *= psi(i, c);
            val += prod;
        }
        return phi_cache_.emplace(t, std::move(val)).first->second;
    }

  private:
    void check_tree(const Tree& t) const {
        if (t.max_shape() > tab_.Q || t.max_color() > tab_.M)
            throw std::out_of_range("tree (" + t.str() + ") outside tableau ranges Q=" +
                                    std::to_string(tab_.Q) + ", M=" + std::to_string(tab_.M));
    }

    Tableau tab_;
    std::unordered_map<Tree, AlgebraElement, TreeHash> phi_cache_;
    std::vector<std::unordered_map<Tree, AlgebraElement, TreeHash>> psi_cache_;
};

inline AlgebraElement Phi(const Tree& t, const Tableau& tab) {
    MethodWeights w(tab);
    return w.Phi(t);
}

// phi(u) phi(v) = phi(u o v) + phi(v o u) -- the Stratonovich product rule on
// exact weights (u o v is the Butcher product).
inline bool phi_product_identity_check(const Tree& u, const Tree& v) {
    ExactWeights w(Mode::stratonovich);
    AlgebraElement lhs = w.phi(u) * w.phi(v);
    AlgebraElement rhs = w.phi(butcher_product(u, v)) + w.phi(butcher_product(v, u));
    return lhs.equivalent(rhs);
}

// The numerical analogue, valid for methods satisfying the
// quadratic-invariant condition when u is rooted in partition 1 and v in
// partition 2.
inline bool method_product_identity_check(MethodWeights& w, const Tree& u, const Tree& v) {
    AlgebraElement lhs = w.Phi(u) * w.Phi(v);
    AlgebraElement rhs = w.Phi(butcher_product(u, v)) + w.Phi(butcher_product(v, u));
    return lhs.equivalent(rhs);
}

}  // namespace sprk
