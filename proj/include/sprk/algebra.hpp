#pragma once

// Exact algebra of iterated stochastic integrals over one step [0, h].
//
// A Word (j1,...,jn) with letters in {0,1,...,M} denotes the iterated Ito
// integral I_w(h) = int ... int dW_{j1} ... dW_{jn}, innermost letter first;
// letter 0 stands for dt. The empty word is the constant 1.
//
// An AlgebraElement is a finite rational combination of h^k * I_w with an
// integer Laurent exponent k. Internally everything is kept in Ito form;
// Stratonovich semantics enter only through strat_to_ito (and the
// corresponding integration step of the B-series recursion).

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <utility>
#include <vector>

#include "half.hpp"
#include "rational.hpp"

namespace sprk {

using Letter = int;                // 0 = dt channel, >=1 = Wiener channels
using Word = std::vector<Letter>;  // innermost letter first

constexpr Letter kPlaceholderNoise = -1;  // '*' in tableau templates

inline Half word_order(const Word& w) {
    int t = 0;
    for (Letter a : w) t += (a == 0 ? 2 : 1);
    return Half(t);
}

inline std::string word_str(const Word& w) {
    std::string s = "(";
    for (size_t i = 0; i < w.size(); ++i) {
        if (i) s += ",";
        s += w[i] == kPlaceholderNoise ? "*" : std::to_string(w[i]);
    }
    return s + ")";
}

// ---------------------------------------------------------------------------
// Word products

namespace detail {

inline void accumulate(std::map<Word, Rat>& into, const Word& w, const Rat& c) {
    auto it = into.find(w);
    if (it == into.end()) {
        if (c != 0) into.emplace(w, c);
    } else {
        it->second += c;
        if (it->second == 0) into.erase(it);
    }
}

inline Word appended(Word w, Letter a) {
    w.push_back(a);
    return w;
}

}  // namespace detail

namespace detail {

struct WordPairHash {
    std::size_t operator()(const std::pair<Word, Word>& p) const {
        std::size_t h = 0x9e3779b97f4a7c15ull;
        auto mix = [&h](std::size_t v) { h ^= v + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2); };
        mix(p.first.size());
        for (Letter a : p.first) mix(static_cast<std::size_t>(a + 2));
        mix(p.second.size() + 0x51);
        for (Letter a : p.second) mix(static_cast<std::size_t>(a + 2));
        return h;
    }
};

}  // namespace detail

// Ito product rule on words:
//   I_{u.a} * I_{v.b} = [I_{u.a} I_v].b + [I_u I_{v.b}].a + [a==b!=0] [I_u I_v].0
// where ".x" appends the (outermost) letter x. The product is commutative, so
// results are memoized under a normalized argument order; references into the
// cache stay valid (node-based buckets).
inline const std::map<Word, Rat>& quasi_shuffle(const Word& u, const Word& v) {
    if (v < u) return quasi_shuffle(v, u);
    thread_local std::unordered_map<std::pair<Word, Word>, std::map<Word, Rat>,
                                    detail::WordPairHash>
        memo;
    auto it = memo.find({u, v});
    if (it != memo.end()) return it->second;

    std::map<Word, Rat> out;
    if (u.empty()) {
        out.emplace(v, Rat(1));
    } else if (v.empty()) {
        out.emplace(u, Rat(1));
    } else {
        Word u1(u.begin(), u.end() - 1);
        Word v1(v.begin(), v.end() - 1);
        Letter a = u.back(), b = v.back();
        for (auto& [w, c] : quasi_shuffle(u, v1)) detail::accumulate(out, detail::appended(w, b), c);
        for (auto& [w, c] : quasi_shuffle(u1, v)) detail::accumulate(out, detail::appended(w, a), c);
        if (a == b && a != 0)
            for (auto& [w, c] : quasi_shuffle(u1, v1))
                detail::accumulate(out, detail::appended(w, 0), c);
    }
    return memo.emplace(std::make_pair(u, v), std::move(out)).first->second;
}

// Rewrites the iterated Stratonovich integral S_w as a combination of Ito
// integrals. Outer step: int I_v o dW_a = I_{v.a} + 1/2 I_{v'.0} when the last
// letter of v equals a != 0 (v' = v without it).
inline std::map<Word, Rat> strat_to_ito(const Word& w) {
    std::map<Word, Rat> out;
    if (w.empty()) {
        out.emplace(w, Rat(1));
        return out;
    }
    Word inner_word(w.begin(), w.end() - 1);
    Letter a = w.back();
    for (auto& [v, c] : strat_to_ito(inner_word)) {
        detail::accumulate(out, detail::appended(v, a), c);
        if (a != 0 && !v.empty() && v.back() == a) {
            Word chopped(v.begin(), v.end() - 1);
            detail::accumulate(out, detail::appended(chopped, 0), c / 2);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// HPolynomial: exact polynomial in h with half-integer exponents.

class HPolynomial {
  public:
    HPolynomial() = default;

    static HPolynomial monomial(Half e, Rat c) {
        HPolynomial p;
        if (c != 0) p.coef_.emplace(e, std::move(c));
        return p;
    }

    const std::map<Half, Rat>& coefficients() const { return coef_; }
    bool is_zero() const { return coef_.empty(); }

    void add(Half e, const Rat& c) {
        auto it = coef_.find(e);
        if (it == coef_.end()) {
            if (c != 0) coef_.emplace(e, c);
        } else {
            it->second += c;
            if (it->second == 0) coef_.erase(it);
        }
    }

    HPolynomial& operator+=(const HPolynomial& o) {
        for (auto& [e, c] : o.coef_) add(e, c);
        return *this;
    }
    HPolynomial& operator-=(const HPolynomial& o) {
        for (auto& [e, c] : o.coef_) add(e, -c);
        return *this;
    }
    friend HPolynomial operator-(HPolynomial a, const HPolynomial& b) { return a -= b; }
    friend HPolynomial operator+(HPolynomial a, const HPolynomial& b) { return a += b; }
    friend bool operator==(const HPolynomial&, const HPolynomial&) = default;

    double evaluate(double h) const;

    std::string str() const {
        if (coef_.empty()) return "0";
        std::ostringstream os;
        bool first = true;
        for (auto& [e, c] : coef_) {
            Rat a = c;
            if (!first) {
                os << (a < 0 ? " - " : " + ");
                if (a < 0) a = -a;
            } else if (a < 0) {
                os << "-";
                a = -a;
            }
            first = false;
            if (e.twice == 0)
                os << rat_str(a);
            else {
                if (a != 1) os << rat_str(a) << "*";
                os << "h";
                if (e != Half::whole(1)) os << "^" << (e.is_integer() ? e.str() : "(" + e.str() + ")");
            }
        }
        return os.str();
    }

  private:
    std::map<Half, Rat> coef_;
};

inline double HPolynomial::evaluate(double h) const {
    double acc = 0;
    for (auto& [e, c] : coefficients()) acc += rat_double(c) * std::pow(h, e.value());
    return acc;
}

// Smallest exponent carrying a nonzero coefficient; nullopt for the zero
// polynomial (leading order +infinity).
inline std::optional<Half> leading_order(const HPolynomial& p) {
    if (p.is_zero()) return std::nullopt;
    return p.coefficients().begin()->first;
}

// ---------------------------------------------------------------------------
// AlgebraElement

class AlgebraElement {
  public:
    using Key = std::pair<int, Word>;  // (h exponent, Ito word)

    AlgebraElement() = default;

    static AlgebraElement zero() { return {}; }
    static AlgebraElement one() { return term(0, {}, Rat(1)); }
    static AlgebraElement h() { return term(1, {}, Rat(1)); }
    static AlgebraElement dW(Letter m) {
        require_noise(m);
        return term(0, {m}, Rat(1));
    }
    // J_{(m,0)} = int_0^h (W_m(s) - W_m(0)) ds
    static AlgebraElement J_m0(Letter m) {
        require_noise(m);
        return term(0, {m, 0}, Rat(1));
    }
    // J_{(0,m)} = int_0^h s dW_m(s) = h*dW_m - J_{(m,0)}
    static AlgebraElement J_0m(Letter m) {
        require_noise(m);
        AlgebraElement e = term(1, {m}, Rat(1));
        e.add_term(0, {m, 0}, Rat(-1));
        return e;
    }
    static AlgebraElement word(Word w, Rat c = Rat(1)) { return term(0, std::move(w), std::move(c)); }
    static AlgebraElement constant(Rat c) { return term(0, {}, std::move(c)); }
    static AlgebraElement term(int hshift, Word w, Rat c) {
        AlgebraElement e;
        e.add_term(hshift, std::move(w), std::move(c));
        return e;
    }

    const std::map<Key, Rat>& terms() const { return terms_; }
    bool empty() const { return terms_.empty(); }

    void add_term(int hshift, Word w, const Rat& c) {
        if (c == 0) return;
        Key k{hshift, std::move(w)};
        auto it = terms_.find(k);
        if (it == terms_.end())
            terms_.emplace(std::move(k), c);
        else {
            it->second += c;
            if (it->second == 0) terms_.erase(it);
        }
    }

    AlgebraElement& operator+=(const AlgebraElement& o) {
        for (auto& [k, c] : o.terms_) add_term(k.first, k.second, c);
        return *this;
    }
    AlgebraElement& operator-=(const AlgebraElement& o) {
        for (auto& [k, c] : o.terms_) add_term(k.first, k.second, -c);
        return *this;
    }
    friend AlgebraElement operator+(AlgebraElement a, const AlgebraElement& b) { return a += b; }
    friend AlgebraElement operator-(AlgebraElement a, const AlgebraElement& b) { return a -= b; }
    friend AlgebraElement operator-(AlgebraElement a) {
        for (auto& [k, c] : a.terms_) c = -c;
        return a;
    }

    AlgebraElement scaled(const Rat& r) const {
        AlgebraElement out;
        if (r == 0) return out;
        for (auto& [k, c] : terms_) out.terms_.emplace(k, c * r);
        return out;
    }

    AlgebraElement h_shifted(int k) const {
        AlgebraElement out;
        for (auto& [key, c] : terms_) out.terms_.emplace(Key{key.first + k, key.second}, c);
        return out;
    }

    friend AlgebraElement operator*(const AlgebraElement& a, const AlgebraElement& b) {
        AlgebraElement out;
        for (auto& [ka, ca] : a.terms_)
            for (auto& [kb, cb] : b.terms_) {
                Rat f = ca * cb;
                for (auto& [w, c] : quasi_shuffle(ka.second, kb.second))
                    out.add_term(ka.first + kb.first, w, f * c);
            }
        return out;
    }
    AlgebraElement& operator*=(const AlgebraElement& o) { return *this = *this * o; }

    // Structural equality of the stored canonical term maps.
    friend bool operator==(const AlgebraElement&, const AlgebraElement&) = default;

    // The words I_w are linearly independent, but the same random variable can
    // be written with different h exponents (h*dW = I_(0,m) + I_(m,0)). For
    // equality as random variables, clear denominators of h and push the
    // remaining h powers into letter-0 words.
    bool is_zero_random_variable() const {
        if (terms_.empty()) return true;
        int min_shift = 0;
        for (auto& [k, c] : terms_) min_shift = std::min(min_shift, k.first);
        std::map<Word, Rat> flat;
        for (auto& [k, c] : terms_) {
            int up = k.first - min_shift;  // >= 0
            std::map<Word, Rat> cur{{k.second, c}};
            for (int i = 0; i < up; ++i) {
                std::map<Word, Rat> next;
                for (auto& [w, cw] : cur)
                    for (auto& [w2, c2] : quasi_shuffle(w, Word{0})) detail::accumulate(next, w2, cw * c2);
                cur = std::move(next);
            }
            for (auto& [w, cw] : cur) detail::accumulate(flat, w, cw);
        }
        return flat.empty();
    }

    bool equivalent(const AlgebraElement& o) const { return (*this - o).is_zero_random_variable(); }

    // E[h^k I_w] = h^(k+n)/n! when w = 0^n, zero as soon as a Wiener letter
    // appears anywhere in w.
    HPolynomial expectation() const {
        HPolynomial p;
        for (auto& [k, c] : terms_) {
            bool deterministic = true;
            for (Letter a : k.second)
                if (a != 0) {
                    deterministic = false;
                    break;
                }
            if (!deterministic) continue;
            unsigned n = static_cast<unsigned>(k.second.size());
            p.add(Half::whole(k.first + static_cast<int>(n)), c / rat_factorial(n));
        }
        return p;
    }

    // Grading: min / max over terms of hshift + order(word).
    std::optional<Half> min_order() const {
        std::optional<Half> best;
        for (auto& [k, c] : terms_) {
            Half o = Half::whole(k.first) + word_order(k.second);
            if (!best || o < *best) best = o;
        }
        return best;
    }
    std::optional<Half> max_order() const {
        std::optional<Half> best;
        for (auto& [k, c] : terms_) {
            Half o = Half::whole(k.first) + word_order(k.second);
            if (!best || o > *best) best = o;
        }
        return best;
    }

    bool is_homogeneous() const {
        return terms_.empty() || *min_order() == *max_order();
    }

    int max_letter() const {
        int m = 0;
        for (auto& [k, c] : terms_)
            for (Letter a : k.second) m = std::max(m, a);
        return m;
    }

    bool has_placeholder() const {
        for (auto& [k, c] : terms_)
            for (Letter a : k.second)
                if (a == kPlaceholderNoise) return true;
        return false;
    }

    AlgebraElement instantiate_noise(Letter m) const {
        AlgebraElement out;
        for (auto& [k, c] : terms_) {
            Word w = k.second;
            for (Letter& a : w)
                if (a == kPlaceholderNoise) a = m;
            out.add_term(k.first, std::move(w), c);
        }
        return out;
    }

    // Pretty form: generator words are shown as W[m], J[m,0]; anything else as
    // a raw word I[...]. Example: "3/2*h^-1*J[1,0] - 1/2*W[1]".
    std::string str() const { return render(false); }
    // Raw form: every word spelled out, e.g. "1*h^1*I[1]".
    std::string raw_str() const { return render(true); }

  private:
    static void require_noise(Letter m) {
        if (m == 0) throw std::invalid_argument("noise index must be nonzero");
    }

    std::string render(bool raw) const {
        if (terms_.empty()) return "0";
        // display sorted by (total order, hshift, word)
        std::vector<const std::pair<const Key, Rat>*> items;
        for (auto& t : terms_) items.push_back(&t);
        std::stable_sort(items.begin(), items.end(), [](auto* a, auto* b) {
            Half oa = Half::whole(a->first.first) + word_order(a->first.second);
            Half ob = Half::whole(b->first.first) + word_order(b->first.second);
            if (oa != ob) return oa < ob;
            return a->first < b->first;
        });
        std::ostringstream os;
        bool first = true;
        for (auto* t : items) {
            Rat c = t->second;
            if (!first) {
                os << (c < 0 ? " - " : " + ");
                if (c < 0) c = -c;
            } else {
                if (c < 0) {
                    os << "-";
                    c = -c;
                }
                first = false;
            }
            std::vector<std::string> factors;
            if (raw || c != 1) factors.push_back(rat_str(c));
            int k = t->first.first;
            if (k != 0 || raw) {
                if (k == 1)
                    factors.push_back("h");
                else
                    factors.push_back("h^" + std::to_string(k));
            }
            const Word& w = t->first.second;
            if (!w.empty()) {
                std::string nm;
                if (!raw && w.size() == 1 && w[0] != 0)
                    nm = "W[" + letter_str(w[0]) + "]";
                else if (!raw && w.size() == 2 && w[0] != 0 && w[1] == 0)
                    nm = "J[" + letter_str(w[0]) + ",0]";
                else {
                    nm = "I[";
                    for (size_t i = 0; i < w.size(); ++i) {
                        if (i) nm += ",";
                        nm += letter_str(w[i]);
                    }
                    nm += "]";
                }
                factors.push_back(nm);
            }
            if (factors.empty()) factors.push_back(rat_str(c));
            for (size_t i = 0; i < factors.size(); ++i) {
                if (i) os << "*";
                os << factors[i];
            }
        }
        return os.str();
    }

    static std::string letter_str(Letter a) {
        return a == kPlaceholderNoise ? "*" : std::to_string(a);
    }

    std::map<Key, Rat> terms_;
};

inline AlgebraElement operator*(const Rat& r, const AlgebraElement& e) { return e.scaled(r); }

// ---------------------------------------------------------------------------
// E[I_u I_v] without expanding the product: only all-zero words survive the
// expectation, so the quasi-shuffle recursion collapses to a small dynamic
// program over prefix pairs. integ maps E-polynomials through one more outer
// dt-integration (c h^n -> c h^(n+1)/(n+1)).

namespace detail {

inline HPolynomial integ(const HPolynomial& p) {
    HPolynomial out;
    for (const auto& [e, c] : p.coefficients()) {
        if (!e.is_integer()) throw std::logic_error("deterministic words have integer order");
        int n = e.twice / 2;
        out.add(Half::whole(n + 1), c / Rat(n + 1));
    }
    return out;
}

inline HPolynomial expected_word(const Word& w) {
    for (Letter a : w)
        if (a != 0) return {};
    return HPolynomial::monomial(Half::whole(static_cast<int>(w.size())),
                                 Rat(1) / rat_factorial(static_cast<unsigned>(w.size())));
}

}  // namespace detail

inline const HPolynomial& expected_word_product(const Word& u, const Word& v) {
    if (v < u) return expected_word_product(v, u);
    thread_local std::unordered_map<std::pair<Word, Word>, HPolynomial, detail::WordPairHash> memo;
    auto it = memo.find({u, v});
    if (it != memo.end()) return it->second;

    HPolynomial out;
    if (u.empty())
        out = detail::expected_word(v);
    else if (v.empty())
        out = detail::expected_word(u);
    else {
        Word u1(u.begin(), u.end() - 1);
        Word v1(v.begin(), v.end() - 1);
        Letter a = u.back(), b = v.back();
        if (b == 0) out += detail::integ(expected_word_product(u, v1));
        if (a == 0) out += detail::integ(expected_word_product(u1, v));
        if (a == b && a != 0) out += detail::integ(expected_word_product(u1, v1));
    }
    return memo.emplace(std::make_pair(u, v), std::move(out)).first->second;
}

// E[a * b], equal to (a * b).expectation() but without the full word algebra.
inline HPolynomial expected_product(const AlgebraElement& a, const AlgebraElement& b) {
    HPolynomial out;
    for (const auto& [ka, ca] : a.terms())
        for (const auto& [kb, cb] : b.terms()) {
            const HPolynomial& f = expected_word_product(ka.second, kb.second);
            if (f.is_zero()) continue;
            Rat factor = ca * cb;
            for (const auto& [e, c] : f.coefficients())
                out.add(e + Half::whole(ka.first + kb.first), factor * c);
        }
    return out;
}

}  // namespace sprk
