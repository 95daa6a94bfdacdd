#pragma once

// Multishaped, multicolored rooted trees in canonical form.
//
// A node carries a partition index ("shape", 1..Q) and a noise index
// ("color", 0..M, 0 = deterministic). Children are kept sorted under the
// recursive lexicographic order on (shape, color, children), so structural
// equality coincides with isomorphism of shaped/colored rooted trees and
// every isomorphism class has exactly one representation.

#include <algorithm>
#include <compare>
#include <cstddef>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "half.hpp"
#include "rational.hpp"

namespace sprk {

class Tree {
  public:
    Tree() = default;  // null handle; only containers should see this state

    static Tree leaf(int shape, int color) { return node(shape, color, {}); }

    static Tree node(int shape, int color, std::vector<Tree> children) {
        if (shape < 1) throw std::invalid_argument("tree shape must be >= 1");
        if (color < 0) throw std::invalid_argument("tree color must be >= 0");
        for (const Tree& c : children)
            if (!c.p_) throw std::invalid_argument("null child");
        std::sort(children.begin(), children.end());
        auto n = std::make_shared<Node>();
        n->shape = shape;
        n->color = color;
        n->kids = std::move(children);
        n->rho = color == 0 ? Half::whole(1) : Half::halves(1);
        n->count = 1;
        std::size_t h = 0x9e3779b97f4a7c15ull;
        h = mix(h, static_cast<std::size_t>(shape));
        h = mix(h, static_cast<std::size_t>(color) + 0x100);
        for (const Tree& c : n->kids) {
            n->rho += c.order();
            n->count += c.node_count();
            h = mix(h, c.hash());
        }
        n->hash_cache = h | 1;  // nonzero marker
        Tree t;
        t.p_ = std::move(n);
        return t;
    }

    bool valid() const { return static_cast<bool>(p_); }
    int shape() const { return req().shape; }
    int color() const { return req().color; }
    bool is_deterministic() const { return color() == 0; }
    const std::vector<Tree>& children() const { return req().kids; }
    bool is_leaf() const { return req().kids.empty(); }
    Half order() const { return req().rho; }  // rho: 1 per drift node, 1/2 per noise node
    int node_count() const { return req().count; }
    std::size_t hash() const { return req().hash_cache; }

    friend bool operator==(const Tree& a, const Tree& b) { return compare(a, b) == 0; }
    friend std::strong_ordering operator<=>(const Tree& a, const Tree& b) {
        int c = compare(a, b);
        return c < 0 ? std::strong_ordering::less
                     : (c > 0 ? std::strong_ordering::greater : std::strong_ordering::equal);
    }

    // alpha: product over children of alpha, divided by the factorials of the
    // multiplicities of equal children.
    Rat alpha() const {
        const auto& kids = children();
        Rat acc(1);
        std::size_t i = 0;
        while (i < kids.size()) {
            std::size_t j = i;
            while (j < kids.size() && kids[j] == kids[i]) ++j;
            Rat a = kids[i].alpha();
            for (std::size_t r = i; r < j; ++r) acc *= a;
            acc /= rat_factorial(static_cast<unsigned>(j - i));
            i = j;
        }
        return acc;
    }

    int max_shape() const {
        int m = shape();
        for (const Tree& c : children()) m = std::max(m, c.max_shape());
        return m;
    }
    int max_color() const {
        int m = color();
        for (const Tree& c : children()) m = std::max(m, c.max_color());
        return m;
    }

    // Bracket text form: leaf "b(q,m)", interior "[child,child,...](q,m)".
    std::string str() const {
        if (is_leaf()) return "b(" + label_str();
        std::string s = "[";
        const auto& kids = children();
        for (std::size_t i = 0; i < kids.size(); ++i) {
            if (i) s += ",";
            s += kids[i].str();
        }
        return s + "](" + label_str();
    }

    static Tree parse(std::string_view text) {
        std::size_t pos = 0;
        Tree t = parse_impl(text, pos);
        skip_ws(text, pos);
        if (pos != text.size()) throw std::invalid_argument("trailing text after tree at position " + std::to_string(pos));
        return t;
    }

    // Nested symbolic form of the elementary differential, e.g.
    // "(D_{2,3} g0^(2))((D_{1,1} g1^(2))(g0^(1),g0^(1)),(D_1 g2^(3))(g2^(1)))".
    std::string elementary_differential_str() const {
        std::string base = "g" + std::to_string(color()) + "^(" + std::to_string(shape()) + ")";
        if (is_leaf()) return base;
        std::string d = "D_";
        const auto& kids = children();
        if (kids.size() > 1) d += "{";
        for (std::size_t i = 0; i < kids.size(); ++i) {
            if (i) d += ",";
            d += std::to_string(kids[i].shape());
        }
        if (kids.size() > 1) d += "}";
        std::string s = "(" + d + " " + base + ")(";
        for (std::size_t i = 0; i < kids.size(); ++i) {
            if (i) s += ",";
            s += kids[i].elementary_differential_str();
        }
        return s + ")";
    }

  private:
    struct Node {
        int shape = 0;
        int color = 0;
        std::vector<Tree> kids;
        Half rho;
        int count = 0;
        std::size_t hash_cache = 0;
    };

    const Node& req() const {
        if (!p_) throw std::logic_error("use of empty Tree handle");
        return *p_;
    }

    static std::size_t mix(std::size_t h, std::size_t v) {
        h ^= v + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
        return h;
    }

    static int compare(const Tree& a, const Tree& b) {
        if (a.p_ == b.p_) return 0;
        if (!a.p_ || !b.p_) return a.p_ ? 1 : -1;
        if (a.p_->shape != b.p_->shape) return a.p_->shape < b.p_->shape ? -1 : 1;
        if (a.p_->color != b.p_->color) return a.p_->color < b.p_->color ? -1 : 1;
        const auto& ka = a.p_->kids;
        const auto& kb = b.p_->kids;
        for (std::size_t i = 0; i < std::min(ka.size(), kb.size()); ++i) {
            int c = compare(ka[i], kb[i]);
            if (c != 0) return c;
        }
        if (ka.size() != kb.size()) return ka.size() < kb.size() ? -1 : 1;
        return 0;
    }

    std::string label_str() const {
        return std::to_string(shape()) + "," + std::to_string(color()) + ")";
    }

    static void skip_ws(std::string_view s, std::size_t& pos) {
        while (pos < s.size() && (s[pos] == ' ' || s[pos] == '\t')) ++pos;
    }

    static int parse_int(std::string_view s, std::size_t& pos) {
        skip_ws(s, pos);
        std::size_t start = pos;
        while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') ++pos;
        if (pos == start) throw std::invalid_argument("expected integer at position " + std::to_string(pos));
        return std::stoi(std::string(s.substr(start, pos - start)));
    }

    static void expect(std::string_view s, std::size_t& pos, char c) {
        skip_ws(s, pos);
        if (pos >= s.size() || s[pos] != c)
            throw std::invalid_argument(std::string("expected '") + c + "' at position " + std::to_string(pos));
        ++pos;
    }

    static std::pair<int, int> parse_label(std::string_view s, std::size_t& pos) {
        expect(s, pos, '(');
        int q = parse_int(s, pos);
        expect(s, pos, ',');
        int m = parse_int(s, pos);
        expect(s, pos, ')');
        return {q, m};
    }

    static Tree parse_impl(std::string_view s, std::size_t& pos) {
        skip_ws(s, pos);
        if (pos >= s.size()) throw std::invalid_argument("unexpected end of tree text");
        if (s[pos] == 'b') {
            ++pos;
            auto [q, m] = parse_label(s, pos);
            return leaf(q, m);
        }
        if (s[pos] == '[') {
            ++pos;
            std::vector<Tree> kids;
            skip_ws(s, pos);
            if (pos < s.size() && s[pos] == ']') {
                ++pos;
            } else {
                while (true) {
                    kids.push_back(parse_impl(s, pos));
                    skip_ws(s, pos);
                    if (pos < s.size() && s[pos] == ',') {
                        ++pos;
                        continue;
                    }
                    expect(s, pos, ']');
                    break;
                }
            }
            if (kids.empty()) throw std::invalid_argument("empty bracket tree");
            auto [q, m] = parse_label(s, pos);
            return node(q, m, std::move(kids));
        }
        throw std::invalid_argument("expected 'b' or '[' at position " + std::to_string(pos));
    }

    std::shared_ptr<const Node> p_;

    friend struct TreeHash;
};

struct TreeHash {
    std::size_t operator()(const Tree& t) const { return t.valid() ? t.hash() : 0; }
};

inline Rat alpha(const Tree& t) { return t.alpha(); }
inline Half rho(const Tree& t) { return t.order(); }

// Butcher product: v grafted as one more child of u's root.
inline Tree butcher_product(const Tree& u, const Tree& v) {
    std::vector<Tree> kids = u.children();
    kids.push_back(v);
    return Tree::node(u.shape(), u.color(), std::move(kids));
}

}  // namespace sprk
