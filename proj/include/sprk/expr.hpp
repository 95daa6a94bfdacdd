#pragma once

// Recursive-descent parser for tableau coefficient expressions.
//
//   expr   := term (('+'|'-') term)*
//   term   := factor (('*'|'/') factor)*
//   factor := rational | 'h' | 'dW' '[' idx ']' | 'J' '[' idx ',' idx ']'
//           | '(' expr ')' | '-' factor
//   idx    := integer | '*'
//
// 'J[0,m]' is sugar for h*dW[m] - J[m,0]. '*' as an index is the template
// placeholder instantiated per noise channel. Division is restricted to
// rational multiples of integer powers of h.

#include <cctype>
#include <stdexcept>
#include <string>
#include <string_view>

#include "algebra.hpp"

namespace sprk {

struct ExprError : std::runtime_error {
    std::size_t position;
    ExprError(std::string msg, std::size_t pos)
        : std::runtime_error(msg + " (column " + std::to_string(pos + 1) + ")"), position(pos) {}
};

class ExprParser {
  public:
    static AlgebraElement parse(std::string_view text) {
        ExprParser p(text);
        AlgebraElement e = p.expr();
        p.skip_ws();
        if (p.pos_ != text.size()) throw ExprError("unexpected trailing input", p.pos_);
        return e;
    }

  private:
    explicit ExprParser(std::string_view text) : text_(text) {}

    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    bool eat(char c) {
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    void expect(char c) {
        if (!eat(c)) throw ExprError(std::string("expected '") + c + "'", pos_);
    }

    AlgebraElement expr() {
        AlgebraElement acc = term();
        while (true) {
            skip_ws();
            if (eat('+'))
                acc += term();
            else if (eat('-'))
                acc -= term();
            else
                return acc;
        }
    }

    AlgebraElement term() {
        AlgebraElement acc = factor();
        while (true) {
            skip_ws();
            if (eat('*'))
                acc *= factor();
            else if (eat('/')) {
                std::size_t at = pos_;
                acc = divide(acc, factor(), at);
            } else
                return acc;
        }
    }

    static AlgebraElement divide(const AlgebraElement& num, const AlgebraElement& den, std::size_t at) {
        if (den.terms().empty()) throw ExprError("division by zero", at);
        if (den.terms().size() != 1 || !den.terms().begin()->first.second.empty())
            throw ExprError("division only by rationals and powers of h", at);
        const auto& [key, c] = *den.terms().begin();
        if (c == 0) throw ExprError("division by zero", at);
        return num.scaled(Rat(1) / c).h_shifted(-key.first);
    }

    AlgebraElement factor() {
        skip_ws();
        if (pos_ >= text_.size()) throw ExprError("unexpected end of expression", pos_);
        char c = text_[pos_];
        if (c == '-') {
            ++pos_;
            return -factor();
        }
        if (c == '(') {
            ++pos_;
            AlgebraElement e = expr();
            expect(')');
            return e;
        }
        if (std::isdigit(static_cast<unsigned char>(c))) return AlgebraElement::constant(Rat(integer()));
        if (std::isalpha(static_cast<unsigned char>(c))) return symbol();
        throw ExprError("unexpected character '" + std::string(1, c) + "'", pos_);
    }

    long integer() {
        skip_ws();
        std::size_t start = pos_;
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
        if (start == pos_) throw ExprError("expected integer", pos_);
        return std::stol(std::string(text_.substr(start, pos_ - start)));
    }

    Letter index() {
        skip_ws();
        if (eat('*')) return kPlaceholderNoise;
        return static_cast<Letter>(integer());
    }

    AlgebraElement symbol() {
        std::size_t start = pos_;
        while (pos_ < text_.size() && std::isalpha(static_cast<unsigned char>(text_[pos_]))) ++pos_;
        std::string name(text_.substr(start, pos_ - start));
        if (name == "h") return AlgebraElement::h();
        if (name == "dW") {
            expect('[');
            Letter m = index();
            expect(']');
            if (m == 0) throw ExprError("dW index must be a noise channel or '*'", start);
            return AlgebraElement::term(0, {m}, Rat(1));
        }
        if (name == "J") {
            expect('[');
            Letter a = index();
            expect(',');
            Letter b = index();
            expect(']');
            if (a != 0 && b == 0) return AlgebraElement::term(0, {a, 0}, Rat(1));
            if (a == 0 && b != 0) {
                // J[0,m] = h*dW[m] - J[m,0]
                AlgebraElement e = AlgebraElement::term(1, {b}, Rat(1));
                e += AlgebraElement::term(0, {b, 0}, Rat(-1));
                return e;
            }
            throw ExprError("J index pair must be [m,0] or [0,m]", start);
        }
        throw ExprError("unknown symbol '" + name + "'", start);
    }

    std::string_view text_;
    std::size_t pos_ = 0;
};

inline AlgebraElement parse_coefficient(std::string_view text) { return ExprParser::parse(text); }

// Renders an element back into the expression grammar (round-trip safe).
inline std::string coefficient_to_expr(const AlgebraElement& e) {
    if (e.terms().empty()) return "0";
    std::string out;
    bool first = true;
    for (const auto& [key, coef] : e.terms()) {
        Rat c = coef;
        if (first) {
            if (c < 0) {
                out += "-";
                c = -c;
            }
            first = false;
        } else {
            out += c < 0 ? " - " : " + ";
            if (c < 0) c = -c;
        }
        std::string gen;
        const Word& w = key.second;
        if (w.size() == 1 && w[0] != 0)
            gen = "dW[" + (w[0] == kPlaceholderNoise ? std::string("*") : std::to_string(w[0])) + "]";
        else if (w.size() == 2 && w[0] != 0 && w[1] == 0)
            gen = "J[" + (w[0] == kPlaceholderNoise ? std::string("*") : std::to_string(w[0])) + ",0]";
        else if (!w.empty())
            throw std::logic_error("coefficient uses a non-generator word: " + e.raw_str());
        std::string piece;
        if (c != 1 || (gen.empty() && key.first <= 0)) piece = rat_str(c);
        for (int k = 0; k < key.first; ++k) piece += (piece.empty() ? "h" : "*h");
        if (!gen.empty()) piece += (piece.empty() ? gen : "*" + gen);
        for (int k = 0; k > key.first; --k) piece += "/h";
        out += piece;
    }
    return out;
}

}  // namespace sprk
