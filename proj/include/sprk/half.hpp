#pragma once

// Half-integers. Tree orders and h-gradings live on the lattice (1/2)Z, so we
// store twice the value as an int and never touch floating point.

#include <compare>
#include <cstdlib>
#include <stdexcept>
#include <string>

namespace sprk {

struct Half {
    int twice = 0;

    constexpr Half() = default;
    constexpr explicit Half(int two_x) : twice(two_x) {}

    static constexpr Half whole(int n) { return Half(2 * n); }
    static constexpr Half halves(int n) { return Half(n); }

    constexpr bool is_integer() const { return twice % 2 == 0; }
    constexpr int floor() const { return twice >= 0 ? twice / 2 : (twice - 1) / 2; }

    friend constexpr Half operator+(Half a, Half b) { return Half(a.twice + b.twice); }
    friend constexpr Half operator-(Half a, Half b) { return Half(a.twice - b.twice); }
    friend constexpr Half operator-(Half a) { return Half(-a.twice); }
    friend constexpr Half operator*(int k, Half a) { return Half(k * a.twice); }
    Half& operator+=(Half o) {
        twice += o.twice;
        return *this;
    }
    friend constexpr auto operator<=>(Half, Half) = default;

    double value() const { return twice / 2.0; }

    // "2", "1/2", "-3/2"
    std::string str() const {
        if (is_integer()) return std::to_string(twice / 2);
        return std::to_string(twice) + "/2";
    }
    // decimal flavour used in count summaries and CLI flags: "2", "1.5", "-0.5"
    std::string decimal_str() const {
        int a = std::abs(twice);
        std::string sign = twice < 0 ? "-" : "";
        if (a % 2 == 0) return sign + std::to_string(a / 2);
        return sign + std::to_string(a / 2) + ".5";
    }

    static Half parse_decimal(const std::string& s) {
        // accepts "2", "1.5", "0.5"
        auto dot = s.find('.');
        if (dot == std::string::npos) return whole(std::stoi(s));
        std::string frac = s.substr(dot + 1);
        if (frac != "5") throw std::invalid_argument("half-integer expected: " + s);
        std::string head = s.substr(0, dot);
        bool neg = !head.empty() && head[0] == '-';
        int w = head == "-" || head.empty() ? 0 : std::stoi(head);
        int t = 2 * w + (neg ? -1 : 1);
        return Half(t);
    }
};

}  // namespace sprk
