#pragma once

// Exact rational coefficients. GMP does the heavy lifting; this header adds
// the few conveniences the symbolic layer needs (integer powers, factorials,
// stable printing, string parsing with validation).

#include <gmpxx.h>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace sprk {

using Rat = mpq_class;

inline Rat rat(long num, long den = 1) {
    if (den == 0) throw std::domain_error("rational with zero denominator");
    Rat r(num, den);
    r.canonicalize();
    return r;
}

inline Rat rat_pow(const Rat& base, long exp) {
    if (exp == 0) return Rat(1);
    if (base == 0 && exp < 0) throw std::domain_error("inverse of zero");
    Rat acc(1);
    Rat b = exp > 0 ? base : Rat(1) / base;
    for (long k = exp > 0 ? exp : -exp; k > 0; --k) acc *= b;
    return acc;
}

inline Rat rat_factorial(unsigned n) {
    Rat acc(1);
    for (unsigned k = 2; k <= n; ++k) acc *= Rat(static_cast<long>(k));
    return acc;
}

// "3", "-3", "3/4"
inline Rat rat_parse(const std::string& text) {
    Rat r;
    if (r.set_str(text, 10) != 0) throw std::invalid_argument("bad rational literal: " + text);
    if (r.get_den() == 0) throw std::domain_error("rational with zero denominator: " + text);
    r.canonicalize();
    return r;
}

inline std::string rat_str(const Rat& r) { return r.get_str(); }

inline double rat_double(const Rat& r) { return r.get_d(); }

}  // namespace sprk
