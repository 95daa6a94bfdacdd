#pragma once

// Monte Carlo oracle for AlgebraElements: every word is simulated by
// left-point (Ito) Riemann sums on a uniform grid over one set of Wiener
// paths, then averaged over paths. Stratonovich quantities are only ever
// simulated through their Ito form, so there is a single discretization
// convention and a single bias profile.

#include <cmath>
#include <map>
#include <stdexcept>
#include <vector>

#include "algebra.hpp"
#include "rng.hpp"

namespace sprk {

struct McResult {
    double mean = 0;
    double std_error = 0;
    long long paths = 0;

    bool within(double reference, double sigmas) const {
        return std::abs(mean - reference) <= sigmas * std_error;
    }
};

inline McResult mc_oracle(const AlgebraElement& element, double h, long long paths, int grid,
                          std::uint64_t seed) {
    if (!(h > 0)) throw std::invalid_argument("mc_oracle: step size must be positive");
    if (grid < 64) throw std::invalid_argument("mc_oracle: grid must be at least 64");
    if (paths < 1) throw std::invalid_argument("mc_oracle: need at least one path");
    if (element.has_placeholder())
        throw std::invalid_argument("mc_oracle: element still carries a '*' placeholder");

    // distinct words and their coefficient * h^shift weights
    std::map<Word, double> weights;
    for (const auto& [key, c] : element.terms())
        weights[key.second] += rat_double(c) * std::pow(h, key.first);

    const int channels = element.max_letter();
    const double dt = h / grid;
    const double sqrt_dt = std::sqrt(dt);

    double mean = 0, m2 = 0;
    std::vector<std::vector<double>> dw(static_cast<std::size_t>(channels));
    std::vector<double> prefix;
    for (long long p = 0; p < paths; ++p) {
        Rng rng = path_rng(seed, static_cast<std::uint64_t>(p));
        for (auto& channel : dw) {
            channel.resize(static_cast<std::size_t>(grid));
            for (double& x : channel) x = sqrt_dt * rng.normal();
        }
        double value = 0;
        for (const auto& [w, coef] : weights) {
            if (w.empty()) {
                value += coef;
                continue;
            }
            // prefix[j] = I_{w[0..j-1]}(t_k); left-point update, deepest last
            prefix.assign(w.size() + 1, 0.0);
            prefix[0] = 1.0;
            for (int k = 0; k < grid; ++k) {
                for (std::size_t j = w.size(); j >= 1; --j) {
                    Letter a = w[j - 1];
                    double inc = a == 0 ? dt : dw[static_cast<std::size_t>(a - 1)][static_cast<std::size_t>(k)];
                    prefix[j] += prefix[j - 1] * inc;
                }
            }
            value += coef * prefix[w.size()];
        }
        double delta = value - mean;
        mean += delta / static_cast<double>(p + 1);
        m2 += delta * (value - mean);
    }
    McResult res;
    res.mean = mean;
    res.paths = paths;
    res.std_error = paths > 1 ? std::sqrt(m2 / static_cast<double>(paths - 1) /
                                          static_cast<double>(paths))
                              : 0.0;
    return res;
}

}  // namespace sprk
