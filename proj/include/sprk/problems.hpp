#pragma once

// Test-problem library. Each problem is a partitioned SDE
//   dX^(q) = sum_m g_m^(q)(X^(1..Q)) *dW_m,   m = 0 the drift channel,
// posed directly in the horizontal form used by the stepping code.

#include <cmath>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "bseries.hpp"  // Mode

namespace sprk {

using PartitionedState = std::vector<std::vector<double>>;  // [q-1][component]

struct SdeProblem {
    std::string name;
    int Q = 0;
    int M = 0;
    std::vector<int> dims;  // per partition
    Mode mode = Mode::ito;
    // g(q, m, x) -> vector of length dims[q-1]
    std::function<std::vector<double>(int q, int m, const PartitionedState&)> g;
    PartitionedState x0;
    // optional bilinear invariant x1^T D x2
    std::function<double(const PartitionedState&)> invariant;
    // default functional for weak studies
    std::function<double(const PartitionedState&)> weak_functional;
    std::map<std::string, double> params;

    double param(const std::string& key) const {
        auto it = params.find(key);
        if (it == params.end()) throw std::invalid_argument("unknown parameter " + key);
        return it->second;
    }
};

namespace problems_detail {

inline std::map<std::string, double> merged(std::map<std::string, double> defaults,
                                            const std::map<std::string, double>& overrides) {
    for (const auto& [k, v] : overrides) {
        if (!defaults.count(k)) throw std::invalid_argument("unknown parameter override '" + k + "'");
        defaults[k] = v;
    }
    return defaults;
}

}  // namespace problems_detail

// Langevin particle in the three-partition additive-noise form: partition 1
// carries (R, U1) with the velocity/friction drift, partition 2 the forced
// velocity component U2 (the only noisy one), partition 3 the time variable.
// V = U1 + U2. Default force f(r,t) = -omega^2 r.
inline SdeProblem langevin_problem(const std::map<std::string, double>& overrides = {}) {
    SdeProblem p;
    p.name = "langevin";
    p.Q = 3;
    p.M = 1;
    p.dims = {2, 1, 1};
    p.mode = Mode::ito;
    p.params = problems_detail::merged(
        {{"alpha", 0.5}, {"beta", 0.25}, {"omega", 1.0}, {"r0", 1.0}, {"v0", 0.5}}, overrides);
    double alpha = p.params.at("alpha");
    double beta = p.params.at("beta");
    double omega = p.params.at("omega");
    p.g = [alpha, beta, omega](int q, int m, const PartitionedState& x) -> std::vector<double> {
        double u1 = x[0][1], u2 = x[1][0], r = x[0][0];
        double v = u1 + u2;
        if (q == 1) {
            if (m == 0) return {v, -alpha * v};
            return {0.0, 0.0};
        }
        if (q == 2) {
            if (m == 0) return {-omega * omega * r};
            return {beta};
        }
        if (m == 0) return {1.0};
        return {0.0};
    };
    p.x0 = {{p.params.at("r0"), p.params.at("v0")}, {0.0}, {0.0}};
    double w2 = omega * omega;
    p.weak_functional = [w2](const PartitionedState& x) {
        double v = x[0][1] + x[1][0];
        return 0.5 * v * v + 0.5 * w2 * x[0][0] * x[0][0];  // total energy
    };
    return p;
}

// Pendulum with phase noise: dp = -omega^2 sin x dt - lambda omega^2 cos x o dW_m,
// dx = p dt. Separable with noise only in the first partition; "channels"
// replicates the phase noise over several independent Wiener processes.
inline SdeProblem synchrotron_problem(const std::map<std::string, double>& overrides = {}) {
    SdeProblem p;
    p.name = "synchrotron";
    p.Q = 2;
    p.params = problems_detail::merged(
        {{"omega", 1.0}, {"lambda_ph", 0.2}, {"p0", 0.2}, {"x0", 1.0}, {"channels", 1.0}}, overrides);
    p.M = static_cast<int>(p.params.at("channels"));
    if (p.M < 0) throw std::invalid_argument("channels must be >= 0");
    p.dims = {1, 1};
    p.mode = Mode::stratonovich;
    double omega = p.params.at("omega");
    double lam = p.params.at("lambda_ph");
    p.g = [omega, lam](int q, int m, const PartitionedState& x) -> std::vector<double> {
        if (q == 1) {
            if (m == 0) return {-omega * omega * std::sin(x[1][0])};
            return {-lam * omega * omega * std::cos(x[1][0])};
        }
        if (m == 0) return {x[0][0]};
        return {0.0};
    };
    p.x0 = {{p.params.at("p0")}, {p.params.at("x0")}};
    p.weak_functional = [](const PartitionedState& x) { return x[1][0] * x[1][0]; };
    return p;
}

// Stochastic Jansen-Rit neural mass model: potentials (X0,X1,X2) in partition
// 1 with dXi = X_{i+3} dt, their derivatives in partition 2 with additive
// noise on each channel. Parameter defaults are illustrative only.
inline SdeProblem jansen_rit_problem(const std::map<std::string, double>& overrides = {}) {
    SdeProblem p;
    p.name = "jansen_rit";
    p.Q = 2;
    p.M = 3;
    p.dims = {3, 3};
    p.mode = Mode::ito;
    p.params = problems_detail::merged({{"A", 3.25},
                                        {"B", 22.0},
                                        {"a", 1.0},
                                        {"b", 0.5},
                                        {"C1", 1.35},
                                        {"C2", 1.08},
                                        {"C3", 0.34},
                                        {"C4", 0.34},
                                        {"r", 0.56},
                                        {"nu0", 6.0},
                                        {"nu_max", 5.0},
                                        {"mu3", 2.0},
                                        {"mu4", 2.0},
                                        {"mu5", 2.0},
                                        {"sigma3", 0.3},
                                        {"sigma4", 0.3},
                                        {"sigma5", 0.3}},
                                       overrides);
    auto prm = p.params;
    p.g = [prm](int q, int m, const PartitionedState& x) -> std::vector<double> {
        if (q == 1) {
            if (m == 0) return {x[1][0], x[1][1], x[1][2]};
            return {0.0, 0.0, 0.0};
        }
        double A = prm.at("A"), B = prm.at("B"), a = prm.at("a"), b = prm.at("b");
        double numax = prm.at("nu_max"), nu0 = prm.at("nu0"), r = prm.at("r");
        auto sigm = [&](double v) { return numax / (1.0 + std::exp(r * (nu0 - v))); };
        if (m == 0) {
            double x0 = x[0][0], x1 = x[0][1], x2 = x[0][2];
            double x3 = x[1][0], x4 = x[1][1], x5 = x[1][2];
            return {A * a * (prm.at("mu3") + sigm(x1 - x2)) - 2 * a * x3 - a * a * x0,
                    A * a * (prm.at("mu4") + prm.at("C2") * sigm(prm.at("C1") * x0)) - 2 * a * x4 -
                        a * a * x1,
                    B * b * (prm.at("mu5") + prm.at("C4") * sigm(prm.at("C3") * x0)) - 2 * b * x5 -
                        b * b * x2};
        }
        std::vector<double> out(3, 0.0);
        out[static_cast<std::size_t>(m - 1)] = prm.at(m == 1 ? "sigma3" : m == 2 ? "sigma4" : "sigma5");
        return out;
    };
    p.x0 = {{0.1, 0.2, 0.1}, {0.0, 0.0, 0.0}};
    p.weak_functional = [](const PartitionedState& x) { return x[0][0]; };
    return p;
}

// Bilinear system with skew-symmetric couplings: dX1 = R_m X2 *dW_m,
// dX2 = S_m X1 *dW_m with R_m = r_m [[0,1],[-1,0]], S_m = s_m [[0,1],[-1,0]],
// m = 0..channels. I(X1,X2) = X1 . X2 is invariant because v^T R v = 0 for
// skew R.
inline SdeProblem bilinear_skew_problem(const std::map<std::string, double>& overrides = {}) {
    SdeProblem p;
    p.name = "bilinear_skew";
    p.Q = 2;
    p.dims = {2, 2};
    p.mode = Mode::stratonovich;
    p.params = problems_detail::merged({{"channels", 1.0},
                                        {"r0", 0.3},
                                        {"s0", 0.4},
                                        {"r1", 0.5},
                                        {"s1", 0.7},
                                        {"r2", 0.8},
                                        {"s2", 0.6}},
                                       overrides);
    p.M = static_cast<int>(p.params.at("channels"));
    if (p.M < 0 || p.M > 2) throw std::invalid_argument("channels must be 0, 1 or 2");
    std::vector<double> r = {p.params.at("r0"), p.params.at("r1"), p.params.at("r2")};
    std::vector<double> s = {p.params.at("s0"), p.params.at("s1"), p.params.at("s2")};
    p.g = [r, s](int q, int m, const PartitionedState& x) -> std::vector<double> {
        double c = q == 1 ? r[static_cast<std::size_t>(m)] : s[static_cast<std::size_t>(m)];
        const std::vector<double>& other = q == 1 ? x[1] : x[0];
        return {c * other[1], -c * other[0]};
    };
    p.x0 = {{1.0, 0.3}, {0.2, 0.8}};
    p.invariant = [](const PartitionedState& x) {
        return x[0][0] * x[1][0] + x[0][1] * x[1][1];
    };
    p.weak_functional = [](const PartitionedState& x) { return x[0][0] * x[0][0]; };
    return p;
}

inline std::vector<std::string> builtin_problem_names() {
    return {"langevin", "jansen_rit", "synchrotron", "bilinear_skew"};
}

inline SdeProblem builtin_problem(const std::string& name,
                                  const std::map<std::string, double>& overrides = {}) {
    if (name == "langevin") return langevin_problem(overrides);
    if (name == "jansen_rit") return jansen_rit_problem(overrides);
    if (name == "synchrotron") return synchrotron_problem(overrides);
    if (name == "bilinear_skew") return bilinear_skew_problem(overrides);
    throw std::invalid_argument("unknown builtin problem '" + name + "'");
}

}  // namespace sprk
