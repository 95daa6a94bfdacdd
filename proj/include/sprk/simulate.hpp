#pragma once

// Numerical SPRK stepping and the empirical convergence harness.
//
// One step of stepsize h solves the stage system
//   H_i^(q) = Y^(q) + sum_m sum_j Z^(q,m)_ij g_m^(q)(H_j)
// and updates Y^(q) += sum_m sum_i gamma^(q,m)_i g_m^(q)(H_i). Stage values
// are computed in structural order when the joint dependency graph is
// acyclic, otherwise by fixed-point sweeps.
//
// Strong errors are measured against the same method at a four-fold finer
// step driven by the same Brownian paths; (dW, J) increments aggregate
// exactly across dyadic refinements.

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "problems.hpp"
#include "rng.hpp"
#include "tableau.hpp"

namespace sprk {

struct IncrementSample {
    std::vector<double> dW;  // per channel m = 1..M
    std::vector<double> J;   // J_{(m,0)}
};

// (dW, J) are jointly Gaussian with covariance [[h, h^2/2], [h^2/2, h^3/3]];
// sampled through the Cholesky factor, independently per channel.
inline IncrementSample sample_increments(double h, int M, Rng& rng) {
    if (!(h > 0)) throw std::invalid_argument("sample_increments: h must be positive");
    IncrementSample s;
    s.dW.resize(static_cast<std::size_t>(M));
    s.J.resize(static_cast<std::size_t>(M));
    const double sh = std::sqrt(h);
    const double c1 = 0.5 * h * sh;                      // h^{3/2}/2
    const double c2 = h * sh / (2.0 * std::sqrt(3.0));   // h^{3/2}/(2 sqrt 3)
    for (int m = 0; m < M; ++m) {
        double z1 = rng.normal();
        double z2 = rng.normal();
        s.dW[static_cast<std::size_t>(m)] = sh * z1;
        s.J[static_cast<std::size_t>(m)] = c1 * z1 + c2 * z2;
    }
    return s;
}

// ---------------------------------------------------------------------------
// Compiled tableau: entries reduced to sum of c * h^k * {1, dW[m], J[m,0]}.

struct CompiledEntry {
    struct Term {
        double c = 0;
        int hpow = 0;
        int kind = 0;  // 0 constant, 1 dW[m], 2 J[m,0]
        int m = 0;
    };
    std::vector<Term> terms;

    bool empty() const { return terms.empty(); }

    double eval(double h, const IncrementSample& inc) const {
        double acc = 0;
        for (const Term& t : terms) {
            double v = t.c * std::pow(h, t.hpow);
            if (t.kind == 1) v *= inc.dW[static_cast<std::size_t>(t.m - 1)];
            if (t.kind == 2) v *= inc.J[static_cast<std::size_t>(t.m - 1)];
            acc += v;
        }
        return acc;
    }
};

struct CompiledTableau {
    int Q = 0, M = 0, s = 0;
    std::vector<CompiledEntry> Z;  // [((q-1)*(M+1)+m)*s*s + (i-1)*s + (j-1)]
    std::vector<CompiledEntry> g;  // [((q-1)*(M+1)+m)*s + (i-1)]
    StageStructure structure;

    const CompiledEntry& z(int q, int m, int i, int j) const {
        return Z[static_cast<std::size_t>((((q - 1) * (M + 1) + m) * s + (i - 1)) * s + (j - 1))];
    }
    const CompiledEntry& gam(int q, int m, int i) const {
        return g[static_cast<std::size_t>(((q - 1) * (M + 1) + m) * s + (i - 1))];
    }
};

inline CompiledEntry compile_entry(const AlgebraElement& e, const std::string& where) {
    CompiledEntry out;
    for (const auto& [key, c] : e.terms()) {
        CompiledEntry::Term t;
        t.c = rat_double(c);
        t.hpow = key.first;
        const Word& w = key.second;
        if (w.empty()) {
            t.kind = 0;
        } else if (w.size() == 1 && w[0] > 0) {
            t.kind = 1;
            t.m = w[0];
        } else if (w.size() == 2 && w[0] > 0 && w[1] == 0) {
            t.kind = 2;
            t.m = w[0];
        } else {
            throw std::invalid_argument("tableau entry at " + where +
                                        " is not expressible in {h, dW, J}: " + e.raw_str());
        }
        out.terms.push_back(t);
    }
    return out;
}

inline CompiledTableau compile_tableau(const Tableau& tab) {
    CompiledTableau ct;
    ct.Q = tab.Q;
    ct.M = tab.M;
    ct.s = tab.s;
    ct.structure = stage_structure(tab);
    for (int q = 1; q <= tab.Q; ++q)
        for (int m = 0; m <= tab.M; ++m) {
            for (int i = 1; i <= tab.s; ++i)
                for (int j = 1; j <= tab.s; ++j)
                    ct.Z.push_back(compile_entry(
                        tab.z(q, m, i, j), "Z(" + std::to_string(q) + "," + std::to_string(m) + ")"));
        }
    for (int q = 1; q <= tab.Q; ++q)
        for (int m = 0; m <= tab.M; ++m)
            for (int i = 1; i <= tab.s; ++i)
                ct.g.push_back(compile_entry(
                    tab.g(q, m, i), "gamma(" + std::to_string(q) + "," + std::to_string(m) + ")"));
    return ct;
}

// ---------------------------------------------------------------------------
// Stepping

struct StepControl {
    double tol = 1e-12;
    int max_sweeps = 50;
};

struct StageSolveError : std::runtime_error {
    double residual;
    StageSolveError(double res, int iters)
        : std::runtime_error("stage iteration did not reach tolerance after " +
                             std::to_string(iters) + " sweeps (residual " + std::to_string(res) + ")"),
          residual(res) {}
};

namespace sim_detail {

inline void check_finite(const std::vector<double>& v, const char* what) {
    for (double x : v)
        if (!std::isfinite(x)) throw std::runtime_error(std::string(what) + " produced a non-finite value");
}

}  // namespace sim_detail

inline PartitionedState sprk_step(const CompiledTableau& ct, const SdeProblem& prob,
                                  const PartitionedState& y, double h, const IncrementSample& inc,
                                  const StepControl& control = {}) {
    if (prob.Q != ct.Q || prob.M > ct.M)
        throw std::invalid_argument("problem dimensions do not match the tableau");
    if (h == 0) return y;
    const int s = ct.s;

    // stage states H[i][q-1][*] and cached evaluations g_m^(q)(H_i)
    std::vector<PartitionedState> H(static_cast<std::size_t>(s), y);
    // gval[i][q-1][m] -> vector
    std::vector<std::vector<std::vector<std::vector<double>>>> gval(
        static_cast<std::size_t>(s),
        std::vector<std::vector<std::vector<double>>>(
            static_cast<std::size_t>(prob.Q),
            std::vector<std::vector<double>>(static_cast<std::size_t>(prob.M) + 1)));
    std::vector<std::vector<std::vector<bool>>> gdone(
        static_cast<std::size_t>(s),
        std::vector<std::vector<bool>>(static_cast<std::size_t>(prob.Q),
                                       std::vector<bool>(static_cast<std::size_t>(prob.M) + 1, false)));

    auto eval_g = [&](int stage_i, int q, int m) -> const std::vector<double>& {
        auto& slot = gval[static_cast<std::size_t>(stage_i)][static_cast<std::size_t>(q - 1)]
                         [static_cast<std::size_t>(m)];
        bool done = gdone[static_cast<std::size_t>(stage_i)][static_cast<std::size_t>(q - 1)]
                         [static_cast<std::size_t>(m)];
        if (!done) {
            slot = prob.g(q, m, H[static_cast<std::size_t>(stage_i)]);
            sim_detail::check_finite(slot, "coefficient function");
            gdone[static_cast<std::size_t>(stage_i)][static_cast<std::size_t>(q - 1)]
                 [static_cast<std::size_t>(m)] = true;
        }
        return slot;
    };

    auto compute_stage = [&](int i1) {  // 1-based stage, fills H[i1-1]
        PartitionedState hi = y;
        for (int q = 1; q <= prob.Q; ++q) {
            auto& comp = hi[static_cast<std::size_t>(q - 1)];
            for (int m = 0; m <= prob.M; ++m)
                for (int j = 1; j <= s; ++j) {
                    const CompiledEntry& e = ct.z(q, m, i1, j);
                    if (e.empty()) continue;
                    double zv = e.eval(h, inc);
                    if (zv == 0) continue;
                    const auto& gj = eval_g(j - 1, q, m);
                    for (std::size_t d = 0; d < comp.size(); ++d) comp[d] += zv * gj[d];
                }
        }
        H[static_cast<std::size_t>(i1 - 1)] = std::move(hi);
    };

    if (ct.structure.explicit_order) {
        for (int i1 : ct.structure.order) compute_stage(i1);
    } else {
        // Gauss-Seidel fixed-point sweeps; once the tolerance is met two more
        // polish sweeps push the residual toward round-off so that exactly
        // preserved invariants stay preserved to nearly machine precision.
        double scale = 1.0;
        for (const auto& part : y)
            for (double x : part) scale = std::max(scale, std::abs(x));
        double residual = 0;
        bool converged = false;
        int polish = 0;
        for (int sweep = 0; sweep < control.max_sweeps; ++sweep) {
            residual = 0;
            for (int i1 = 1; i1 <= s; ++i1) {
                PartitionedState before = H[static_cast<std::size_t>(i1 - 1)];
                compute_stage(i1);
                const PartitionedState& after = H[static_cast<std::size_t>(i1 - 1)];
                for (std::size_t q = 0; q < before.size(); ++q)
                    for (std::size_t d = 0; d < before[q].size(); ++d)
                        residual = std::max(residual, std::abs(after[q][d] - before[q][d]));
                // dependents must see g at the fresh stage value
                for (auto& qflags : gdone[static_cast<std::size_t>(i1 - 1)])
                    std::fill(qflags.begin(), qflags.end(), false);
            }
            if (residual <= control.tol * scale) converged = true;
            if (converged && ++polish >= 3) break;
        }
        if (!converged) throw StageSolveError(residual, control.max_sweeps);
    }

    PartitionedState out = y;
    for (int q = 1; q <= prob.Q; ++q) {
        auto& comp = out[static_cast<std::size_t>(q - 1)];
        for (int m = 0; m <= prob.M; ++m)
            for (int i = 1; i <= s; ++i) {
                const CompiledEntry& e = ct.gam(q, m, i);
                if (e.empty()) continue;
                double gv = e.eval(h, inc);
                if (gv == 0) continue;
                const auto& gi = eval_g(i - 1, q, m);
                for (std::size_t d = 0; d < comp.size(); ++d) comp[d] += gv * gi[d];
            }
        sim_detail::check_finite(comp, "step update");
    }
    return out;
}

// ---------------------------------------------------------------------------
// Increment paths and exact dyadic aggregation

struct IncrementPath {
    double h = 0;                            // per-step size
    std::vector<IncrementSample> steps;      // one sample per step
};

inline IncrementPath sample_increment_path(double h, int steps, int M, Rng& rng) {
    IncrementPath p;
    p.h = h;
    p.steps.reserve(static_cast<std::size_t>(steps));
    for (int k = 0; k < steps; ++k) p.steps.push_back(sample_increments(h, M, rng));
    return p;
}

// Exact identity: over a block of fine steps starting at the coarse step
// start, dW_c = sum dW_i and
//   J_c = sum_i [ J_i + h_f * (W(t_i) - W(t_start)) ]
// since int_{t_i}^{t_i+hf} (W - W(t_start)) ds = J_i + hf (W(t_i) - W(t_start)).
inline IncrementPath aggregate_increments(const IncrementPath& fine, int ratio) {
    if (ratio < 1 || static_cast<int>(fine.steps.size()) % ratio != 0)
        throw std::invalid_argument("aggregation ratio must divide the number of fine steps");
    const int M = fine.steps.empty() ? 0 : static_cast<int>(fine.steps.front().dW.size());
    IncrementPath coarse;
    coarse.h = fine.h * ratio;
    const int n_coarse = static_cast<int>(fine.steps.size()) / ratio;
    coarse.steps.resize(static_cast<std::size_t>(n_coarse));
    for (int c = 0; c < n_coarse; ++c) {
        IncrementSample& out = coarse.steps[static_cast<std::size_t>(c)];
        out.dW.assign(static_cast<std::size_t>(M), 0.0);
        out.J.assign(static_cast<std::size_t>(M), 0.0);
        for (int m = 0; m < M; ++m) {
            double cum = 0;
            double dw_sum = 0, j_sum = 0;
            for (int i = 0; i < ratio; ++i) {
                const IncrementSample& f = fine.steps[static_cast<std::size_t>(c * ratio + i)];
                j_sum += f.J[static_cast<std::size_t>(m)] + fine.h * cum;
                cum += f.dW[static_cast<std::size_t>(m)];
                dw_sum += f.dW[static_cast<std::size_t>(m)];
            }
            out.dW[static_cast<std::size_t>(m)] = dw_sum;
            out.J[static_cast<std::size_t>(m)] = j_sum;
        }
    }
    return coarse;
}

inline PartitionedState run_path(const CompiledTableau& ct, const SdeProblem& prob,
                                 const IncrementPath& path, const StepControl& control = {}) {
    PartitionedState y = prob.x0;
    for (const IncrementSample& inc : path.steps) y = sprk_step(ct, prob, y, path.h, inc, control);
    return y;
}

// ---------------------------------------------------------------------------
// Convergence studies

struct ConvergenceResult {
    std::vector<double> hs;
    std::vector<double> errors;
    std::vector<double> stderrs;
    std::vector<bool> usable;  // weak studies flag levels drowned in MC noise
    long long paths = 0;
    std::uint64_t seed = 0;
    double slope = 0;
    double slope_halfwidth = 0;
    std::string status = "ok";  // "ok" | "noise_floor"
    std::string study;
    std::string tableau_name;
    std::string problem_name;
    double T = 0;
    double reference_bias_estimate = 0;  // weak: Richardson gap between the two finest refs

    std::string csv() const {
        std::ostringstream os;
        os << "h,error,stderr,paths\n";
        for (std::size_t i = 0; i < hs.size(); ++i)
            os << hs[i] << "," << errors[i] << "," << stderrs[i] << "," << paths << "\n";
        return os.str();
    }

    nlohmann::json manifest(const Tableau& tab, const SdeProblem& prob) const {
        nlohmann::json j;
        j["study"] = study;
        j["tableau"] = tab.name;
        j["tableau_sha"] = std::to_string(std::hash<std::string>{}(print_tableau(tab)));
        j["problem"] = prob.name;
        nlohmann::json params = nlohmann::json::object();
        for (const auto& [k, v] : prob.params) params[k] = v;
        j["parameters"] = params;
        j["T"] = T;
        j["seed"] = seed;
        j["paths"] = paths;
        j["h"] = hs;
        j["error"] = errors;
        j["stderr"] = stderrs;
        j["slope"] = slope;
        j["slope_halfwidth"] = slope_halfwidth;
        j["status"] = status;
        if (study == "weak") j["reference_bias_estimate"] = reference_bias_estimate;
        return j;
    }
};

namespace sim_detail {

inline void fit_slope(ConvergenceResult& res) {
    // least squares on log2 data over usable levels
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < res.hs.size(); ++i) {
        if (!res.usable.empty() && !res.usable[i]) continue;
        if (res.errors[i] <= 0) continue;
        xs.push_back(std::log2(res.hs[i]));
        ys.push_back(std::log2(res.errors[i]));
    }
    const std::size_t n = xs.size();
    if (n < 3) {
        res.status = "noise_floor";
        res.slope = 0;
        res.slope_halfwidth = 0;
        return;
    }
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sx += xs[i];
        sy += ys[i];
        sxx += xs[i] * xs[i];
        sxy += xs[i] * ys[i];
    }
    double denom = n * sxx - sx * sx;
    res.slope = (n * sxy - sx * sy) / denom;
    double intercept = (sy - res.slope * sx) / n;
    double ss = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double r = ys[i] - (intercept + res.slope * xs[i]);
        ss += r * r;
    }
    double se = n > 2 ? std::sqrt(ss / (n - 2) / (sxx - sx * sx / n)) : 0.0;
    res.slope_halfwidth = 2 * se;
}

inline void validate_h_list(const std::vector<double>& h_list, double T) {
    if (h_list.size() < 3) throw std::invalid_argument("need at least 3 step sizes");
    for (std::size_t i = 0; i + 1 < h_list.size(); ++i) {
        double ratio = h_list[i] / h_list[i + 1];
        if (std::abs(ratio - 2.0) > 1e-9)
            throw std::invalid_argument("step sizes must be dyadic refinements (h, h/2, h/4, ...)");
    }
    double steps = T / h_list.front();
    if (std::abs(steps - std::round(steps)) > 1e-9)
        throw std::invalid_argument("T must be an integer multiple of the coarsest step");
}

inline double state_sq_dist(const PartitionedState& a, const PartitionedState& b) {
    double acc = 0;
    for (std::size_t q = 0; q < a.size(); ++q)
        for (std::size_t d = 0; d < a[q].size(); ++d) {
            double diff = a[q][d] - b[q][d];
            acc += diff * diff;
        }
    return acc;
}

}  // namespace sim_detail

// Strong (root-mean-square endpoint) error study. The reference solution is
// the same method at a four-fold finer step than the finest level, driven by
// the same Brownian paths via exact increment aggregation.
inline ConvergenceResult strong_study(const Tableau& tab, const SdeProblem& prob, double T,
                                      const std::vector<double>& h_list, long long paths,
                                      std::uint64_t seed, const StepControl& control = {}) {
    sim_detail::validate_h_list(h_list, T);
    CompiledTableau ct = compile_tableau(tab);
    const double h_ref = h_list.back() / 4.0;
    const int n_ref = static_cast<int>(std::llround(T / h_ref));

    ConvergenceResult res;
    res.study = "strong";
    res.tableau_name = tab.name;
    res.problem_name = prob.name;
    res.T = T;
    res.hs = h_list;
    res.paths = paths;
    res.seed = seed;
    std::vector<double> sq_sum(h_list.size(), 0.0);
    std::vector<double> sq_m2(h_list.size(), 0.0);

    for (long long p = 0; p < paths; ++p) {
        Rng rng = path_rng(seed, static_cast<std::uint64_t>(p));
        IncrementPath fine = sample_increment_path(h_ref, n_ref, prob.M, rng);
        PartitionedState y_ref = run_path(ct, prob, fine, control);
        for (std::size_t lev = 0; lev < h_list.size(); ++lev) {
            int ratio = static_cast<int>(std::llround(h_list[lev] / h_ref));
            IncrementPath coarse = aggregate_increments(fine, ratio);
            PartitionedState y = run_path(ct, prob, coarse, control);
            double sq = sim_detail::state_sq_dist(y, y_ref);
            sq_sum[lev] += sq;
            sq_m2[lev] += sq * sq;
        }
    }
    for (std::size_t lev = 0; lev < h_list.size(); ++lev) {
        double mean_sq = sq_sum[lev] / static_cast<double>(paths);
        double var_sq =
            std::max(0.0, sq_m2[lev] / static_cast<double>(paths) - mean_sq * mean_sq);
        double rmse = std::sqrt(mean_sq);
        res.errors.push_back(rmse);
        // delta method: se(rmse) ~ se(mean_sq) / (2 rmse)
        double se_mean = std::sqrt(var_sq / static_cast<double>(paths));
        res.stderrs.push_back(rmse > 0 ? se_mean / (2 * rmse) : 0.0);
    }
    res.usable.assign(h_list.size(), true);
    sim_detail::fit_slope(res);
    return res;
}

// Weak error study for a smooth functional f. Errors are estimated as the
// mean of the coupled differences f(Y_h) - f(Y_ref) over shared Brownian
// paths, which keeps Monte Carlo noise at the level of the pathwise
// difference. Levels whose error sits below three standard errors are
// excluded from the slope; with fewer than three usable levels the study
// reports a noise floor instead of a slope. A second reference at twice the
// reference step provides a Richardson estimate of the reference bias.
inline ConvergenceResult weak_study(const Tableau& tab, const SdeProblem& prob, double T,
                                    const std::vector<double>& h_list, long long paths,
                                    std::uint64_t seed,
                                    std::function<double(const PartitionedState&)> f = {},
                                    const StepControl& control = {}) {
    sim_detail::validate_h_list(h_list, T);
    if (!f) f = prob.weak_functional;
    if (!f) throw std::invalid_argument("weak_study needs a functional");
    CompiledTableau ct = compile_tableau(tab);
    const double h_ref = h_list.back() / 4.0;
    const int n_ref = static_cast<int>(std::llround(T / h_ref));

    ConvergenceResult res;
    res.study = "weak";
    res.tableau_name = tab.name;
    res.problem_name = prob.name;
    res.T = T;
    res.hs = h_list;
    res.paths = paths;
    res.seed = seed;

    std::vector<double> d_sum(h_list.size(), 0.0), d_m2(h_list.size(), 0.0);
    double gap_sum = 0;
    for (long long p = 0; p < paths; ++p) {
        Rng rng = path_rng(seed, static_cast<std::uint64_t>(p));
        IncrementPath fine = sample_increment_path(h_ref, n_ref, prob.M, rng);
        double f_ref = f(run_path(ct, prob, fine, control));
        double f_ref2 = f(run_path(ct, prob, aggregate_increments(fine, 2), control));
        gap_sum += f_ref2 - f_ref;
        for (std::size_t lev = 0; lev < h_list.size(); ++lev) {
            int ratio = static_cast<int>(std::llround(h_list[lev] / h_ref));
            double d = f(run_path(ct, prob, aggregate_increments(fine, ratio), control)) - f_ref;
            d_sum[lev] += d;
            d_m2[lev] += d * d;
        }
    }
    res.usable.assign(h_list.size(), true);
    for (std::size_t lev = 0; lev < h_list.size(); ++lev) {
        double mean = d_sum[lev] / static_cast<double>(paths);
        double var = std::max(0.0, d_m2[lev] / static_cast<double>(paths) - mean * mean);
        double se = std::sqrt(var / static_cast<double>(paths));
        res.errors.push_back(std::abs(mean));
        res.stderrs.push_back(se);
        if (std::abs(mean) < 3 * se) res.usable[lev] = false;
    }
    res.reference_bias_estimate = std::abs(gap_sum / static_cast<double>(paths));
    sim_detail::fit_slope(res);
    return res;
}

// Quadratic-invariant drift over [0, T]: per-path maximum of
// |I(Y_n) - I(y_0)|, reported as max and mean over paths.
struct InvariantDriftResult {
    double max_drift = 0;
    double mean_drift = 0;
    long long paths = 0;
};

inline InvariantDriftResult invariant_drift(const Tableau& tab, const SdeProblem& prob, double T,
                                            double h, long long paths, std::uint64_t seed,
                                            const StepControl& control = {}) {
    if (!prob.invariant) throw std::invalid_argument("problem has no invariant evaluator");
    CompiledTableau ct = compile_tableau(tab);
    const int n = static_cast<int>(std::llround(T / h));
    InvariantDriftResult res;
    res.paths = paths;
    double sum = 0;
    for (long long p = 0; p < paths; ++p) {
        Rng rng = path_rng(seed, static_cast<std::uint64_t>(p));
        PartitionedState y = prob.x0;
        double i0 = prob.invariant(y);
        double worst = 0;
        for (int k = 0; k < n; ++k) {
            IncrementSample inc = sample_increments(h, prob.M, rng);
            y = sprk_step(ct, prob, y, h, inc, control);
            worst = std::max(worst, std::abs(prob.invariant(y) - i0));
        }
        res.max_drift = std::max(res.max_drift, worst);
        sum += worst;
    }
    res.mean_drift = sum / static_cast<double>(paths);
    return res;
}

}  // namespace sprk
