// Command-line front end: tree enumeration and counts, weight tables, order
// checks, quadratic-invariant reports, convergence studies and the Monte
// Carlo oracle. Exit codes: 0 all requested checks passed, 1 a check failed,
// 2 usage or input-format error. Diagnostics go to stderr, data to stdout.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include <sprk/enumerate.hpp>
#include <sprk/mc.hpp>
#include <sprk/order.hpp>
#include <sprk/problems.hpp>
#include <sprk/simulate.hpp>

namespace {

using namespace sprk;

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitUsage = 2;

Tableau load_tableau(const std::string& spec_name, int M_override) {
    for (const std::string& b : builtin_tableau_names())
        if (b == spec_name) return builtin_tableau(spec_name, M_override > 0 ? M_override : 1);
    std::ifstream in(spec_name);
    if (!in) throw TableauFormatError("cannot open tableau file '" + spec_name + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    Tableau tab = parse_tableau(ss.str());
    if (M_override > 0 && M_override != tab.M)
        throw TableauFormatError("file tableau declares M=" + std::to_string(tab.M) +
                                 "; re-instantiation is only supported for builtins");
    return tab;
}

std::set<int> parse_noisy(const std::string& csv, int Q) {
    std::set<int> out;
    if (csv.empty()) {
        for (int q = 1; q <= Q; ++q) out.insert(q);
        return out;
    }
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) out.insert(std::stoi(item));
    return out;
}

Mode parse_mode(const std::string& m) {
    if (m == "ito") return Mode::ito;
    if (m == "strat" || m == "stratonovich") return Mode::stratonovich;
    throw CLI::ValidationError("--mode", "must be ito or strat");
}

std::map<std::string, double> parse_params(const std::vector<std::string>& kvs) {
    std::map<std::string, double> out;
    for (const std::string& kv : kvs) {
        auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw CLI::ValidationError("--param", "expected key=value, got '" + kv + "'");
        out[kv.substr(0, eq)] = std::stod(kv.substr(eq + 1));
    }
    return out;
}

void write_or_print(const std::string& path, const std::string& content) {
    if (path.empty() || path == "-") {
        std::cout << content;
        return;
    }
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << content;
}

int run(int argc, char** argv) {
    CLI::App app{"order-condition engine and numerical verifier for stochastic partitioned "
                 "Runge-Kutta methods"};
    app.require_subcommand(1);
    // '--h' is a data flag of the oracle subcommand, keep help on --help only
    app.set_help_flag("--help", "print help");

    // ---- trees -------------------------------------------------------
    auto* trees_cmd = app.add_subcommand("trees", "enumerate trees, optionally filtered");
    int t_Q = 2, t_M = 1;
    std::string t_order = "2", t_filter = "none", t_noisy;
    bool t_counts = false, t_prune = false, t_qi_any = false;
    trees_cmd->add_option("--Q", t_Q, "number of partitions")->required();
    trees_cmd->add_option("--M", t_M, "number of noise channels")->required();
    trees_cmd->add_option("--max-order", t_order, "order bound (half-integer)")->required();
    trees_cmd->add_option("--filter", t_filter, "none|separable|additive3|qi");
    trees_cmd->add_option("--noisy", t_noisy, "noisy partitions for separable, e.g. 1 or 1,2");
    trees_cmd->add_flag("--counts", t_counts, "print per-order counts only");
    trees_cmd->add_flag("--prune-drift-chains", t_prune,
                        "classic tabulation convention: drop trees where a drift node follows a "
                        "drift node of the same partition");
    trees_cmd->add_flag("--qi-shift-any-edge", t_qi_any,
                        "qi classes merge across every edge (default: only edges touching a noise "
                        "node)");

    // ---- table -------------------------------------------------------
    auto* table_cmd = app.add_subcommand("table", "weight table: No, rho, tau, phi, Phi");
    std::string tb_tab, tb_order = "2", tb_mode = "ito", tb_filter = "none", tb_noisy;
    int tb_Q = 0, tb_M = -1;
    bool tb_with_f = false;
    table_cmd->add_option("--tableau", tb_tab, "builtin name or JSON file")->required();
    table_cmd->add_option("--Q", tb_Q, "partitions (default: tableau's Q)");
    table_cmd->add_option("--M", tb_M, "noise channels (default: tableau's M)");
    table_cmd->add_option("--max-order", tb_order, "order bound");
    table_cmd->add_option("--mode", tb_mode, "ito|strat");
    table_cmd->add_option("--filter", tb_filter, "none|separable|additive3");
    table_cmd->add_option("--noisy", tb_noisy, "noisy partitions for separable");
    table_cmd->add_flag("--with-f", tb_with_f, "also print the symbolic elementary differential");

    // ---- check -------------------------------------------------------
    auto* check_cmd = app.add_subcommand("check", "strong/weak order verdicts");
    std::string c_tab, c_mode, c_p = "1", c_kind = "both", c_filter = "none", c_noisy;
    int c_M = 0;
    bool c_json = false, c_qi = false, c_qi_any = false;
    check_cmd->add_option("--tableau", c_tab, "builtin name or JSON file")->required();
    check_cmd->add_option("--mode", c_mode, "ito|strat")->required();
    check_cmd->add_option("--p", c_p, "target order (half-integer)")->required();
    check_cmd->add_option("--kind", c_kind, "strong|weak|both");
    check_cmd->add_option("--filter", c_filter, "none|separable|additive3");
    check_cmd->add_option("--noisy", c_noisy, "noisy partitions for separable");
    check_cmd->add_option("--M", c_M, "instantiate a builtin for this many channels");
    check_cmd->add_flag("--qi", c_qi, "collapse root-shift classes (Stratonovich + invariant "
                                      "condition required)");
    check_cmd->add_flag("--qi-shift-any-edge", c_qi_any, "qi classes merge across every edge");
    check_cmd->add_flag("--json", c_json, "emit the report as JSON");

    // ---- qi ----------------------------------------------------------
    auto* qi_cmd = app.add_subcommand("qi", "quadratic-invariant condition report");
    std::string q_tab;
    int q_M = 0;
    bool q_json = false;
    qi_cmd->add_option("--tableau", q_tab, "builtin name or JSON file")->required();
    qi_cmd->add_option("--M", q_M, "instantiate a builtin for this many channels");
    qi_cmd->add_flag("--json", q_json, "emit the report as JSON");

    // ---- simulate ----------------------------------------------------
    auto* sim_cmd = app.add_subcommand("simulate", "convergence studies and invariant drift");
    std::string s_tab, s_prob, s_study, s_out, s_manifest;
    double s_T = 1.0, s_h0 = 0.125;
    int s_levels = 4, s_M = 0;
    long long s_paths = 1000;
    std::uint64_t s_seed = 12345;
    std::vector<std::string> s_params;
    sim_cmd->add_option("--tableau", s_tab)->required();
    sim_cmd->add_option("--problem", s_prob, "langevin|jansen_rit|synchrotron|bilinear_skew")
        ->required();
    sim_cmd->add_option("--study", s_study, "strong|weak|invariant")->required();
    sim_cmd->add_option("--T", s_T, "final time");
    sim_cmd->add_option("--h0", s_h0, "coarsest step");
    sim_cmd->add_option("--levels", s_levels, "number of dyadic levels");
    sim_cmd->add_option("--paths", s_paths, "Monte Carlo paths");
    sim_cmd->add_option("--seed", s_seed, "random seed");
    sim_cmd->add_option("--M", s_M, "instantiate a builtin tableau for this many channels");
    sim_cmd->add_option("--param", s_params, "problem parameter override key=value");
    sim_cmd->add_option("--out", s_out, "CSV output path (default stdout)");
    sim_cmd->add_option("--manifest", s_manifest, "write a JSON study manifest here");

    // ---- oracle ------------------------------------------------------
    auto* or_cmd = app.add_subcommand("oracle", "Monte Carlo vs symbolic expectation");
    std::string o_expr;
    double o_h = 1.0;
    long long o_paths = 100000;
    int o_grid = 128;
    std::uint64_t o_seed = 2024;
    or_cmd->add_option("--expr", o_expr, "coefficient expression, e.g. \"dW[1]*dW[1]\"")->required();
    or_cmd->add_option("--h", o_h, "step size");
    or_cmd->add_option("--paths", o_paths);
    or_cmd->add_option("--grid", o_grid, "grid points per step (>= 64)");
    or_cmd->add_option("--seed", o_seed);

    for (CLI::App* sc : app.get_subcommands([](const CLI::App*) { return true; }))
        sc->set_help_flag("--help", "print help");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        app.exit(e);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    if (trees_cmd->parsed()) {
        EnumerateOptions opt;
        opt.prune_same_shape_drift_edges = t_prune;
        std::vector<Tree> trees = enumerate_trees(t_Q, t_M, Half::parse_decimal(t_order), opt);
        if (t_filter == "separable")
            trees = filter_separable(trees, parse_noisy(t_noisy, t_Q));
        else if (t_filter == "additive3")
            trees = filter_additive(trees);
        else if (t_filter == "qi")
            trees = qi_representatives(
                filter_separable(trees, parse_noisy(t_noisy, t_Q)),
                t_qi_any ? RootShiftPolicy::any_edge : RootShiftPolicy::noise_edges_only);
        else if (t_filter != "none")
            throw CLI::ValidationError("--filter", "must be none, separable, additive3 or qi");
        if (t_counts) {
            auto counts = count_by_order(trees);
            long long total = 0;
            bool first = true;
            for (auto& [o, n] : counts) {
                if (!first) std::cout << " ";
                std::cout << o.decimal_str() << ":" << n;
                total += n;
                first = false;
            }
            if (!first) std::cout << " ";
            std::cout << "total:" << total << "\n";
        } else {
            int no = 1;
            for (const Tree& t : trees)
                std::cout << no++ << "\t" << t.order().decimal_str() << "\t" << t.str() << "\n";
        }
        return kExitOk;
    }

    if (table_cmd->parsed()) {
        Tableau tab = load_tableau(tb_tab, tb_M > 0 ? tb_M : 0);
        int Q = tb_Q > 0 ? tb_Q : tab.Q;
        int M = tb_M >= 0 ? tb_M : tab.M;
        std::vector<Tree> trees = enumerate_trees(Q, M, Half::parse_decimal(tb_order));
        if (tb_filter == "separable")
            trees = filter_separable(trees, parse_noisy(tb_noisy, Q));
        else if (tb_filter == "additive3")
            trees = filter_additive(trees);
        else if (tb_filter != "none")
            throw CLI::ValidationError("--filter", "must be none, separable or additive3");
        std::cout << weight_table(trees, tab, parse_mode(tb_mode), tb_with_f);
        return kExitOk;
    }

    if (check_cmd->parsed()) {
        OrderQuery q;
        q.tableau = load_tableau(c_tab, c_M);
        q.mode = parse_mode(c_mode);
        q.p = Half::parse_decimal(c_p);
        if (c_kind == "strong")
            q.kind = CheckKind::strong;
        else if (c_kind == "weak")
            q.kind = CheckKind::weak;
        else if (c_kind == "both")
            q.kind = CheckKind::both;
        else
            throw CLI::ValidationError("--kind", "must be strong, weak or both");
        if (c_filter == "separable") {
            q.filter.kind = FilterKind::separable;
            q.filter.noisy_partitions = parse_noisy(c_noisy, q.tableau.Q);
        } else if (c_filter == "additive3")
            q.filter.kind = FilterKind::additive3;
        else if (c_filter != "none")
            throw CLI::ValidationError("--filter", "must be none, separable or additive3");
        q.filter.qi_reduce = c_qi;
        q.filter.qi_policy =
            c_qi_any ? RootShiftPolicy::any_edge : RootShiftPolicy::noise_edges_only;
        OrderReport rep = check_orders(q);
        if (c_json)
            std::cout << rep.to_json().dump(2) << "\n";
        else
            std::cout << rep.text();
        return rep.requested_passed() ? kExitOk : kExitCheckFailed;
    }

    if (qi_cmd->parsed()) {
        Tableau tab = load_tableau(q_tab, q_M);
        QiReport rep = check_quadratic_invariant(tab);
        if (q_json) {
            nlohmann::json j;
            j["tableau"] = tab.name;
            j["holds"] = rep.holds;
            nlohmann::json ws = nlohmann::json::array();
            for (const auto& w : rep.witnesses)
                ws.push_back({{"i", w.i},
                              {"j", w.j},
                              {"m1", w.m1},
                              {"m2", w.m2},
                              {"residual", w.residual.str()}});
            j["witnesses"] = ws;
            std::cout << j.dump(2) << "\n";
        } else {
            std::cout << "tableau " << tab.name << "\n";
            std::cout << "quadratic-invariant condition: " << (rep.holds ? "holds" : "FAILS")
                      << "\n";
            for (const auto& w : rep.witnesses)
                std::cout << "  violated at i=" << w.i << " j=" << w.j << " m1=" << w.m1
                          << " m2=" << w.m2 << ": residual " << w.residual.str() << "\n";
        }
        return rep.holds ? kExitOk : kExitCheckFailed;
    }

    if (sim_cmd->parsed()) {
        SdeProblem prob = builtin_problem(s_prob, parse_params(s_params));
        Tableau tab = load_tableau(s_tab, s_M > 0 ? s_M : prob.M);
        std::vector<double> hs;
        for (int k = 0; k < s_levels; ++k) hs.push_back(s_h0 / std::pow(2.0, k));
        if (s_study == "strong" || s_study == "weak") {
            ConvergenceResult res = s_study == "strong"
                                        ? strong_study(tab, prob, s_T, hs, s_paths, s_seed)
                                        : weak_study(tab, prob, s_T, hs, s_paths, s_seed);
            write_or_print(s_out, res.csv());
            if (!s_manifest.empty())
                write_or_print(s_manifest, res.manifest(tab, prob).dump(2) + "\n");
            std::cerr << "slope " << res.slope << " +- " << res.slope_halfwidth << " (status "
                      << res.status << ")\n";
            return res.status == "ok" ? kExitOk : kExitCheckFailed;
        }
        if (s_study == "invariant") {
            InvariantDriftResult res = invariant_drift(tab, prob, s_T, s_h0, s_paths, s_seed);
            nlohmann::json j;
            j["tableau"] = tab.name;
            j["problem"] = prob.name;
            j["max_drift"] = res.max_drift;
            j["mean_drift"] = res.mean_drift;
            j["paths"] = res.paths;
            std::cout << j.dump(2) << "\n";
            if (!s_manifest.empty()) write_or_print(s_manifest, j.dump(2) + "\n");
            return kExitOk;
        }
        throw CLI::ValidationError("--study", "must be strong, weak or invariant");
    }

    if (or_cmd->parsed()) {
        AlgebraElement e = parse_coefficient(o_expr);
        McResult mc = mc_oracle(e, o_h, o_paths, o_grid, o_seed);
        HPolynomial expect = e.expectation();
        double symbolic = expect.evaluate(o_h);
        nlohmann::json j;
        j["expr"] = e.str();
        j["symbolic_expectation"] = expect.str();
        j["symbolic_value"] = symbolic;
        j["mc_mean"] = mc.mean;
        j["mc_std_error"] = mc.std_error;
        j["paths"] = mc.paths;
        bool agree = mc.within(symbolic, 3.0);
        j["within_3_sigma"] = agree;
        std::cout << j.dump(2) << "\n";
        return agree ? kExitOk : kExitCheckFailed;
    }

    return kExitUsage;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const sprk::TableauFormatError& e) {
        std::cerr << "tableau error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const sprk::ExprError& e) {
        std::cerr << "expression error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
}
