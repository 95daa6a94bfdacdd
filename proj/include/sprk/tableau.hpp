#pragma once

// Generalized Butcher tableau for stochastic partitioned Runge-Kutta methods:
// one s x s matrix Z^(q,m) and one s-vector gamma^(q,m) per partition q and
// channel m (m = 0 is the drift channel). Entries are exact AlgebraElements
// over the generators {h, dW[m], J[m,0]}.
//
// File format (format 1): a single JSON document
//   { "format": 1, "name": ..., "Q": ..., "M": ..., "s": ...,
//     "mode": "ito"|"stratonovich"|"both",
//     "Z":     { "q,0": [[expr,...],...], "q,*": ... or "q,m": ... },
//     "gamma": { "q,0": [expr,...], ... } }
// A "q,*" block is a template over the placeholder noise index '*' and is
// instantiated for every m = 1..M.

#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "expr.hpp"

namespace sprk {

struct TableauFormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Tableau {
    std::string name;
    int Q = 0;
    int M = 0;
    int s = 0;
    std::string mode_hint = "both";  // informational: "ito" | "stratonovich" | "both"

    // blocks indexed [q-1][m]
    std::vector<std::vector<std::vector<std::vector<AlgebraElement>>>> Z;
    std::vector<std::vector<std::vector<AlgebraElement>>> gamma;

    const AlgebraElement& z(int q, int m, int i, int j) const {
        check_qm(q, m);
        return Z[static_cast<std::size_t>(q - 1)][static_cast<std::size_t>(m)]
                [static_cast<std::size_t>(i - 1)][static_cast<std::size_t>(j - 1)];
    }
    const AlgebraElement& g(int q, int m, int i) const {
        check_qm(q, m);
        return gamma[static_cast<std::size_t>(q - 1)][static_cast<std::size_t>(m)]
                    [static_cast<std::size_t>(i - 1)];
    }

    friend bool operator==(const Tableau&, const Tableau&) = default;

  private:
    void check_qm(int q, int m) const {
        if (q < 1 || q > Q) throw std::out_of_range("partition index " + std::to_string(q));
        if (m < 0 || m > M) throw std::out_of_range("noise index " + std::to_string(m));
    }
};

namespace detail {

inline void validate_entry_generators(const AlgebraElement& e, const std::string& where) {
    for (const auto& [key, c] : e.terms()) {
        const Word& w = key.second;
        bool ok = w.empty() || (w.size() == 1 && w[0] != 0) ||
                  (w.size() == 2 && w[0] != 0 && w[1] == 0);
        if (!ok)
            throw TableauFormatError("entry at " + where +
                                     " uses a random variable outside {h, dW[m], J[m,0]}");
    }
}

inline std::pair<int, bool> parse_block_key(const std::string& key) {
    // "q,m" or "q,*"; returns (q, is_template) with m via second parse below
    auto comma = key.find(',');
    if (comma == std::string::npos) throw TableauFormatError("bad block key '" + key + "'");
    try {
        return {std::stoi(key.substr(0, comma)), key.substr(comma + 1) == "*"};
    } catch (const std::exception&) {
        throw TableauFormatError("bad block key '" + key + "'");
    }
}

inline int parse_block_m(const std::string& key) {
    auto comma = key.find(',');
    try {
        return std::stoi(key.substr(comma + 1));
    } catch (const std::exception&) {
        throw TableauFormatError("bad block key '" + key + "'");
    }
}

}  // namespace detail

inline Tableau parse_tableau(const std::string& document) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(document);
    } catch (const nlohmann::json::parse_error& e) {
        throw TableauFormatError(std::string("tableau JSON: ") + e.what());
    }
    auto require = [&](const char* field) {
        if (!j.contains(field)) throw TableauFormatError(std::string("missing field '") + field + "'");
    };
    require("format");
    if (j["format"] != 1) throw TableauFormatError("unsupported tableau format version");
    for (const char* f : {"name", "Q", "M", "s", "Z", "gamma"}) require(f);

    Tableau tab;
    tab.name = j["name"].get<std::string>();
    tab.Q = j["Q"].get<int>();
    tab.M = j["M"].get<int>();
    tab.s = j["s"].get<int>();
    if (j.contains("mode")) {
        tab.mode_hint = j["mode"].get<std::string>();
        if (tab.mode_hint != "ito" && tab.mode_hint != "stratonovich" && tab.mode_hint != "both")
            throw TableauFormatError("mode must be ito, stratonovich or both");
    }
    if (tab.Q < 1 || tab.M < 0 || tab.s < 1)
        throw TableauFormatError("Q >= 1, M >= 0 and s >= 1 required");

    const std::size_t q_n = static_cast<std::size_t>(tab.Q);
    const std::size_t m_n = static_cast<std::size_t>(tab.M) + 1;
    const std::size_t s_n = static_cast<std::size_t>(tab.s);
    tab.Z.assign(q_n, std::vector<std::vector<std::vector<AlgebraElement>>>(m_n));
    tab.gamma.assign(q_n, std::vector<std::vector<AlgebraElement>>(m_n));
    std::vector<std::vector<bool>> z_set(q_n, std::vector<bool>(m_n, false));
    std::vector<std::vector<bool>> g_set(q_n, std::vector<bool>(m_n, false));

    auto parse_entry = [&](const std::string& text, const std::string& where,
                           bool template_block) -> AlgebraElement {
        AlgebraElement e;
        try {
            e = parse_coefficient(text);
        } catch (const ExprError& err) {
            throw TableauFormatError("entry at " + where + ": " + err.what());
        }
        detail::validate_entry_generators(e, where);
        if (!template_block && e.has_placeholder())
            throw TableauFormatError("entry at " + where + " uses '*' outside a template block");
        if (e.max_letter() > tab.M)
            throw TableauFormatError("entry at " + where + " references a noise channel beyond M");
        return e;
    };

    auto read_blocks = [&](const char* section, bool is_z) {
        for (auto& [key, value] : j[section].items()) {
            auto [q, is_template] = detail::parse_block_key(key);
            if (q < 1 || q > tab.Q)
                throw TableauFormatError(std::string(section) + " block '" + key +
                                         "': partition out of range");
            std::vector<int> targets;
            if (is_template) {
                for (int m = 1; m <= tab.M; ++m) targets.push_back(m);
                if (tab.M == 0) continue;
            } else {
                int m = detail::parse_block_m(key);
                if (m < 0 || m > tab.M)
                    throw TableauFormatError(std::string(section) + " block '" + key +
                                             "': noise index out of range");
                targets.push_back(m);
            }
            // dimension checks + parse
            std::vector<std::vector<AlgebraElement>> rows;
            if (is_z) {
                if (!value.is_array() || value.size() != s_n)
                    throw TableauFormatError("Z block '" + key + "' must be an s x s matrix");
                for (std::size_t i = 0; i < s_n; ++i) {
                    if (!value[i].is_array() || value[i].size() != s_n)
                        throw TableauFormatError("Z block '" + key + "' row " + std::to_string(i + 1) +
                                                 " must have s entries");
                    std::vector<AlgebraElement> row;
                    for (std::size_t jj = 0; jj < s_n; ++jj) {
                        std::string where = "Z(" + key + ")[" + std::to_string(i + 1) + "," +
                                            std::to_string(jj + 1) + "]";
                        row.push_back(parse_entry(value[i][jj].get<std::string>(), where, is_template));
                    }
                    rows.push_back(std::move(row));
                }
            } else {
                if (!value.is_array() || value.size() != s_n)
                    throw TableauFormatError("gamma block '" + key + "' must have s entries");
                std::vector<AlgebraElement> row;
                for (std::size_t i = 0; i < s_n; ++i) {
                    std::string where = "gamma(" + key + ")[" + std::to_string(i + 1) + "]";
                    row.push_back(parse_entry(value[i].get<std::string>(), where, is_template));
                }
                rows.push_back(std::move(row));
            }
            for (int m : targets) {
                auto& set_flags = is_z ? z_set : g_set;
                if (set_flags[static_cast<std::size_t>(q - 1)][static_cast<std::size_t>(m)])
                    throw TableauFormatError(std::string(section) + " block (" + std::to_string(q) +
                                             "," + std::to_string(m) + ") defined twice");
                set_flags[static_cast<std::size_t>(q - 1)][static_cast<std::size_t>(m)] = true;
                if (is_z) {
                    auto block = rows;
                    for (auto& r : block)
                        for (auto& e : r) e = e.instantiate_noise(m);
                    tab.Z[static_cast<std::size_t>(q - 1)][static_cast<std::size_t>(m)] = std::move(block);
                } else {
                    auto vec = rows[0];
                    for (auto& e : vec) e = e.instantiate_noise(m);
                    tab.gamma[static_cast<std::size_t>(q - 1)][static_cast<std::size_t>(m)] = std::move(vec);
                }
            }
        }
    };
    read_blocks("Z", true);
    read_blocks("gamma", false);

    for (int q = 1; q <= tab.Q; ++q)
        for (int m = 0; m <= tab.M; ++m) {
            if (!z_set[static_cast<std::size_t>(q - 1)][static_cast<std::size_t>(m)])
                throw TableauFormatError("missing Z block (" + std::to_string(q) + "," +
                                         std::to_string(m) + ")");
            if (!g_set[static_cast<std::size_t>(q - 1)][static_cast<std::size_t>(m)])
                throw TableauFormatError("missing gamma block (" + std::to_string(q) + "," +
                                         std::to_string(m) + ")");
        }
    return tab;
}

inline std::string print_tableau(const Tableau& tab) {
    nlohmann::json j;
    j["format"] = 1;
    j["name"] = tab.name;
    j["Q"] = tab.Q;
    j["M"] = tab.M;
    j["s"] = tab.s;
    j["mode"] = tab.mode_hint;
    nlohmann::json zj = nlohmann::json::object();
    nlohmann::json gj = nlohmann::json::object();
    for (int q = 1; q <= tab.Q; ++q)
        for (int m = 0; m <= tab.M; ++m) {
            std::string key = std::to_string(q) + "," + std::to_string(m);
            nlohmann::json rows = nlohmann::json::array();
            for (int i = 1; i <= tab.s; ++i) {
                nlohmann::json row = nlohmann::json::array();
                for (int jj = 1; jj <= tab.s; ++jj) row.push_back(coefficient_to_expr(tab.z(q, m, i, jj)));
                rows.push_back(row);
            }
            zj[key] = rows;
            nlohmann::json vec = nlohmann::json::array();
            for (int i = 1; i <= tab.s; ++i) vec.push_back(coefficient_to_expr(tab.g(q, m, i)));
            gj[key] = vec;
        }
    j["Z"] = zj;
    j["gamma"] = gj;
    return j.dump(2);
}

// ---------------------------------------------------------------------------
// Built-in methods

namespace builtin_detail {

// Leapfrog-type pair for partitioned systems; the left variant drops the
// noise coupling of the first partition.
inline const char* sv_left_json = R"({
  "format": 1, "name": "sv_left", "Q": 2, "M": 1, "s": 2, "mode": "both",
  "Z": {
    "1,0": [["0","0"],["h/2","h/2"]],
    "1,*": [["0","0"],["0","0"]],
    "2,0": [["0","0"],["h","0"]],
    "2,*": [["0","0"],["dW[*]","0"]]
  },
  "gamma": {
    "1,0": ["h/2","h/2"],
    "1,*": ["0","0"],
    "2,0": ["h/2","h/2"],
    "2,*": ["dW[*]","0"]
  }
})";

inline const char* sv_right_json = R"({
  "format": 1, "name": "sv_right", "Q": 2, "M": 1, "s": 2, "mode": "both",
  "Z": {
    "1,0": [["0","0"],["h/2","h/2"]],
    "1,*": [["0","0"],["dW[*]/2","dW[*]/2"]],
    "2,0": [["0","0"],["h","0"]],
    "2,*": [["0","0"],["dW[*]","0"]]
  },
  "gamma": {
    "1,0": ["h/2","h/2"],
    "1,*": ["dW[*]/2","dW[*]/2"],
    "2,0": ["h/2","h/2"],
    "2,*": ["dW[*]/2","dW[*]/2"]
  }
})";

// sv_right extended by a third (time) partition with Z(3,0)=Z(2,0),
// gamma(3,0)=gamma(2,0) and silent noise blocks.
inline const char* sv_right_3part_json = R"({
  "format": 1, "name": "sv_right_3part", "Q": 3, "M": 1, "s": 2, "mode": "both",
  "Z": {
    "1,0": [["0","0"],["h/2","h/2"]],
    "1,*": [["0","0"],["dW[*]/2","dW[*]/2"]],
    "2,0": [["0","0"],["h","0"]],
    "2,*": [["0","0"],["dW[*]","0"]],
    "3,0": [["0","0"],["h","0"]],
    "3,*": [["0","0"],["0","0"]]
  },
  "gamma": {
    "1,0": ["h/2","h/2"],
    "1,*": ["dW[*]/2","dW[*]/2"],
    "2,0": ["h/2","h/2"],
    "2,*": ["dW[*]/2","dW[*]/2"],
    "3,0": ["h/2","h/2"],
    "3,*": ["0","0"]
  }
})";

// Strong order 1.5 method for separable systems with noise in the first
// partition only.
inline const char* milstein_15_json = R"({
  "format": 1, "name": "milstein_15", "Q": 2, "M": 1, "s": 2, "mode": "both",
  "Z": {
    "1,0": [["h/4","0"],["h/4","3*h/4"]],
    "1,*": [["3/2*J[*,0]/h - dW[*]/2","0"],
            ["3/2*J[*,0]/h - dW[*]/2","-3/2*J[*,0]/h + 3/2*dW[*]"]],
    "2,0": [["0","0"],["2*h/3","0"]],
    "2,*": [["0","0"],["0","0"]]
  },
  "gamma": {
    "1,0": ["h/4","3*h/4"],
    "1,*": ["3/2*J[*,0]/h - dW[*]/2","-3/2*J[*,0]/h + 3/2*dW[*]"],
    "2,0": ["2*h/3","h/3"],
    "2,*": ["0","0"]
  }
})";

// Stochastic Stoermer-Verlet; satisfies the quadratic-invariant condition.
inline const char* stormer_verlet_json = R"({
  "format": 1, "name": "stormer_verlet", "Q": 2, "M": 1, "s": 2, "mode": "stratonovich",
  "Z": {
    "1,0": [["0","0"],["h/2","h/2"]],
    "1,*": [["0","0"],["dW[*]/2","dW[*]/2"]],
    "2,0": [["h/2","0"],["h/2","0"]],
    "2,*": [["dW[*]/2","0"],["dW[*]/2","0"]]
  },
  "gamma": {
    "1,0": ["h/2","h/2"],
    "1,*": ["dW[*]/2","dW[*]/2"],
    "2,0": ["h/2","h/2"],
    "2,*": ["dW[*]/2","dW[*]/2"]
  }
})";

}  // namespace builtin_detail

inline std::vector<std::string> builtin_tableau_names() {
    return {"sv_left", "sv_right", "sv_right_3part", "milstein_15", "stormer_verlet"};
}

// The built-in methods carry one noise template block per partition, so they
// instantiate for any number of driving Wiener processes.
inline Tableau builtin_tableau(const std::string& name, int M = 1) {
    const char* doc = nullptr;
    if (name == "sv_left") doc = builtin_detail::sv_left_json;
    else if (name == "sv_right") doc = builtin_detail::sv_right_json;
    else if (name == "sv_right_3part") doc = builtin_detail::sv_right_3part_json;
    else if (name == "milstein_15") doc = builtin_detail::milstein_15_json;
    else if (name == "stormer_verlet") doc = builtin_detail::stormer_verlet_json;
    if (!doc) throw std::invalid_argument("unknown builtin tableau '" + name + "'");
    if (M < 0) throw std::invalid_argument("M must be >= 0");
    nlohmann::json j = nlohmann::json::parse(doc);
    j["M"] = M;
    return parse_tableau(j.dump());
}

// ---------------------------------------------------------------------------
// Quadratic-invariant condition:
//   gamma_i^(1,m1) gamma_j^(2,m2) = gamma_j^(2,m2) Z_ji^(1,m1)
//                                 + gamma_i^(1,m1) Z_ij^(2,m2)
// for all stages i,j and channels m1,m2. Methods satisfying it preserve
// invariants X1^T D X2 of two-partition separable Stratonovich systems.

struct QiWitness {
    int i = 0, j = 0, m1 = 0, m2 = 0;
    AlgebraElement residual;
};

struct QiReport {
    bool holds = false;
    std::vector<QiWitness> witnesses;
};

inline QiReport check_quadratic_invariant(const Tableau& tab) {
    if (tab.Q != 2)
        throw std::invalid_argument("quadratic-invariant condition is defined for Q = 2");
    QiReport rep;
    rep.holds = true;
    for (int m1 = 0; m1 <= tab.M; ++m1)
        for (int m2 = 0; m2 <= tab.M; ++m2)
            for (int i = 1; i <= tab.s; ++i)
                for (int j = 1; j <= tab.s; ++j) {
                    AlgebraElement lhs = tab.g(1, m1, i) * tab.g(2, m2, j);
                    AlgebraElement rhs = tab.g(2, m2, j) * tab.z(1, m1, j, i) +
                                         tab.g(1, m1, i) * tab.z(2, m2, i, j);
                    AlgebraElement residual = lhs - rhs;
                    if (!residual.is_zero_random_variable()) {
                        rep.holds = false;
                        rep.witnesses.push_back({i, j, m1, m2, residual});
                    }
                }
    return rep;
}

// ---------------------------------------------------------------------------
// Stage dependency structure: stage i depends on stage j when any Z block has
// a structurally nonzero (i,j) entry. If the joint graph is acyclic we get an
// explicit evaluation order, otherwise the step uses fixed-point iteration.

struct StageStructure {
    bool explicit_order = false;
    std::vector<int> order;                  // 1-based stages in evaluation order
    std::vector<std::vector<bool>> depends;  // depends[i-1][j-1]
};

inline StageStructure stage_structure(const Tableau& tab) {
    StageStructure st;
    const std::size_t s = static_cast<std::size_t>(tab.s);
    st.depends.assign(s, std::vector<bool>(s, false));
    for (int q = 1; q <= tab.Q; ++q)
        for (int m = 0; m <= tab.M; ++m)
            for (int i = 1; i <= tab.s; ++i)
                for (int j = 1; j <= tab.s; ++j)
                    if (!tab.z(q, m, i, j).empty())
                        st.depends[static_cast<std::size_t>(i - 1)][static_cast<std::size_t>(j - 1)] = true;
    // Kahn's algorithm
    std::vector<int> indeg(s, 0);
    for (std::size_t i = 0; i < s; ++i)
        for (std::size_t j = 0; j < s; ++j)
            if (st.depends[i][j]) ++indeg[i];
    std::vector<int> ready;
    for (std::size_t i = 0; i < s; ++i)
        if (indeg[i] == 0) ready.push_back(static_cast<int>(i));
    while (!ready.empty()) {
        std::sort(ready.begin(), ready.end(), std::greater<int>());
        int v = ready.back();
        ready.pop_back();
        st.order.push_back(v + 1);
        for (std::size_t i = 0; i < s; ++i)
            if (st.depends[i][static_cast<std::size_t>(v)] && --indeg[i] == 0)
                ready.push_back(static_cast<int>(i));
    }
    st.explicit_order = st.order.size() == s;
    if (!st.explicit_order) st.order.clear();
    return st;
}

}  // namespace sprk
