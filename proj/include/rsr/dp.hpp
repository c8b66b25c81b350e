#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "rsr/common.hpp"
#include "rsr/grid.hpp"
#include "rsr/kernel.hpp"
#include "rsr/risk.hpp"

namespace rsr {

struct ValueTable {
    int stage = 0;
    std::vector<double> values;
};

struct PolicyTable {
    // controls[t][node] = control-node index chosen at stage t
    std::vector<std::vector<std::uint32_t>> controls;

    int horizon() const { return static_cast<int>(controls.size()); }

    void validate(std::size_t n_states, std::size_t n_controls) const {
        for (const auto& stage : controls) {
            if (stage.size() != n_states)
                throw ValidationError("PolicyTable: stage size does not match the state grid");
            for (auto j : stage)
                if (j >= n_controls)
                    throw ValidationError("PolicyTable: control index out of range");
        }
    }
};

enum class CapExponent { inv_T, inv_T_plus_one };

inline double cap_exponent_value(CapExponent e, int T) {
    return e == CapExponent::inv_T ? 1.0 / T : 1.0 / (T + 1);
}

/** Inputs of the risk dynamic programs: risk level, the cap exponent of the
 *  per-stage density sets, and arbitrary bounded stage costs. */
struct RhoParams {
    double alpha = 1.0;
    CapExponent cap_exponent = CapExponent::inv_T;
    std::function<double(int t, std::size_t i, std::size_t j)> stage_cost;
    std::function<double(std::size_t i)> terminal_cost;

    void validate() const {
        RiskLevel check(alpha);
        if (!stage_cost || !terminal_cost)
            throw ValidationError("RhoParams: stage_cost and terminal_cost are required");
    }
};

struct ExponentialDp {
    ValueTable v0;
    PolicyTable policy;
};

struct StagedDp {
    std::vector<ValueTable> tables;  // tables[t], t = 0..T
    PolicyTable policy;
};

namespace detail {

inline void check_finite_stage(const std::vector<double>& v, int t) {
    for (double x : v)
        if (!std::isfinite(x))
            throw NumericError("dp: non-finite value at stage " + std::to_string(t));
}

// Backward sweep shared by the risk-neutral and risk DPs. The inner operator
// on each kernel row is the bounded-density supremum with the given cap;
// cap = 1 reduces it to the plain expectation (identical arithmetic), which
// is what makes the alpha = 1 outputs of both DPs bitwise equal.
inline StagedDp density_cap_dp(const TransitionKernel& k, double cap, const RhoParams& params,
                               int T, const PolicyTable* fixed_policy) {
    params.validate();
    if (T < 1) throw ValidationError("dp: horizon must be at least 1");
    if (fixed_policy) {
        if (fixed_policy->horizon() != T)
            throw ValidationError("dp: policy horizon does not match T");
        fixed_policy->validate(k.n_states, k.n_controls);
    }
    StagedDp out;
    out.tables.resize(T + 1);
    out.policy.controls.assign(fixed_policy ? 0 : T, {});

    auto& terminal = out.tables[T];
    terminal.stage = T;
    terminal.values.resize(k.n_states);
    for (std::size_t i = 0; i < k.n_states; ++i) terminal.values[i] = params.terminal_cost(i);
    detail::check_finite_stage(terminal.values, T);

    std::vector<double> vals, probs;
    for (int t = T - 1; t >= 0; --t) {
        const auto& next = out.tables[t + 1].values;
        auto& cur = out.tables[t];
        cur.stage = t;
        cur.values.resize(k.n_states);
        std::vector<std::uint32_t>* pol = nullptr;
        if (!fixed_policy) {
            out.policy.controls[t].resize(k.n_states);
            pol = &out.policy.controls[t];
        }
        for (std::size_t i = 0; i < k.n_states; ++i) {
            const std::size_t j_lo = fixed_policy ? (*fixed_policy).controls[t][i] : 0;
            const std::size_t j_hi = fixed_policy ? j_lo + 1 : k.n_controls;
            double best = std::numeric_limits<double>::infinity();
            std::uint32_t best_j = 0;
            for (std::size_t j = j_lo; j < j_hi; ++j) {
                const auto& row = k.row(i, j);
                vals.clear();
                probs.clear();
                for (const auto& e : row) {
                    vals.push_back(next[e.node]);
                    probs.push_back(e.prob);
                }
                const double phi = bounded_density_sup(vals.data(), probs.data(), vals.size(), cap);
                const double total = params.stage_cost(t, i, j) + phi;
                if (total < best) {
                    best = total;
                    best_j = static_cast<std::uint32_t>(j);
                }
            }
            cur.values[i] = best;
            if (pol) (*pol)[i] = best_j;
        }
        detail::check_finite_stage(cur.values, t);
    }
    return out;
}

}  // namespace detail

/** Optimal expected total cost of e^{gamma g_K} accumulated over stages
 *  0..T (terminal stage included):
 *  V_T = e^{gamma g_K}, V_t = e^{gamma g_K} + min_j E[V_{t+1} | j].
 *  Ties in the argmin break to the lowest control index. The exponential is
 *  range-checked before solving. */
inline ExponentialDp dp_exponential(const TransitionKernel& k, const std::vector<double>& gk_nodes,
                                    double gamma, int T) {
    if (gk_nodes.size() != k.n_states)
        throw ValidationError("dp_exponential: gk_nodes length does not match kernel states");
    if (!(gamma >= 1.0) || !std::isfinite(gamma))
        throw ValidationError("dp_exponential: gamma must be >= 1 and finite");
    if (T < 1) throw ValidationError("dp_exponential: horizon must be at least 1");
    double mx = -std::numeric_limits<double>::infinity();
    for (double g : gk_nodes) {
        if (!std::isfinite(g)) throw ValidationError("dp_exponential: non-finite g_K value");
        mx = std::max(mx, g);
    }
    if (gamma * mx > std::log(std::numeric_limits<double>::max() / (T + 1.0)))
        throw NumericError("dp_exponential: e^(gamma g_K) overflows double precision, gamma " +
                           std::to_string(gamma) + " is too aggressive for max g_K " +
                           std::to_string(mx));

    std::vector<double> stage(k.n_states);
    for (std::size_t i = 0; i < k.n_states; ++i) stage[i] = std::exp(gamma * gk_nodes[i]);

    RhoParams p;
    p.alpha = 1.0;
    p.stage_cost = [&stage](int, std::size_t i, std::size_t) { return stage[i]; };
    p.terminal_cost = [&stage](std::size_t i) { return stage[i]; };
    StagedDp full = detail::density_cap_dp(k, 1.0, p, T, nullptr);
    return {std::move(full.tables[0]), std::move(full.policy)};
}

/** Expectation DP with arbitrary stage costs: the alpha = 1 specialization
 *  used as a cross-check of the risk DP. alpha and cap_exponent in params are
 *  ignored. */
inline StagedDp dp_risk_neutral(const TransitionKernel& k, const RhoParams& params, int T) {
    return detail::density_cap_dp(k, 1.0, params, T, nullptr);
}

/** Risk DP: J_T = c_T and
 *  J_t(i) = min_j [ c_t(i,j) + sup { E[J_{t+1} xi | i,j] : 0 <= xi <=
 *  alpha^(-cap_exponent), E[xi] = 1 } ]. The inner supremum is the greedy
 *  bounded-density rule on the kernel row, i.e. CVaR of J_{t+1} at level
 *  alpha^(cap_exponent). J_0 upper-bounds the optimal risk functional value
 *  at every node. */
inline StagedDp dp_theorem3(const TransitionKernel& k, const RhoParams& params, int T) {
    params.validate();
    const double cap = std::pow(params.alpha, -cap_exponent_value(params.cap_exponent, T));
    return detail::density_cap_dp(k, cap, params, T, nullptr);
}

/** Same recursion as dp_theorem3 with the control pinned by the policy at
 *  every (stage, node); evaluates the upper bound for that policy. */
inline std::vector<ValueTable> dp_rho_policy(const TransitionKernel& k, const PolicyTable& policy,
                                             const RhoParams& params, int T) {
    params.validate();
    const double cap = std::pow(params.alpha, -cap_exponent_value(params.cap_exponent, T));
    return detail::density_cap_dp(k, cap, params, T, &policy).tables;
}

// ---------------------------------------------------------------------------
// Table exports: CSV with node coordinates for human use, and a binary cache
// (magic "RSRT1", sizes, raw little-endian doubles) for exact reload.
// ---------------------------------------------------------------------------

inline void export_value_csv(const Grid& g, const ValueTable& v, const std::string& path) {
    if (v.values.size() != g.size()) throw ValidationError("export_value_csv: size mismatch");
    std::ofstream f(path);
    if (!f) throw IoError("export_value_csv: cannot open " + path);
    f << "node";
    for (int k = 0; k < g.dim(); ++k) f << ",x" << k;
    f << ",value\n";
    char buf[32];
    for (std::size_t i = 0; i < g.size(); ++i) {
        f << i;
        const Vec x = g.node(i);
        for (int k = 0; k < g.dim(); ++k) {
            std::snprintf(buf, sizeof buf, "%.17g", x[k]);
            f << ',' << buf;
        }
        std::snprintf(buf, sizeof buf, "%.17g", v.values[i]);
        f << ',' << buf << '\n';
    }
    if (!f) throw IoError("export_value_csv: write failure on " + path);
}

inline void export_policy_csv(const Grid& g, const Grid& cgrid, const PolicyTable& p,
                              const std::string& path) {
    std::ofstream f(path);
    if (!f) throw IoError("export_policy_csv: cannot open " + path);
    f << "stage,node";
    for (int k = 0; k < g.dim(); ++k) f << ",x" << k;
    f << ",control_node,control\n";
    char buf[32];
    for (int t = 0; t < p.horizon(); ++t) {
        for (std::size_t i = 0; i < p.controls[t].size(); ++i) {
            f << t << ',' << i;
            const Vec x = g.node(i);
            for (int k = 0; k < g.dim(); ++k) {
                std::snprintf(buf, sizeof buf, "%.17g", x[k]);
                f << ',' << buf;
            }
            const Vec u = cgrid.node(p.controls[t][i]);
            std::snprintf(buf, sizeof buf, "%.17g", u[0]);
            f << ',' << p.controls[t][i] << ',' << buf << '\n';
        }
    }
    if (!f) throw IoError("export_policy_csv: write failure on " + path);
}

inline void export_tables_bin(const std::vector<ValueTable>& tables, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("export_tables_bin: cannot open " + path);
    const char magic[6] = {'R', 'S', 'R', 'T', '1', '\n'};
    f.write(magic, sizeof magic);
    const std::uint64_t nt = tables.size();
    const std::uint64_t nn = tables.empty() ? 0 : tables[0].values.size();
    f.write(reinterpret_cast<const char*>(&nt), sizeof nt);
    f.write(reinterpret_cast<const char*>(&nn), sizeof nn);
    for (const auto& t : tables) {
        if (t.values.size() != nn) throw ValidationError("export_tables_bin: ragged tables");
        const std::int64_t stage = t.stage;
        f.write(reinterpret_cast<const char*>(&stage), sizeof stage);
        f.write(reinterpret_cast<const char*>(t.values.data()),
                static_cast<std::streamsize>(nn * sizeof(double)));
    }
    if (!f) throw IoError("export_tables_bin: write failure on " + path);
}

inline std::vector<ValueTable> import_tables_bin(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("import_tables_bin: cannot open " + path);
    char magic[6];
    f.read(magic, sizeof magic);
    if (!f || std::string(magic, 5) != "RSRT1")
        throw IoError("import_tables_bin: " + path + " is not a table cache");
    std::uint64_t nt = 0, nn = 0;
    f.read(reinterpret_cast<char*>(&nt), sizeof nt);
    f.read(reinterpret_cast<char*>(&nn), sizeof nn);
    if (!f || nt > 1'000'000 || nn > 100'000'000)
        throw IoError("import_tables_bin: corrupt header in " + path);
    std::vector<ValueTable> tables(nt);
    for (auto& t : tables) {
        std::int64_t stage = 0;
        f.read(reinterpret_cast<char*>(&stage), sizeof stage);
        t.stage = static_cast<int>(stage);
        t.values.resize(nn);
        f.read(reinterpret_cast<char*>(t.values.data()),
               static_cast<std::streamsize>(nn * sizeof(double)));
        if (!f) throw IoError("import_tables_bin: truncated payload in " + path);
    }
    return tables;
}

}  // namespace rsr
