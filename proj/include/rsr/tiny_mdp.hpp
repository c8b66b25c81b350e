#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "rsr/common.hpp"
#include "rsr/distribution.hpp"
#include "rsr/dp.hpp"
#include "rsr/kernel.hpp"

namespace rsr {

/** Explicit MDP small enough for exhaustive oracles: every policy can be
 *  enumerated, every trajectory outcome listed, and every density-polytope
 *  vertex visited. */
struct TinyMdp {
    int n_states = 2;
    int n_controls = 1;
    int horizon = 1;
    std::vector<std::vector<std::vector<double>>> trans;       // [s][u] -> pmf over next state
    std::vector<std::vector<std::vector<double>>> stage_cost;  // [t][s][u]
    std::vector<double> terminal_cost;                         // [s]

    void validate() const {
        if (n_states < 1 || n_states > 3)
            throw ValidationError("TinyMdp: n_states must be 1..3");
        if (n_controls < 1 || n_controls > 2)
            throw ValidationError("TinyMdp: n_controls must be 1..2");
        if (horizon < 1 || horizon > 3) throw ValidationError("TinyMdp: horizon must be 1..3");
        if (trans.size() != static_cast<std::size_t>(n_states) ||
            stage_cost.size() != static_cast<std::size_t>(horizon) ||
            terminal_cost.size() != static_cast<std::size_t>(n_states))
            throw ValidationError("TinyMdp: table shapes do not match the declared sizes");
        for (const auto& per_state : trans) {
            if (per_state.size() != static_cast<std::size_t>(n_controls))
                throw ValidationError("TinyMdp: transition table shape mismatch");
            for (const auto& row : per_state) {
                if (row.size() != static_cast<std::size_t>(n_states))
                    throw ValidationError("TinyMdp: transition row length mismatch");
                StableSum s;
                for (double p : row) {
                    if (!std::isfinite(p) || p < 0.0)
                        throw ValidationError("TinyMdp: transition probabilities must be in [0,1]");
                    s.add(p);
                }
                if (std::abs(s.value() - 1.0) > kProbSumTol)
                    throw ValidationError("TinyMdp: transition row does not sum to 1");
            }
        }
        for (const auto& per_stage : stage_cost) {
            if (per_stage.size() != static_cast<std::size_t>(n_states))
                throw ValidationError("TinyMdp: stage cost shape mismatch");
            for (const auto& per_state : per_stage) {
                if (per_state.size() != static_cast<std::size_t>(n_controls))
                    throw ValidationError("TinyMdp: stage cost shape mismatch");
                for (double c : per_state)
                    if (!std::isfinite(c)) throw ValidationError("TinyMdp: non-finite stage cost");
            }
        }
        for (double c : terminal_cost)
            if (!std::isfinite(c)) throw ValidationError("TinyMdp: non-finite terminal cost");
    }

    TransitionKernel kernel() const {
        validate();
        TransitionKernel k;
        k.n_states = static_cast<std::size_t>(n_states);
        k.n_controls = static_cast<std::size_t>(n_controls);
        k.rows.resize(k.n_states * k.n_controls);
        for (int s = 0; s < n_states; ++s)
            for (int u = 0; u < n_controls; ++u) {
                auto& row = k.rows[static_cast<std::size_t>(s) * k.n_controls + u];
                for (int j = 0; j < n_states; ++j)
                    if (trans[s][u][j] > 0.0)
                        row.push_back({static_cast<std::uint32_t>(j), trans[s][u][j]});
            }
        k.validate();
        return k;
    }
};

/** Random instance with occasional sparse rows. The final nonzero atom of
 *  each row is assigned 1 minus the rest, so row sums carry no normalization
 *  residue. */
inline TinyMdp random_tiny_mdp(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> state_count(2, 3);
    std::uniform_int_distribution<int> control_count(1, 2);
    std::uniform_int_distribution<int> horizon_count(1, 3);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::uniform_real_distribution<double> cost(-1.0, 4.0);

    TinyMdp m;
    m.n_states = state_count(rng);
    m.n_controls = control_count(rng);
    m.horizon = horizon_count(rng);

    m.trans.assign(m.n_states, std::vector<std::vector<double>>(m.n_controls));
    for (auto& per_state : m.trans)
        for (auto& row : per_state) {
            row.resize(m.n_states);
            for (auto& p : row) p = 0.05 + unif(rng);
            if (m.n_states > 2 && unif(rng) < 0.3)
                row[static_cast<std::size_t>(unif(rng) * m.n_states) % m.n_states] = 0.0;
            double total = 0.0;
            for (double p : row) total += p;
            int last = -1;
            for (int k = 0; k < m.n_states; ++k)
                if (row[k] > 0.0) last = k;
            StableSum others;
            for (int k = 0; k < m.n_states; ++k) {
                if (k == last) continue;
                row[k] /= total;
                others.add(row[k]);
            }
            row[last] = 1.0 - others.value();
        }

    m.stage_cost.assign(m.horizon, std::vector<std::vector<double>>(
                                       m.n_states, std::vector<double>(m.n_controls)));
    for (auto& per_stage : m.stage_cost)
        for (auto& per_state : per_stage)
            for (auto& c : per_state) c = cost(rng);
    m.terminal_cost.resize(m.n_states);
    for (auto& c : m.terminal_cost) c = cost(rng);
    m.validate();
    return m;
}

inline PolicyTable random_policy(std::mt19937_64& rng, const TinyMdp& m) {
    std::uniform_int_distribution<std::uint32_t> pick(0, static_cast<std::uint32_t>(m.n_controls - 1));
    PolicyTable p;
    p.controls.assign(m.horizon, std::vector<std::uint32_t>(m.n_states));
    for (auto& stage : p.controls)
        for (auto& u : stage) u = pick(rng);
    return p;
}

/** Exact law of the accumulated trajectory cost from s0 under the policy,
 *  one atom per outcome path. */
inline DiscreteDistribution trajectory_cost_law(const TinyMdp& m, const PolicyTable& pol, int s0) {
    m.validate();
    pol.validate(static_cast<std::size_t>(m.n_states), static_cast<std::size_t>(m.n_controls));
    if (pol.horizon() != m.horizon)
        throw ValidationError("trajectory_cost_law: policy horizon does not match the instance");
    if (s0 < 0 || s0 >= m.n_states)
        throw ValidationError("trajectory_cost_law: initial state out of range");

    std::vector<double> support, probs;
    std::function<void(int, int, double, double)> walk = [&](int t, int s, double prob,
                                                             double acc) {
        if (t == m.horizon) {
            support.push_back(acc + m.terminal_cost[s]);
            probs.push_back(prob);
            return;
        }
        const int u = static_cast<int>(pol.controls[t][s]);
        const double next_acc = acc + m.stage_cost[t][s][u];
        for (int k = 0; k < m.n_states; ++k) {
            const double q = m.trans[s][u][k];
            if (q > 0.0) walk(t + 1, k, prob * q, next_acc);
        }
    };
    walk(0, s0, 1.0, 0.0);
    return make_distribution(support, probs);
}

namespace detail {

/** All vertices of {v : 0 <= v <= cap, sum_k v_k q_k = 1} for a short strictly
 *  positive pmf row q. Every vertex has at most one coordinate strictly
 *  between 0 and cap. */
inline std::vector<std::vector<double>> density_vertices(const std::vector<double>& q,
                                                         double cap) {
    const int d = static_cast<int>(q.size());
    std::vector<std::vector<double>> verts;
    auto push_unique = [&](std::vector<double>&& v) {
        for (const auto& w : verts) {
            double diff = 0.0;
            for (int k = 0; k < d; ++k) diff = std::max(diff, std::abs(w[k] - v[k]));
            if (diff < 1e-12) return;
        }
        verts.push_back(std::move(v));
    };
    for (int mask = 0; mask < (1 << d); ++mask) {
        double mass = 0.0;
        for (int k = 0; k < d; ++k)
            if (mask >> k & 1) mass += cap * q[k];
        if (std::abs(mass - 1.0) < 1e-12) {
            std::vector<double> v(d, 0.0);
            for (int k = 0; k < d; ++k)
                if (mask >> k & 1) v[k] = cap;
            push_unique(std::move(v));
        }
        for (int f = 0; f < d; ++f) {
            if (mask >> f & 1) continue;
            const double vf = (1.0 - mass) / q[f];
            if (vf < -1e-12 || vf > cap + 1e-12) continue;
            std::vector<double> v(d, 0.0);
            for (int k = 0; k < d; ++k)
                if (mask >> k & 1) v[k] = cap;
            v[f] = clamp(vf, 0.0, cap);
            push_unique(std::move(v));
        }
    }
    if (verts.empty())
        throw NumericError("density_vertices: empty density polytope (cap below 1?)");
    return verts;
}

}  // namespace detail

/** Exact fixed-policy risk functional per initial state: the stagewise
 *  density caps are alpha^(-cap_exponent); the objective is multilinear in
 *  the per-(stage, state) density rows, so its maximum over the product of
 *  row polytopes sits at a combination of row vertices. All combinations over
 *  the rows reachable from each initial state are visited; instances whose
 *  combination count exceeds max_combinations are rejected. */
inline std::vector<double> rho_bruteforce(const TinyMdp& m, const PolicyTable& pol, double alpha,
                                          CapExponent cap_exponent,
                                          double max_combinations = 2e7) {
    m.validate();
    RiskLevel level(alpha);
    pol.validate(static_cast<std::size_t>(m.n_states), static_cast<std::size_t>(m.n_controls));
    if (pol.horizon() != m.horizon)
        throw ValidationError("rho_bruteforce: policy horizon does not match the instance");
    const double cap = std::pow(alpha, -cap_exponent_value(cap_exponent, m.horizon));

    struct Row {
        int t = 0, s = 0;
        std::vector<int> atoms;
        std::vector<double> q;
        std::vector<std::vector<double>> verts;
    };

    std::vector<double> out(m.n_states);
    for (int s0 = 0; s0 < m.n_states; ++s0) {
        std::vector<std::vector<char>> reach(m.horizon + 1, std::vector<char>(m.n_states, 0));
        reach[0][s0] = 1;
        for (int t = 0; t < m.horizon; ++t)
            for (int s = 0; s < m.n_states; ++s) {
                if (!reach[t][s]) continue;
                const int u = static_cast<int>(pol.controls[t][s]);
                for (int k = 0; k < m.n_states; ++k)
                    if (m.trans[s][u][k] > 0.0) reach[t + 1][k] = 1;
            }

        std::vector<Row> rows;
        std::vector<std::vector<int>> row_of(m.horizon, std::vector<int>(m.n_states, -1));
        double n_comb = 1.0;
        for (int t = 0; t < m.horizon; ++t)
            for (int s = 0; s < m.n_states; ++s) {
                if (!reach[t][s]) continue;
                Row r;
                r.t = t;
                r.s = s;
                const int u = static_cast<int>(pol.controls[t][s]);
                for (int k = 0; k < m.n_states; ++k)
                    if (m.trans[s][u][k] > 0.0) {
                        r.atoms.push_back(k);
                        r.q.push_back(m.trans[s][u][k]);
                    }
                r.verts = detail::density_vertices(r.q, cap);
                n_comb *= static_cast<double>(r.verts.size());
                row_of[t][s] = static_cast<int>(rows.size());
                rows.push_back(std::move(r));
            }
        if (n_comb > max_combinations)
            throw ValidationError("rho_bruteforce: " + std::to_string(n_comb) +
                                  " vertex combinations exceed the enumeration bound " +
                                  std::to_string(max_combinations));

        std::vector<std::size_t> pick(rows.size(), 0);
        std::vector<std::vector<double>> w(m.horizon + 1, std::vector<double>(m.n_states, 0.0));
        double best = -std::numeric_limits<double>::infinity();
        for (;;) {
            for (int s = 0; s < m.n_states; ++s) w[m.horizon][s] = m.terminal_cost[s];
            for (int t = m.horizon - 1; t >= 0; --t)
                for (int s = 0; s < m.n_states; ++s) {
                    if (row_of[t][s] < 0) continue;
                    const Row& r = rows[row_of[t][s]];
                    const auto& v = r.verts[pick[row_of[t][s]]];
                    const int u = static_cast<int>(pol.controls[t][s]);
                    double acc = m.stage_cost[t][s][u];
                    for (std::size_t k = 0; k < r.atoms.size(); ++k)
                        acc += r.q[k] * v[k] * w[t + 1][r.atoms[k]];
                    w[t][s] = acc;
                }
            best = std::max(best, w[0][s0]);

            std::size_t p = 0;
            while (p < rows.size()) {
                if (++pick[p] < rows[p].verts.size()) break;
                pick[p] = 0;
                ++p;
            }
            if (p == rows.size()) break;
        }
        out[s0] = best;
    }
    return out;
}

}  // namespace rsr
