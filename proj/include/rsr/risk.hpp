#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "rsr/common.hpp"
#include "rsr/distribution.hpp"

namespace rsr {

namespace detail {

// Distinct support values with merged probabilities and cumulative mass,
// zero-weight atoms dropped. Sorted ascending.
struct MergedCdf {
    std::vector<double> values;
    std::vector<double> mass;
    std::vector<double> cum;
};

inline MergedCdf merged_cdf(const DiscreteDistribution& d) {
    std::vector<std::size_t> idx;
    idx.reserve(d.size());
    for (std::size_t i = 0; i < d.size(); ++i)
        if (d.probs[i] > 0.0) idx.push_back(i);
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return d.support[a] < d.support[b]; });
    MergedCdf m;
    StableSum cum;
    for (std::size_t j = 0; j < idx.size(); ++j) {
        double v = d.support[idx[j]];
        double p = d.probs[idx[j]];
        if (!m.values.empty() && m.values.back() == v) {
            m.mass.back() += p;
        } else {
            m.values.push_back(v);
            m.mass.push_back(p);
        }
        cum.add(p);
        if (m.cum.size() < m.values.size())
            m.cum.push_back(cum.value());
        else
            m.cum.back() = cum.value();
    }
    return m;
}

}  // namespace detail

/** Value-at-risk at level alpha: the left-side (1-alpha)-quantile,
 *  inf { y : P(Y <= y) >= 1 - alpha }. Rejects alpha = 1. */
inline double var(const DiscreteDistribution& d, double alpha) {
    d.validate();
    RiskLevel lvl(alpha);
    if (lvl.value() == 1.0)
        throw ValidationError("var: alpha = 1 has no quantile meaning here, use cvar_ru");
    const auto m = detail::merged_cdf(d);
    const double target = 1.0 - lvl.value();
    for (std::size_t j = 0; j < m.values.size(); ++j)
        if (m.cum[j] >= target - kProbSumTol) return m.values[j];
    return m.values.back();
}

/** CVaR by the Rockafellar-Uryasev minimization
 *  inf_s { s + E[max(Y - s, 0)] / alpha }. The objective is piecewise linear
 *  with kinks only at atoms, so scanning the support is exact. alpha = 1
 *  returns the mean. */
inline double cvar_ru(const DiscreteDistribution& d, double alpha) {
    d.validate();
    RiskLevel lvl(alpha);
    if (lvl.value() == 1.0) return d.mean();
    const std::size_t n = d.size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return d.support[a] > d.support[b];
    });
    // Descending scan: at s = y_k, E[(Y-s)+] = sum_{i<k} q_i (y_i - y_k).
    long double sy = 0.0L, sq = 0.0L;
    long double best = std::numeric_limits<long double>::infinity();
    for (std::size_t k = 0; k < n; ++k) {
        const long double yk = d.support[idx[k]];
        const long double obj = yk + (sy - sq * yk) / lvl.value();
        if (obj < best) best = obj;
        sy += static_cast<long double>(d.probs[idx[k]]) * yk;
        sq += d.probs[idx[k]];
    }
    return static_cast<double>(best);
}

/** Maximizes sum_i vals[i] * w_i over 0 <= w_i <= cap * probs[i],
 *  sum_i w_i = 1, by greedy fill in decreasing value order (ties broken by
 *  original index). This is the bounded-density supremum underlying the CVaR
 *  dual set and the per-stage density sets of the risk DP. cap = 1 forces the
 *  unique feasible point w = probs and is evaluated as a plain expectation in
 *  original order so that callers needing bitwise agreement with a
 *  risk-neutral sweep get it. If xi_out is nonnull it receives the optimal
 *  densities w_i / probs[i]. */
inline double bounded_density_sup(const double* vals, const double* probs, std::size_t n,
                                  double cap, std::vector<double>* xi_out = nullptr) {
    if (n == 0) throw ValidationError("bounded_density_sup: empty row");
    if (!(cap >= 1.0 - kProbSumTol))
        throw ValidationError("bounded_density_sup: cap " + std::to_string(cap) +
                              " < 1 leaves the constraint set empty");
    if (xi_out) xi_out->assign(n, 0.0);
    if (cap <= 1.0) {
        StableSum s;
        for (std::size_t i = 0; i < n; ++i) s.add(vals[i] * probs[i]);
        if (xi_out) xi_out->assign(n, 1.0);
        return s.value();
    }
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return vals[a] > vals[b]; });
    double remaining = 1.0;
    StableSum value;
    for (std::size_t k = 0; k < n && remaining > 0.0; ++k) {
        const std::size_t i = idx[k];
        if (probs[i] <= 0.0) continue;
        const double w = std::min(cap * probs[i], remaining);
        value.add(vals[i] * w);
        if (xi_out) (*xi_out)[i] = std::min(w / probs[i], cap);
        remaining -= w;
    }
    if (remaining > 1e-9)
        throw NumericError("bounded_density_sup: capacity shortfall " + std::to_string(remaining) +
                           ", base weights do not sum to 1");
    return value.value();
}

struct DualSolution {
    double value = 0.0;
    DensityVector density;
};

/** CVaR by its dual representation sup { E[Y xi] : 0 <= xi <= 1/alpha,
 *  E[xi] = 1 }. Returns the optimum and an optimal density. Agrees with
 *  cvar_ru to ~1e-14 on well-scaled inputs. */
inline DualSolution cvar_dual(const DiscreteDistribution& d, double alpha) {
    d.validate();
    RiskLevel lvl(alpha);
    DualSolution out;
    out.density.cap = 1.0 / lvl.value();
    out.value = bounded_density_sup(d.support.data(), d.probs.data(), d.size(),
                                    out.density.cap, &out.density.values);
    return out;
}

/** CVaR of the uniform empirical law over samples. Same value as cvar_ru of
 *  that law, computed by the O(n log n) sorted-tail form
 *  (1/alpha) [ y_(k) (k/n - (1-alpha)) + (1/n) sum_{i>k} y_(i) ],
 *  k the smallest index with k/n >= 1-alpha. */
namespace detail {

/** Core of the empirical estimator on samples already sorted ascending. */
inline double cvar_sorted(const std::vector<double>& sorted, double alpha) {
    const std::size_t n = sorted.size();
    if (alpha == 1.0) {
        long double acc = 0.0L;
        for (double s : sorted) acc += s;
        return static_cast<double>(acc / n);
    }
    const double target = static_cast<double>(n) * (1.0 - alpha);
    auto k = static_cast<std::size_t>(std::ceil(target - 1e-9));
    if (k < 1) k = 1;
    if (k > n) k = n;
    long double tail = 0.0L;
    for (std::size_t i = k; i < n; ++i) tail += sorted[i];
    const long double boundary =
        static_cast<long double>(sorted[k - 1]) *
        (static_cast<long double>(k) / n - (1.0L - static_cast<long double>(alpha)));
    return static_cast<double>((boundary + tail / n) / alpha);
}

}  // namespace detail

inline double cvar_empirical(std::vector<double> samples, double alpha) {
    if (samples.empty()) throw ValidationError("cvar_empirical: empty sample set");
    RiskLevel lvl(alpha);
    for (double s : samples)
        if (!std::isfinite(s)) throw ValidationError("cvar_empirical: non-finite sample");
    std::sort(samples.begin(), samples.end());
    return detail::cvar_sorted(samples, lvl.value());
}

/** Checks CVaR_alpha(Y) <= E(Y)/alpha for nonnegative Y (tolerance 1e-12). */
inline bool cvar_expectation_bound_check(const DiscreteDistribution& d, double alpha) {
    d.validate();
    for (double y : d.support)
        if (y < 0.0)
            throw ValidationError("cvar_expectation_bound_check: requires nonnegative support");
    return cvar_ru(d, alpha) <= d.mean() / RiskLevel(alpha).value() + 1e-12;
}

/** Checks CVaR_alpha(log Y) <= log(CVaR_alpha(Y)) for strictly positive
 *  bounded Y (tolerance 1e-12). */
inline bool cvar_log_check(const DiscreteDistribution& d, double alpha) {
    d.validate();
    DiscreteDistribution logd;
    logd.probs = d.probs;
    logd.support.reserve(d.size());
    for (double y : d.support) {
        if (y <= 0.0)
            throw ValidationError("cvar_log_check: requires strictly positive support");
        logd.support.push_back(std::log(y));
    }
    return cvar_ru(logd, alpha) <= std::log(cvar_ru(d, alpha)) + 1e-12;
}

namespace detail {

// Integral of the quantile function p -> VaR_{1-p}(Y) over (lo, hi), computed
// exactly from the merged CDF: the quantile is constant v_j on (F_{j-1}, F_j].
inline long double quantile_integral(const MergedCdf& m, double lo, double hi) {
    long double acc = 0.0L;
    double fprev = 0.0;
    for (std::size_t j = 0; j < m.values.size(); ++j) {
        const double a = std::max(fprev, lo);
        const double b = std::min(m.cum[j], hi);
        if (b > a) acc += static_cast<long double>(m.values[j]) * (b - a);
        fprev = m.cum[j];
    }
    return acc;
}

}  // namespace detail

/** Tail-fatness ratio
 *  m = int_{1-alpha}^1 VaR_{1-p}(Y) dp / int_0^{1-alpha} VaR_{1-p}(Y) dp
 *  for strictly positive Y. Large m means the alpha-tail carries weight
 *  comparable to the rest, so the expectation bound E(Y)/alpha is tight. */
inline double tail_fatness(const DiscreteDistribution& d, double alpha) {
    d.validate();
    RiskLevel lvl(alpha);
    if (lvl.value() == 1.0)
        throw ValidationError("tail_fatness: alpha = 1 makes the body integral empty");
    for (double y : d.support)
        if (y <= 0.0) throw ValidationError("tail_fatness: requires strictly positive support");
    const auto m = detail::merged_cdf(d);
    const long double num = detail::quantile_integral(m, 1.0 - lvl.value(), 1.0);
    const long double den = detail::quantile_integral(m, 0.0, 1.0 - lvl.value());
    if (den <= 0.0L)
        throw NumericError("tail_fatness: degenerate body integral");
    return static_cast<double>(num / den);
}

struct TailFatnessReport {
    double m_hat = 0.0;
    // log((1/alpha) E(Y)) - log(CVaR_alpha(Y)), the cost of replacing CVaR by
    // the expectation bound, and its certified ceiling log(1/m_hat + 1).
    double log_gap = 0.0;
    double gap_bound = 0.0;
    bool holds = false;
};

inline TailFatnessReport tail_fatness_report(const DiscreteDistribution& d, double alpha) {
    TailFatnessReport r;
    r.m_hat = tail_fatness(d, alpha);
    r.log_gap = std::log(d.mean() / alpha) - std::log(cvar_ru(d, alpha));
    r.gap_bound = std::log(1.0 / r.m_hat + 1.0);
    r.holds = r.log_gap >= -1e-9 && r.log_gap <= r.gap_bound + 1e-9;
    return r;
}

struct LseSandwich {
    double max_value = 0.0;
    double lse = 0.0;        // (1/gamma) log sum_i exp(gamma y_i)
    double upper = 0.0;      // max_value + log(n)/gamma
};

/** Max-shifted log-sum-exp with its two-sided bound
 *  max y <= (1/gamma) log sum exp(gamma y) <= max y + log(n)/gamma. */
inline LseSandwich logsumexp_sandwich(const std::vector<double>& ys, double gamma) {
    if (ys.empty()) throw ValidationError("logsumexp_sandwich: empty vector");
    if (!(gamma > 0.0) || !std::isfinite(gamma))
        throw ValidationError("logsumexp_sandwich: gamma must be positive and finite");
    for (double y : ys)
        if (!std::isfinite(y)) throw ValidationError("logsumexp_sandwich: non-finite entry");
    LseSandwich out;
    out.max_value = *std::max_element(ys.begin(), ys.end());
    StableSum s;
    for (double y : ys) s.add(std::exp(gamma * (y - out.max_value)));
    out.lse = out.max_value + std::log(s.value()) / gamma;
    out.upper = out.max_value + std::log(static_cast<double>(ys.size())) / gamma;
    return out;
}

}  // namespace rsr
