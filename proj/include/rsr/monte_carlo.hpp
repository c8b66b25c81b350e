#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "rsr/common.hpp"
#include "rsr/distribution.hpp"
#include "rsr/dp.hpp"
#include "rsr/grid.hpp"
#include "rsr/models.hpp"
#include "rsr/risk.hpp"

namespace rsr {

namespace detail {

/** Counter-based stream: every (seed, node, trajectory) triple opens an
 *  independent sequence, so results do not depend on the thread schedule. */
struct SplitMix64 {
    std::uint64_t state;

    explicit SplitMix64(std::uint64_t s) : state(s) {}

    std::uint64_t next() {
        std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    double u01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
};

inline std::uint64_t scramble(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

inline SplitMix64 trajectory_stream(std::uint64_t seed, std::uint64_t node,
                                    std::uint64_t trajectory) {
    std::uint64_t key = scramble(seed + 0x9E3779B97F4A7C15ull * (node + 1));
    key = scramble(key + 0x9E3779B97F4A7C15ull * (trajectory + 1));
    return SplitMix64(key);
}

/** Cumulative pmf for inverse-transform sampling; zero-probability atoms get
 *  zero-width slots and are never drawn. */
struct AtomSampler {
    std::vector<double> cum;
    const DiscreteDistribution* dist;

    explicit AtomSampler(const DiscreteDistribution& d) : dist(&d) {
        d.validate();
        cum.resize(d.size());
        StableSum acc;
        for (std::size_t i = 0; i < d.size(); ++i) {
            acc.add(d.probs[i]);
            cum[i] = acc.value();
        }
        cum.back() = 1.0;
    }

    double draw(SplitMix64& rng) const {
        const double u = rng.u01();
        const auto it = std::upper_bound(cum.begin(), cum.end(), u);
        const std::size_t i = std::min(static_cast<std::size_t>(it - cum.begin()), cum.size() - 1);
        return dist->support[i];
    }
};

}  // namespace detail

struct SimConfig {
    int n_trajectories = 1;
    std::uint64_t seed = 0;
    PolicyTable policy;
    bool interpolate_policy = false;
    int threads = 1;

    void validate() const {
        if (n_trajectories < 1) throw ValidationError("SimConfig: n_trajectories must be >= 1");
        if (threads < 1) throw ValidationError("SimConfig: threads must be >= 1");
    }
};

/** Per initial node, the sorted realizations of G = max_t g_K(X_t). */
struct GSampleSet {
    std::vector<std::vector<double>> samples;

    std::size_t n_nodes() const { return samples.size(); }
};

/** Closed-loop rollouts from every state-grid node. The control applied at an
 *  off-grid state is the policy value at the nearest node, or the multilinear
 *  interpolation of the node controls when interpolate_policy is set. States
 *  are clamped to the grid hull after every step; G maximizes g_K over stages
 *  0..T including the initial state. */
template <ModelLike M>
GSampleSet simulate_g(const M& model, const DiscreteDistribution& dist, const SimConfig& config,
                      const Grid& sgrid, const Grid& cgrid) {
    config.validate();
    const int T = model.horizon();
    if (config.policy.horizon() != T)
        throw ValidationError("simulate_g: policy horizon does not match the model");
    config.policy.validate(sgrid.size(), cgrid.size());
    const detail::AtomSampler sampler(dist);

    GSampleSet out;
    out.samples.resize(sgrid.size());
    parallel_for(
        sgrid.size(),
        [&](std::size_t node) {
            auto& slot = out.samples[node];
            slot.resize(config.n_trajectories);
            for (int traj = 0; traj < config.n_trajectories; ++traj) {
                auto rng = detail::trajectory_stream(config.seed, node, traj);
                Vec x = sgrid.node(node);
                double g = model.gk(x);
                for (int t = 0; t < T; ++t) {
                    Vec u{};
                    if (config.interpolate_policy) {
                        const InterpWeights w = project(sgrid, x);
                        for (int c = 0; c < w.count; ++c) {
                            const Vec uc = cgrid.node(config.policy.controls[t][w.entries[c].first]);
                            for (int k = 0; k < cgrid.dim(); ++k)
                                u[k] += w.entries[c].second * uc[k];
                        }
                    } else {
                        u = cgrid.node(config.policy.controls[t][sgrid.nearest(x)]);
                    }
                    const double d = sampler.draw(rng);
                    x = model.step(x, u, d);
                    for (int k = 0; k < model.state_dim(); ++k)
                        if (!std::isfinite(x[k]))
                            throw NumericError("simulate_g: non-finite state at node " +
                                               std::to_string(node) + ", trajectory " +
                                               std::to_string(traj) + ", stage " +
                                               std::to_string(t));
                    x = sgrid.clamp_to_hull(x);
                    g = std::max(g, model.gk(x));
                }
                slot[traj] = g;
            }
            std::sort(slot.begin(), slot.end());
        },
        config.threads);
    return out;
}

/** Empirical CVaR per node and risk level; rows follow the node order of the
 *  sample set, columns the order of levels. */
struct CvarField {
    std::vector<double> levels;
    std::vector<std::vector<double>> values;  // [node][level index]

    double at(std::size_t node, std::size_t level_idx) const { return values[node][level_idx]; }
};

inline CvarField estimate_cvar_field(const GSampleSet& samples, const std::vector<double>& levels) {
    if (levels.empty()) throw ValidationError("estimate_cvar_field: no levels given");
    CvarField field;
    field.levels = levels;
    for (double a : levels) RiskLevel check(a);
    field.values.resize(samples.n_nodes());
    for (std::size_t i = 0; i < samples.n_nodes(); ++i) {
        const auto& s = samples.samples[i];
        if (s.empty()) throw ValidationError("estimate_cvar_field: node without samples");
        field.values[i].reserve(levels.size());
        for (double a : levels) field.values[i].push_back(detail::cvar_sorted(s, a));
    }
    return field;
}

/** Sample standard deviation (n-1 denominator; 0 for a single sample). */
inline double sample_std(const std::vector<double>& xs) {
    if (xs.empty()) throw ValidationError("sample_std: empty sample set");
    if (xs.size() == 1) return 0.0;
    StableSum mean_acc;
    for (double x : xs) mean_acc.add(x);
    const double mean = mean_acc.value() / xs.size();
    StableSum sq;
    for (double x : xs) sq.add((x - mean) * (x - mean));
    return std::sqrt(sq.value() / (xs.size() - 1));
}

inline void export_samples_csv(const GSampleSet& samples, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw IoError("export_samples_csv: cannot open " + path);
    f << "node,rank,G\n";
    char buf[32];
    for (std::size_t i = 0; i < samples.n_nodes(); ++i)
        for (std::size_t r = 0; r < samples.samples[i].size(); ++r) {
            std::snprintf(buf, sizeof buf, "%.17g", samples.samples[i][r]);
            f << i << ',' << r << ',' << buf << '\n';
        }
    if (!f) throw IoError("export_samples_csv: write failure on " + path);
}

/** Binary summary: per node the sample count and a fixed 101-point quantile
 *  sketch of the sorted samples (magic "RSRQ1"). */
inline void export_sample_summary(const GSampleSet& samples, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("export_sample_summary: cannot open " + path);
    const char magic[6] = {'R', 'S', 'R', 'Q', '1', '\n'};
    f.write(magic, sizeof magic);
    const std::uint64_t n_nodes = samples.n_nodes();
    f.write(reinterpret_cast<const char*>(&n_nodes), sizeof n_nodes);
    for (const auto& s : samples.samples) {
        const std::uint64_t n = s.size();
        f.write(reinterpret_cast<const char*>(&n), sizeof n);
        double q[101];
        for (int j = 0; j <= 100; ++j) {
            const std::size_t idx =
                n == 0 ? 0 : std::min<std::size_t>((n - 1) * j / 100, n - 1);
            q[j] = n == 0 ? 0.0 : s[idx];
        }
        f.write(reinterpret_cast<const char*>(q), sizeof q);
    }
    if (!f) throw IoError("export_sample_summary: write failure on " + path);
}

struct SampleSummary {
    std::vector<std::uint64_t> counts;
    std::vector<std::array<double, 101>> quantiles;
};

inline SampleSummary import_sample_summary(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("import_sample_summary: cannot open " + path);
    char magic[6];
    f.read(magic, sizeof magic);
    if (!f || std::string(magic, 5) != "RSRQ1")
        throw IoError("import_sample_summary: " + path + " is not a sample summary");
    std::uint64_t n_nodes = 0;
    f.read(reinterpret_cast<char*>(&n_nodes), sizeof n_nodes);
    if (!f || n_nodes > 100'000'000) throw IoError("import_sample_summary: corrupt header");
    SampleSummary out;
    out.counts.resize(n_nodes);
    out.quantiles.resize(n_nodes);
    for (std::uint64_t i = 0; i < n_nodes; ++i) {
        f.read(reinterpret_cast<char*>(&out.counts[i]), sizeof(std::uint64_t));
        f.read(reinterpret_cast<char*>(out.quantiles[i].data()), 101 * sizeof(double));
        if (!f) throw IoError("import_sample_summary: truncated payload in " + path);
    }
    return out;
}

}  // namespace rsr
