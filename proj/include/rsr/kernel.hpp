#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "rsr/common.hpp"
#include "rsr/distribution.hpp"
#include "rsr/grid.hpp"
#include "rsr/models.hpp"

namespace rsr {

/** Discrete transition kernel over grid nodes: one sparse probability row per
 *  (state node, control node) pair, row index i * n_controls + j. */
struct TransitionKernel {
    struct Entry {
        std::uint32_t node = 0;
        double prob = 0.0;
    };

    std::size_t n_states = 0;
    std::size_t n_controls = 0;
    std::vector<std::vector<Entry>> rows;

    const std::vector<Entry>& row(std::size_t i, std::size_t j) const {
        return rows[i * n_controls + j];
    }

    void validate() const {
        if (rows.size() != n_states * n_controls)
            throw ValidationError("TransitionKernel: row count mismatch");
        for (std::size_t r = 0; r < rows.size(); ++r) {
            StableSum s;
            for (const auto& e : rows[r]) {
                if (e.node >= n_states)
                    throw ValidationError("TransitionKernel: node index out of range in row " +
                                          std::to_string(r));
                if (!(e.prob >= 0.0) || !std::isfinite(e.prob))
                    throw ValidationError("TransitionKernel: bad probability in row " + std::to_string(r));
                s.add(e.prob);
            }
            if (std::abs(s.value() - 1.0) > kDensityTol)
                throw ValidationError("TransitionKernel: row " + std::to_string(r) + " sums to " +
                                      std::to_string(s.value()));
        }
    }
};

/** Builds the kernel row for every (state node, control node): push each
 *  disturbance atom through the dynamics, clamp to the grid hull, spread the
 *  atom's mass over the enclosing cell by multilinear weights, then merge and
 *  normalize. Deterministic for fixed inputs regardless of thread count. */
template <ModelLike M>
TransitionKernel build_kernel(const M& model, const Grid& sgrid, const Grid& cgrid,
                              const DiscreteDistribution& dist, unsigned threads = 1) {
    dist.validate();
    if (model.state_dim() != sgrid.dim())
        throw ValidationError("build_kernel: model state dimension does not match the state grid");
    TransitionKernel k;
    k.n_states = sgrid.size();
    k.n_controls = cgrid.size();
    k.rows.resize(k.n_states * k.n_controls);

    parallel_for(
        k.rows.size(),
        [&](std::size_t r) {
            const std::size_t i = r / k.n_controls;
            const std::size_t j = r % k.n_controls;
            const Vec x = sgrid.node(i);
            const Vec u = cgrid.node(j);
            std::vector<TransitionKernel::Entry> acc;
            acc.reserve(dist.size() * (1u << sgrid.dim()));
            for (std::size_t a = 0; a < dist.size(); ++a) {
                if (dist.probs[a] == 0.0) continue;
                Vec y = model.step(x, u, dist.support[a]);
                for (int kk = 0; kk < sgrid.dim(); ++kk)
                    if (!std::isfinite(y[kk]))
                        throw NumericError("build_kernel: non-finite successor at state node " +
                                           std::to_string(i) + ", control node " + std::to_string(j) +
                                           ", disturbance atom " + std::to_string(a));
                const InterpWeights w = project(sgrid, sgrid.clamp_to_hull(y));
                for (int e = 0; e < w.count; ++e)
                    acc.push_back({static_cast<std::uint32_t>(w.entries[e].first),
                                   dist.probs[a] * w.entries[e].second});
            }
            std::sort(acc.begin(), acc.end(),
                      [](const auto& a, const auto& b) { return a.node < b.node; });
            auto& out = k.rows[r];
            StableSum total;
            for (const auto& e : acc) {
                if (!out.empty() && out.back().node == e.node)
                    out.back().prob += e.prob;
                else
                    out.push_back(e);
                total.add(e.prob);
            }
            const double t = total.value();
            for (auto& e : out) e.prob /= t;
        },
        threads);
    return k;
}

// ---------------------------------------------------------------------------
// CSV cache format: one triplet per line, row = state_node * n_controls +
// control_node, node = successor state node. Probabilities are printed with
// %.17g so import reproduces the kernel bit-for-bit.
// ---------------------------------------------------------------------------

inline void export_kernel_csv(const TransitionKernel& k, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw IoError("export_kernel_csv: cannot open " + path);
    f << "# transition kernel v1\n";
    f << "# states=" << k.n_states << " controls=" << k.n_controls << "\n";
    f << "row,node,prob\n";
    char buf[32];
    for (std::size_t r = 0; r < k.rows.size(); ++r) {
        for (const auto& e : k.rows[r]) {
            std::snprintf(buf, sizeof buf, "%.17g", e.prob);
            f << r << ',' << e.node << ',' << buf << '\n';
        }
    }
    if (!f) throw IoError("export_kernel_csv: write failure on " + path);
}

inline TransitionKernel import_kernel_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("import_kernel_csv: cannot open " + path);
    std::string line;
    if (!std::getline(f, line) || line.rfind("# transition kernel v1", 0) != 0)
        throw IoError("import_kernel_csv: " + path + " is not a kernel cache");
    TransitionKernel k;
    if (!std::getline(f, line) ||
        std::sscanf(line.c_str(), "# states=%zu controls=%zu", &k.n_states, &k.n_controls) != 2)
        throw IoError("import_kernel_csv: missing size header in " + path);
    std::getline(f, line);  // column header
    k.rows.resize(k.n_states * k.n_controls);
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::size_t r;
        unsigned node;
        double p;
        if (std::sscanf(line.c_str(), "%zu,%u,%lg", &r, &node, &p) != 3)
            throw IoError("import_kernel_csv: malformed line '" + line + "'");
        if (r >= k.rows.size()) throw IoError("import_kernel_csv: row index out of range");
        k.rows[r].push_back({node, p});
    }
    k.validate();
    return k;
}

}  // namespace rsr
