#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "rsr/common.hpp"
#include "rsr/dp.hpp"
#include "rsr/grid.hpp"
#include "rsr/monte_carlo.hpp"
#include "rsr/risk.hpp"

namespace rsr {

enum class Provenance { analytic_U, monte_carlo_S, theorem3_Sbar };

inline const char* provenance_name(Provenance p) {
    switch (p) {
        case Provenance::analytic_U: return "analytic-U";
        case Provenance::monte_carlo_S: return "monte-carlo-S";
        case Provenance::theorem3_Sbar: return "theorem3-Sbar";
    }
    return "unknown";
}

struct SafeSetMask {
    std::vector<std::uint8_t> membership;
    double alpha = 1.0;
    double r = 0.0;
    std::optional<double> gamma;
    Provenance provenance = Provenance::analytic_U;

    std::size_t size() const { return membership.size(); }
    std::size_t count() const {
        return static_cast<std::size_t>(std::count(membership.begin(), membership.end(), 1));
    }
};

namespace detail {

inline std::size_t level_index(const CvarField& field, double alpha, const char* caller) {
    for (std::size_t j = 0; j < field.levels.size(); ++j)
        if (field.levels[j] == alpha) return j;
    throw ValidationError(std::string(caller) + ": level " + std::to_string(alpha) +
                          " was not estimated in this field");
}

}  // namespace detail

/** Sub-level set of the exponential-cost value: member iff
 *  (1/gamma) log(J0(i)/alpha) <= r, evaluated in log form. Certifies
 *  membership in the risk-sensitive safe set at (alpha, r). */
inline SafeSetMask under_approx_set(const ValueTable& j0, double alpha, double r, double gamma) {
    RiskLevel level(alpha);
    if (!(gamma >= 1.0) || !std::isfinite(gamma))
        throw ValidationError("under_approx_set: gamma must be >= 1 and finite");
    if (!std::isfinite(r)) throw ValidationError("under_approx_set: r must be finite");
    SafeSetMask m;
    m.alpha = alpha;
    m.r = r;
    m.gamma = gamma;
    m.provenance = Provenance::analytic_U;
    m.membership.resize(j0.values.size());
    const double la = std::log(alpha);
    for (std::size_t i = 0; i < j0.values.size(); ++i) {
        const double v = j0.values[i];
        if (!(v > 0.0) || !std::isfinite(v))
            throw ValidationError("under_approx_set: value table must be strictly positive");
        m.membership[i] = (std::log(v) - la) / gamma <= r ? 1 : 0;
    }
    return m;
}

/** Empirical risk-sensitive safe set: member iff the estimated CVaR at the
 *  given level is <= r. The field must contain exactly this level. */
inline SafeSetMask mc_safe_set(const CvarField& field, double alpha, double r) {
    RiskLevel level(alpha);
    if (!std::isfinite(r)) throw ValidationError("mc_safe_set: r must be finite");
    const std::size_t j = detail::level_index(field, alpha, "mc_safe_set");
    SafeSetMask m;
    m.alpha = alpha;
    m.r = r;
    m.provenance = Provenance::monte_carlo_S;
    m.membership.resize(field.values.size());
    for (std::size_t i = 0; i < field.values.size(); ++i)
        m.membership[i] = field.values[i][j] <= r ? 1 : 0;
    return m;
}

/** Sub-level set of the risk dp value: member iff J_0^alpha(i) <= r, which
 *  certifies the optimal risk functional is <= r at that node. */
inline SafeSetMask theorem3_safe_set(const ValueTable& j0alpha, double r, double alpha) {
    RiskLevel level(alpha);
    if (!std::isfinite(r)) throw ValidationError("theorem3_safe_set: r must be finite");
    SafeSetMask m;
    m.alpha = alpha;
    m.r = r;
    m.provenance = Provenance::theorem3_Sbar;
    m.membership.resize(j0alpha.values.size());
    for (std::size_t i = 0; i < j0alpha.values.size(); ++i)
        m.membership[i] = j0alpha.values[i] <= r ? 1 : 0;
    return m;
}

/** True when every member of a is a member of b. */
inline bool is_subset(const SafeSetMask& a, const SafeSetMask& b) {
    if (a.size() != b.size()) throw ValidationError("is_subset: mask sizes differ");
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a.membership[i] && !b.membership[i]) return false;
    return true;
}

struct CoverageReport {
    double percent = 0.0;
    std::size_t u_count = 0;
    std::size_t s_count = 0;
    std::vector<std::size_t> violations;  // nodes in u that are not in s
};

/** |u| / |s| as a percentage, with the u ⊆ s audit. An empty s is an error so
 *  it can never be confused with zero coverage. */
inline CoverageReport coverage(const SafeSetMask& u, const SafeSetMask& s) {
    if (u.size() != s.size()) throw ValidationError("coverage: mask sizes differ");
    CoverageReport rep;
    rep.u_count = u.count();
    rep.s_count = s.count();
    if (rep.s_count == 0)
        throw ValidationError("coverage: the reference set is empty; coverage is undefined");
    for (std::size_t i = 0; i < u.size(); ++i)
        if (u.membership[i] && !s.membership[i]) rep.violations.push_back(i);
    rep.percent = 100.0 * static_cast<double>(rep.u_count) / static_cast<double>(rep.s_count);
    return rep;
}

struct Thm1Audit {
    std::vector<double> margins;               // analytic bound minus estimated cvar
    std::vector<std::size_t> negative_nodes;   // margin < 0
    double min_margin = 0.0;
};

/** Per-node margin of the exponential upper bound over the estimated CVaR:
 *  margin(i) = (1/gamma) log(J0(i)/alpha) - cvar(i). Negative margins are
 *  collected for inspection; at Monte Carlo scale they should not exceed the
 *  estimator noise. */
inline Thm1Audit audit_thm1(const ValueTable& j0, double gamma, double alpha,
                            const CvarField& field) {
    RiskLevel level(alpha);
    if (!(gamma >= 1.0) || !std::isfinite(gamma))
        throw ValidationError("audit_thm1: gamma must be >= 1 and finite");
    if (j0.values.size() != field.values.size())
        throw ValidationError("audit_thm1: value table and cvar field sizes differ");
    const std::size_t j = detail::level_index(field, alpha, "audit_thm1");
    Thm1Audit audit;
    audit.margins.resize(j0.values.size());
    audit.min_margin = std::numeric_limits<double>::infinity();
    const double la = std::log(alpha);
    for (std::size_t i = 0; i < j0.values.size(); ++i) {
        const double v = j0.values[i];
        if (!(v > 0.0) || !std::isfinite(v))
            throw ValidationError("audit_thm1: value table must be strictly positive");
        const double bound = (std::log(v) - la) / gamma;
        audit.margins[i] = bound - field.values[i][j];
        audit.min_margin = std::min(audit.min_margin, audit.margins[i]);
        if (audit.margins[i] < 0.0) audit.negative_nodes.push_back(i);
    }
    return audit;
}

struct SubsetAudit {
    std::size_t n_members = 0;                 // members of u that were audited
    std::vector<std::size_t> soft_violations;  // cvar exceeds r within the CLT band
    std::vector<std::size_t> hard_violations;  // cvar exceeds r beyond the CLT band
    double max_excess = 0.0;                   // worst cvar - r over all violations
};

/** Audits u ⊆ {cvar <= u.r} against the empirical field, tolerating excesses
 *  within 3 * (sample std) / sqrt(alpha n) per node since the reference set
 *  is itself an estimate. */
inline SubsetAudit subset_audit_mc(const SafeSetMask& u, const CvarField& field,
                                   const GSampleSet& samples) {
    if (u.size() != field.values.size() || u.size() != samples.n_nodes())
        throw ValidationError("subset_audit_mc: input sizes differ");
    const std::size_t j = detail::level_index(field, u.alpha, "subset_audit_mc");
    SubsetAudit audit;
    for (std::size_t i = 0; i < u.size(); ++i) {
        if (!u.membership[i]) continue;
        ++audit.n_members;
        const double excess = field.values[i][j] - u.r;
        if (excess <= 0.0) continue;
        const auto& s = samples.samples[i];
        const double slack =
            3.0 * sample_std(s) / std::sqrt(u.alpha * static_cast<double>(s.size()));
        audit.max_excess = std::max(audit.max_excess, excess);
        if (excess <= slack)
            audit.soft_violations.push_back(i);
        else
            audit.hard_violations.push_back(i);
    }
    return audit;
}

inline void export_mask_csv(const Grid& g, const SafeSetMask& m, const std::string& path) {
    if (m.size() != g.size()) throw ValidationError("export_mask_csv: size mismatch");
    std::ofstream f(path);
    if (!f) throw IoError("export_mask_csv: cannot open " + path);
    f << "node";
    for (int k = 0; k < g.dim(); ++k) f << ",x" << k;
    f << ",member\n";
    char buf[32];
    for (std::size_t i = 0; i < g.size(); ++i) {
        f << i;
        const Vec x = g.node(i);
        for (int k = 0; k < g.dim(); ++k) {
            std::snprintf(buf, sizeof buf, "%.17g", x[k]);
            f << ',' << buf;
        }
        f << ',' << static_cast<int>(m.membership[i]) << '\n';
    }
    if (!f) throw IoError("export_mask_csv: write failure on " + path);
}

/** JSON summary of a mask and its audits; absent audits are omitted. */
inline void write_mask_summary(const SafeSetMask& m, const std::string& path,
                               const CoverageReport* cov = nullptr,
                               const SubsetAudit* audit = nullptr) {
    nlohmann::json doc;
    doc["alpha"] = m.alpha;
    doc["r"] = m.r;
    if (m.gamma)
        doc["gamma"] = *m.gamma;
    else
        doc["gamma"] = nullptr;
    doc["provenance"] = provenance_name(m.provenance);
    doc["nodes"] = m.size();
    doc["members"] = m.count();
    if (cov) {
        doc["coverage_percent"] = cov->percent;
        doc["coverage_violations"] = cov->violations.size();
    }
    if (audit) {
        doc["subset_soft_violations"] = audit->soft_violations.size();
        doc["subset_hard_violations"] = audit->hard_violations.size();
        doc["max_subset_excess"] = audit->max_excess;
    }
    std::ofstream f(path);
    if (!f) throw IoError("write_mask_summary: cannot open " + path);
    f << doc.dump(2) << '\n';
    if (!f) throw IoError("write_mask_summary: write failure on " + path);
}

}  // namespace rsr
