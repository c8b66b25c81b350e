#pragma once

#include <cstdio>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "rsr/config.hpp"
#include "rsr/dp.hpp"
#include "rsr/grid.hpp"
#include "rsr/kernel.hpp"
#include "rsr/models.hpp"
#include "rsr/monte_carlo.hpp"
#include "rsr/risk.hpp"
#include "rsr/sets.hpp"
#include "rsr/tiny_mdp.hpp"

namespace rsr {

inline constexpr const char* kLibraryVersion = "0.1.0";

struct RunResult {
    std::vector<std::string> files;  // artifact names relative to output_dir, sorted
    std::string manifest_path;
    std::string config_hash;
    int verify_failures = 0;
    std::vector<std::string> verify_lines;
};

namespace detail {

/** Runs fn and rethrows its typed errors with the stage name prefixed, so a
 *  failure inside a multi-stage run names the stage that produced it. */
template <class Fn>
auto stage(const char* name, Fn&& fn) {
    try {
        return fn();
    } catch (const ValidationError& e) {
        throw ValidationError(std::string(name) + ": " + e.what());
    } catch (const NumericError& e) {
        throw NumericError(std::string(name) + ": " + e.what());
    } catch (const IoError& e) {
        throw IoError(std::string(name) + ": " + e.what());
    }
}

/** Collects artifact names while handing out full paths. */
struct ArtifactDir {
    std::filesystem::path dir;
    std::vector<std::string> files;

    explicit ArtifactDir(const std::string& d) : dir(d) {
        std::error_code ec;
        std::filesystem::create_directories(dir, ec);
        if (ec) throw IoError("cannot create output directory " + d + ": " + ec.message());
    }

    std::string path(const std::string& name) {
        files.push_back(name);
        return (dir / name).string();
    }
};

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot open " + path);
    f << text;
    if (!f) throw IoError("write failure on " + path);
}

inline void write_cvar_field_csv(const Grid& g, const CvarField& field, const std::string& path) {
    if (field.values.size() != g.size())
        throw ValidationError("write_cvar_field_csv: field does not match the grid");
    std::ofstream f(path);
    if (!f) throw IoError("write_cvar_field_csv: cannot open " + path);
    char buf[32];
    f << "node";
    for (int k = 0; k < g.dim(); ++k) f << ",x" << k;
    for (double a : field.levels) {
        std::snprintf(buf, sizeof buf, "%.17g", a);
        f << ",cvar_" << buf;
    }
    f << '\n';
    for (std::size_t i = 0; i < g.size(); ++i) {
        f << i;
        const Vec x = g.node(i);
        for (int k = 0; k < g.dim(); ++k) {
            std::snprintf(buf, sizeof buf, "%.17g", x[k]);
            f << ',' << buf;
        }
        for (double v : field.values[i]) {
            std::snprintf(buf, sizeof buf, "%.17g", v);
            f << ',' << buf;
        }
        f << '\n';
    }
    if (!f) throw IoError("write_cvar_field_csv: write failure on " + path);
}

inline void write_margin_csv(const Grid& g, const Thm1Audit& audit, const std::string& path) {
    if (audit.margins.size() != g.size())
        throw ValidationError("write_margin_csv: audit does not match the grid");
    std::ofstream f(path);
    if (!f) throw IoError("write_margin_csv: cannot open " + path);
    char buf[32];
    f << "node";
    for (int k = 0; k < g.dim(); ++k) f << ",x" << k;
    f << ",margin\n";
    for (std::size_t i = 0; i < g.size(); ++i) {
        f << i;
        const Vec x = g.node(i);
        for (int k = 0; k < g.dim(); ++k) {
            std::snprintf(buf, sizeof buf, "%.17g", x[k]);
            f << ',' << buf;
        }
        std::snprintf(buf, sizeof buf, "%.17g", audit.margins[i]);
        f << ',' << buf << '\n';
    }
    if (!f) throw IoError("write_margin_csv: write failure on " + path);
}

inline void write_manifest(const ExperimentConfig& cfg, ArtifactDir& out) {
    std::vector<std::string> files = out.files;
    std::sort(files.begin(), files.end());
    nlohmann::json doc;
    doc["config_hash"] = config_hash(cfg);
    doc["mode"] = mode_name(cfg.mode);
    doc["seed"] = cfg.seed;
    doc["system"] = cfg.system;
    doc["library"] = std::string("rsr ") + kLibraryVersion;
    doc["files"] = files;
    std::ofstream f((out.dir / "manifest.json").string());
    if (!f) throw IoError("cannot open manifest.json in " + out.dir.string());
    f << doc.dump(2) << '\n';
    if (!f) throw IoError("write failure on manifest.json");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// verify mode: randomized re-checks of the library's core identities.
// ---------------------------------------------------------------------------

struct VerifyReport {
    int suites = 0;
    int failures = 0;  // failed suites
    std::vector<std::string> lines;
};

namespace detail {

inline DiscreteDistribution random_pmf(std::mt19937_64& rng, std::vector<double> support) {
    const std::size_t n = support.size();
    std::uniform_real_distribution<double> wd(0.05, 1.0);
    std::vector<double> w(n);
    StableSum tot;
    for (auto& x : w) {
        x = wd(rng);
        tot.add(x);
    }
    std::vector<double> p(n);
    StableSum head;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        p[i] = w[i] / tot.value();
        head.add(p[i]);
    }
    p[n - 1] = 1.0 - head.value();
    DiscreteDistribution d{std::move(support), std::move(p)};
    d.validate();
    return d;
}

inline DiscreteDistribution random_distribution(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> nd(3, 20);
    std::uniform_real_distribution<double> vd(-5.0, 5.0);
    std::vector<double> v(static_cast<std::size_t>(nd(rng)));
    for (auto& x : v) x = vd(rng);
    return random_pmf(rng, std::move(v));
}

inline void verify_line(VerifyReport& rep, bool ok, const std::string& text) {
    ++rep.suites;
    if (!ok) ++rep.failures;
    rep.lines.push_back(std::string(ok ? "ok   " : "FAIL ") + text);
}

}  // namespace detail

/** Re-runs the library's cross-checkable identities on fresh random
 *  instances: the two CVaR forms agree, the coherence axioms hold, the
 *  empirical estimator matches the exact functional on atomic laws, the
 *  log-sum-exp sandwich holds, the alpha = 1 risk DP is bitwise the
 *  risk-neutral DP, the fixed-policy risk value sits between expectation and
 *  CVaR, and kernel construction is thread-count invariant. */
inline VerifyReport verify_properties(std::uint64_t seed, int cases) {
    if (cases < 1) throw ValidationError("verify_properties: cases must be >= 1");
    VerifyReport rep;
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
    const std::vector<double> levels{1.0, 0.7, 0.35, 0.1, 0.02, 0.005};

    {
        double worst = 0.0;
        for (int c = 0; c < cases; ++c) {
            const auto d = detail::random_distribution(rng);
            for (double a : levels)
                worst = std::max(worst, std::abs(cvar_dual(d, a).value - cvar_ru(d, a)));
        }
        char buf[160];
        std::snprintf(buf, sizeof buf,
                      "dual-vs-quantile: %d distributions x %zu levels, max |diff| %.3g (tol 1e-12)",
                      cases, levels.size(), worst);
        detail::verify_line(rep, worst <= 1e-12, buf);
    }

    {
        int bad = 0;
        const int n_pairs = std::max(cases / 2, 10);
        std::uniform_int_distribution<int> nd(3, 15);
        std::uniform_real_distribution<double> vd(-4.0, 4.0), cd(-2.0, 2.0);
        for (int c = 0; c < n_pairs; ++c) {
            const std::size_t n = static_cast<std::size_t>(nd(rng));
            std::vector<double> y1(n), y2(n);
            for (auto& x : y1) x = vd(rng);
            for (auto& x : y2) x = vd(rng);
            const auto base = detail::random_pmf(rng, y1);
            auto on = [&](const std::vector<double>& y) {
                DiscreteDistribution d{y, base.probs};
                return d;
            };
            const double shift = cd(rng);
            const double lam = 1.7;
            for (double a : levels) {
                const double c1 = cvar_ru(on(y1), a);
                const double c2 = cvar_ru(on(y2), a);
                std::vector<double> ysum(n), yshift(n), yscale(n), yup(n);
                for (std::size_t i = 0; i < n; ++i) {
                    ysum[i] = y1[i] + y2[i];
                    yshift[i] = y1[i] + shift;
                    yscale[i] = lam * y1[i];
                    yup[i] = y1[i] + std::abs(y2[i]);
                }
                if (cvar_ru(on(ysum), a) > c1 + c2 + 1e-12) ++bad;
                if (std::abs(cvar_ru(on(yshift), a) - (c1 + shift)) > 1e-12) ++bad;
                if (std::abs(cvar_ru(on(yscale), a) - lam * c1) > 1e-12) ++bad;
                if (cvar_ru(on(yup), a) < c1 - 1e-12) ++bad;
            }
        }
        char buf[160];
        std::snprintf(buf, sizeof buf,
                      "coherence-axioms: %d shared-space pairs x %zu levels, %d violations",
                      n_pairs, levels.size(), bad);
        detail::verify_line(rep, bad == 0, buf);
    }

    {
        double worst = 0.0;
        const int n_sets = std::max(cases / 4, 10);
        std::uniform_int_distribution<int> nd(1, 40);
        std::uniform_real_distribution<double> vd(-3.0, 6.0);
        for (int c = 0; c < n_sets; ++c) {
            std::vector<double> s(static_cast<std::size_t>(nd(rng)));
            for (auto& x : s) x = vd(rng);
            const auto d = uniform_distribution(s);
            for (double a : levels)
                worst = std::max(worst, std::abs(cvar_empirical(s, a) - cvar_ru(d, a)));
        }
        char buf[160];
        std::snprintf(buf, sizeof buf,
                      "empirical-vs-exact: %d sample sets, max |diff| %.3g (tol 1e-12)", n_sets,
                      worst);
        detail::verify_line(rep, worst <= 1e-12, buf);
    }

    {
        int bad = 0;
        std::uniform_int_distribution<int> nd(1, 50);
        std::uniform_real_distribution<double> vd(-6.0, 6.0);
        const std::vector<double> gammas{1.0, 3.0, 14.0};
        for (int c = 0; c < cases; ++c) {
            std::vector<double> y(static_cast<std::size_t>(nd(rng)));
            for (auto& x : y) x = vd(rng);
            for (double g : gammas) {
                const auto s = logsumexp_sandwich(y, g);
                if (s.lse < s.max_value - 1e-12 || s.lse > s.upper + 1e-12) ++bad;
            }
        }
        char buf[160];
        std::snprintf(buf, sizeof buf, "lse-sandwich: %d vectors x 3 gammas, %d violations", cases,
                      bad);
        detail::verify_line(rep, bad == 0, buf);
    }

    {
        int bad = 0;
        const int n_mdps = std::min(std::max(cases / 10, 5), 25);
        for (int c = 0; c < n_mdps; ++c) {
            const TinyMdp m = random_tiny_mdp(rng);
            const auto k = m.kernel();
            RhoParams params;
            params.stage_cost = [&m](int t, std::size_t i, std::size_t j) {
                return m.stage_cost[t][i][j];
            };
            params.terminal_cost = [&m](std::size_t i) { return m.terminal_cost[i]; };
            params.alpha = 1.0;
            const auto neutral = dp_risk_neutral(k, params, m.horizon);
            const auto risk1 = dp_theorem3(k, params, m.horizon);
            for (std::size_t t = 0; t < neutral.tables.size(); ++t)
                if (neutral.tables[t].values != risk1.tables[t].values) ++bad;
            if (neutral.policy.controls != risk1.policy.controls) ++bad;
            std::vector<double> prev;
            for (double a : {1.0, 0.5, 0.1, 0.02}) {
                params.alpha = a;
                const auto sol = dp_theorem3(k, params, m.horizon);
                if (!prev.empty())
                    for (std::size_t i = 0; i < prev.size(); ++i)
                        if (sol.tables[0].values[i] < prev[i] - 1e-12) ++bad;
                prev = sol.tables[0].values;
            }
        }
        char buf[160];
        std::snprintf(buf, sizeof buf,
                      "risk-dp: %d instances, alpha=1 bitwise + monotone in alpha, %d violations",
                      n_mdps, bad);
        detail::verify_line(rep, bad == 0, buf);
    }

    {
        int bad = 0;
        const int n_mdps = std::min(std::max(cases / 10, 5), 20);
        std::uniform_real_distribution<double> ad(0.05, 1.0);
        for (int c = 0; c < n_mdps; ++c) {
            const TinyMdp m = random_tiny_mdp(rng);
            const auto pol = random_policy(rng, m);
            const double a = ad(rng);
            RhoParams params;
            params.alpha = a;
            params.stage_cost = [&m](int t, std::size_t i, std::size_t j) {
                return m.stage_cost[t][i][j];
            };
            params.terminal_cost = [&m](std::size_t i) { return m.terminal_cost[i]; };
            const auto rho = rho_bruteforce(m, pol, a, params.cap_exponent);
            const auto j0 = dp_rho_policy(m.kernel(), pol, params, m.horizon);
            for (int s0 = 0; s0 < m.n_states; ++s0) {
                const auto law = trajectory_cost_law(m, pol, s0);
                if (law.mean() > rho[s0] + 1e-9) ++bad;
                if (rho[s0] > cvar_ru(law, a) + 1e-9) ++bad;
                if (std::abs(rho[s0] - j0[0].values[s0]) > 1e-9) ++bad;
            }
        }
        char buf[160];
        std::snprintf(buf, sizeof buf,
                      "fixed-policy-risk: %d instances, E <= rho <= CVaR and rho == DP, %d violations",
                      n_mdps, bad);
        detail::verify_line(rep, bad == 0, buf);
    }

    {
        const TclModel model;
        const Grid sgrid({{18.0, 23.0, 0.5}});
        const Grid cgrid({{0.0, 1.0, 0.5}});
        const auto dist = make_disturbance(DisturbanceFamily::temperature_none, 7).dist;
        const auto k1 = build_kernel(model, sgrid, cgrid, dist, 1);
        const auto k2 = build_kernel(model, sgrid, cgrid, dist, 2);
        bool same = k1.rows.size() == k2.rows.size();
        for (std::size_t r = 0; same && r < k1.rows.size(); ++r) {
            same = k1.rows[r].size() == k2.rows[r].size();
            for (std::size_t e = 0; same && e < k1.rows[r].size(); ++e)
                same = k1.rows[r][e].node == k2.rows[r][e].node &&
                       k1.rows[r][e].prob == k2.rows[r][e].prob;
        }
        k1.validate();
        detail::verify_line(rep, same,
                            "kernel-determinism: 1-thread and 2-thread builds identical");
    }

    return rep;
}

// ---------------------------------------------------------------------------
// Config-driven experiment runner.
// ---------------------------------------------------------------------------

namespace detail {

template <ModelLike M>
RunResult run_model(const ExperimentConfig& cfg, const M& model) {
    RunResult result;
    result.config_hash = config_hash(cfg);
    const int T = cfg.horizon;

    const Grid sgrid = stage("grid", [&] { return Grid(cfg.state_grid); });
    const Grid cgrid = stage("grid", [&] { return Grid(cfg.control_grid); });
    const DiscreteDistribution dist = stage("disturbance", [&] {
        return make_disturbance(cfg.family, cfg.disturbance_atoms).dist;
    });
    const TransitionKernel kernel = stage("kernel", [&] {
        return build_kernel(model, sgrid, cgrid, dist, static_cast<unsigned>(cfg.threads));
    });

    std::vector<double> gk(sgrid.size());
    for (std::size_t i = 0; i < sgrid.size(); ++i) gk[i] = model.gk(sgrid.node(i));

    ArtifactDir out(cfg.output_dir);

    if (cfg.mode == RunMode::export_kernel) {
        stage("write", [&] { export_kernel_csv(kernel, out.path("kernel.csv")); return 0; });
    }

    if (cfg.mode == RunMode::solve || cfg.mode == RunMode::simulate || cfg.mode == RunMode::sets) {
        for (std::size_t gi = 0; gi < cfg.gammas.size(); ++gi) {
            const double gamma = cfg.gammas[gi];
            const std::string gs = "_g" + std::to_string(gi);
            const ExponentialDp sol =
                stage("solve", [&] { return dp_exponential(kernel, gk, gamma, T); });
            stage("write", [&] {
                export_value_csv(sgrid, sol.v0, out.path("value" + gs + ".csv"));
                export_policy_csv(sgrid, cgrid, sol.policy, out.path("policy" + gs + ".csv"));
                return 0;
            });
            if (cfg.mode == RunMode::solve) continue;

            SimConfig sc;
            sc.n_trajectories = cfg.n_trajectories;
            sc.seed = cfg.seed;
            sc.policy = sol.policy;
            sc.interpolate_policy = cfg.interpolate_policy;
            sc.threads = cfg.threads;
            const GSampleSet samples =
                stage("simulate", [&] { return simulate_g(model, dist, sc, sgrid, cgrid); });
            const CvarField field = stage("risk-estimate", [&] {
                return estimate_cvar_field(samples, cfg.alphas);
            });
            stage("write", [&] {
                export_sample_summary(samples, out.path("samples" + gs + ".bin"));
                write_cvar_field_csv(sgrid, field, out.path("cvar" + gs + ".csv"));
                return 0;
            });
            if (cfg.mode == RunMode::simulate) continue;

            for (std::size_t ai = 0; ai < cfg.alphas.size(); ++ai) {
                const double alpha = cfg.alphas[ai];
                const std::string as = gs + "_a" + std::to_string(ai);
                const Thm1Audit audit =
                    stage("sets", [&] { return audit_thm1(sol.v0, gamma, alpha, field); });
                stage("write", [&] {
                    write_margin_csv(sgrid, audit, out.path("margin" + as + ".csv"));
                    return 0;
                });
                for (std::size_t ri = 0; ri < cfg.rs.size(); ++ri) {
                    const double r = cfg.rs[ri];
                    const std::string rs = as + "_r" + std::to_string(ri);
                    stage("sets", [&] {
                        const SafeSetMask u = under_approx_set(sol.v0, alpha, r, gamma);
                        const SafeSetMask s = mc_safe_set(field, alpha, r);
                        const SubsetAudit sub = subset_audit_mc(u, field, samples);
                        CoverageReport cov;
                        const bool have_cov = s.count() > 0;
                        if (have_cov) cov = coverage(u, s);
                        export_mask_csv(sgrid, u, out.path("u" + rs + ".csv"));
                        export_mask_csv(sgrid, s, out.path("s" + rs + ".csv"));
                        write_mask_summary(u, out.path("u" + rs + ".json"),
                                           have_cov ? &cov : nullptr, &sub);
                        write_mask_summary(s, out.path("s" + rs + ".json"));
                        return 0;
                    });
                }
            }
        }
    }

    if (cfg.mode == RunMode::theorem3) {
        for (std::size_t ai = 0; ai < cfg.alphas.size(); ++ai) {
            const double alpha = cfg.alphas[ai];
            const std::string as = "_a" + std::to_string(ai);
            RhoParams params;
            params.alpha = alpha;
            params.cap_exponent = cfg.cap_exponent;
            params.stage_cost = [gk](int, std::size_t i, std::size_t) { return gk[i]; };
            params.terminal_cost = [gk](std::size_t i) { return gk[i]; };
            const StagedDp sol =
                stage("theorem3", [&] { return dp_theorem3(kernel, params, T); });
            stage("write", [&] {
                export_value_csv(sgrid, sol.tables[0], out.path("t3value" + as + ".csv"));
                export_policy_csv(sgrid, cgrid, sol.policy, out.path("t3policy" + as + ".csv"));
                return 0;
            });
            for (std::size_t ri = 0; ri < cfg.rs.size(); ++ri) {
                const std::string rs = as + "_r" + std::to_string(ri);
                stage("sets", [&] {
                    const SafeSetMask mask = theorem3_safe_set(sol.tables[0], cfg.rs[ri], alpha);
                    export_mask_csv(sgrid, mask, out.path("t3mask" + rs + ".csv"));
                    write_mask_summary(mask, out.path("t3mask" + rs + ".json"));
                    return 0;
                });
            }
        }
    }

    stage("write", [&] {
        write_text(out.path("config_used.txt"), canonical_config(cfg));
        write_manifest(cfg, out);
        return 0;
    });
    result.files = out.files;
    std::sort(result.files.begin(), result.files.end());
    result.manifest_path = (out.dir / "manifest.json").string();
    return result;
}

}  // namespace detail

/** Runs one experiment end to end per the config and writes every artifact
 *  plus a manifest into cfg.output_dir. Identical resolved configs produce
 *  byte-identical artifacts regardless of thread count. */
inline RunResult run(const ExperimentConfig& raw) {
    const ExperimentConfig cfg = detail::stage("config", [&] {
        ExperimentConfig c = resolve_defaults(raw);
        validate_config(c);
        return c;
    });

    if (cfg.mode == RunMode::verify) {
        RunResult result;
        result.config_hash = config_hash(cfg);
        const VerifyReport rep = verify_properties(cfg.seed, cfg.verify_cases);
        result.verify_failures = rep.failures;
        result.verify_lines = rep.lines;
        detail::ArtifactDir out(cfg.output_dir);
        nlohmann::json doc;
        doc["suites"] = rep.suites;
        doc["failures"] = rep.failures;
        doc["lines"] = rep.lines;
        detail::write_text(out.path("verify_report.json"), doc.dump(2) + "\n");
        detail::write_text(out.path("config_used.txt"), canonical_config(cfg));
        detail::write_manifest(cfg, out);
        result.files = out.files;
        std::sort(result.files.begin(), result.files.end());
        result.manifest_path = (out.dir / "manifest.json").string();
        return result;
    }

    if (cfg.system == "tcl") {
        TclModel m;
        m.p.horizon = cfg.horizon;
        return detail::run_model(cfg, m);
    }
    StormwaterModel m;
    m.p.horizon = cfg.horizon;
    return detail::run_model(cfg, m);
}

}  // namespace rsr
