#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "rsr/pipeline.hpp"

namespace {

struct SubOpts {
    CLI::App* cmd = nullptr;
    std::string config;
    std::string output;
    std::uint64_t seed = 0;
    int threads = 0;
    int cases = 0;
    CLI::Option* config_opt = nullptr;
    CLI::Option* output_opt = nullptr;
    CLI::Option* seed_opt = nullptr;
    CLI::Option* threads_opt = nullptr;
    CLI::Option* cases_opt = nullptr;
};

SubOpts make_sub(CLI::App& app, const std::string& name, const std::string& desc,
                 bool config_required) {
    SubOpts s;
    s.cmd = app.add_subcommand(name, desc);
    s.config_opt = s.cmd->add_option("-c,--config", s.config, "config file (key = value lines)");
    if (config_required) s.config_opt->required();
    s.output_opt = s.cmd->add_option("-o,--output-dir", s.output, "override output_dir");
    s.seed_opt = s.cmd->add_option("--seed", s.seed, "override the RNG seed");
    s.threads_opt = s.cmd->add_option("--threads", s.threads, "override the worker thread count");
    return s;
}

int run_one(rsr::RunMode mode, const SubOpts& s) {
    rsr::ExperimentConfig cfg;
    if (s.config_opt->count() > 0) cfg = rsr::load_config(s.config);
    if (cfg.mode_set && cfg.mode != mode)
        throw rsr::ValidationError(std::string("config file sets mode=") +
                                   rsr::mode_name(cfg.mode) + " but the subcommand is " +
                                   rsr::mode_name(mode));
    cfg.mode = mode;
    cfg.mode_set = true;
    if (s.output_opt->count() > 0) cfg.output_dir = s.output;
    if (s.seed_opt->count() > 0) cfg.seed = s.seed;
    if (s.threads_opt->count() > 0) cfg.threads = s.threads;
    if (s.cases_opt && s.cases_opt->count() > 0) cfg.verify_cases = s.cases;

    const rsr::RunResult res = rsr::run(cfg);
    if (mode == rsr::RunMode::verify) {
        for (const auto& line : res.verify_lines) std::cout << line << '\n';
        if (res.verify_failures > 0) {
            std::cout << "verify: " << res.verify_failures << " suite(s) FAILED\n";
            return 1;
        }
        std::cout << "verify: all suites passed\n";
    }
    std::cout << rsr::mode_name(mode) << ": wrote " << res.files.size() << " artifacts to "
              << cfg.output_dir << " (config " << res.config_hash << ")\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"risk-sensitive safe set toolkit"};
    app.set_version_flag("--version", std::string("rsr ") + rsr::kLibraryVersion);
    app.require_subcommand(1);

    SubOpts solve = make_sub(app, "solve", "run the exponential-cost dynamic program", true);
    SubOpts simulate =
        make_sub(app, "simulate", "solve, then Monte Carlo G samples and empirical CVaR", true);
    SubOpts sets =
        make_sub(app, "sets", "solve, simulate, and build/audit the safe set family", true);
    SubOpts theorem3 =
        make_sub(app, "theorem3", "run the cumulative-cost risk recursion and its sets", true);
    SubOpts verify = make_sub(app, "verify", "re-check the library's core identities", false);
    verify.cases_opt =
        verify.cmd->add_option("--cases", verify.cases, "randomized instances per suite");
    SubOpts exportk = make_sub(app, "export-kernel", "write the transition kernel CSV", true);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (solve.cmd->parsed()) return run_one(rsr::RunMode::solve, solve);
        if (simulate.cmd->parsed()) return run_one(rsr::RunMode::simulate, simulate);
        if (sets.cmd->parsed()) return run_one(rsr::RunMode::sets, sets);
        if (theorem3.cmd->parsed()) return run_one(rsr::RunMode::theorem3, theorem3);
        if (verify.cmd->parsed()) return run_one(rsr::RunMode::verify, verify);
        if (exportk.cmd->parsed()) return run_one(rsr::RunMode::export_kernel, exportk);
    } catch (const rsr::ValidationError& e) {
        std::cerr << "validation error: " << e.what() << '\n';
        return 2;
    } catch (const rsr::NumericError& e) {
        std::cerr << "numeric error: " << e.what() << '\n';
        return 3;
    } catch (const rsr::IoError& e) {
        std::cerr << "io error: " << e.what() << '\n';
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
