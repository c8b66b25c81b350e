#pragma once

#include <cctype>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "rsr/common.hpp"
#include "rsr/dp.hpp"
#include "rsr/grid.hpp"
#include "rsr/models.hpp"

namespace rsr {

enum class RunMode { solve, simulate, sets, theorem3, verify, export_kernel };

inline RunMode parse_mode(const std::string& s) {
    if (s == "solve") return RunMode::solve;
    if (s == "simulate") return RunMode::simulate;
    if (s == "sets") return RunMode::sets;
    if (s == "theorem3") return RunMode::theorem3;
    if (s == "verify") return RunMode::verify;
    if (s == "export-kernel") return RunMode::export_kernel;
    throw ValidationError("unknown mode '" + s +
                          "' (solve, simulate, sets, theorem3, verify, export-kernel)");
}

inline const char* mode_name(RunMode m) {
    switch (m) {
        case RunMode::solve: return "solve";
        case RunMode::simulate: return "simulate";
        case RunMode::sets: return "sets";
        case RunMode::theorem3: return "theorem3";
        case RunMode::verify: return "verify";
        case RunMode::export_kernel: return "export-kernel";
    }
    return "unknown";
}

/** One experiment: system, grids, disturbance, risk parameters, and run
 *  settings. Units are fixed by the system: tcl states are deg C and r is in
 *  deg C of band violation; stormwater states are ft and r is in ft; runoff
 *  disturbances are ft^3/s; temperature disturbances are deg C. */
struct ExperimentConfig {
    RunMode mode = RunMode::verify;
    bool mode_set = false;
    std::string system = "tcl";  // tcl | stormwater
    std::string output_dir = "out";
    int horizon = 0;  // 0 resolves to the system default (tcl 12, stormwater 24)
    std::vector<double> gammas;
    std::vector<double> alphas;
    std::vector<double> rs;
    std::vector<GridDim> state_grid;    // empty resolves to the system default
    std::vector<GridDim> control_grid;  // empty resolves to 0..1 step 0.1
    bool family_set = false;
    DisturbanceFamily family = DisturbanceFamily::temperature_none;
    int disturbance_atoms = 25;
    int n_trajectories = 10000;
    std::uint64_t seed = 0;
    int threads = 1;
    CapExponent cap_exponent = CapExponent::inv_T;
    bool interpolate_policy = false;
    int verify_cases = 200;
};

namespace detail {

inline std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(trim(cur));
    return out;
}

inline double parse_number(const std::string& s, const std::string& key) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw ValidationError("config key '" + key + "': '" + s + "' is not a number");
    }
}

inline long long parse_integer(const std::string& s, const std::string& key) {
    try {
        std::size_t used = 0;
        const long long v = std::stoll(s, &used);
        if (used != s.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw ValidationError("config key '" + key + "': '" + s + "' is not an integer");
    }
}

inline std::uint64_t parse_u64(const std::string& s, const std::string& key) {
    try {
        std::size_t used = 0;
        const unsigned long long v = std::stoull(s, &used);
        if (used != s.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw ValidationError("config key '" + key + "': '" + s +
                              "' is not an unsigned integer");
    }
}

inline bool parse_bool(const std::string& s, const std::string& key) {
    if (s == "true" || s == "1") return true;
    if (s == "false" || s == "0") return false;
    throw ValidationError("config key '" + key + "': '" + s + "' is not true/false");
}

inline std::vector<double> parse_list(const std::string& s, const std::string& key) {
    std::vector<double> out;
    for (const auto& tok : split(s, ','))
        if (!tok.empty()) out.push_back(parse_number(tok, key));
    if (out.empty()) throw ValidationError("config key '" + key + "': empty list");
    return out;
}

inline std::vector<GridDim> parse_grid(const std::string& s, const std::string& key) {
    std::vector<GridDim> dims;
    for (const auto& dim : split(s, ';')) {
        const auto parts = split(dim, ',');
        if (parts.size() != 3)
            throw ValidationError("config key '" + key + "': each dimension needs lo,hi,res");
        dims.push_back({parse_number(parts[0], key), parse_number(parts[1], key),
                        parse_number(parts[2], key)});
    }
    return dims;
}

inline std::string format_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string format_list(const std::vector<double>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        out += format_number(v[i]);
    }
    return out;
}

inline std::string format_grid(const std::vector<GridDim>& dims) {
    std::string out;
    for (std::size_t i = 0; i < dims.size(); ++i) {
        if (i) out += ';';
        out += format_number(dims[i].lo) + ',' + format_number(dims[i].hi) + ',' +
               format_number(dims[i].resolution);
    }
    return out;
}

}  // namespace detail

/** Parses the key = value config text. '#' starts a comment; unknown and
 *  duplicated keys are hard errors. */
inline ExperimentConfig parse_config_text(const std::string& text) {
    ExperimentConfig cfg;
    std::set<std::string> seen;
    std::istringstream in(text);
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const auto hash = raw.find('#');
        if (hash != std::string::npos) raw.erase(hash);
        const std::string line = detail::trim(raw);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ValidationError("config line " + std::to_string(line_no) +
                                  ": expected key = value");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        if (key.empty() || value.empty())
            throw ValidationError("config line " + std::to_string(line_no) +
                                  ": empty key or value");
        if (!seen.insert(key).second)
            throw ValidationError("config key '" + key + "' appears more than once");

        if (key == "mode") {
            cfg.mode = parse_mode(value);
            cfg.mode_set = true;
        } else if (key == "system") {
            if (value != "tcl" && value != "stormwater")
                throw ValidationError("config key 'system': '" + value +
                                      "' is not tcl or stormwater");
            cfg.system = value;
        } else if (key == "output_dir") {
            cfg.output_dir = value;
        } else if (key == "horizon") {
            cfg.horizon = static_cast<int>(detail::parse_integer(value, key));
        } else if (key == "gamma") {
            cfg.gammas = detail::parse_list(value, key);
        } else if (key == "alpha") {
            cfg.alphas = detail::parse_list(value, key);
        } else if (key == "r") {
            cfg.rs = detail::parse_list(value, key);
        } else if (key == "state_grid") {
            cfg.state_grid = detail::parse_grid(value, key);
        } else if (key == "control_grid") {
            cfg.control_grid = detail::parse_grid(value, key);
        } else if (key == "disturbance") {
            cfg.family = parse_family(value);
            cfg.family_set = true;
        } else if (key == "disturbance_atoms") {
            cfg.disturbance_atoms = static_cast<int>(detail::parse_integer(value, key));
        } else if (key == "n_trajectories") {
            cfg.n_trajectories = static_cast<int>(detail::parse_integer(value, key));
        } else if (key == "seed") {
            cfg.seed = detail::parse_u64(value, key);
        } else if (key == "threads") {
            cfg.threads = static_cast<int>(detail::parse_integer(value, key));
        } else if (key == "cap_exponent") {
            if (value == "inv_T")
                cfg.cap_exponent = CapExponent::inv_T;
            else if (value == "inv_T_plus_one")
                cfg.cap_exponent = CapExponent::inv_T_plus_one;
            else
                throw ValidationError(
                    "config key 'cap_exponent': expected inv_T or inv_T_plus_one");
        } else if (key == "interpolate_policy") {
            cfg.interpolate_policy = detail::parse_bool(value, key);
        } else if (key == "verify_cases") {
            cfg.verify_cases = static_cast<int>(detail::parse_integer(value, key));
        } else {
            throw ValidationError("unknown config key '" + key + "'");
        }
    }
    return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open config file " + path);
    std::ostringstream buf;
    buf << f.rdbuf();
    return parse_config_text(buf.str());
}

/** Fills system defaults (horizon, grids, family) so that two configs that
 *  resolve to the same experiment hash identically. */
inline ExperimentConfig resolve_defaults(ExperimentConfig cfg) {
    const bool tcl = cfg.system == "tcl";
    if (cfg.horizon == 0) cfg.horizon = tcl ? TclParams{}.horizon : StormwaterParams{}.horizon;
    if (cfg.state_grid.empty()) {
        if (tcl) {
            const TclParams p;
            cfg.state_grid = {{p.state_range.lo, p.state_range.hi, 0.1}};
        } else {
            const StormwaterParams p;
            cfg.state_grid = {{p.state_range[0].lo, p.state_range[0].hi, 0.1},
                              {p.state_range[1].lo, p.state_range[1].hi, 0.1}};
        }
    }
    if (cfg.control_grid.empty()) cfg.control_grid = {{0.0, 1.0, 0.1}};
    if (!cfg.family_set) {
        cfg.family =
            tcl ? DisturbanceFamily::temperature_none : DisturbanceFamily::stormwater_runoff;
        cfg.family_set = true;
    }
    return cfg;
}

/** Mode-aware validation of a resolved config. */
inline void validate_config(const ExperimentConfig& cfg) {
    if (cfg.horizon < 1) throw ValidationError("config: horizon must be >= 1");
    if (cfg.n_trajectories < 1) throw ValidationError("config: n_trajectories must be >= 1");
    if (cfg.threads < 1) throw ValidationError("config: threads must be >= 1");
    if (cfg.disturbance_atoms < 2) throw ValidationError("config: disturbance_atoms must be >= 2");
    if (cfg.verify_cases < 1) throw ValidationError("config: verify_cases must be >= 1");
    for (double a : cfg.alphas)
        if (!(a > 0.0) || a > 1.0) throw ValidationError("config: alpha values must be in (0,1]");
    for (double g : cfg.gammas)
        if (!(g >= 1.0)) throw ValidationError("config: gamma values must be >= 1");
    for (double r : cfg.rs)
        if (!std::isfinite(r)) throw ValidationError("config: r values must be finite");

    const bool tcl = cfg.system == "tcl";
    const bool needs_kernel = cfg.mode != RunMode::verify;
    if (needs_kernel) {
        if (cfg.state_grid.size() != (tcl ? 1u : 2u))
            throw ValidationError("config: state_grid dimension does not match the system");
        if (cfg.control_grid.size() != 1)
            throw ValidationError("config: control_grid must be one-dimensional");
        const bool temp_family = cfg.family != DisturbanceFamily::stormwater_runoff;
        if (tcl != temp_family)
            throw ValidationError(
                "config: disturbance family does not match the system (tcl takes "
                "temperature-*, stormwater takes stormwater-runoff)");
    }
    const bool needs_gamma = cfg.mode == RunMode::solve || cfg.mode == RunMode::simulate ||
                             cfg.mode == RunMode::sets;
    if (needs_gamma && cfg.gammas.empty())
        throw ValidationError("config: mode " + std::string(mode_name(cfg.mode)) +
                              " requires a gamma list");
    const bool needs_alpha = cfg.mode == RunMode::simulate || cfg.mode == RunMode::sets ||
                             cfg.mode == RunMode::theorem3;
    if (needs_alpha && cfg.alphas.empty())
        throw ValidationError("config: mode " + std::string(mode_name(cfg.mode)) +
                              " requires an alpha list");
    const bool needs_r = cfg.mode == RunMode::sets || cfg.mode == RunMode::theorem3;
    if (needs_r && cfg.rs.empty())
        throw ValidationError("config: mode " + std::string(mode_name(cfg.mode)) +
                              " requires an r list");
}

/** Canonical text of a resolved config. output_dir and threads are excluded:
 *  neither changes any artifact byte. */
inline std::string canonical_config(const ExperimentConfig& cfg) {
    std::string out;
    out += "alpha=" + detail::format_list(cfg.alphas) + '\n';
    out += "cap_exponent=";
    out += (cfg.cap_exponent == CapExponent::inv_T ? "inv_T" : "inv_T_plus_one");
    out += '\n';
    out += "control_grid=" + detail::format_grid(cfg.control_grid) + '\n';
    out += "disturbance=" + std::string(family_name(cfg.family)) + '\n';
    out += "disturbance_atoms=" + std::to_string(cfg.disturbance_atoms) + '\n';
    out += "gamma=" + detail::format_list(cfg.gammas) + '\n';
    out += "horizon=" + std::to_string(cfg.horizon) + '\n';
    out += "interpolate_policy=" + std::string(cfg.interpolate_policy ? "true" : "false") + '\n';
    out += "mode=" + std::string(mode_name(cfg.mode)) + '\n';
    out += "n_trajectories=" + std::to_string(cfg.n_trajectories) + '\n';
    out += "r=" + detail::format_list(cfg.rs) + '\n';
    out += "seed=" + std::to_string(cfg.seed) + '\n';
    out += "state_grid=" + detail::format_grid(cfg.state_grid) + '\n';
    out += "system=" + cfg.system + '\n';
    out += "verify_cases=" + std::to_string(cfg.verify_cases) + '\n';
    return out;
}

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

inline std::string config_hash(const ExperimentConfig& cfg) {
    return hex64(fnv1a64(canonical_config(cfg)));
}

}  // namespace rsr
