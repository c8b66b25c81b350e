#pragma once

#include <cmath>
#include <concepts>
#include <functional>
#include <string>
#include <vector>

#include "rsr/common.hpp"
#include "rsr/distribution.hpp"

namespace rsr {

// ---------------------------------------------------------------------------
// Thermostatically controlled load (1-D temperature state, cooling unit).
// ---------------------------------------------------------------------------

struct TclParams {
    double dt = 5.0 / 60.0;        // stage length, hours
    double capacitance = 2.0;      // kWh per degC
    double resistance = 2.0;       // degC per kW
    double ambient = 32.0;         // degC
    double cop = 0.7;              // coefficient of performance
    double rated_power = 14.0;     // kW
    int horizon = 12;              // stages
    Interval comfort{20.0, 21.0};  // target band K
    Interval state_range{18.0, 23.0};
    Interval control_range{0.0, 1.0};

    // discrete-time pole a = exp(-dt / (capacitance * resistance))
    double pole() const { return std::exp(-dt / (capacitance * resistance)); }
};

/** One thermal step: x' = a x + (1-a)(ambient - cop * resistance * rated_power * u) + d.
 *  Affine in (x, d) for fixed u; no clamping here. */
inline double tcl_step(const TclParams& p, double x, double u, double d) {
    if (!(u >= 0.0 && u <= 1.0))
        throw ValidationError("tcl_step: control " + std::to_string(u) + " outside [0,1]");
    if (!std::isfinite(x) || !std::isfinite(d))
        throw ValidationError("tcl_step: non-finite state or disturbance");
    const double a = p.pole();
    return a * x + (1.0 - a) * (p.ambient - p.cop * p.resistance * p.rated_power * u) + d;
}

/** Signed distance to the comfort band [20,21]: negative strictly inside,
 *  zero on the boundary, positive outside. */
inline double tcl_gk(double x) { return std::max(x - 21.0, 20.0 - x); }

// ---------------------------------------------------------------------------
// Two-tank stormwater system (water levels in ft, flows in cfs).
// Tank 1 drains through a controlled valve into tank 2, which discharges
// passively through a drain orifice. Surcharge above the crest heights is the
// constraint violation.
// ---------------------------------------------------------------------------

struct StormwaterParams {
    double area1 = 28292.0;      // ft^2
    double area2 = 25965.0;      // ft^2
    double discharge_coef = 0.61;
    double gravity = 32.2;       // ft/s^2
    double crest1 = 3.5;         // ft (k1)
    double crest2 = 5.0;         // ft (k2)
    double drain_radius = 2.0 / 3.0;  // ft
    double valve_radius = 1.0 / 3.0;  // ft
    double dt_minutes = 5.0;
    int horizon = 24;
    double valve_elev = 1.0;     // orifice height in tank 1 (z1)
    double inlet_elev = 2.5;     // inlet height on tank 2 (z_{1,in})
    double drain_elev = 1.0;     // drain height in tank 2 (z2)
    std::vector<Interval> state_range{{0.0, 5.0}, {0.0, 6.5}};
    Interval control_range{0.0, 1.0};
};

/** Head difference across the valve: positive drives tank 1 -> tank 2. */
inline double stormwater_head(const StormwaterParams& p, double x1, double x2) {
    return std::max(x1 - p.valve_elev, 0.0) - std::max(x2 - p.inlet_elev, 0.0);
}

/** Forward Euler step of the two-tank mass balance over one 5-minute stage.
 *  Flows are evaluated in ft^3/s, so the stage length converts to seconds
 *  inside. The result is clamped component-wise to state_range. */
inline std::pair<double, double> stormwater_step(const StormwaterParams& p, double x1, double x2,
                                                 double u, double d) {
    if (!(x1 >= 0.0 && x2 >= 0.0))
        throw ValidationError("stormwater_step: negative water level");
    if (!(u >= 0.0 && u <= 1.0))
        throw ValidationError("stormwater_step: control " + std::to_string(u) + " outside [0,1]");
    if (!(d >= 0.0)) throw ValidationError("stormwater_step: negative runoff");
    const double pi = 3.14159265358979323846;
    const double h = stormwater_head(p, x1, x2);
    const double sgn = h > 0.0 ? 1.0 : (h < 0.0 ? -1.0 : 0.0);
    const double q_valve =
        u * pi * p.valve_radius * p.valve_radius * sgn * std::sqrt(2.0 * p.gravity * std::abs(h));
    const double q_drain =
        x2 >= p.drain_elev
            ? p.discharge_coef * pi * p.drain_radius * p.drain_radius *
                  std::sqrt(2.0 * p.gravity * (x2 - p.drain_elev))
            : 0.0;
    const double dt = p.dt_minutes * 60.0;
    double y1 = x1 + (d - q_valve) * dt / p.area1;
    double y2 = x2 + (d + q_valve - q_drain) * dt / p.area2;
    y1 = clamp(y1, p.state_range[0].lo, p.state_range[0].hi);
    y2 = clamp(y2, p.state_range[1].lo, p.state_range[1].hi);
    return {y1, y2};
}

/** Combined surcharge above the two crest heights; zero when both tanks are
 *  at or below capacity. */
inline double stormwater_gk(double x1, double x2) {
    return std::max(std::max(x1 - 3.5, x2 - 5.0), 0.0);
}

// ---------------------------------------------------------------------------
// Disturbance constructors.
// ---------------------------------------------------------------------------

enum class DisturbanceFamily { temperature_left, temperature_none, temperature_right, stormwater_runoff };

inline DisturbanceFamily parse_family(const std::string& s) {
    if (s == "temperature-left") return DisturbanceFamily::temperature_left;
    if (s == "temperature-none") return DisturbanceFamily::temperature_none;
    if (s == "temperature-right") return DisturbanceFamily::temperature_right;
    if (s == "stormwater-runoff") return DisturbanceFamily::stormwater_runoff;
    throw ValidationError("unknown disturbance family '" + s + "'");
}

inline const char* family_name(DisturbanceFamily f) {
    switch (f) {
        case DisturbanceFamily::temperature_left: return "temperature-left";
        case DisturbanceFamily::temperature_none: return "temperature-none";
        case DisturbanceFamily::temperature_right: return "temperature-right";
        default: return "stormwater-runoff";
    }
}

/** Third standardized moment of a pmf. */
inline double pmf_skewness(const DiscreteDistribution& d) {
    const double m = d.mean();
    StableSum v2, v3;
    for (std::size_t i = 0; i < d.size(); ++i) {
        const double c = d.support[i] - m;
        v2.add(d.probs[i] * c * c);
        v3.add(d.probs[i] * c * c * c);
    }
    const double var = v2.value();
    if (var <= 0.0) throw NumericError("pmf_skewness: degenerate distribution");
    return v3.value() / std::pow(var, 1.5);
}

struct SkewedDisturbance {
    DiscreteDistribution dist;
    DisturbanceFamily family;
    int declared_skew = 0;  // -1 left, 0 none, +1 right
};

namespace detail {

// Temperature disturbances: atoms equally spaced on [-0.5, 0.5] with exact
// endpoints, weights a discretized Beta(a,b) shape evaluated at interior
// points so every atom keeps positive mass. (a,b) symmetric gives zero skew;
// b > a skews right.
inline DiscreteDistribution beta_shape_atoms(int n, double a, double b) {
    std::vector<double> vals(n), w(n);
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        vals[i] = -0.5 + static_cast<double>(i) / (n - 1);
        const double t = (i + 1.0) / (n + 1.0);
        w[i] = std::pow(t, a - 1.0) * std::pow(1.0 - t, b - 1.0);
        total += w[i];
    }
    vals[n - 1] = 0.5;
    for (auto& x : w) x /= total;
    DiscreteDistribution d{std::move(vals), std::move(w)};
    d.validate();
    return d;
}

// Runoff: midpoint-quantile atoms of a log-normal. sigma is root-found so the
// discrete skewness hits the target exactly, then an affine map (which leaves
// skewness unchanged) pins the mean and variance.
inline DiscreteDistribution runoff_atoms(int n, double mean, double variance, double skew) {
    std::vector<double> z(n);
    for (int i = 0; i < n; ++i) z[i] = inverse_normal_cdf((i + 0.5) / n);
    auto skew_at = [&](double sigma) {
        std::vector<double> y(n);
        for (int i = 0; i < n; ++i) y[i] = std::exp(sigma * z[i]);
        DiscreteDistribution d = uniform_distribution(y);
        return pmf_skewness(d);
    };
    double lo = 1e-8, hi = 6.0;
    if (skew_at(hi) < skew)
        throw ValidationError("make_disturbance: " + std::to_string(n) +
                              " atoms cannot reach skewness " + std::to_string(skew));
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (skew_at(mid) < skew ? lo : hi) = mid;
    }
    const double sigma = 0.5 * (lo + hi);
    std::vector<double> y(n);
    for (int i = 0; i < n; ++i) y[i] = std::exp(sigma * z[i]);
    DiscreteDistribution base = uniform_distribution(y);
    const double m0 = base.mean();
    StableSum v;
    for (int i = 0; i < n; ++i) v.add(base.probs[i] * (y[i] - m0) * (y[i] - m0));
    const double scale = std::sqrt(variance / v.value());
    const double shift = mean - scale * m0;
    for (auto& x : base.support) x = scale * x + shift;
    if (base.min_support() < 0.0)
        throw ValidationError("make_disturbance: moment match produced a negative runoff atom");
    return base;
}

}  // namespace detail

/** Builds the benchmark disturbance laws. Temperature families live on
 *  [-0.5, 0.5] degC with the requested skew direction; the runoff family
 *  matches mean 12.2 cfs, variance 9.9 cfs^2, skewness 0.74. */
inline SkewedDisturbance make_disturbance(DisturbanceFamily family, int n_atoms) {
    if (n_atoms < 3) throw ValidationError("make_disturbance: need at least 3 atoms");
    switch (family) {
        case DisturbanceFamily::temperature_left:
            return {detail::beta_shape_atoms(n_atoms, 5.0, 2.0), family, -1};
        case DisturbanceFamily::temperature_none:
            return {detail::beta_shape_atoms(n_atoms, 4.0, 4.0), family, 0};
        case DisturbanceFamily::temperature_right:
            return {detail::beta_shape_atoms(n_atoms, 2.0, 5.0), family, +1};
        case DisturbanceFamily::stormwater_runoff:
        default:
            return {detail::runoff_atoms(n_atoms, 12.2, 9.9, 0.74), family, +1};
    }
}

// ---------------------------------------------------------------------------
// Uniform model interface used by kernel construction and simulation.
// ---------------------------------------------------------------------------

template <class M>
concept ModelLike = requires(const M& m, const Vec& x, const Vec& u, double d) {
    { m.state_dim() } -> std::convertible_to<int>;
    { m.horizon() } -> std::convertible_to<int>;
    { m.step(x, u, d) } -> std::convertible_to<Vec>;
    { m.gk(x) } -> std::convertible_to<double>;
    { m.state_bounds() } -> std::convertible_to<std::vector<Interval>>;
    { m.control_bounds() } -> std::convertible_to<std::vector<Interval>>;
};

struct TclModel {
    TclParams p;
    int state_dim() const { return 1; }
    int horizon() const { return p.horizon; }
    Vec step(const Vec& x, const Vec& u, double d) const {
        Vec y{};
        y[0] = tcl_step(p, x[0], u[0], d);
        return y;
    }
    double gk(const Vec& x) const { return tcl_gk(x[0]); }
    std::vector<Interval> state_bounds() const { return {p.state_range}; }
    std::vector<Interval> control_bounds() const { return {p.control_range}; }
};

struct StormwaterModel {
    StormwaterParams p;
    int state_dim() const { return 2; }
    int horizon() const { return p.horizon; }
    Vec step(const Vec& x, const Vec& u, double d) const {
        auto [y1, y2] = stormwater_step(p, x[0], x[1], u[0], d);
        Vec y{};
        y[0] = y1;
        y[1] = y2;
        return y;
    }
    double gk(const Vec& x) const { return stormwater_gk(x[0], x[1]); }
    std::vector<Interval> state_bounds() const { return p.state_range; }
    std::vector<Interval> control_bounds() const { return {p.control_range}; }
};

/** Type-erased model for user-defined systems. */
struct GenericModel {
    int dim = 1;
    int T = 1;
    std::function<Vec(const Vec&, const Vec&, double)> dynamics;
    std::function<double(const Vec&)> gK;
    std::vector<Interval> sbounds;
    std::vector<Interval> cbounds;

    int state_dim() const { return dim; }
    int horizon() const { return T; }
    Vec step(const Vec& x, const Vec& u, double d) const { return dynamics(x, u, d); }
    double gk(const Vec& x) const { return gK(x); }
    std::vector<Interval> state_bounds() const { return sbounds; }
    std::vector<Interval> control_bounds() const { return cbounds; }
};

}  // namespace rsr
