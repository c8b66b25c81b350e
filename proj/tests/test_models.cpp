#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "rsr/models.hpp"

using Catch::Approx;

TEST_CASE("tcl pole and pinned step") {
    rsr::TclParams p;
    CHECK(p.pole() == Approx(std::exp(-(5.0 / 60.0) / 4.0)).epsilon(0));
    CHECK(p.pole() == Approx(0.979382).margin(5e-7));
    CHECK(rsr::tcl_step(p, 20.0, 0.0, 0.0) == Approx(20.2474).margin(5e-5));
}

TEST_CASE("tcl fixed point") {
    rsr::TclParams p;
    // pick u so the drift target equals the state: b - cop*r*p*u = x
    const double x = 25.0;
    const double u = (p.ambient - x) / (p.cop * p.resistance * p.rated_power);
    REQUIRE(u >= 0.0);
    REQUIRE(u <= 1.0);
    CHECK(rsr::tcl_step(p, x, u, 0.0) == Approx(x).margin(1e-12));
}

TEST_CASE("tcl step is affine in state and disturbance") {
    rsr::TclParams p;
    const double a = p.pole();
    for (double u : {0.0, 0.3, 1.0}) {
        const double base = rsr::tcl_step(p, 20.0, u, 0.1);
        CHECK(rsr::tcl_step(p, 21.5, u, 0.1) - base == Approx(a * 1.5).margin(1e-12));
        CHECK(rsr::tcl_step(p, 20.0, u, 0.6) - base == Approx(0.5).margin(1e-12));
        // superposition
        CHECK(rsr::tcl_step(p, 21.5, u, 0.6) ==
              Approx(base + a * 1.5 + 0.5).margin(1e-12));
    }
    CHECK_THROWS_AS(rsr::tcl_step(p, 20.0, 1.5, 0.0), rsr::ValidationError);
    CHECK_THROWS_AS(rsr::tcl_step(p, 20.0, -0.1, 0.0), rsr::ValidationError);
}

TEST_CASE("tcl cooling monotone in control") {
    rsr::TclParams p;
    CHECK(rsr::tcl_step(p, 21.0, 1.0, 0.0) < rsr::tcl_step(p, 21.0, 0.5, 0.0));
    CHECK(rsr::tcl_step(p, 21.0, 0.5, 0.0) < rsr::tcl_step(p, 21.0, 0.0, 0.0));
}

TEST_CASE("tcl_gk pinned values and kink") {
    CHECK(rsr::tcl_gk(20.5) == -0.5);
    CHECK(rsr::tcl_gk(21.0) == 0.0);
    CHECK(rsr::tcl_gk(20.0) == 0.0);
    CHECK(rsr::tcl_gk(23.0) == 2.0);
    CHECK(rsr::tcl_gk(18.0) == 2.0);
    // kink where x - 21 = 20 - x
    const double eps = 1e-6;
    CHECK(rsr::tcl_gk(20.5 - eps) == Approx(-0.5 + eps).margin(1e-12));
    CHECK(rsr::tcl_gk(20.5 + eps) == Approx(-0.5 + eps).margin(1e-12));
}

TEST_CASE("stormwater pinned flows") {
    rsr::StormwaterParams p;

    // all flows vanish at empty tanks with no runoff
    auto [y1, y2] = rsr::stormwater_step(p, 0.0, 0.0, 0.7, 0.0);
    CHECK(y1 == 0.0);
    CHECK(y2 == 0.0);

    // zero head across the valve, drain active
    CHECK(rsr::stormwater_head(p, 1.0, 2.5) == 0.0);
    const double pi = 3.14159265358979323846;
    const double qd = 0.61 * pi * (2.0 / 3.0) * (2.0 / 3.0) * std::sqrt(2.0 * 32.2 * 1.5);
    CHECK(qd == Approx(8.37).margin(5e-3));
    auto [z1, z2] = rsr::stormwater_step(p, 1.0, 2.5, 0.4, 0.0);
    CHECK(z1 == 1.0);
    CHECK(z2 == Approx(2.5 - qd * 300.0 / p.area2).margin(1e-12));

    // pure inflow from rest
    auto [w1, w2] = rsr::stormwater_step(p, 0.0, 0.0, 0.0, 12.2);
    CHECK(w1 == Approx(12.2 * 300.0 / 28292.0).margin(1e-12));
    CHECK(w1 == Approx(0.1294).margin(5e-5));
    CHECK(w2 == Approx(12.2 * 300.0 / 25965.0).margin(1e-12));
    CHECK(w2 == Approx(0.1410).margin(5e-5));

    CHECK_THROWS_AS(rsr::stormwater_step(p, -0.1, 0.0, 0.0, 0.0), rsr::ValidationError);
    CHECK_THROWS_AS(rsr::stormwater_step(p, 0.0, 0.0, 2.0, 0.0), rsr::ValidationError);
    CHECK_THROWS_AS(rsr::stormwater_step(p, 0.0, 0.0, 0.0, -1.0), rsr::ValidationError);
}

TEST_CASE("stormwater nonnegativity and clamping over a coarse input sweep") {
    rsr::StormwaterParams p;
    for (double x1 = 0.0; x1 <= 5.0; x1 += 0.5)
        for (double x2 = 0.0; x2 <= 6.5; x2 += 0.5)
            for (double u : {0.0, 0.5, 1.0})
                for (double d : {0.0, 12.2, 30.0}) {
                    auto [y1, y2] = rsr::stormwater_step(p, x1, x2, u, d);
                    CHECK(y1 >= 0.0);
                    CHECK(y2 >= 0.0);
                    CHECK(y1 <= 5.0);
                    CHECK(y2 <= 6.5);
                }
}

TEST_CASE("stormwater_gk pinned values") {
    CHECK(rsr::stormwater_gk(3.5, 5.0) == 0.0);
    CHECK(rsr::stormwater_gk(4.0, 5.0) == 0.5);
    CHECK(rsr::stormwater_gk(0.0, 6.5) == 1.5);
    CHECK(rsr::stormwater_gk(1.0, 1.0) == 0.0);
}

TEST_CASE("temperature disturbance families") {
    for (int n : {3, 7, 11, 25}) {
        auto left = rsr::make_disturbance(rsr::DisturbanceFamily::temperature_left, n);
        auto none = rsr::make_disturbance(rsr::DisturbanceFamily::temperature_none, n);
        auto right = rsr::make_disturbance(rsr::DisturbanceFamily::temperature_right, n);
        for (const auto* d : {&left, &none, &right}) {
            d->dist.validate();
            CHECK(d->dist.min_support() == -0.5);
            CHECK(d->dist.max_support() == 0.5);
            CHECK(d->dist.size() == static_cast<std::size_t>(n));
        }
        CHECK(rsr::pmf_skewness(left.dist) < -1e-6);
        CHECK(std::abs(rsr::pmf_skewness(none.dist)) < 1e-9);
        CHECK(rsr::pmf_skewness(right.dist) > 1e-6);
    }
    CHECK_THROWS_AS(rsr::make_disturbance(rsr::DisturbanceFamily::temperature_none, 2),
                    rsr::ValidationError);
}

TEST_CASE("runoff disturbance matches published moments") {
    for (int n : {5, 15, 25, 101}) {
        auto r = rsr::make_disturbance(rsr::DisturbanceFamily::stormwater_runoff, n);
        r.dist.validate();
        CHECK(r.dist.min_support() >= 0.0);
        CHECK(r.dist.mean() == Approx(12.2).margin(0.12));
        double var = 0.0;
        for (std::size_t i = 0; i < r.dist.size(); ++i) {
            const double c = r.dist.support[i] - 12.2;
            var += r.dist.probs[i] * c * c;
        }
        CHECK(var == Approx(9.9).margin(0.1));
        CHECK(rsr::pmf_skewness(r.dist) == Approx(0.74).margin(0.01));
        // the construction pins them much tighter than the published 1%
        CHECK(r.dist.mean() == Approx(12.2).margin(1e-9));
        CHECK(var == Approx(9.9).margin(1e-9));
        CHECK(rsr::pmf_skewness(r.dist) == Approx(0.74).margin(1e-9));
    }
    // three atoms cannot reach skewness 0.74
    CHECK_THROWS_AS(rsr::make_disturbance(rsr::DisturbanceFamily::stormwater_runoff, 3),
                    rsr::ValidationError);
}

TEST_CASE("family name round trip") {
    using DF = rsr::DisturbanceFamily;
    for (DF f : {DF::temperature_left, DF::temperature_none, DF::temperature_right,
                 DF::stormwater_runoff})
        CHECK(rsr::parse_family(rsr::family_name(f)) == f);
    CHECK_THROWS_AS(rsr::parse_family("bogus"), rsr::ValidationError);
}
