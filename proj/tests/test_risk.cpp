#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "rsr/risk.hpp"

using rsr::DiscreteDistribution;
using Catch::Approx;

namespace {
const std::vector<double> kAlphaGrid = {0.01, 0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 1.0};
}

TEST_CASE("distribution validation") {
    CHECK_THROWS_AS(rsr::make_distribution({}, {}), rsr::ValidationError);
    CHECK_THROWS_AS(rsr::make_distribution({1.0, 2.0}, {0.5}), rsr::ValidationError);
    CHECK_THROWS_AS(rsr::make_distribution({1.0, 2.0}, {0.6, 0.6}), rsr::ValidationError);
    CHECK_THROWS_AS(rsr::make_distribution({1.0, 2.0}, {-0.1, 1.1}), rsr::ValidationError);
    CHECK_THROWS_AS(rsr::make_distribution({1.0, NAN}, {0.5, 0.5}), rsr::ValidationError);
    CHECK_NOTHROW(rsr::make_distribution({1.0, 2.0, 3.0}, {0.5, 0.5, 0.0}));
    CHECK_THROWS_AS(rsr::RiskLevel(0.0), rsr::ValidationError);
    CHECK_THROWS_AS(rsr::RiskLevel(1.5), rsr::ValidationError);
    CHECK_NOTHROW(rsr::RiskLevel(1.0));
}

TEST_CASE("var on pinned cases") {
    std::vector<double> v(10), p(10, 0.1);
    for (int i = 0; i < 10; ++i) v[i] = i + 1.0;
    auto d = rsr::make_distribution(v, p);
    CHECK(rsr::var(d, 0.2) == 8.0);

    auto coin = rsr::make_distribution({0.0, 1.0}, {0.5, 0.5});
    CHECK(rsr::var(coin, 0.5) == 0.0);

    CHECK_THROWS_AS(rsr::var(coin, 1.0), rsr::ValidationError);
}

TEST_CASE("var is permutation invariant and ignores zero-weight atoms") {
    oracle::DistGen gen(101);
    std::mt19937_64 shuf(7);
    for (int t = 0; t < 300; ++t) {
        auto d = gen.next();
        double alpha = gen.next_alpha();
        if (alpha == 1.0) alpha = 0.5;
        double ref = rsr::var(d, alpha);
        CHECK(ref == oracle::var_cdf_scan(d, alpha));

        std::vector<std::size_t> idx(d.size());
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        std::shuffle(idx.begin(), idx.end(), shuf);
        DiscreteDistribution s;
        for (auto i : idx) {
            s.support.push_back(d.support[i]);
            s.probs.push_back(d.probs[i]);
        }
        CHECK(rsr::var(s, alpha) == ref);
    }
}

TEST_CASE("cvar_ru on pinned cases") {
    auto d = rsr::make_distribution({0.0, 1.0, 2.0, 3.0}, {0.25, 0.25, 0.25, 0.25});
    CHECK(rsr::cvar_ru(d, 0.25) == Approx(3.0).margin(1e-14));
    CHECK(rsr::cvar_ru(d, 0.5) == Approx(2.5).margin(1e-14));
    CHECK(rsr::cvar_ru(d, 1.0) == Approx(1.5).margin(1e-14));
}

TEST_CASE("cvar_ru matches the averaged-VaR integral and the literal scan") {
    oracle::DistGen gen(202);
    for (int t = 0; t < 400; ++t) {
        auto d = gen.next();
        for (double alpha : kAlphaGrid) {
            double ru = rsr::cvar_ru(d, alpha);
            if (alpha < 1.0) {
                CHECK(ru == Approx(oracle::cvar_quantile_integral(d, alpha)).margin(1e-10));
                CHECK(ru == Approx(oracle::cvar_ru_scan(d, alpha)).margin(1e-10));
                CHECK(ru >= rsr::var(d, alpha) - 1e-12);
            } else {
                CHECK(ru == Approx(oracle::expectation(d)).margin(1e-10));
            }
        }
    }
}

TEST_CASE("cvar_ru is nonincreasing in alpha") {
    oracle::DistGen gen(303);
    for (int t = 0; t < 200; ++t) {
        auto d = gen.next();
        double prev = std::numeric_limits<double>::infinity();
        for (double alpha : kAlphaGrid) {
            double c = rsr::cvar_ru(d, alpha);
            CHECK(c <= prev + 1e-12);
            prev = c;
        }
    }
}

TEST_CASE("cvar_dual on pinned cases") {
    auto d = rsr::make_distribution({0.0, 1.0, 2.0, 3.0}, {0.25, 0.25, 0.25, 0.25});
    auto sol = rsr::cvar_dual(d, 0.25);
    CHECK(sol.value == Approx(3.0).margin(1e-14));
    REQUIRE(sol.density.values.size() == 4);
    CHECK(sol.density.values[0] == 0.0);
    CHECK(sol.density.values[1] == 0.0);
    CHECK(sol.density.values[2] == 0.0);
    CHECK(sol.density.values[3] == Approx(4.0).margin(1e-14));

    auto one = rsr::cvar_dual(d, 1.0);
    CHECK(one.value == Approx(1.5).margin(1e-14));
    for (double xi : one.density.values) CHECK(xi == 1.0);
}

TEST_CASE("dual optimum equals primal CVaR and is feasible") {
    oracle::DistGen gen(404);
    for (int t = 0; t < 400; ++t) {
        auto d = gen.next();
        for (double alpha : kAlphaGrid) {
            auto sol = rsr::cvar_dual(d, alpha);
            CHECK(sol.value == Approx(rsr::cvar_ru(d, alpha)).margin(1e-12));
            CHECK_NOTHROW(sol.density.validate_against(d));
            CHECK(sol.density.cap == Approx(1.0 / alpha));
        }
    }
}

TEST_CASE("coherence axioms hold on a shared probability space") {
    oracle::DistGen gen(505);
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> vd(-10.0, 10.0);
    std::uniform_real_distribution<double> cd(-5.0, 5.0);
    std::uniform_real_distribution<double> ld(0.0, 4.0);
    for (int t = 0; t < 300; ++t) {
        auto base = gen.next(3, 40);
        const std::size_t n = base.size();
        std::vector<double> y(n), z(n), yz(n), ymono(n);
        for (std::size_t i = 0; i < n; ++i) {
            y[i] = vd(rng);
            z[i] = vd(rng);
            yz[i] = y[i] + z[i];
            ymono[i] = y[i] + std::abs(z[i]);  // dominates y pointwise
        }
        double alpha = gen.next_alpha();
        auto mk = [&](const std::vector<double>& vals) {
            return DiscreteDistribution{vals, base.probs};
        };
        double cy = rsr::cvar_ru(mk(y), alpha);
        double cz = rsr::cvar_ru(mk(z), alpha);

        // monotonicity
        CHECK(cy <= rsr::cvar_ru(mk(ymono), alpha) + 1e-12);
        // subadditivity
        CHECK(rsr::cvar_ru(mk(yz), alpha) <= cy + cz + 1e-12);
        // translation equivariance
        double c = cd(rng);
        std::vector<double> yc(n);
        for (std::size_t i = 0; i < n; ++i) yc[i] = y[i] + c;
        CHECK(rsr::cvar_ru(mk(yc), alpha) == Approx(cy + c).margin(1e-12));
        // positive homogeneity
        double lam = ld(rng);
        std::vector<double> yl(n);
        for (std::size_t i = 0; i < n; ++i) yl[i] = lam * y[i];
        CHECK(rsr::cvar_ru(mk(yl), alpha) == Approx(lam * cy).margin(1e-11));
    }
}

TEST_CASE("cvar_empirical pinned case and equivalence with cvar_ru") {
    CHECK(rsr::cvar_empirical({1.0, 2.0, 3.0, 4.0}, 0.5) == Approx(3.5).margin(1e-14));
    CHECK_THROWS_AS(rsr::cvar_empirical({}, 0.5), rsr::ValidationError);

    std::mt19937_64 rng(606);
    std::uniform_int_distribution<int> nd(1, 400);
    std::uniform_real_distribution<double> vd(-50.0, 50.0);
    for (int t = 0; t < 200; ++t) {
        int n = nd(rng);
        std::vector<double> s(n);
        for (auto& x : s) x = vd(rng);
        auto emp = rsr::uniform_distribution(s);
        for (double alpha : kAlphaGrid) {
            CHECK(rsr::cvar_empirical(s, alpha) ==
                  Approx(rsr::cvar_ru(emp, alpha)).margin(1e-12));
        }
    }
}

TEST_CASE("expectation bound check (nonnegative costs)") {
    oracle::DistGen gen(707);
    for (int t = 0; t < 300; ++t) {
        auto d = gen.next(3, 50, 0.0, 20.0);
        CHECK(rsr::cvar_expectation_bound_check(d, gen.next_alpha()));
    }
    auto neg = rsr::make_distribution({-1.0, 1.0}, {0.5, 0.5});
    CHECK_THROWS_AS(rsr::cvar_expectation_bound_check(neg, 0.5), rsr::ValidationError);
}

TEST_CASE("log transform check (positive bounded costs)") {
    oracle::DistGen gen(808);
    for (int t = 0; t < 300; ++t) {
        auto d = gen.next(3, 50, 0.1, 30.0);
        CHECK(rsr::cvar_log_check(d, gen.next_alpha()));
    }
    auto zero = rsr::make_distribution({0.0, 1.0}, {0.5, 0.5});
    CHECK_THROWS_AS(rsr::cvar_log_check(zero, 0.5), rsr::ValidationError);
}

TEST_CASE("tail_fatness pinned ratio for a point mass") {
    auto d = rsr::make_distribution({1.0, 1.0}, {0.5, 0.5});
    for (double alpha : {0.05, 0.3, 0.5}) {
        CHECK(rsr::tail_fatness(d, alpha) == Approx(alpha / (1.0 - alpha)).margin(1e-12));
    }
    auto neg = rsr::make_distribution({0.0, 2.0}, {0.5, 0.5});
    CHECK_THROWS_AS(rsr::tail_fatness(neg, 0.5), rsr::ValidationError);
}

TEST_CASE("tail_fatness certificate holds and is tight") {
    oracle::DistGen gen(909);
    for (int t = 0; t < 200; ++t) {
        auto d = gen.next(3, 50, 0.05, 25.0);
        double alpha = gen.next_alpha();
        if (alpha == 1.0) alpha = 0.5;
        auto rep = rsr::tail_fatness_report(d, alpha);
        CHECK(rep.holds);
        // for the exact functional the ceiling is attained
        CHECK(rep.log_gap == Approx(rep.gap_bound).margin(1e-9));
        CHECK(rep.m_hat > 0.0);
    }
}

TEST_CASE("log-sum-exp sandwich") {
    auto s = rsr::logsumexp_sandwich({0.0, 0.0}, 1.0);
    CHECK(s.max_value == 0.0);
    CHECK(s.lse == Approx(std::log(2.0)).margin(1e-15));
    CHECK(s.upper == Approx(std::log(2.0)).margin(1e-15));

    auto single = rsr::logsumexp_sandwich({3.7}, 2.0);
    CHECK(single.max_value == 3.7);
    CHECK(single.lse == Approx(3.7).margin(1e-15));
    CHECK(single.upper == 3.7);

    std::mt19937_64 rng(111);
    std::uniform_real_distribution<double> vd(-4.0, 4.0);
    std::uniform_real_distribution<double> gd(0.5, 25.0);
    std::uniform_int_distribution<int> nd(1, 40);
    for (int t = 0; t < 500; ++t) {
        std::vector<double> ys(nd(rng));
        for (auto& y : ys) y = vd(rng);
        auto sw = rsr::logsumexp_sandwich(ys, gd(rng));
        CHECK(sw.max_value <= sw.lse);
        CHECK(sw.lse <= sw.upper);
    }
}
