#include <doctest.h>

#include <cmath>
#include <numbers>

#include "iwatsuka/hermite.hpp"
#include "support/oracles.hpp"

using namespace iwatsuka;
using iwatsuka::testing::psi;
using iwatsuka::testing::simpson;

TEST_CASE("hermite_eval matches the polynomial oracle") {
    CHECK(hermite_eval(1, 0.0) == doctest::Approx(std::pow(std::numbers::pi, -0.25)).epsilon(1e-14));
    CHECK(std::abs(hermite_eval(2, 0.0)) < 1e-15);
    for (int n = 1; n <= 12; ++n)
        for (double t : {-4.3, -1.0, 0.2, 2.5, 6.0}) CHECK(hermite_eval(n, t) == doctest::Approx(psi(n, t)).epsilon(1e-11));
}

TEST_CASE("Psi_1 normalizes exp(-t^2/2)") {
    const double z = simpson([](double t) { return std::exp(-t * t); }, -12, 12);
    CHECK(hermite_eval(1, 0.0) == doctest::Approx(1.0 / std::sqrt(z)).epsilon(1e-12));
}

TEST_CASE("Hermite functions are orthonormal") {
    for (int n : {1, 3, 8})
        for (int m : {1, 3, 4, 8}) {
            const double ip = simpson([&](double t) { return hermite_eval(n, t) * hermite_eval(m, t); }, -14, 14);
            CHECK(ip == doctest::Approx(n == m ? 1.0 : 0.0).epsilon(1e-10));
        }
}

TEST_CASE("stable at large index and argument") {
    const auto all = hermite_all(hermite_max_index, 35.0);
    for (double v : all) CHECK(std::isfinite(v));
    CHECK(std::abs(hermite_eval(hermite_max_index, 9.0)) < 1.0);
}

TEST_CASE("ladder_t coefficients") {
    const auto e1 = ladder_t(1);
    CHECK(e1.size() == 1);
    CHECK(e1[2] == doctest::Approx(std::sqrt(0.5)));
    const auto e2 = ladder_t(2);
    CHECK(e2[1] == doctest::Approx(std::sqrt(0.5)));
    CHECK(e2[3] == doctest::Approx(1.0));
    const double q = simpson([](double t) { return t * hermite_eval(2, t) * hermite_eval(3, t); }, -14, 14);
    CHECK(q == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("ladder_t3 coefficients") {
    const double r = 1.0 / (2.0 * std::sqrt(2.0));
    const auto e1 = ladder_t3(1);
    CHECK(e1[2] == doctest::Approx(3.0 * r));
    CHECK(e1[4] == doctest::Approx(std::sqrt(6.0) * r));
    const auto e2 = ladder_t3(2);
    CHECK(e2[1] == doctest::Approx(3.0 * r));
    CHECK(e2[3] == doctest::Approx(3.0));
    CHECK(e2[5] == doctest::Approx(std::sqrt(3.0)));
    for (int n = 1; n <= 7; ++n) {
        const double q = simpson([&](double t) { return std::pow(t * t * t * hermite_eval(n, t), 2); }, -16, 16);
        CHECK(ladder_t3(n).norm2() == doctest::Approx(q).epsilon(1e-8));
        // every coefficient against the projection oracle
        const auto e = ladder_t3(n);
        for (const auto& [index, c] : e.coefficients()) {
            const int j = index;
            const double p = simpson([&](double t) { return t * t * t * psi(n, t) * psi(j, t); }, -16, 16);
            CHECK(c == doctest::Approx(p).epsilon(1e-9));
        }
    }
}

TEST_CASE("moments") {
    CHECK(moments(1).m2 == doctest::Approx(0.5));
    CHECK(moments(1).m4 == doctest::Approx(0.75));
    CHECK(moments(2).m2 == doctest::Approx(1.5));
    CHECK(moments(2).m4 == doctest::Approx(3.75));
    for (int n = 1; n <= 8; ++n) {
        CHECK(ladder_t3(n).dot(ladder_t(n)) == doctest::Approx(moments(n).m4).epsilon(1e-12));
        CHECK(ladder_t(n).norm2() == doctest::Approx(moments(n).m2).epsilon(1e-12));
    }
    CHECK_THROWS_AS(moments(0), std::domain_error);
}

TEST_CASE("landau levels") {
    for (int n = 1; n <= 6; ++n) {
        // -Psi'' + t^2 Psi = (2n - 1) Psi, by central differences
        const double t = 0.7, h = 1e-3;
        const double d2 = (hermite_eval(n, t + h) - 2 * hermite_eval(n, t) + hermite_eval(n, t - h)) / (h * h);
        CHECK(-d2 + t * t * hermite_eval(n, t) == doctest::Approx(landau_level(n) * hermite_eval(n, t)).epsilon(1e-5));
    }
}
