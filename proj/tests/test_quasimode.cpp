#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "iwatsuka/quasimode.hpp"
#include "support/oracles.hpp"

using namespace iwatsuka;
using iwatsuka::testing::loglog_fit;
using iwatsuka::testing::logspace;
using iwatsuka::testing::psi;
using iwatsuka::testing::simpson;

namespace {
const MagneticProfile model = MagneticProfile::model(1, 2, 2, 1, 2);

// Closed-form tail of the model field: b = 2 - x^-2.
double tail_b(double x, int p) {
    switch (p) {
        case 0: return 2.0 - std::pow(x, -2);
        case 1: return 2.0 * std::pow(x, -3);
        case 2: return -6.0 * std::pow(x, -4);
        default: return 24.0 * std::pow(x, -5);
    }
}
}  // namespace

TEST_CASE("constant field quasimode is the Landau state") {
    const auto q = build_quasimode(MagneticProfile::constant(1.5), 2, 4.0);
    CHECK(q.alpha1 == 0.0);
    CHECK(q.alpha2 == 0.0);
    CHECK(q.mu2 == 0.0);
    for (const auto& [j, c] : q.phi.coefficients()) CHECK(c == (j == 2 ? 1.0 : 0.0));
    CHECK(q.energy() == doctest::Approx(4.5));
    const auto q1 = build_quasimode(MagneticProfile::constant(1), 1, 0.0);
    CHECK(quasimode_residual(MagneticProfile::constant(1), q1) < 1e-6);
}

TEST_CASE("second-order coefficients") {
    const auto c = second_order_coefficients(1);
    CHECK(c[0] == 0.0);
    CHECK(c[1] == 0.0);
    CHECK(c[2] == 0.0);
    CHECK(std::abs(c[3]) == doctest::Approx(3.0 * std::sqrt(2.0) / 8.0));
    CHECK(std::abs(c[4]) == doctest::Approx(std::sqrt(24.0) / 32.0));
    // Signs from the defining equation (h_0 - Lambda_n) phi_2 = (mu_2 - t^4) Psi_n, projected on Psi_{n+2p}.
    for (int n = 1; n <= 6; ++n) {
        const auto cn = second_order_coefficients(n);
        for (int p = -2; p <= 2; ++p) {
            const int j = n + 2 * p;
            if (p == 0 || j < 1) continue;
            const double t4 = simpson([&](double t) { return std::pow(t, 4) * psi(n, t) * psi(j, t); }, -16, 16);
            const double expect = -t4 / (landau_level(j) - landau_level(n));
            CHECK(cn[p + 2] == doctest::Approx(expect).epsilon(1e-9));
        }
    }
}

TEST_CASE("corrections reduce the residual") {
    const auto q = build_quasimode(model, 1, 40.0);
    QuasiMode bare = q;
    bare.phi = HermiteExpansion{};
    bare.phi.add(1, 1.0);
    bare.mu2 = 0.0;
    CHECK(quasimode_residual(model, q) < 0.05 * quasimode_residual(model, bare));
}

TEST_CASE("quasimode coefficients at k = 60") {
    const auto q = build_quasimode(model, 1, 60.0);
    CHECK(q.mu0 == 1.0);
    const double x = q.xk;
    REQUIRE(x > model.x0());
    const double a2 = 0.25 * std::pow(tail_b(x, 0), -3) * std::pow(tail_b(x, 1), 2) +
                      std::pow(tail_b(x, 0), -2) * tail_b(x, 2) / 3.0;
    CHECK(q.alpha2 == doctest::Approx(a2).epsilon(1e-12));
    CHECK(q.mu2 == doctest::Approx(0.75 * a2).epsilon(1e-12));
    CHECK(q.alpha1 == doctest::Approx(std::pow(tail_b(x, 0), -1.5) * tail_b(x, 1)).epsilon(1e-12));
}

TEST_CASE("residual decays and certifies the eigenvalue") {
    std::vector<double> eta;
    for (double k : {40.0, 80.0, 160.0}) eta.push_back(quasimode_residual(model, build_quasimode(model, 1, k)));
    CHECK(eta[1] < eta[0]);
    CHECK(eta[2] < eta[1]);

    double lo = 1e300, hi = 0.0;
    for (double k : logspace(40, 400, 9)) {
        const auto q = build_quasimode(model, 1, k);
        const auto pair = solve_band(model, 1, k);
        const double e = quasimode_residual(model, q);
        CHECK(std::abs(pair.energy - q.energy()) <= e);
        const double ratio = e / epsilon_bound(model, k).epsilon_k;
        lo = std::min(lo, ratio);
        hi = std::max(hi, ratio);
        CHECK(proximity(q, pair) < 1e-3 * epsilon_bound(model, k).epsilon_k);
    }
    CHECK(hi < 4.0 * lo);
}

TEST_CASE("remainder budget") {
    const auto flat = MagneticProfile::constant(2);
    CHECK(epsilon_bound(flat, 3.0, 0.1, 0.01).epsilon_k == doctest::Approx(std::exp(-0.09)).epsilon(1e-14));

    const double k = 100.0, sigma = 0.3, tau = 0.01;
    const double xk = model.invert_a(k);
    const double expect = std::pow(tail_b(xk, 1), 2) + std::abs(tail_b(30, 1) * tail_b(30, 2)) + std::abs(tail_b(30, 3)) +
                          std::exp(-tau * k * k);
    CHECK(epsilon_bound(model, k, sigma, tau).epsilon_k == doctest::Approx(expect).epsilon(1e-12));
    CHECK_THROWS_AS(epsilon_bound(model, k, 0.6, 0.01), parameter_error);
    CHECK_THROWS_AS(epsilon_bound(model, k, 0.3, 0.5), parameter_error);

    // eps(k) k^5 (exponent min(2M + 2, M + 3)) stays bounded on [50, 400]
    double lo = 1e300, hi = 0.0;
    for (double kk : logspace(50, 400, 12)) {
        const double s = epsilon_bound(model, kk).epsilon_k * std::pow(kk, 5);
        lo = std::min(lo, s);
        hi = std::max(hi, s);
    }
    CHECK(hi < 2.0 * lo);
}

TEST_CASE("expansion remainders") {
    const auto flat = verify_expansion(MagneticProfile::constant(1), 2, {-5.0, 0.0, 5.0});
    for (const auto& r : flat.rows) {
        CHECK(std::abs(r.r0) < 1e-8);
        CHECK(std::abs(r.dE_rem) < 1e-8);
        CHECK(std::abs(r.d2E_rem) < 1e-6);
    }

    // Leading decay sits in the threshold gap: (upper - E) k^M -> Lambda_1 b_+^M c = 4.
    const auto ks = logspace(100, 1000, 8);
    const auto rep = verify_expansion(model, 1, ks);
    std::vector<double> gap;
    for (const auto& r : rep.rows) gap.push_back(model.upper_threshold(1) - r.E);
    CHECK(loglog_fit(ks, gap).first == doctest::Approx(-2.0).epsilon(0.02));
    for (std::size_t i = 0; i < ks.size(); ++i) CHECK(gap[i] * ks[i] * ks[i] == doctest::Approx(4.0).epsilon(0.05));
    // r0 itself is the curvature term gamma_1 b''/b ~ -12 k^-4 at this order.
    for (const auto& r : rep.rows) {
        const double x = model.invert_a(r.k);
        CHECK(r.r0 == doctest::Approx(gamma_thm(1) * tail_b(x, 2) / tail_b(x, 0)).epsilon(0.05));
    }

    const auto mid = verify_expansion(model, 1, {50.0, 100.0, 200.0, 400.0});
    CHECK(mid.rows[3].ratio <= 2.0 * mid.rows[1].ratio);
    CHECK(std::isfinite(mid.sup_ratio));
    CHECK_THROWS_AS(verify_expansion(model, 1, {10.0}), std::domain_error);
}

TEST_CASE("gamma and the fourth moment are distinct") {
    CHECK(gamma_thm(1) == doctest::Approx(0.25));
    CHECK(moment_m4(1) == doctest::Approx(0.75));
    CHECK(gamma_thm(3) == doctest::Approx(13.0 / 4.0));
}
