#include <doctest.h>

#include <cmath>
#include <numbers>

#include <Eigen/Eigenvalues>

#include "iwatsuka/spectral_density.hpp"
#include "support/oracles.hpp"

using namespace iwatsuka;
using iwatsuka::testing::psi;
using iwatsuka::testing::simpson;

namespace {

const MagneticProfile model = MagneticProfile::model(1, 2, 2, 1, 2);

Potential gaussian(double A, double wx, double wy) {
    return Potential::separable(A, Profile1D{Profile1D::Shape::Gaussian, wx, 0.0}, Profile1D{Profile1D::Shape::Gaussian, wy, 0.0},
                                3.0);
}

// Eigenvalues by the general (nonsymmetric) solver, independent of the library's symmetric path.
std::vector<double> general_eigenvalues(const Eigen::MatrixXd& m) {
    Eigen::EigenSolver<Eigen::MatrixXd> es(m, false);
    std::vector<double> v;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) v.push_back(es.eigenvalues()[i].real());
    return v;
}

int count_over(const std::vector<double>& v, double t) {
    int c = 0;
    for (double x : v) c += x > t;
    return c;
}

}  // namespace

TEST_CASE("semiclassical volume of the radial family") {
    const auto V = Potential::radial(1.0, 4.0);
    CHECK(volume_N0(V, 1e-4) == doctest::Approx(24.75).epsilon(1e-9));
    for (double l : iwatsuka::testing::logspace(1e-6, 1e-2, 9)) {
        CHECK(volume_N0(V, l) == doctest::Approx((std::pow(l, -0.5) - 1.0) / 4.0).epsilon(1e-6));
    }
    CHECK(volume_N0(V, 1.0) == 0.0);
    CHECK(volume_N0(V, 2.0) == 0.0);
    CHECK(volume_N0(V, 1e-8) * std::pow(1e-8, 0.5) == doctest::Approx(0.25).epsilon(1e-3));
    CHECK_THROWS_AS(volume_N0(V, 0.0), std::domain_error);
    // Gaussian: the superlevel set is a disk of radius^2 = 2 log(A / lambda)
    const auto G = gaussian(3.0, 1.0, 1.0);
    CHECK(volume_N0(G, 0.1) == doctest::Approx(std::log(30.0) / 2.0).epsilon(1e-8));
    CHECK(volume_N0(Potential::zero(), 0.1) == 0.0);
}

TEST_CASE("weighted volume") {
    const auto V = Potential::radial(1.0, 4.0);
    const auto flat = MagneticProfile::constant(2.0);
    for (double l : {1e-2, 1e-4}) CHECK(weighted_volume(V, flat, l) == doctest::Approx(2.0 * volume_N0(V, l)).epsilon(1e-12));

    // M > m with the bridge close to the origin: the superlevel set sits where b ~ b_plus
    const auto near = MagneticProfile::model(1, 2, 6, 1e-5, 0.3);
    CHECK(weighted_volume(V, near, 1e-4) == doctest::Approx(2.0 * volume_N0(V, 1e-4)).epsilon(0.03));

    double prev = 1e300;
    for (double l : {1e-5, 1e-4, 1e-3, 1e-2, 1e-1}) {
        const double w = weighted_volume(V, model, l);
        CHECK(w <= prev);
        CHECK(w >= model.b_minus() * volume_N0(V, l));
        CHECK(w <= model.b_plus() * volume_N0(V, l));
        prev = w;
    }
}

TEST_CASE("zero potential gives a zero kernel") {
    const auto ek = build_effective_kernel(model, Potential::zero(), 1, KWindow{0.0, 4.0});
    CHECK(ek.matrix.norm() == 0.0);
    CHECK(count_above(ek, 1e-3) == 0);
    CHECK(gap_count(model, Potential::zero(), 1, 0.5, PerturbationSign::Plus) == 0);
}

TEST_CASE("Gram kernel: positivity and trace identity") {
    const auto V = gaussian(1.5, 1.2, 0.8);
    const auto ek = build_effective_kernel(model, V, 1, KWindow{-3.0, 5.0});
    REQUIRE(ek.dimension() == static_cast<Eigen::Index>(ek.k_nodes.size()));
    CHECK((ek.matrix - ek.matrix.transpose()).norm() == 0.0);
    const auto ev = kernel_eigenvalues(ek);
    CHECK(ev.minCoeff() >= -1e-12 * ev.maxCoeff());

    // trace = sum_i w_i (1/2pi) int int V u_n(x, k_i)^2, by the trapezoid rule on each solver grid
    const double vy_integral = simpson([](double y) { return std::exp(-0.5 * y * y / 0.64); }, -12, 12);
    double trace = 0.0;
    for (std::size_t i = 0; i < ek.k_nodes.size(); ++i) {
        const auto p = solve_band(model, 1, ek.k_nodes[i]);
        double s = 0.0;
        for (int j = 0; j < p.grid.points; ++j) {
            const double x = p.grid.x(j);
            s += 1.5 * std::exp(-0.5 * x * x / 1.44) * vy_integral * p.u[j] * p.u[j];
        }
        trace += ek.weights[i] * s * p.grid.spacing / (2.0 * std::numbers::pi);
    }
    CHECK(ek.matrix.trace() == doctest::Approx(trace).epsilon(1e-6));
}

TEST_CASE("constant field diagonal follows the translated Landau state") {
    const double b = 1.3;
    const auto flat = MagneticProfile::constant(b);
    const auto V = gaussian(1.0, 0.9, 0.6);
    const auto ek = build_effective_kernel(flat, V, 2, KWindow{0.0, 1.6}, KernelOptions{0.4});
    const double vy = 0.6 * std::sqrt(2.0 * std::numbers::pi);
    for (std::size_t i = 0; i < ek.k_nodes.size(); ++i) {
        const double c = ek.k_nodes[i] / b;
        const double direct = simpson([&](double x) {
            const double u = std::pow(b, 0.25) * psi(2, std::sqrt(b) * (x - c));
            return std::exp(-0.5 * x * x / 0.81) * vy * u * u;
        }, c - 15.0, c + 15.0);
        CHECK(ek.matrix(i, i) == doctest::Approx(ek.weights[i] * direct / (2.0 * std::numbers::pi)).epsilon(1e-6));
    }
}

TEST_CASE("count_above agrees with a dense eigenvalue oracle at two resolutions") {
    const auto V = gaussian(2.0, 1.0, 0.5);
    KernelOptions coarse, fine;
    coarse.k_spacing = 0.2;
    fine.k_spacing = 0.1;
    const auto a = build_effective_kernel(model, V, 1, KWindow{-6.0, 6.0}, coarse);
    const auto b = build_effective_kernel(model, V, 1, KWindow{-6.0, 6.0}, fine);
    const auto ea = general_eigenvalues(a.matrix), eb = general_eigenvalues(b.matrix);
    std::vector<double> sorted = ea;
    std::sort(sorted.rbegin(), sorted.rend());
    // thresholds halfway between the leading eigenvalues, away from any near-tie
    for (int i = 0; i < 4; ++i) {
        const double t = 0.5 * (sorted[i] + sorted[i + 1]);
        CHECK(count_above(a, t) == count_over(ea, t));
        CHECK(count_above(b, t) == count_over(eb, t));
        CHECK(count_above(a, t) == count_above(b, t));
    }
    CHECK(count_above(a, 0.0) <= a.dimension());
}

TEST_CASE("alias-free spacing") {
    const auto V = Potential::radial(10.0, 5.0);
    const double h = alias_free_spacing(V, 1e-2, 1e-6);
    CHECK(h == doctest::Approx(2.0 * std::numbers::pi / (V.y_extent(1e-2) + V.y_extent(1e-6))));
    // the nearest periodized image, evaluated at the edge of {V > level}, stays below the floor
    CHECK(V(0.0, 2.0 * std::numbers::pi / h - V.y_extent(1e-2)) <= 1e-6 * (1.0 + 1e-9));
    CHECK(alias_free_spacing(V, 1e-3, 1e-7) < h);
    CHECK(std::isinf(alias_free_spacing(Potential::zero(), 1.0, 0.5)));
    CHECK_THROWS_AS(alias_free_spacing(V, 1e-3, 1e-2), std::domain_error);
    CHECK_THROWS_AS(alias_free_spacing(V, 0.0, 0.0), std::domain_error);
}

TEST_CASE("singular kernel") {
    const auto V = Potential::radial(1.0, 5.0);
    const auto ek = build_singular_kernel(model, V, 1, 1e-2, 40.0);
    CHECK(ek.weighting == Weighting::SingularWeight);
    CHECK(ek.k_nodes.front() == doctest::Approx(rho_inverse(model, 1, 5e-3)));
    CHECK(kernel_eigenvalues(ek).minCoeff() >= -1e-12 * kernel_eigenvalues(ek).maxCoeff());
    CHECK_THROWS_AS(build_singular_kernel(model, V, 1, 0.0, 40.0), std::domain_error);
    CHECK_THROWS_AS(build_singular_kernel(model, V, 1, 1e-2, 40.0, {}, 1.0), std::domain_error);
}

TEST_CASE("gap position and small perturbations") {
    CHECK(in_spectral_gap(model, 2.5));
    CHECK_FALSE(in_spectral_gap(model, 1.5));
    CHECK_FALSE(in_spectral_gap(model, 3.5));
    CHECK(in_spectral_gap(model, 0.5));
    const auto weak = Potential::radial(1e-3, 8.0, 3.0);
    GapCountOptions opt;
    opt.band_count = 3;
    CHECK(gap_count(model, weak, 1, 0.5, PerturbationSign::Plus, opt) == 0);
    CHECK(gap_count(model, weak, 1, 0.5, PerturbationSign::Minus, opt) == 0);
    CHECK_THROWS_AS(gap_count(model, weak, 1, -0.5, PerturbationSign::Plus, opt), spectral_position_error);
    CHECK_THROWS_AS(build_birman_schwinger(model, weak, 1.5, {1}, KWindow{0.0, 1.0}), spectral_position_error);
}
