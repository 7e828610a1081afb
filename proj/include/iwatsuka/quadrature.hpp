#pragma once

#include <array>
#include <cmath>
#include <numbers>

namespace iwatsuka::quad {

template <int N>
struct GaussLegendre {
    std::array<double, N> x{};
    std::array<double, N> w{};

    GaussLegendre() {
        for (int i = 0; i < (N + 1) / 2; ++i) {
            double z = std::cos(std::numbers::pi * (i + 0.75) / (N + 0.5));
            double dp = 0.0;
            for (int it = 0; it < 100; ++it) {
                double p0 = 1.0, p1 = 0.0;
                for (int j = 1; j <= N; ++j) {
                    const double p2 = p1;
                    p1 = p0;
                    p0 = ((2.0 * j - 1.0) * z * p1 - (j - 1.0) * p2) / j;
                }
                dp = N * (z * p0 - p1) / (z * z - 1.0);
                const double dz = p0 / dp;
                z -= dz;
                if (std::abs(dz) < 1e-16) break;
            }
            x[i] = -z;
            x[N - 1 - i] = z;
            w[i] = w[N - 1 - i] = 2.0 / ((1.0 - z * z) * dp * dp);
        }
    }

    static const GaussLegendre& get() {
        static const GaussLegendre rule;
        return rule;
    }
};

template <int N = 20, class F>
double gauss_legendre(F&& f, double a, double b) {
    const auto& r = GaussLegendre<N>::get();
    const double c = 0.5 * (a + b), h = 0.5 * (b - a);
    double s = 0.0;
    for (int i = 0; i < N; ++i) s += r.w[i] * f(c + h * r.x[i]);
    return s * h;
}

namespace detail {
template <class F>
double adaptive_step(F& f, double a, double b, double whole, double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double left = gauss_legendre(f, a, m);
    const double right = gauss_legendre(f, m, b);
    const double both = left + right;
    if (depth <= 0 || std::abs(both - whole) <= tol) return both;
    return adaptive_step(f, a, m, left, 0.5 * tol, depth - 1) +
           adaptive_step(f, m, b, right, 0.5 * tol, depth - 1);
}
}  // namespace detail

// Composite 20-point Gauss-Legendre with bisection until two levels agree to abs_tol.
template <class F>
double integrate(F&& f, double a, double b, double abs_tol = 1e-12, int max_depth = 40) {
    if (a == b) return 0.0;
    if (b < a) return -integrate(f, b, a, abs_tol, max_depth);
    return detail::adaptive_step(f, a, b, gauss_legendre(f, a, b), abs_tol, max_depth);
}

}  // namespace iwatsuka::quad
