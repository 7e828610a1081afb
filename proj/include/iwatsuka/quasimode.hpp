#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "iwatsuka/errors.hpp"
#include "iwatsuka/fiber.hpp"
#include "iwatsuka/field.hpp"
#include "iwatsuka/hermite.hpp"
#include "iwatsuka/parallel.hpp"

namespace iwatsuka {

// Coefficient of b_k^{-1} b_k'' in the two-term expansion of E_n(k).
inline double gamma_thm(int n) { return 0.25 * (2.0 * n * n - 2.0 * n + 1.0); }

// <t^4 Psi_n, Psi_n>; multiplies alpha_2 in mu_2. Not the same number as gamma_thm.
inline double moment_m4(int n) { return moments(n).m4; }

// Second-order coefficients c_{-2}, c_{-1}, c_0, c_1, c_2 of phi_2 = alpha_2 sum_p c_p Psi_{n+2p},
// solving (h_0 - Lambda_n) phi_2 = (mu_2 - t^4) Psi_n with phi_2 orthogonal to Psi_n.
inline std::array<double, 5> second_order_coefficients(int n) {
    if (n < 1) throw std::domain_error("band index starts at 1");
    const double m = n;
    std::array<double, 5> c{};
    if (n > 4) c[0] = std::sqrt((m - 1) * (m - 2) * (m - 3) * (m - 4)) / 32.0;
    if (n > 2) c[1] = std::sqrt((m - 1) * (m - 2)) * (4 * m - 6) / 16.0;
    c[3] = -std::sqrt(m * (m + 1)) * (4 * m + 2) / 16.0;
    c[4] = -std::sqrt(m * (m + 1) * (m + 2) * (m + 3)) / 32.0;
    return c;
}

struct QuasiMode {
    int n = 1;
    double k = 0.0;
    double xk = 0.0;
    double bk = 1.0;
    double db = 0.0;   // b'(x_k)
    double d2b = 0.0;  // b''(x_k)
    double mu0 = 1.0;
    double mu2 = 0.0;
    double alpha1 = 0.0;
    double alpha2 = 0.0;
    HermiteExpansion phi;  // phi_0 + phi_1 + phi_2 in the t variable

    // Quasi-eigenvalue of h(k).
    double energy() const { return bk * (mu0 + mu2); }
};

inline QuasiMode build_quasimode(const MagneticProfile& profile, int n, double k) {
    if (n < 1) throw std::domain_error("band index starts at 1");
    QuasiMode q;
    q.n = n;
    q.k = k;
    q.xk = profile.invert_a(k);
    const auto d = profile.derivatives(q.xk);
    q.bk = d[0];
    q.db = d[1];
    q.d2b = d[2];
    q.alpha1 = std::pow(q.bk, -1.5) * q.db;
    q.alpha2 = 0.25 * std::pow(q.bk, -3.0) * q.db * q.db + std::pow(q.bk, -2.0) * q.d2b / 3.0;
    q.mu0 = landau_level(n);
    q.mu2 = moment_m4(n) * q.alpha2;

    const double m = n;
    q.phi.add(n, 1.0);
    const double s1 = -q.alpha1 * std::pow(2.0, -2.5);
    if (n > 3) q.phi.add(n - 3, s1 * (-std::sqrt((m - 1) * (m - 2) * (m - 3)) / 3.0));
    if (n > 1) q.phi.add(n - 1, s1 * (-3.0 * (m - 1) * std::sqrt(m - 1)));
    q.phi.add(n + 1, s1 * 3.0 * m * std::sqrt(m));
    q.phi.add(n + 3, s1 * std::sqrt(m * (m + 1) * (m + 2)) / 3.0);

    const auto c = second_order_coefficients(n);
    for (int p = -2; p <= 2; ++p) q.phi.add(n + 2 * p, q.alpha2 * c[p + 2]);
    return q;
}

// u_qm(x) = b_k^{1/4} v_qm(b_k^{1/2}(x - x_k)) sampled on a grid centered at x_k.
inline std::vector<double> quasimode_on_grid(const QuasiMode& q, const FiberGrid& grid) {
    std::vector<double> u(grid.points, 0.0);
    const double sb = std::sqrt(q.bk), qb = std::pow(q.bk, 0.25);
    for (int i = 0; i < grid.points; ++i) {
        const double t = sb * grid.offset(i);
        if (std::abs(t) > hermite_max_abs_t) continue;
        u[i] = qb * evaluate(q.phi, t);
    }
    return u;
}

// Grid used when no eigensolver grid is supplied: 14 harmonic lengths, fine spacing.
inline FiberGrid quasimode_grid(const QuasiMode& q, double spacing = 0.02, double half_width = 14.0) {
    FiberGrid g;
    g.center = q.xk;
    g.half_width = half_width;
    g.harmonic_length = 1.0 / std::sqrt(q.bk);
    const int intervals = 2 * static_cast<int>(std::ceil(half_width / spacing));
    g.points = intervals + 1;
    g.spacing = 2.0 * half_width * g.harmonic_length / intervals;
    return g;
}

// eta = ||(h(k) - b_k(mu0 + mu2)) u_qm||. The second derivative is applied exactly through
// Psi_j'' = (t^2 - Lambda_j) Psi_j, so the only discretization is the trapezoid norm,
// which converges spectrally for this Gaussian-decaying integrand.
inline double quasimode_residual(const MagneticProfile& profile, const QuasiMode& q, const FiberGrid& grid) {
    const double sb = std::sqrt(q.bk), qb = std::pow(q.bk, 0.25);
    const double shift = q.k - profile.a(q.xk);
    const double mu = q.energy();
    const int jmax = q.phi.max_index();
    long double acc = 0.0L;
    for (int i = 0; i < grid.points; ++i) {
        const double s = grid.offset(i);
        const double t = sb * s;
        if (std::abs(t) > hermite_max_abs_t) continue;
        const auto psi = hermite_all(jmax, t);
        double v = 0.0, v2 = 0.0;
        for (const auto& [j, c] : q.phi.coefficients()) {
            v += c * psi[j - 1];
            v2 += c * (t * t - landau_level(j)) * psi[j - 1];
        }
        const double amk = profile.a_shift(q.xk, s) - shift;
        const double r = qb * (-q.bk * v2 + (amk * amk - mu) * v);
        acc += static_cast<long double>(r) * r;
    }
    return std::sqrt(static_cast<double>(acc) * grid.spacing);
}

inline double quasimode_residual(const MagneticProfile& profile, const QuasiMode& q) {
    return quasimode_residual(profile, q, quasimode_grid(q));
}

// ||u_n - u_qm / ||u_qm|| ||, using the extrapolated eigenvector so the finite-difference
// O(h^2) error does not mask the quasimode error.
inline double proximity(const QuasiMode& q, const FiberEigenpair& pair) {
    const FiberGrid& g = pair.coarse_grid;
    const auto uq = quasimode_on_grid(q, g);
    double nq = 0.0, nu = 0.0;
    for (std::size_t i = 0; i < uq.size(); ++i) {
        nq += uq[i] * uq[i];
        nu += pair.u_extrapolated[i] * pair.u_extrapolated[i];
    }
    nq = std::sqrt(nq * g.spacing);
    nu = std::sqrt(nu * g.spacing);
    double d = 0.0;
    for (std::size_t i = 0; i < uq.size(); ++i) {
        const double e = pair.u_extrapolated[i] / nu - uq[i] / nq;
        d += e * e;
    }
    return std::sqrt(d * g.spacing);
}

struct RemainderBudget {
    double sigma = 0.0;
    double tau = 0.0;
    double epsilon_k = 0.0;
};

// Admissible iff some sigma_0 satisfies sigma < 1/b_+ - sigma_0 b_+^{-1/2} and tau < sigma_0^2 / 2.
inline bool admissible_remainder_parameters(double b_plus, double sigma, double tau) {
    if (!(sigma > 0.0 && tau > 0.0)) return false;
    return std::sqrt(2.0 * tau) < (1.0 - sigma * b_plus) / std::sqrt(b_plus);
}

// Midpoints of the admissible window for sigma_0 = b_+^{-1/2} / 2.
inline std::array<double, 2> default_remainder_parameters(double b_plus) {
    const double s0 = 0.5 / std::sqrt(b_plus);
    return {0.5 * (1.0 / b_plus - s0 / std::sqrt(b_plus)), 0.25 * s0 * s0};
}

namespace detail {

inline double tail_derivative_size(const MagneticProfile& profile, double x) {
    const auto d = profile.derivatives(x);
    return std::abs(d[1] * d[2]) + std::abs(d[3]);
}

// sup over (x1, inf) of |b'b''| + |b'''|.
inline double derivative_sup(const MagneticProfile& profile, double x1) {
    if (profile.is_constant()) return 0.0;
    const double x0 = profile.x0();
    if (x1 >= x0) return tail_derivative_size(profile, x1);  // every term decreases on the tail
    const int samples = 4000;
    double best = tail_derivative_size(profile, x0);
    const double lo = std::max(x1, profile.bridge_start() - 1.0);
    for (int i = 0; i <= samples; ++i) best = std::max(best, tail_derivative_size(profile, lo + (x0 - lo) * i / samples));
    return best;
}

}  // namespace detail

inline RemainderBudget epsilon_bound(const MagneticProfile& profile, double k, double sigma, double tau) {
    if (!admissible_remainder_parameters(profile.b_plus(), sigma, tau))
        throw parameter_error("(sigma, tau) outside the admissible window");
    RemainderBudget r{sigma, tau, 0.0};
    const double db = profile.is_constant() ? 0.0 : profile.b(profile.invert_a(k), 1);
    r.epsilon_k = db * db + detail::derivative_sup(profile, sigma * k) + std::exp(-tau * k * k);
    return r;
}

inline RemainderBudget epsilon_bound(const MagneticProfile& profile, double k) {
    const auto p = default_remainder_parameters(profile.b_plus());
    return epsilon_bound(profile, k, p[0], p[1]);
}

struct ExpansionRow {
    double k = 0.0;
    double E = 0.0;
    double r0 = 0.0;       // E - b_k Lambda_n
    double r1 = 0.0;       // r0 - gamma_n b_k'' / b_k
    double dE_rem = 0.0;   // E' - Lambda_n b_k' / b_k
    double d2E_rem = 0.0;  // E'' - Lambda_n b_k'' / b_k^2
    double eps = 0.0;
    double ratio = 0.0;    // |r1| / eps
};

struct ExpansionReport {
    int n = 1;
    std::vector<ExpansionRow> rows;
    double sup_ratio = 0.0;
};

inline ExpansionReport verify_expansion(const MagneticProfile& profile, int n, const std::vector<double>& k_grid,
                                        const FiberOptions& opt = {}, int threads = 0) {
    if (!profile.is_constant()) {
        const double floor = 5.0 * profile.x0() * profile.b_plus();
        for (double k : k_grid)
            if (k < floor) throw std::domain_error("k below the asymptotic regime 5 x0 b_plus");
    }
    ExpansionReport rep;
    rep.n = n;
    rep.rows.resize(k_grid.size());
    const double Lam = landau_level(n);
    parallel_for(k_grid.size(), [&](std::size_t i) {
        const double k = k_grid[i];
        const auto pair = solve_band(profile, n, k, opt);
        const auto d = profile.derivatives(profile.invert_a(k));
        ExpansionRow& row = rep.rows[i];
        row.k = k;
        row.E = pair.energy;
        row.r0 = pair.energy - d[0] * Lam;
        row.r1 = row.r0 - gamma_thm(n) * d[2] / d[0];
        row.dE_rem = fh_derivative(pair) - Lam * d[1] / d[0];
        row.d2E_rem = band_second_derivative(profile, n, k, opt) - Lam * d[2] / (d[0] * d[0]);
        row.eps = epsilon_bound(profile, k).epsilon_k;
        row.ratio = std::abs(row.r1) / row.eps;
    }, threads);
    for (const auto& row : rep.rows) rep.sup_ratio = std::max(rep.sup_ratio, row.ratio);
    return rep;
}

}  // namespace iwatsuka
