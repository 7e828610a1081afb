#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "iwatsuka/errors.hpp"
#include "iwatsuka/field.hpp"
#include "iwatsuka/hermite.hpp"
#include "iwatsuka/parallel.hpp"
#include "iwatsuka/tridiagonal.hpp"

namespace iwatsuka {

struct FiberOptions {
    double half_width = 12.0;   // harmonic lengths
    double spacing = 0.08;      // coarsest spacing, harmonic lengths
    int levels = 4;             // spacings h, h/2, ..., extrapolated in h^2
    double tol = 1e-8;          // relative disagreement that triggers refinement
    int max_refinements = 2;
    double margin = 2.0;        // endpoint potential surplus, in units of b_plus
    int max_expansions = 8;
};

struct FiberGrid {
    double center = 0.0;             // x_k
    double half_width = 0.0;         // harmonic lengths
    double harmonic_length = 1.0;    // b_k^{-1/2}
    int points = 0;                  // including both Dirichlet endpoints
    double spacing = 0.0;

    double x(int i) const { return center - half_width * harmonic_length + i * spacing; }
    double offset(int i) const { return (i - (points - 1) / 2) * spacing; }
};

struct FiberEigenpair {
    int n = 0;
    double k = 0.0;
    double energy = 0.0;                 // extrapolated E_n(k)
    double error_estimate = 0.0;         // last two extrapolants
    std::vector<double> u;               // finest level, grid-normalized, endpoints zero
    std::vector<double> a_minus_k;       // a(x) - k on the same grid
    FiberGrid grid;
    std::vector<double> level_energies;  // raw spacing ladder
    std::vector<double> level_fh;        // -2 sum (a - k) u^2 h per level
    FiberGrid coarse_grid;               // coarsest level; every level contains its points
    std::vector<double> u_extrapolated;  // u on coarse_grid, extrapolated over the ladder
};

namespace detail {

inline double romberg(const std::vector<double>& v) {
    std::vector<double> r = v;
    const std::size_t L = r.size();
    for (std::size_t j = 1; j < L; ++j) {
        const double f = std::pow(4.0, static_cast<double>(j)) - 1.0;
        for (std::size_t i = L - 1; i >= j; --i) r[i] = r[i] + (r[i] - r[i - 1]) / f;
    }
    return r.back();
}

inline double romberg_error(const std::vector<double>& v) {
    if (v.size() < 2) return std::abs(v.back());
    const std::vector<double> shorter(v.begin(), v.end() - 1);
    return std::abs(romberg(v) - romberg(shorter));
}

// Sign of the overlap with the translated Hermite profile Psi_n(b_k^{1/2}(x - x_k)).
inline double hermite_sign(int n, double sqrt_bk, const FiberGrid& g, const std::vector<double>& u) {
    if (n > hermite_max_index) {
        // Psi_n(t) has sign (-1)^{n-1} as t -> -infinity.
        double peak = 0.0;
        for (double v : u) peak = std::max(peak, std::abs(v));
        for (double v : u)
            if (std::abs(v) > 1e-3 * peak) return ((n - 1) % 2 == 0) ? v : -v;
        return 1.0;
    }
    double overlap = 0.0;
    for (int i = 0; i < g.points; ++i) {
        const double t = sqrt_bk * g.offset(i);
        if (std::abs(t) > hermite_max_abs_t) continue;
        overlap += hermite_eval(n, t) * u[i];
    }
    return overlap;
}

}  // namespace detail

// Lowest n_max eigenpairs of h(k) = -d^2/dx^2 + (a(x) - k)^2.
inline std::vector<FiberEigenpair> solve_fiber(const MagneticProfile& profile, double k, int n_max,
                                               const FiberOptions& opt = {}) {
    if (n_max < 1) throw std::invalid_argument("n_max must be at least 1");
    if (opt.levels < 1) throw std::invalid_argument("at least one discretization level is required");
    const double xk = profile.invert_a(k);
    const double bk = profile.b(xk);
    const double hk = 1.0 / std::sqrt(bk);
    const double residual = k - profile.a(xk);
    const double e_cap = profile.b_plus() * (2.0 * n_max - 1.0) + opt.margin * profile.b_plus();

    auto pot = [&](double s) {
        const double v = profile.a_shift(xk, s) - residual;
        return v;
    };

    double L = opt.half_width;
    for (int e = 0;; ++e) {
        const double vl = pot(-L * hk), vr = pot(L * hk);
        if (vl * vl > e_cap && vr * vr > e_cap) break;
        if (e >= opt.max_expansions)
            throw grid_failure("turning points not contained at k = " + std::to_string(k));
        L *= 1.25;
    }

    double spacing = opt.spacing;
    for (int refine = 0;; ++refine) {
        const int base = 2 * static_cast<int>(std::ceil(L / spacing));
        std::vector<std::vector<double>> energies(opt.levels);
        std::vector<std::vector<double>> fh(opt.levels);
        std::vector<std::vector<double>> vectors;
        // samples[lev][j]: level eigenvector restricted to the coarsest grid
        std::vector<std::vector<std::vector<double>>> samples(opt.levels);
        std::vector<double> finest_amk;
        FiberGrid finest, coarsest;

        for (int lev = 0; lev < opt.levels; ++lev) {
            const int intervals = base << lev;
            FiberGrid g;
            g.center = xk;
            g.half_width = L;
            g.harmonic_length = hk;
            g.points = intervals + 1;
            g.spacing = 2.0 * L * hk / intervals;
            const double h = g.spacing;
            const long double inv_h2 = 1.0L / (static_cast<long double>(h) * h);

            std::vector<double> amk(g.points);
            for (int i = 0; i < g.points; ++i) amk[i] = pot(g.offset(i));

            tridiag::SymTridiagonal T;
            const int m = intervals - 1;
            T.d.resize(m);
            T.e.assign(m - 1, -inv_h2);
            for (int i = 0; i < m; ++i) {
                const long double v = amk[i + 1];
                T.d[i] = 2.0L * inv_h2 + v * v;
            }
            const auto ev = tridiag::lowest_eigenvalues(T, n_max);
            energies[lev].resize(n_max);
            fh[lev].resize(n_max);
            if (lev + 1 == opt.levels) vectors.assign(n_max, std::vector<double>(g.points, 0.0));
            if (lev == 0) coarsest = g;
            samples[lev].assign(n_max, std::vector<double>(base + 1, 0.0));
            for (int j = 0; j < n_max; ++j) {
                energies[lev][j] = static_cast<double>(ev[j]);
                const auto vec = tridiag::eigenvector(T, ev[j]);
                long double acc = 0;
                for (int i = 0; i < m; ++i) acc += static_cast<long double>(amk[i + 1]) * vec[i] * vec[i];
                // vec has unit Euclidean norm, i.e. sum u^2 h = 1 with u = vec / sqrt(h).
                fh[lev][j] = static_cast<double>(-2.0L * acc);
                const double sh = 1.0 / std::sqrt(h);
                for (int i = 1; i < base; ++i) samples[lev][j][i] = static_cast<double>(vec[(i << lev) - 1]) * sh;
                if (lev + 1 == opt.levels) {
                    const double s = 1.0 / std::sqrt(h);
                    for (int i = 0; i < m; ++i) vectors[j][i + 1] = static_cast<double>(vec[i]) * s;
                }
            }
            if (lev + 1 == opt.levels) {
                finest = g;
                finest_amk = std::move(amk);
            }
        }

        std::vector<FiberEigenpair> out(n_max);
        double worst = 0.0;
        for (int j = 0; j < n_max; ++j) {
            auto& p = out[j];
            p.n = j + 1;
            p.k = k;
            p.grid = finest;
            p.a_minus_k = finest_amk;
            p.level_energies.resize(opt.levels);
            p.level_fh.resize(opt.levels);
            for (int lev = 0; lev < opt.levels; ++lev) {
                p.level_energies[lev] = energies[lev][j];
                p.level_fh[lev] = fh[lev][j];
            }
            p.energy = detail::romberg(p.level_energies);
            p.error_estimate = detail::romberg_error(p.level_energies);
            worst = std::max(worst, p.error_estimate / std::max(1.0, std::abs(p.energy)));
            p.u = std::move(vectors[j]);

            const double sb = std::sqrt(bk);
            if (detail::hermite_sign(p.n, sb, finest, p.u) < 0.0)
                for (auto& v : p.u) v = -v;
            p.coarse_grid = coarsest;
            std::vector<std::vector<double>> lv(opt.levels);
            for (int lev = 0; lev < opt.levels; ++lev) {
                lv[lev] = std::move(samples[lev][j]);
                if (detail::hermite_sign(p.n, sb, coarsest, lv[lev]) < 0.0)
                    for (auto& v : lv[lev]) v = -v;
            }
            p.u_extrapolated.assign(coarsest.points, 0.0);
            std::vector<double> col(opt.levels);
            for (int i = 0; i < coarsest.points; ++i) {
                for (int lev = 0; lev < opt.levels; ++lev) col[lev] = lv[lev][i];
                p.u_extrapolated[i] = detail::romberg(col);
            }
        }
        if (worst <= opt.tol || opt.levels < 2) return out;
        if (refine >= opt.max_refinements)
            throw numerical_failure("fiber energies not certified to tolerance at k = " + std::to_string(k));
        spacing *= 0.5;
    }
}

inline FiberEigenpair solve_band(const MagneticProfile& profile, int n, double k, const FiberOptions& opt = {}) {
    auto pairs = solve_fiber(profile, k, n, opt);
    return std::move(pairs[n - 1]);
}

// E_n'(k) = -2 int (a - k) u^2, extrapolated over the spacing ladder.
inline double fh_derivative(const FiberEigenpair& pair) { return detail::romberg(pair.level_fh); }

// The same quadrature on the stored finest grid only.
inline double fh_quadrature(const FiberEigenpair& pair) {
    double s = 0.0;
    for (std::size_t i = 0; i < pair.u.size(); ++i) s += pair.a_minus_k[i] * pair.u[i] * pair.u[i];
    return -2.0 * s * pair.grid.spacing;
}

// Five-point difference of Feynman-Hellmann derivatives, extrapolated over two steps.
inline double band_second_derivative(const MagneticProfile& profile, int n, double k, const FiberOptions& opt = {}) {
    const double s = std::max(0.02 * std::abs(k), 0.05);
    auto d1 = [&](double kk) { return fh_derivative(solve_band(profile, n, kk, opt)); };
    auto five = [&](double st) {
        return (-d1(k + 2 * st) + 8 * d1(k + st) - 8 * d1(k - st) + d1(k - 2 * st)) / (12 * st);
    };
    const double coarse = five(s), fine = five(0.5 * s);
    return fine + (fine - coarse) / 15.0;
}

struct BandTable {
    int n = 1;
    std::vector<double> k_values;
    std::vector<double> energies;
    std::vector<double> fh_derivatives;
    std::vector<double> second_derivatives;  // empty unless requested
    std::vector<int> grid_points;
    std::vector<double> half_widths;
    FiberOptions options;
};

inline BandTable band_table(const MagneticProfile& profile, int n, const std::vector<double>& k_grid,
                            const FiberOptions& opt = {}, bool with_second = false, int threads = 0) {
    for (std::size_t i = 1; i < k_grid.size(); ++i)
        if (!(k_grid[i] > k_grid[i - 1])) throw std::invalid_argument("k grid must be strictly ascending");
    BandTable t;
    t.n = n;
    t.options = opt;
    t.k_values = k_grid;
    const std::size_t N = k_grid.size();
    t.energies.resize(N);
    t.fh_derivatives.resize(N);
    t.grid_points.resize(N);
    t.half_widths.resize(N);
    if (with_second) t.second_derivatives.resize(N);
    parallel_for(N, [&](std::size_t i) {
        const auto p = solve_band(profile, n, k_grid[i], opt);
        t.energies[i] = p.energy;
        t.fh_derivatives[i] = fh_derivative(p);
        t.grid_points[i] = p.grid.points;
        t.half_widths[i] = p.grid.half_width;
        if (with_second) t.second_derivatives[i] = band_second_derivative(profile, n, k_grid[i], opt);
    }, threads);
    return t;
}

// k such that upper_threshold(n) - E_n(k) = delta.
inline double rho_inverse(const MagneticProfile& profile, int n, double delta, const FiberOptions& opt = {}) {
    if (profile.is_constant()) throw degenerate_band("band function is flat for a constant field");
    const double top = profile.upper_threshold(n);
    const double span = top - profile.lower_threshold(n);
    if (!(delta > 0.0 && delta < span)) throw std::domain_error("delta outside (0, upper - lower threshold)");

    struct Sample {
        double g, dg;
    };
    auto eval = [&](double k) {
        const auto p = solve_band(profile, n, k, opt);
        return Sample{top - p.energy - delta, -fh_derivative(p)};
    };

    const double Lam = landau_level(n);
    double k = profile.b_plus() * std::pow(Lam * profile.c() / delta, 1.0 / profile.M());
    Sample s = eval(k);
    double lo, hi;
    Sample slo, shi;
    double step = std::max(1.0, 0.5 * std::abs(k));
    if (s.g > 0) {
        lo = k;
        slo = s;
        hi = k + step;
        shi = eval(hi);
        while (shi.g > 0) {
            lo = hi;
            slo = shi;
            step *= 2;
            hi += step;
            shi = eval(hi);
        }
    } else {
        hi = k;
        shi = s;
        lo = k - step;
        slo = eval(lo);
        while (slo.g < 0) {
            hi = lo;
            shi = slo;
            step *= 2;
            lo -= step;
            slo = eval(lo);
        }
    }
    // Safeguarded Newton on the decreasing function g.
    k = std::abs(slo.g) < std::abs(shi.g) ? lo : hi;
    s = std::abs(slo.g) < std::abs(shi.g) ? slo : shi;
    for (int it = 0; it < 100; ++it) {
        if (std::abs(s.g) <= 1e-8 * delta) return k;
        double kn = (s.dg < 0) ? k - s.g / s.dg : 0.5 * (lo + hi);
        if (!(kn > lo && kn < hi)) kn = 0.5 * (lo + hi);
        if (hi - lo <= 1e-13 * (1.0 + std::abs(k))) return k;
        k = kn;
        s = eval(k);
        if (s.g > 0) lo = k; else hi = k;
    }
    return k;
}

}  // namespace iwatsuka
