#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "iwatsuka/errors.hpp"
#include "iwatsuka/fiber.hpp"
#include "iwatsuka/field.hpp"
#include "iwatsuka/parallel.hpp"
#include "iwatsuka/quasimode.hpp"

namespace iwatsuka {

inline constexpr int samples_per_decade = 64;

// (upper - delta1, upper - delta2) below the n-th upper threshold; delta2 = 0 means (upper - delta1, upper).
struct EnergyWindow {
    int n = 1;
    double delta1 = 0.0;
    double delta2 = 0.0;
};

inline void validate_window(const MagneticProfile& profile, const EnergyWindow& w) {
    if (w.n < 1) throw std::domain_error("band index starts at 1");
    if (profile.is_constant()) throw degenerate_band("band function is flat for a constant field");
    if (w.delta1 == w.delta2) throw std::domain_error("degenerate window: delta1 == delta2");
    if (!(w.delta1 > w.delta2 && w.delta2 >= 0.0)) throw std::domain_error("window requires delta1 > delta2 >= 0");
    const double top = profile.upper_threshold(w.n);
    if (!(w.delta1 < top - profile.lower_threshold(w.n)))
        throw std::domain_error("window leaves (lower, upper) threshold interval");
    const double lo = top - w.delta1, hi = top - w.delta2;
    for (int p = 1; profile.lower_threshold(p) < hi; ++p) {
        if (p == w.n) continue;
        for (double e : {profile.lower_threshold(p), profile.upper_threshold(p)})
            if (e > lo && e < hi) throw std::domain_error("window straddles another threshold");
    }
}

// Log-spaced samples with at least samples_per_decade points per decade of [lo, hi].
inline std::vector<double> log_samples(double lo, double hi) {
    if (!(lo > 0.0 && hi > lo)) throw std::invalid_argument("log sampling needs 0 < lo < hi");
    const int count = std::max(8, static_cast<int>(std::ceil(samples_per_decade * std::log10(hi / lo)))) + 1;
    std::vector<double> out(count);
    for (int i = 0; i < count; ++i) out[i] = lo * std::pow(hi / lo, static_cast<double>(i) / (count - 1));
    out.front() = lo;
    out.back() = hi;
    return out;
}

struct CurrentBounds {
    double lower = 0.0;
    double upper = 0.0;
    double k_lo = 0.0;  // rho_n(delta1)
    double k_hi = 0.0;  // rho_n(delta2), or the truncation point when delta2 = 0
    int samples = 0;
};

namespace detail {

// First k past `start` where E_n' has dropped below 1e-3 of its running maximum.
inline double current_cutoff(const MagneticProfile& profile, int n, double start, const FiberOptions& opt) {
    double peak = fh_derivative(solve_band(profile, n, start, opt));
    for (double k = 2.0 * start;; k *= 2.0) {
        const double d = fh_derivative(solve_band(profile, n, k, opt));
        peak = std::max(peak, d);
        if (d < 1e-3 * peak) return k;
        if (k > 1e7) throw numerical_failure("current tail did not decay");
    }
}

}  // namespace detail

// inf / sup of E_n' over E_n^{-1}(window). E_n' is monotone in the asymptotic regime, so
// the endpoint values bracket and the interior sampling certifies.
inline CurrentBounds current_bounds(const MagneticProfile& profile, const EnergyWindow& w,
                                    const FiberOptions& opt = {}, int threads = 0) {
    validate_window(profile, w);
    CurrentBounds cb;
    cb.k_lo = rho_inverse(profile, w.n, w.delta1, opt);
    cb.k_hi = w.delta2 > 0.0 ? rho_inverse(profile, w.n, w.delta2, opt)
                             : detail::current_cutoff(profile, w.n, std::max(cb.k_lo, 1.0), opt);
    std::vector<double> ks;
    if (cb.k_lo > 0.0) {
        ks = log_samples(cb.k_lo, cb.k_hi);
    } else {
        const int count = samples_per_decade + 1;
        for (int i = 0; i < count; ++i) ks.push_back(cb.k_lo + (cb.k_hi - cb.k_lo) * i / (count - 1));
    }
    std::vector<double> d(ks.size());
    parallel_for(ks.size(), [&](std::size_t i) { d[i] = fh_derivative(solve_band(profile, w.n, ks[i], opt)); }, threads);
    cb.samples = static_cast<int>(ks.size());
    cb.lower = *std::min_element(d.begin(), d.end());
    cb.upper = *std::max_element(d.begin(), d.end());
    if (w.delta2 == 0.0) cb.lower = std::min(cb.lower, 0.0);  // E_n' -> 0 as k -> infinity
    return cb;
}

struct LocalizationReport {
    double delta = 0.0;
    double k_minus = 0.0;  // rho_n(delta)
    double x_delta = 0.0;
    double r_n = 0.0;      // sup of eps(k) over k >= k_minus
    double mass_left = 0.0;
    double current_lo = 0.0;
    double current_hi = 0.0;
};

// Mass of u on (-infinity, x], trapezoid with the last cell cut linearly.
inline double mass_below(const FiberEigenpair& pair, double x) {
    const FiberGrid& g = pair.grid;
    const double h = g.spacing;
    double s = 0.0;
    for (int i = 0; i + 1 < g.points; ++i) {
        const double xl = g.x(i), xr = g.x(i + 1);
        if (xl >= x) break;
        const double ul = pair.u[i], ur = pair.u[i + 1];
        if (xr <= x) {
            s += 0.5 * h * (ul * ul + ur * ur);
        } else {
            const double f = (x - xl) / h;
            const double um = ul + f * (ur - ul);
            s += 0.5 * (x - xl) * (ul * ul + um * um);
        }
    }
    return std::clamp(s, 0.0, 1.0);
}

// Per-k form of the bulk localization estimate: the supremum over k in rho_n((0, delta)) of the
// eigenfunction mass left of x(delta) = x_{k_-} - (nu / b_+) sqrt|log r_n(delta)|.
inline LocalizationReport localization_mass(const MagneticProfile& profile, int n, double delta, double nu,
                                            const FiberOptions& opt = {}, int threads = 0) {
    if (!(nu > 1.0)) throw std::domain_error("nu must exceed 1");
    if (profile.is_constant()) throw degenerate_band("band function is flat for a constant field");
    LocalizationReport rep;
    rep.delta = delta;
    rep.k_minus = rho_inverse(profile, n, delta, opt);
    const double x_minus = profile.invert_a(rep.k_minus);
    if (!(x_minus > profile.x0())) throw std::domain_error("delta too large: rho_n(delta) is not in the tail region");

    // r_n: eps decreases eventually; stop once a decade adds nothing above 1e-3 of the running sup.
    double r = 0.0;
    for (double lo = rep.k_minus;; lo *= 10.0) {
        double decade = 0.0;
        for (double k : log_samples(lo, 10.0 * lo)) decade = std::max(decade, epsilon_bound(profile, k).epsilon_k);
        r = std::max(r, decade);
        if (decade < 1e-3 * r) break;
        if (lo > 1e8) throw numerical_failure("remainder bound did not decay");
    }
    rep.r_n = r;
    rep.x_delta = x_minus - (nu / profile.b_plus()) * std::sqrt(std::abs(std::log(r)));

    // Masses decay as k grows (u_n(., k) moves right); sample decade by decade.
    double best = 0.0;
    for (double lo = rep.k_minus;; lo *= 10.0) {
        const auto ks = log_samples(lo, 10.0 * lo);
        std::vector<double> m(ks.size());
        parallel_for(ks.size(), [&](std::size_t i) { m[i] = mass_below(solve_band(profile, n, ks[i], opt), rep.x_delta); },
                     threads);
        const double decade = *std::max_element(m.begin(), m.end());
        best = std::max(best, decade);
        if (m.back() < 1e-3 * best || best == 0.0) break;
        if (lo > 1e8) throw numerical_failure("localized mass did not decay");
    }
    rep.mass_left = best;

    const auto cb = current_bounds(profile, EnergyWindow{n, delta, 0.0}, opt, threads);
    rep.current_lo = cb.lower;
    rep.current_hi = cb.upper;
    return rep;
}

}  // namespace iwatsuka
