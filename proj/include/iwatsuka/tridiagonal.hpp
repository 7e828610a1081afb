#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "iwatsuka/errors.hpp"

namespace iwatsuka::tridiag {

// Extended precision keeps Sturm counts meaningful when the diagonal is ~1/h^2.
using real = long double;

// Symmetric tridiagonal matrix: diagonal d (size n), off-diagonal e (size n - 1).
struct SymTridiagonal {
    std::vector<real> d;
    std::vector<real> e;

    std::size_t size() const { return d.size(); }
};

// Number of eigenvalues strictly below x (Sturm sequence / LDL^T inertia).
inline int count_below(const SymTridiagonal& T, real x) {
    const std::size_t n = T.size();
    const real tiny = std::numeric_limits<real>::min() * 1e6L;
    int count = 0;
    real q = T.d[0] - x;
    if (q < 0) ++count;
    for (std::size_t i = 1; i < n; ++i) {
        if (q == 0) q = tiny;
        q = T.d[i] - x - T.e[i - 1] * T.e[i - 1] / q;
        if (q < 0) ++count;
    }
    return count;
}

// The j-th smallest eigenvalue (j zero based), bracketed by lo and hi.
inline real bisect_eigenvalue(const SymTridiagonal& T, int j, real lo, real hi) {
    const real eps = std::numeric_limits<real>::epsilon();
    for (int it = 0; it < 400; ++it) {
        const real mid = 0.5L * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        if (hi - lo <= 2 * eps * std::max(std::abs(lo), std::abs(hi))) break;
        if (count_below(T, mid) > j) hi = mid; else lo = mid;
    }
    return 0.5L * (lo + hi);
}

// Lowest m eigenvalues in increasing order.
inline std::vector<real> lowest_eigenvalues(const SymTridiagonal& T, int m) {
    const std::size_t n = T.size();
    real lo = T.d[0], hi = T.d[0];
    for (std::size_t i = 0; i < n; ++i) {
        const real r = (i > 0 ? std::abs(T.e[i - 1]) : 0) + (i + 1 < n ? std::abs(T.e[i]) : 0);
        lo = std::min(lo, T.d[i] - r);
        hi = std::max(hi, T.d[i] + r);
    }
    std::vector<real> out;
    out.reserve(m);
    real bracket_lo = lo;
    for (int j = 0; j < m; ++j) {
        // Tighten the upper bracket geometrically before bisecting.
        real top = bracket_lo + 1;
        while (top < hi && count_below(T, top) <= j) top = bracket_lo + 2 * (top - bracket_lo);
        if (top > hi) top = hi;
        const real ev = bisect_eigenvalue(T, j, bracket_lo, top);
        out.push_back(ev);
        bracket_lo = ev;
    }
    return out;
}

namespace detail {

// Tridiagonal LU with partial pivoting (row interchange form).
struct PivotedLU {
    std::vector<real> dl, d, du, du2;
    std::vector<std::uint8_t> swapped;

    PivotedLU(const SymTridiagonal& T, real shift) {
        const std::size_t n = T.size();
        d.resize(n);
        for (std::size_t i = 0; i < n; ++i) d[i] = T.d[i] - shift;
        dl = T.e;
        du = T.e;
        du2.assign(n > 2 ? n - 2 : 0, 0);
        swapped.assign(n > 1 ? n - 1 : 0, 0);
        const real tiny = std::numeric_limits<real>::epsilon() * 1e-4L;
        for (std::size_t i = 0; i + 1 < n; ++i) {
            if (std::abs(d[i]) >= std::abs(dl[i])) {
                if (d[i] == 0) d[i] = tiny;
                const real f = dl[i] / d[i];
                dl[i] = f;
                d[i + 1] -= f * du[i];
            } else {
                const real f = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = f;
                const real t = du[i];
                du[i] = d[i + 1];
                d[i + 1] = t - f * d[i + 1];
                if (i + 2 < n) {
                    du2[i] = du[i + 1];
                    du[i + 1] = -f * du[i + 1];
                }
                swapped[i] = 1;
            }
        }
        if (d[n - 1] == 0) d[n - 1] = tiny;
    }

    void solve(std::vector<real>& b) const {
        const std::size_t n = d.size();
        for (std::size_t i = 0; i + 1 < n; ++i) {
            if (!swapped[i]) {
                b[i + 1] -= dl[i] * b[i];
            } else {
                const real t = b[i];
                b[i] = b[i + 1];
                b[i + 1] = t - dl[i] * b[i];
            }
        }
        b[n - 1] /= d[n - 1];
        if (n > 1) b[n - 2] = (b[n - 2] - du[n - 2] * b[n - 1]) / d[n - 2];
        for (std::size_t i = n - 2; i-- > 0;) b[i] = (b[i] - du[i] * b[i + 1] - du2[i] * b[i + 2]) / d[i];
    }
};

}  // namespace detail

// Unit-norm eigenvector for an accurately known eigenvalue, by inverse iteration.
inline std::vector<real> eigenvector(const SymTridiagonal& T, real lambda) {
    const std::size_t n = T.size();
    const real scale = std::max<real>(std::abs(lambda), 1);
    const detail::PivotedLU lu(T, lambda + 64 * std::numeric_limits<real>::epsilon() * scale);
    std::vector<real> v(n);
    std::uint64_t s = 0x9E3779B97F4A7C15ULL;
    for (auto& x : v) {
        s = s * 6364136223846793005ULL + 1442695040888963407ULL;
        x = 0.5L + static_cast<real>(s >> 11) / static_cast<real>(1ULL << 53);
    }
    std::vector<real> prev;
    for (int it = 0; it < 8; ++it) {
        lu.solve(v);
        real nrm = 0;
        for (auto x : v) nrm += x * x;
        nrm = std::sqrt(nrm);
        if (!(nrm > 0) || !std::isfinite(static_cast<double>(nrm)))
            throw numerical_failure("inverse iteration broke down");
        for (auto& x : v) x /= nrm;
        if (!prev.empty()) {
            real diff_same = 0, diff_flip = 0;
            for (std::size_t i = 0; i < n; ++i) {
                diff_same = std::max(diff_same, std::abs(v[i] - prev[i]));
                diff_flip = std::max(diff_flip, std::abs(v[i] + prev[i]));
            }
            if (std::min(diff_same, diff_flip) < 1e-15L) break;
        }
        prev = v;
    }
    return v;
}

}  // namespace iwatsuka::tridiag
