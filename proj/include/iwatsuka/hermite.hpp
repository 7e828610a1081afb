#pragma once

#include <cmath>
#include <map>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace iwatsuka {

inline constexpr int hermite_max_index = 30;
inline constexpr double hermite_max_abs_t = 40.0;

// Oscillator eigenvalue of the n-th Hermite function (n >= 1).
inline double landau_level(int n) { return 2.0 * n - 1.0; }

// Finite expansion sum_j c_j Psi_j; zero coefficients are never stored.
class HermiteExpansion {
public:
    HermiteExpansion() = default;

    void add(int j, double value) {
        if (j < 1) return;
        const double v = coeffs_[j] + value;
        if (v == 0.0) coeffs_.erase(j); else coeffs_[j] = v;
    }

    double operator[](int j) const {
        const auto it = coeffs_.find(j);
        return it == coeffs_.end() ? 0.0 : it->second;
    }

    HermiteExpansion& operator+=(const HermiteExpansion& o) {
        for (const auto& [j, c] : o.coeffs_) add(j, c);
        return *this;
    }

    HermiteExpansion scaled(double s) const {
        HermiteExpansion r;
        for (const auto& [j, c] : coeffs_) r.add(j, s * c);
        return r;
    }

    double norm2() const {
        double s = 0.0;
        for (const auto& [j, c] : coeffs_) s += c * c;
        return s;
    }

    double dot(const HermiteExpansion& o) const {
        double s = 0.0;
        for (const auto& [j, c] : coeffs_) s += c * o[j];
        return s;
    }

    int max_index() const { return coeffs_.empty() ? 0 : coeffs_.rbegin()->first; }
    std::size_t size() const { return coeffs_.size(); }
    const std::map<int, double>& coefficients() const { return coeffs_; }

private:
    std::map<int, double> coeffs_;
};

// Psi_1..Psi_nmax at t by the normalized three-term recurrence.
inline std::vector<double> hermite_all(int nmax, double t) {
    if (nmax < 1) throw std::domain_error("Hermite index starts at 1");
    if (nmax > hermite_max_index || !(std::abs(t) <= hermite_max_abs_t))
        throw std::range_error("Hermite evaluation outside n <= 30, |t| <= 40");
    std::vector<double> psi(nmax);
    psi[0] = std::pow(std::numbers::pi, -0.25) * std::exp(-0.5 * t * t);
    if (nmax > 1) psi[1] = std::sqrt(2.0) * t * psi[0];
    for (int j = 2; j < nmax; ++j)
        psi[j] = t * std::sqrt(2.0 / j) * psi[j - 1] - std::sqrt((j - 1.0) / j) * psi[j - 2];
    return psi;
}

inline double hermite_eval(int n, double t) { return hermite_all(n, t).back(); }

inline double evaluate(const HermiteExpansion& e, double t) {
    if (e.size() == 0) return 0.0;
    const auto psi = hermite_all(e.max_index(), t);
    double s = 0.0;
    for (const auto& [j, c] : e.coefficients()) s += c * psi[j - 1];
    return s;
}

// t Psi_n.
inline HermiteExpansion ladder_t(int n) {
    if (n < 1) throw std::domain_error("Hermite index starts at 1");
    HermiteExpansion e;
    e.add(n - 1, std::sqrt((n - 1.0) / 2.0));
    e.add(n + 1, std::sqrt(n / 2.0));
    return e;
}

// t^3 Psi_n.
inline HermiteExpansion ladder_t3(int n) {
    if (n < 1) throw std::domain_error("Hermite index starts at 1");
    const double s = std::pow(2.0, -1.5);
    const double m = n;
    HermiteExpansion e;
    if (n > 3) e.add(n - 3, s * std::sqrt((m - 1) * (m - 2) * (m - 3)));
    if (n > 1) e.add(n - 1, s * 3.0 * (m - 1) * std::sqrt(m - 1));
    e.add(n + 1, s * 3.0 * m * std::sqrt(m));
    e.add(n + 3, s * std::sqrt(m * (m + 1) * (m + 2)));
    return e;
}

struct Moments {
    double m2;  // <t^2 Psi_n, Psi_n>
    double m4;  // <t^4 Psi_n, Psi_n>
};

inline Moments moments(int n) {
    if (n < 1) throw std::domain_error("Hermite index starts at 1");
    const double m = n;
    return {(2.0 * m - 1.0) / 2.0, 0.75 * (2.0 * m * m - 2.0 * m + 1.0)};
}

}  // namespace iwatsuka
