#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "iwatsuka/errors.hpp"
#include "iwatsuka/quadrature.hpp"

namespace iwatsuka {

inline constexpr int max_field_derivative = 4;

namespace detail {

// Truncated Taylor series f(x + h) = sum_j c[j] h^j, enough for b'''' .
using Jet = std::array<double, 5>;

inline Jet jet_const(double v) { return {v, 0.0, 0.0, 0.0, 0.0}; }

inline Jet operator+(const Jet& a, const Jet& b) {
    Jet r;
    for (int i = 0; i < 5; ++i) r[i] = a[i] + b[i];
    return r;
}

inline Jet operator-(const Jet& a, const Jet& b) {
    Jet r;
    for (int i = 0; i < 5; ++i) r[i] = a[i] - b[i];
    return r;
}

inline Jet operator*(const Jet& a, const Jet& b) {
    Jet r{};
    for (int k = 0; k < 5; ++k)
        for (int i = 0; i <= k; ++i) r[k] += a[i] * b[k - i];
    return r;
}

inline Jet recip(const Jet& a) {
    Jet r{};
    r[0] = 1.0 / a[0];
    for (int k = 1; k < 5; ++k) {
        double s = 0.0;
        for (int i = 1; i <= k; ++i) s += a[i] * r[k - i];
        r[k] = -s * r[0];
    }
    return r;
}

inline Jet exp(const Jet& a) {
    Jet r{};
    r[0] = std::exp(a[0]);
    for (int k = 1; k < 5; ++k) {
        double s = 0.0;
        for (int i = 1; i <= k; ++i) s += i * a[i] * r[k - i];
        r[k] = s / k;
    }
    return r;
}

// e^{-1/s} for s > 0, zero otherwise; below 1.5e-3 the value and all derivatives underflow.
inline Jet flat_exp(double s, double ds) {
    if (s < 1.5e-3) return jet_const(0.0);
    const Jet sj{s, ds, 0.0, 0.0, 0.0};
    const Jet inv = recip(sj);
    return exp(jet_const(0.0) - inv);
}

// C-infinity step: 0 for x <= lo, 1 for x >= hi.
inline Jet smooth_step(double x, double lo, double hi) {
    const double w = hi - lo;
    const double s = (x - lo) / w;
    if (s <= 0.0) return jet_const(0.0);
    if (s >= 1.0) return jet_const(1.0);
    const Jet f = flat_exp(s, 1.0 / w);
    const Jet g = flat_exp(1.0 - s, -1.0 / w);
    return f * recip(f + g);
}

// x^{-M} with its Taylor coefficients.
inline Jet inverse_power(double x, double M) {
    Jet r{};
    double d = std::pow(x, -M);
    double fact = 1.0;
    for (int p = 0; p < 5; ++p) {
        if (p > 0) {
            d *= (-M - (p - 1)) / x;
            fact *= p;
        }
        r[p] = d / fact;
    }
    return r;
}

}  // namespace detail

enum class ProfileKind { Constant, ModelPowerTail, UserTable };

struct BridgeKnot {
    double x;
    double b;
};

struct ProfileSpec {
    ProfileKind kind = ProfileKind::ModelPowerTail;
    double b_minus = 1.0;
    double b_plus = 2.0;
    double M = 2.0;
    double c = 1.0;
    double x0 = 2.0;
    // UserTable only: increasing knots, the first at value b_minus, joined by smooth steps.
    std::vector<BridgeKnot> knots;
    // Left end of the transition into the exact tail; defaults to a safe midpoint.
    std::optional<double> bridge_start;
};

// Magnetic field b, its primitive a with a(0) = 0, and the inverse of a.
// b = b_plus - c x^{-M} exactly for x >= x0; b = b_minus left of the bridge.
class MagneticProfile {
public:
    explicit MagneticProfile(ProfileSpec spec) : spec_(std::move(spec)) {
        validate();
        build_primitive();
        verify_monotone();
    }

    static MagneticProfile constant(double b) {
        ProfileSpec s;
        s.kind = ProfileKind::Constant;
        s.b_minus = s.b_plus = b;
        return MagneticProfile(s);
    }

    static MagneticProfile model(double b_minus, double b_plus, double M, double c, double x0) {
        ProfileSpec s;
        s.kind = ProfileKind::ModelPowerTail;
        s.b_minus = b_minus;
        s.b_plus = b_plus;
        s.M = M;
        s.c = c;
        s.x0 = x0;
        return MagneticProfile(s);
    }

    const ProfileSpec& spec() const { return spec_; }
    ProfileKind kind() const { return spec_.kind; }
    bool is_constant() const { return spec_.kind == ProfileKind::Constant; }
    double b_minus() const { return spec_.b_minus; }
    double b_plus() const { return spec_.b_plus; }
    double M() const { return spec_.M; }
    double c() const { return spec_.c; }
    double x0() const { return spec_.x0; }
    double bridge_start() const { return x_lo_; }

    double lower_threshold(int n) const { return spec_.b_minus * (2.0 * n - 1.0); }
    double upper_threshold(int n) const { return spec_.b_plus * (2.0 * n - 1.0); }

    double b(double x) const {
        if (is_constant()) return spec_.b_minus;
        if (x >= spec_.x0) return spec_.b_plus - spec_.c * std::pow(x, -spec_.M);
        return jet(x)[0];
    }

    // p-th derivative of b, p <= 4.
    double b(double x, int p) const {
        if (p < 0 || p > max_field_derivative)
            throw parameter_error("field derivative order " + std::to_string(p) + " unsupported (max 4)");
        return derivatives(x)[p];
    }

    std::array<double, 5> derivatives(double x) const {
        const auto j = jet(x);
        std::array<double, 5> d{};
        double fact = 1.0;
        for (int p = 0; p < 5; ++p) {
            if (p > 0) fact *= p;
            d[p] = j[p] * fact;
        }
        return d;
    }

    double a(double x) const { return a_rel(x) - a_rel_origin_; }

    // Integral of b over [x, x + s]; exact arithmetic on the tail keeps small offsets precise.
    double a_shift(double x, double s) const {
        if (is_constant()) return spec_.b_minus * s;
        const double y = x + s;
        if (x >= spec_.x0 && y >= spec_.x0) return spec_.b_plus * s - spec_.c * tail_power_integral(x, s);
        if (x <= breaks_.front() && y <= breaks_.front()) return spec_.b_minus * s;
        return a_rel(y) - a_rel(x);
    }

    double invert_a(double k) const {
        if (is_constant()) return k / spec_.b_minus;
        const double bm = spec_.b_minus, bp = spec_.b_plus;
        double lo = std::min(k / bp, k / bm) - 1.0;
        double hi = std::max(k / bp, k / bm) + 1.0;
        double x = std::clamp(k / bp, lo, hi);
        const double tol = 1e-11 * (1.0 + std::abs(k));
        for (int it = 0; it < 200; ++it) {
            const double f = a(x) - k;
            if (f < 0.0) lo = x; else hi = x;
            if (std::abs(f) <= 2e-16 * (1.0 + std::abs(k))) return x;
            double xn = x - f / b(x);
            if (!(xn > lo && xn < hi)) xn = 0.5 * (lo + hi);
            if (std::abs(xn - x) <= 1e-15 * (1.0 + std::abs(x))) {
                if (std::abs(a(xn) - k) <= tol) return xn;
            }
            x = xn;
            if (hi - lo <= 1e-15 * (1.0 + std::abs(x))) break;
        }
        if (std::abs(a(x) - k) <= tol) return x;
        throw numerical_failure("invert_a did not converge for k = " + std::to_string(k));
    }

private:
    ProfileSpec spec_;
    double x_lo_ = 0.0;
    double plateau_ = 0.0;           // background value reached left of the tail transition
    std::vector<double> breaks_;     // knots, bridge start, x0
    std::vector<double> a_breaks_;   // integral of b from breaks_[0] to each break
    double a_rel_origin_ = 0.0;

    void validate() {
        auto& s = spec_;
        if (!(s.b_minus > 0.0) || !std::isfinite(s.b_minus)) throw parameter_error("b_minus must be positive");
        if (s.kind == ProfileKind::Constant) {
            if (s.b_plus != s.b_minus) throw parameter_error("constant profile requires b_plus == b_minus");
            return;
        }
        if (!(s.b_plus > s.b_minus) || !std::isfinite(s.b_plus)) throw parameter_error("b_plus must exceed b_minus");
        if (!(s.M > 0.0) || !std::isfinite(s.M)) throw parameter_error("M must be positive");
        if (!(s.c > 0.0) || !std::isfinite(s.c)) throw parameter_error("c must be positive");
        if (!(s.x0 > 0.0) || !std::isfinite(s.x0)) throw parameter_error("x0 must be positive");

        double left = 0.0;
        plateau_ = s.b_minus;
        if (s.kind == ProfileKind::UserTable) {
            if (s.knots.size() < 2) throw parameter_error("user table needs at least two knots");
            if (s.knots.front().b != s.b_minus) throw parameter_error("first knot must sit at b_minus");
            for (std::size_t i = 1; i < s.knots.size(); ++i) {
                if (!(s.knots[i].x > s.knots[i - 1].x)) throw parameter_error("knot abscissae must increase");
                if (!(s.knots[i].b > s.knots[i - 1].b)) throw parameter_error("knot values must increase");
            }
            plateau_ = s.knots.back().b;
            left = s.knots.back().x;
        } else if (!s.knots.empty()) {
            throw parameter_error("knots are only meaningful for a user table profile");
        }
        if (!(plateau_ < s.b_plus)) throw parameter_error("bridge values must stay below b_plus");
        // The tail b_plus - c x^{-M} exceeds the plateau only right of x_cross.
        const double x_cross = std::pow(s.c / (s.b_plus - plateau_), 1.0 / s.M);
        const double floor = std::max(x_cross, s.kind == ProfileKind::UserTable ? left : 0.0);
        if (!(floor < s.x0))
            throw parameter_error("tail onset x0 too small: b_plus - c x0^{-M} must exceed the bridge plateau");
        x_lo_ = s.bridge_start ? *s.bridge_start : 0.5 * (std::max(x_cross, left) + s.x0);
        if (!(x_lo_ > floor && x_lo_ < s.x0))
            throw parameter_error("bridge_start must lie strictly between the tail crossing point and x0");
    }

    detail::Jet background(double x) const {
        using namespace detail;
        if (spec_.kind != ProfileKind::UserTable) return jet_const(spec_.b_minus);
        Jet r = jet_const(spec_.b_minus);
        const auto& k = spec_.knots;
        for (std::size_t i = 1; i < k.size(); ++i)
            r = r + jet_const(k[i].b - k[i - 1].b) * smooth_step(x, k[i - 1].x, k[i].x);
        return r;
    }

    detail::Jet jet(double x) const {
        using namespace detail;
        if (is_constant()) return jet_const(spec_.b_minus);
        const Jet tail = jet_const(spec_.b_plus) - jet_const(spec_.c) * inverse_power(std::max(x, 1e-300), spec_.M);
        if (x >= spec_.x0) return tail;
        const Jet bg = background(x);
        if (x <= x_lo_) return bg;
        return bg + (tail - bg) * smooth_step(x, x_lo_, spec_.x0);
    }

    // Integral of t^{-M} over [x, x + s], x > 0.
    double tail_power_integral(double x, double s) const {
        const double M = spec_.M;
        const double l = std::log1p(s / x);
        if (M == 1.0) return l;
        return std::pow(x, 1.0 - M) * std::expm1((1.0 - M) * l) / (1.0 - M);
    }

    void build_primitive() {
        if (is_constant()) {
            breaks_ = {0.0};
            a_breaks_ = {0.0};
            a_rel_origin_ = 0.0;
            return;
        }
        breaks_.clear();
        if (spec_.kind == ProfileKind::UserTable)
            for (const auto& k : spec_.knots) breaks_.push_back(k.x);
        breaks_.push_back(x_lo_);
        breaks_.push_back(spec_.x0);
        a_breaks_.assign(breaks_.size(), 0.0);
        for (std::size_t i = 1; i < breaks_.size(); ++i)
            a_breaks_[i] = a_breaks_[i - 1] + segment(breaks_[i - 1], breaks_[i]);
        a_rel_origin_ = a_rel(0.0);
    }

    double segment(double lo, double hi) const {
        return quad::integrate([this](double t) { return jet(t)[0]; }, lo, hi, 1e-13);
    }

    double a_rel(double x) const {
        if (is_constant()) return spec_.b_minus * x;
        if (x <= breaks_.front()) return spec_.b_minus * (x - breaks_.front());
        if (x >= spec_.x0) {
            const double x0 = spec_.x0;
            return a_breaks_.back() + spec_.b_plus * (x - x0) - spec_.c * tail_power_integral(x0, x - x0);
        }
        const auto it = std::upper_bound(breaks_.begin(), breaks_.end(), x);
        const std::size_t i = static_cast<std::size_t>(it - breaks_.begin()) - 1;
        return a_breaks_[i] + segment(breaks_[i], x);
    }

    void verify_monotone() const {
        if (is_constant()) return;
        const double lo = breaks_.front() - 1.0, hi = spec_.x0 + 10.0;
        const int N = 10000;
        double prev = b(lo);
        double prev_a = a(lo);
        for (int i = 1; i <= N; ++i) {
            const double x = lo + (hi - lo) * i / N;
            const auto d = derivatives(x);
            const double ax = a(x);
            if (d[0] < prev || d[1] < -1e-12 || d[0] < spec_.b_minus || d[0] >= spec_.b_plus || !(ax > prev_a))
                throw parameter_error("profile fails the monotonicity check near x = " + std::to_string(x));
            prev = d[0];
            prev_a = ax;
        }
    }
};

// Free-function forms of the profile operations.
inline double eval_b(const MagneticProfile& p, double x, int order = 0) { return p.b(x, order); }
inline double eval_a(const MagneticProfile& p, double x) { return p.a(x); }
inline double invert_a(const MagneticProfile& p, double k) { return p.invert_a(k); }

}  // namespace iwatsuka
