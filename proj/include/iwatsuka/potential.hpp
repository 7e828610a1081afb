#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "iwatsuka/errors.hpp"

namespace iwatsuka {

enum class PotentialKind { Zero, RadialPower, Separable, UserGrid };

// Even, nonincreasing in |s|, equal to 1 at s = 0.
struct Profile1D {
    enum class Shape { Gaussian, Bracket };  // exp(-s^2 / 2w^2) or (1 + (s/w)^2)^{-p/2}
    Shape shape = Shape::Gaussian;
    double width = 1.0;
    double power = 0.0;  // Bracket only

    double operator()(double s) const {
        const double r = s / width;
        return shape == Shape::Gaussian ? std::exp(-0.5 * r * r) : std::pow(1.0 + r * r, -0.5 * power);
    }

    // s >= 0 with profile(s) = level, for level in (0, 1].
    double inverse(double level) const {
        if (level >= 1.0) return 0.0;
        return shape == Shape::Gaussian ? width * std::sqrt(-2.0 * std::log(level))
                                        : width * std::sqrt(std::pow(level, -2.0 / power) - 1.0);
    }

    // int profile(s) cos(omega s) ds.
    double fourier(double omega) const;
};

namespace detail {

// int (s^2 + y^2)^{-p/2} cos(omega y) dy for p > 1, s > 0.
inline double bracket_fourier(double p, double s, double omega) {
    const double w = std::abs(omega);
    const double nu = 0.5 * (p - 1.0);
    if (w * s < 1e-8) return std::pow(s, 1.0 - p) * std::sqrt(std::numbers::pi) * std::tgamma(nu) / std::tgamma(0.5 * p);
    const double z = s * w;
    // The Bessel factor underflows long before the power term overflows.
    if (z > 700.0) return 0.0;
    return 2.0 * std::sqrt(std::numbers::pi) / std::tgamma(0.5 * p) * std::pow(w / (2.0 * s), nu) *
           std::cyl_bessel_k(nu, z);
}

}  // namespace detail

inline double Profile1D::fourier(double omega) const {
    if (shape == Shape::Gaussian)
        return width * std::sqrt(2.0 * std::numbers::pi) * std::exp(-0.5 * width * width * omega * omega);
    // (1 + (s/w)^2)^{-p/2} = w^p (w^2 + s^2)^{-p/2}
    return std::pow(width, power) * detail::bracket_fourier(power, width, omega);
}

// Nonnegative electric potential V(x, y), even in y and nonincreasing in |y| for each x.
class Potential {
public:
    static Potential zero() {
        Potential p;
        p.kind_ = PotentialKind::Zero;
        p.m_ = 3.0;
        p.amplitude_ = 0.0;
        p.bound_ = 0.0;
        return p;
    }

    // amplitude * <(x, y) / scale>^{-m}.
    static Potential radial(double amplitude, double m, double scale = 1.0) {
        if (!(m > 2.0)) throw parameter_error("decay exponent m must exceed 2");
        if (!(amplitude > 0.0)) throw parameter_error("amplitude must be positive");
        if (!(scale > 0.0)) throw parameter_error("scale must be positive");
        Potential p;
        p.kind_ = PotentialKind::RadialPower;
        p.m_ = m;
        p.amplitude_ = amplitude;
        p.scale_ = scale;
        // 1 + r^2 / w^2 >= min(1, w^{-2}) (1 + r^2)
        p.bound_ = amplitude * std::pow(std::max(1.0, scale * scale), 0.5 * m);
        return p;
    }

    // amplitude * vx(x) * vy(y); m is the decay exponent the bound constant refers to.
    static Potential separable(double amplitude, Profile1D vx, Profile1D vy, double m) {
        if (!(m > 2.0)) throw parameter_error("decay exponent m must exceed 2");
        if (!(amplitude > 0.0)) throw parameter_error("amplitude must be positive");
        for (const auto& c : {vx, vy}) {
            if (!(c.width > 0.0)) throw parameter_error("profile width must be positive");
            if (c.shape == Profile1D::Shape::Bracket && !(c.power >= m))
                throw parameter_error("bracket profile decays slower than <x,y>^{-m}");
        }
        Potential p;
        p.kind_ = PotentialKind::Separable;
        p.m_ = m;
        p.amplitude_ = amplitude;
        p.vx_ = vx;
        p.vy_ = vy;
        p.bound_ = p.sampled_bound();
        return p;
    }

    // Bilinear interpolation of values[i * ys.size() + j] at (xs[i], ys[j]); zero outside.
    // ys must be symmetric about 0 with symmetric values, and V(x, .) nonincreasing in |y|.
    static Potential user_grid(std::vector<double> xs, std::vector<double> ys, std::vector<double> values, double m) {
        if (xs.size() < 2 || ys.size() < 2 || values.size() != xs.size() * ys.size())
            throw parameter_error("user grid dimensions do not match");
        for (std::size_t i = 1; i < xs.size(); ++i)
            if (!(xs[i] > xs[i - 1])) throw parameter_error("user grid x nodes must ascend");
        for (std::size_t j = 1; j < ys.size(); ++j)
            if (!(ys[j] > ys[j - 1])) throw parameter_error("user grid y nodes must ascend");
        const std::size_t ny = ys.size();
        for (std::size_t j = 0; j < ny; ++j)
            if (std::abs(ys[j] + ys[ny - 1 - j]) > 1e-12 * (1.0 + std::abs(ys[j])))
                throw parameter_error("user grid y nodes must be symmetric about 0");
        for (std::size_t i = 0; i < xs.size(); ++i)
            for (std::size_t j = 0; j < ny; ++j) {
                const double v = values[i * ny + j];
                if (!(v >= 0.0)) throw parameter_error("potential must be nonnegative");
                if (v != values[i * ny + ny - 1 - j]) throw parameter_error("user grid values must be even in y");
                if (ys[j] >= 0.0 && j + 1 < ny && values[i * ny + j + 1] > v)
                    throw parameter_error("user grid values must be nonincreasing in |y|");
            }
        Potential p;
        p.kind_ = PotentialKind::UserGrid;
        p.m_ = m;
        p.xs_ = std::move(xs);
        p.ys_ = std::move(ys);
        p.values_ = std::move(values);
        p.amplitude_ = *std::max_element(p.values_.begin(), p.values_.end());
        p.bound_ = p.sampled_bound();
        return p;
    }

    PotentialKind kind() const { return kind_; }
    double m() const { return m_; }
    double amplitude() const { return amplitude_; }
    double scale() const { return scale_; }
    // C in V(x, y) <= C <x, y>^{-m}.
    double bound_constant() const { return bound_; }
    const Profile1D& x_profile() const { return vx_; }
    const Profile1D& y_profile() const { return vy_; }
    bool is_zero() const { return kind_ == PotentialKind::Zero; }

    double operator()(double x, double y) const {
        switch (kind_) {
            case PotentialKind::Zero: return 0.0;
            case PotentialKind::RadialPower:
                return amplitude_ * std::pow(1.0 + (x * x + y * y) / (scale_ * scale_), -0.5 * m_);
            case PotentialKind::Separable: return amplitude_ * vx_(x) * vy_(y);
            case PotentialKind::UserGrid: return grid_value(x, y);
        }
        return 0.0;
    }

    double peak() const { return kind_ == PotentialKind::UserGrid ? amplitude_ : (*this)(0.0, 0.0); }

    // sup over y of V(x, y), attained at y = 0.
    double ridge(double x) const { return (*this)(x, 0.0); }

    // Lebesgue measure of {y : V(x, y) > level}.
    double superlevel_length(double x, double level) const {
        const double top = ridge(x);
        if (!(top > level)) return 0.0;
        switch (kind_) {
            case PotentialKind::Zero: return 0.0;
            case PotentialKind::RadialPower: {
                const double r2 = scale_ * scale_ * (std::pow(amplitude_ / level, 2.0 / m_) - 1.0) - x * x;
                return r2 > 0.0 ? 2.0 * std::sqrt(r2) : 0.0;
            }
            case PotentialKind::Separable: return 2.0 * vy_.inverse(level / top);
            case PotentialKind::UserGrid: {
                // Piecewise linear in y between nodes; V(x, .) even and nonincreasing in |y|.
                const std::size_t ny = ys_.size();
                std::size_t j = ny / 2;
                if (ys_[j] < 0.0) ++j;
                double prev_y = 0.0, prev_v = top;
                for (; j < ny; ++j) {
                    if (ys_[j] <= 0.0) continue;
                    const double v = grid_value(x, ys_[j]);
                    if (v <= level) return 2.0 * (prev_y + (ys_[j] - prev_y) * (prev_v - level) / (prev_v - v));
                    prev_y = ys_[j];
                    prev_v = v;
                }
                return 2.0 * prev_y;
            }
        }
        return 0.0;
    }

    // Largest x >= 0 with ridge(x) > level (0 when the set is empty on x >= 0).
    double x_extent(double level) const {
        if (!(ridge(0.0) > level) && kind_ != PotentialKind::UserGrid) return 0.0;
        switch (kind_) {
            case PotentialKind::Zero: return 0.0;
            case PotentialKind::RadialPower:
                return scale_ * std::sqrt(std::max(0.0, std::pow(amplitude_ / level, 2.0 / m_) - 1.0));
            case PotentialKind::Separable: return vx_.inverse(level / amplitude_);
            case PotentialKind::UserGrid: {
                double ext = 0.0;
                for (std::size_t i = 0; i < xs_.size(); ++i)
                    if (xs_[i] > 0.0 && ridge(xs_[i]) > level) ext = xs_[i];
                if (ext > 0.0 && ext < xs_.back()) {
                    const auto it = std::upper_bound(xs_.begin(), xs_.end(), ext);
                    const double v0 = ridge(ext), v1 = ridge(*it);
                    ext += (*it - ext) * (v0 - level) / (v0 - v1);
                }
                return ext;
            }
        }
        return 0.0;
    }

    // Largest y >= 0 with V(x, y) > level for some x: half the longest superlevel line.
    double y_extent(double level) const {
        switch (kind_) {
            case PotentialKind::Zero: return 0.0;
            case PotentialKind::UserGrid: {
                // bilinear cells are linear in x at fixed y, so the longest line sits on a node
                double best = 0.0;
                for (double x : xs_) best = std::max(best, superlevel_length(x, level));
                return 0.5 * best;
            }
            default: return 0.5 * superlevel_length(0.0, level);
        }
    }

    // Smallest |x| beyond which the ridge stays below rel * peak (both sides).
    double support_radius(double rel) const {
        const double level = rel * peak();
        switch (kind_) {
            case PotentialKind::Zero: return 0.0;
            case PotentialKind::UserGrid: return std::max(std::abs(xs_.front()), std::abs(xs_.back()));
            default: return x_extent(level);
        }
    }

    // V-hat(x, omega) = int V(x, y) exp(i omega y) dy (real since V is even in y).
    double line_fourier(double x, double omega) const {
        switch (kind_) {
            case PotentialKind::Zero: return 0.0;
            case PotentialKind::RadialPower:
                // w^m (w^2 + x^2 + y^2)^{-m/2}
                return amplitude_ * std::pow(scale_, m_) *
                       detail::bracket_fourier(m_, std::sqrt(scale_ * scale_ + x * x), omega);
            case PotentialKind::Separable: return amplitude_ * vx_(x) * vy_.fourier(omega);
            case PotentialKind::UserGrid: {
                // Exact transform of the piecewise linear y-profile.
                double s = 0.0;
                for (std::size_t j = 0; j + 1 < ys_.size(); ++j) {
                    const double y0 = ys_[j], y1 = ys_[j + 1];
                    const double v0 = grid_value(x, y0), v1 = grid_value(x, y1);
                    if (v0 == 0.0 && v1 == 0.0) continue;
                    s += linear_cos_integral(y0, y1, v0, v1, omega);
                }
                return s;
            }
        }
        return 0.0;
    }

private:
    double grid_value(double x, double y) const {
        if (x < xs_.front() || x > xs_.back() || y < ys_.front() || y > ys_.back()) return 0.0;
        const std::size_t ny = ys_.size();
        std::size_t i = std::min<std::size_t>(std::upper_bound(xs_.begin(), xs_.end(), x) - xs_.begin(), xs_.size() - 1);
        std::size_t j = std::min<std::size_t>(std::upper_bound(ys_.begin(), ys_.end(), y) - ys_.begin(), ny - 1);
        i = std::max<std::size_t>(i, 1);
        j = std::max<std::size_t>(j, 1);
        const double fx = (x - xs_[i - 1]) / (xs_[i] - xs_[i - 1]);
        const double fy = (y - ys_[j - 1]) / (ys_[j] - ys_[j - 1]);
        auto v = [&](std::size_t a, std::size_t b) { return values_[a * ny + b]; };
        return (1 - fx) * ((1 - fy) * v(i - 1, j - 1) + fy * v(i - 1, j)) + fx * ((1 - fy) * v(i, j - 1) + fy * v(i, j));
    }

    static double linear_cos_integral(double y0, double y1, double v0, double v1, double w) {
        const double L = y1 - y0;
        if (std::abs(w) * L < 1e-4) {
            // Two-point Gauss rule is exact to O((wL)^4) relative here.
            const double g = L / (2.0 * std::sqrt(3.0)), c = 0.5 * (y0 + y1);
            auto f = [&](double y) { return (v0 + (v1 - v0) * (y - y0) / L) * std::cos(w * y); };
            return 0.5 * L * (f(c - g) + f(c + g));
        }
        const double beta = (v1 - v0) / L;
        auto F = [&](double y, double v) { return v * std::sin(w * y) / w + beta * std::cos(w * y) / (w * w); };
        return F(y1, v1) - F(y0, v0);
    }

    double sampled_bound() const {
        // sup V <x,y>^m over a polar sweep; ample for the smooth built-in shapes.
        double best = 0.0;
        const double rmax = kind_ == PotentialKind::UserGrid
                                ? std::hypot(std::max(std::abs(xs_.front()), std::abs(xs_.back())), ys_.back())
                                : 200.0;
        for (int ir = 0; ir <= 800; ++ir) {
            const double r = rmax * ir / 800.0;
            for (int ia = 0; ia < 64; ++ia) {
                const double t = 2.0 * std::numbers::pi * ia / 64.0;
                const double x = r * std::cos(t), y = r * std::sin(t);
                best = std::max(best, (*this)(x, y) * std::pow(1.0 + r * r, 0.5 * m_));
            }
        }
        return best * 1.05;  // sampling can miss the exact maximum by a little
    }

    PotentialKind kind_ = PotentialKind::Zero;
    double m_ = 3.0;
    double amplitude_ = 0.0;
    double scale_ = 1.0;
    double bound_ = 0.0;
    Profile1D vx_, vy_;
    std::vector<double> xs_, ys_, values_;
};

}  // namespace iwatsuka
