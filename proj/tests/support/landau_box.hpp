#pragma once

#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "iwatsuka/field.hpp"
#include "iwatsuka/potential.hpp"

// Brute-force 2D reference for gap counts: H = -d_x^2 + (-i d_y - a(x))^2 + s V on
// [-Lx, Lx] x [-Ly/2, Ly/2), Dirichlet in x, periodic in y, five-point stencil with Peierls
// phases on the y bonds. Eigenvalues below E are counted by LDL^T inertia (Sylvester).
namespace iwatsuka::testing {

struct LandauBox {
    double half_x = 8.0;
    double length_y = 16.0;
    double h = 0.1;
};

class LandauBoxOracle {
public:
    using Complex = std::complex<double>;
    using Matrix = Eigen::SparseMatrix<Complex>;

    LandauBoxOracle(const MagneticProfile& profile, const LandauBox& box) : box_(box) {
        nx_ = static_cast<int>(std::lround(2.0 * box.half_x / box.h)) - 1;
        ny_ = static_cast<int>(std::lround(box.length_y / box.h));
        hx_ = 2.0 * box.half_x / (nx_ + 1);
        hy_ = box.length_y / ny_;
        a_.resize(nx_);
        for (int i = 0; i < nx_; ++i) a_[i] = profile.a(x(i));
    }

    int size() const { return nx_ * ny_; }
    double x(int i) const { return -box_.half_x + (i + 1) * hx_; }
    double y(int j) const { return -0.5 * box_.length_y + j * hy_; }

    // Number of eigenvalues of H_0 + coupling V strictly below E.
    int count_below(const Potential& V, double coupling, double E) const {
        Matrix H = assemble(V, coupling, E);
        Eigen::SimplicialLDLT<Matrix, Eigen::Lower> ldlt(H);
        if (ldlt.info() != Eigen::Success) throw std::runtime_error("LDL^T factorization failed");
        const auto d = ldlt.vectorD();
        int neg = 0;
        for (Eigen::Index i = 0; i < d.size(); ++i)
            if (d[i].real() < 0.0) ++neg;
        return neg;
    }

    // Eigenvalues of H_0 + coupling V that moved across E: N(H_0 < E) - N(H_0 + V < E).
    // Edge states at the Dirichlet walls are untouched by a localized V and cancel.
    int crossing_count(const Potential& V, double coupling, double E) const {
        return count_below(Potential::zero(), 0.0, E) - count_below(V, coupling, E);
    }

    Matrix assemble(const Potential& V, double coupling, double shift) const {
        std::vector<Eigen::Triplet<Complex>> t;
        t.reserve(static_cast<std::size_t>(size()) * 5);
        const double cx = 1.0 / (hx_ * hx_), cy = 1.0 / (hy_ * hy_);
        auto id = [&](int i, int j) { return i * ny_ + ((j % ny_) + ny_) % ny_; };
        for (int i = 0; i < nx_; ++i) {
            const Complex hop = -cy * std::exp(Complex(0.0, -a_[i] * hy_));
            for (int j = 0; j < ny_; ++j) {
                const int r = id(i, j);
                t.emplace_back(r, r, 2.0 * cx + 2.0 * cy + coupling * V(x(i), y(j)) - shift);
                if (i + 1 < nx_) {
                    t.emplace_back(id(i + 1, j), r, -cx);
                    t.emplace_back(r, id(i + 1, j), -cx);
                }
                // psi_{j+1} enters row j with e^{-i a h_y}; the Hermitian partner fills the other side.
                t.emplace_back(r, id(i, j + 1), hop);
                t.emplace_back(id(i, j + 1), r, std::conj(hop));
            }
        }
        Matrix H(size(), size());
        H.setFromTriplets(t.begin(), t.end());
        return H;
    }

private:
    LandauBox box_;
    int nx_ = 0, ny_ = 0;
    double hx_ = 0.0, hy_ = 0.0;
    std::vector<double> a_;
};

}  // namespace iwatsuka::testing
