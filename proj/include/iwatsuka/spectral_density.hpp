#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "iwatsuka/errors.hpp"
#include "iwatsuka/fiber.hpp"
#include "iwatsuka/field.hpp"
#include "iwatsuka/parallel.hpp"
#include "iwatsuka/potential.hpp"
#include "iwatsuka/quadrature.hpp"

namespace iwatsuka {

namespace detail {

// (1/2pi) int_0^X w(x) L(x) dx with L the superlevel line length. L vanishes like a square
// root at X, so x = X - u^2 makes the integrand smooth.
template <class W>
double superlevel_integral(const Potential& V, double lambda, W&& weight) {
    if (!(lambda > 0.0)) throw std::domain_error("lambda must be positive");
    if (V.is_zero()) return 0.0;
    const double X = V.x_extent(lambda);
    if (!(X > 0.0)) return 0.0;
    auto g = [&](double u) {
        const double x = X - u * u;
        return 2.0 * u * weight(x) * V.superlevel_length(x, lambda);
    };
    const double U = std::sqrt(X);
    // Scale-aware tolerance: the answer is at least of order X * L(0) / 2pi.
    const double scale = std::max(1e-300, X * V.superlevel_length(0.0, lambda));
    const double tol = 1e-10 * scale;
    double total = 0.0;
    // Split so the adaptive rule sees the features of L near u = 0 and the body separately.
    const int pieces = 16;
    for (int i = 0; i < pieces; ++i) total += quad::integrate(g, U * i / pieces, U * (i + 1) / pieces, tol / pieces);
    return total / (2.0 * std::numbers::pi);
}

}  // namespace detail

// N_0(lambda, V) = (1/2pi) |{(x, y) : V > lambda, x > 0}|.
inline double volume_N0(const Potential& V, double lambda) {
    return detail::superlevel_integral(V, lambda, [](double) { return 1.0; });
}

// (1/2pi) int_{V > lambda, x > 0} b(x) dx dy. The 1/2pi matches N_0 so that b == b_plus gives b_plus N_0.
inline double weighted_volume(const Potential& V, const MagneticProfile& profile, double lambda) {
    return detail::superlevel_integral(V, lambda, [&](double x) { return profile.b(x); });
}

enum class Weighting { None, SingularWeight, BirmanSchwinger };

struct KernelOptions {
    double k_spacing = 0.2;         // node spacing on the k-line
    double x_spacing = 0.02;        // common x grid, in units of b_plus^{-1/2}
    FiberOptions fiber{};
    int threads = 0;
};

struct EffectiveKernel {
    int n = 1;
    Weighting weighting = Weighting::None;
    double lambda = 0.0;              // SingularWeight
    double energy = 0.0;              // BirmanSchwinger
    std::vector<int> bands;           // BirmanSchwinger band set (n alone otherwise)
    std::vector<double> k_nodes;      // ascending, shared by every band
    std::vector<double> weights;      // trapezoid weights for k_nodes
    std::vector<int> row_band;        // band of each Gram row
    std::vector<int> row_node;        // k-node of each Gram row
    // Weight-symmetrized and symmetric. For BirmanSchwinger it is the rank-compressed L^T D L,
    // so its rows no longer correspond to (band, node).
    Eigen::MatrixXd matrix;

    Eigen::Index dimension() const { return matrix.rows(); }
};

struct KWindow {
    double k_lo = 0.0;
    double k_hi = 0.0;
};

namespace detail {

inline std::vector<double> uniform_nodes(const KWindow& w, double spacing, std::vector<double>& weights) {
    if (!(w.k_hi > w.k_lo)) throw std::invalid_argument("empty k window");
    const int intervals = std::max(1, static_cast<int>(std::ceil((w.k_hi - w.k_lo) / spacing)));
    const double h = (w.k_hi - w.k_lo) / intervals;
    std::vector<double> k(intervals + 1);
    weights.assign(intervals + 1, h);
    weights.front() = weights.back() = 0.5 * h;
    for (int i = 0; i <= intervals; ++i) k[i] = w.k_lo + h * i;
    return k;
}

// An eigenfunction resampled onto the common grid x = x_begin + i * dx, i in [first, first + values.size()).
struct Sampled {
    int first = 0;
    std::vector<double> values;
    double energy = 0.0;
};

// Four-point Lagrange interpolation from the solver's finest grid.
inline double interpolate(const FiberEigenpair& p, double x) {
    const FiberGrid& g = p.grid;
    const double s = (x - g.x(0)) / g.spacing;
    int i = static_cast<int>(std::floor(s));
    if (i < 0 || i >= g.points - 1) return 0.0;
    i = std::clamp(i, 1, g.points - 3);
    const double t = s - i;
    const double w0 = -t * (t - 1) * (t - 2) / 6, w1 = (t + 1) * (t - 1) * (t - 2) / 2;
    const double w2 = -(t + 1) * t * (t - 2) / 2, w3 = (t + 1) * t * (t - 1) / 6;
    return w0 * p.u[i - 1] + w1 * p.u[i] + w2 * p.u[i + 1] + w3 * p.u[i + 2];
}

struct CommonGrid {
    double x_begin = 0.0;
    double dx = 0.0;
    int points = 0;
    double x(int i) const { return x_begin + dx * i; }
};

// Gram matrix sqrt(w_r w_s) (1/2pi) int V-hat(x, k_r - k_s) u_r(x) u_s(x) dx for rows (band, node).
inline Eigen::MatrixXd gram(const MagneticProfile& profile, const Potential& V, const std::vector<double>& k_nodes,
                            const std::vector<double>& weights, const std::vector<int>& bands,
                            std::vector<int>& row_band, std::vector<int>& row_node, std::vector<double>& row_energy,
                            const KernelOptions& opt) {
    const int N = static_cast<int>(k_nodes.size());
    const int top_band = *std::max_element(bands.begin(), bands.end());
    std::vector<std::vector<FiberEigenpair>> pairs(N);
    parallel_for(N, [&](std::size_t i) { pairs[i] = solve_fiber(profile, k_nodes[i], top_band, opt.fiber); },
                 opt.threads);

    CommonGrid cg;
    cg.dx = opt.x_spacing / std::sqrt(profile.b_plus());
    double lo = pairs.front().front().grid.x(0), hi = lo;
    for (const auto& ps : pairs)
        for (int b : bands) {
            const auto& g = ps[b - 1].grid;
            lo = std::min(lo, g.x(0));
            hi = std::max(hi, g.x(g.points - 1));
        }
    cg.x_begin = lo;
    cg.points = static_cast<int>(std::ceil((hi - lo) / cg.dx)) + 1;

    const int R = N * static_cast<int>(bands.size());
    std::vector<Sampled> rows(R);
    row_band.resize(R);
    row_node.resize(R);
    row_energy.resize(R);
    for (std::size_t bi = 0; bi < bands.size(); ++bi)
        for (int i = 0; i < N; ++i) {
            const int r = static_cast<int>(bi) * N + i;
            row_band[r] = bands[bi];
            row_node[r] = i;
        }
    parallel_for(R, [&](std::size_t r) {
        const auto& p = pairs[row_node[r]][row_band[r] - 1];
        const FiberGrid& g = p.grid;
        const int first = std::max(0, static_cast<int>(std::ceil((g.x(0) - cg.x_begin) / cg.dx)));
        const int last = std::min(cg.points - 1, static_cast<int>(std::floor((g.x(g.points - 1) - cg.x_begin) / cg.dx)));
        Sampled s;
        s.first = first;
        s.energy = p.energy;
        for (int i = first; i <= last; ++i) s.values.push_back(interpolate(p, cg.x(i)));
        rows[r] = std::move(s);
        row_energy[r] = p.energy;
    }, opt.threads);

    // V-hat on the common grid for every node offset; uniform nodes make k_r - k_s = d * h.
    const double hk = N > 1 ? k_nodes[1] - k_nodes[0] : 0.0;
    std::vector<std::vector<double>> vhat(N, std::vector<double>(cg.points));
    parallel_for(N, [&](std::size_t d) {
        for (int i = 0; i < cg.points; ++i) vhat[d][i] = V.line_fourier(cg.x(i), hk * static_cast<double>(d));
    }, opt.threads);

    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(R, R);
    const double norm = cg.dx / (2.0 * std::numbers::pi);
    parallel_for(R, [&](std::size_t r) {
        const Sampled& a = rows[r];
        for (int s = 0; s <= static_cast<int>(r); ++s) {
            const Sampled& b = rows[s];
            const int from = std::max(a.first, b.first);
            const int to = std::min(a.first + static_cast<int>(a.values.size()), b.first + static_cast<int>(b.values.size()));
            if (from >= to) continue;
            const auto& vh = vhat[std::abs(row_node[r] - row_node[s])];
            double acc = 0.0;
            for (int i = from; i < to; ++i) acc += vh[i] * a.values[i - a.first] * b.values[i - b.first];
            K(r, s) = acc * norm * std::sqrt(weights[row_node[r]] * weights[row_node[s]]);
        }
    }, opt.threads);
    K.triangularView<Eigen::StrictlyUpper>() = K.transpose().triangularView<Eigen::StrictlyUpper>();
    return K;
}

// Columns of L with K ~ L L^T, stopping when every remaining pivot is below rel_tol * max diag(K).
inline Eigen::MatrixXd pivoted_cholesky(const Eigen::MatrixXd& K, double rel_tol) {
    const Eigen::Index n = K.rows();
    Eigen::VectorXd diag = K.diagonal();
    const double stop = rel_tol * std::max(diag.maxCoeff(), 0.0);
    std::vector<Eigen::VectorXd> cols;
    for (Eigen::Index step = 0; step < n; ++step) {
        Eigen::Index p;
        const double piv = diag.maxCoeff(&p);
        if (!(piv > stop)) break;
        Eigen::VectorXd c = K.col(p);
        for (const auto& prev : cols) c -= prev[p] * prev;
        c /= std::sqrt(piv);
        for (Eigen::Index i = 0; i < n; ++i) diag[i] -= c[i] * c[i];
        diag[p] = 0.0;
        cols.push_back(std::move(c));
    }
    Eigen::MatrixXd L(n, static_cast<Eigen::Index>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j) L.col(static_cast<Eigen::Index>(j)) = cols[j];
    return L;
}

}  // namespace detail

// Q_V* Q_V for band n on a uniform k window.
inline EffectiveKernel build_effective_kernel(const MagneticProfile& profile, const Potential& V, int n,
                                              const KWindow& window, const KernelOptions& opt = {}) {
    if (n < 1) throw std::domain_error("band index starts at 1");
    EffectiveKernel ek;
    ek.n = n;
    ek.bands = {n};
    ek.k_nodes = detail::uniform_nodes(window, opt.k_spacing, ek.weights);
    if (V.is_zero()) {
        const auto N = static_cast<Eigen::Index>(ek.k_nodes.size());
        ek.matrix = Eigen::MatrixXd::Zero(N, N);
        for (int i = 0; i < N; ++i) {
            ek.row_band.push_back(n);
            ek.row_node.push_back(i);
        }
        return ek;
    }
    std::vector<double> energies;
    ek.matrix = detail::gram(profile, V, ek.k_nodes, ek.weights, ek.bands, ek.row_band, ek.row_node, energies, opt);
    return ek;
}

// S_V S_V*: the Q_V* Q_V kernel restricted to upper - E_n in (0, fraction * lambda) and weighted by
// |E_n(k) - upper + lambda|^{-1/2} on both sides.
inline EffectiveKernel build_singular_kernel(const MagneticProfile& profile, const Potential& V, int n, double lambda,
                                             double k_hi, const KernelOptions& opt = {}, double fraction = 0.5) {
    if (!(lambda > 0.0)) throw std::domain_error("lambda must be positive");
    if (!(fraction > 0.0 && fraction < 1.0)) throw std::domain_error("interval fraction must lie in (0, 1)");
    const double k_lo = rho_inverse(profile, n, fraction * lambda, opt.fiber);
    if (!(k_hi > k_lo)) k_hi = k_lo + 10.0 * opt.k_spacing;
    EffectiveKernel ek = build_effective_kernel(profile, V, n, KWindow{k_lo, k_hi}, opt);
    ek.weighting = Weighting::SingularWeight;
    ek.lambda = lambda;
    const double top = profile.upper_threshold(n);
    const auto N = static_cast<Eigen::Index>(ek.k_nodes.size());
    Eigen::VectorXd w(N);
    for (Eigen::Index i = 0; i < N; ++i) {
        const double E = solve_band(profile, n, ek.k_nodes[i], opt.fiber).energy;
        w[i] = 1.0 / std::sqrt(std::abs(E - top + lambda));
    }
    ek.matrix = w.asDiagonal() * ek.matrix * w.asDiagonal();
    return ek;
}

// True when E lies in a spectral gap of H_0 (outside every [lower_l, upper_l]).
inline bool in_spectral_gap(const MagneticProfile& profile, double E) {
    for (int l = 1; profile.lower_threshold(l) <= E + 1e-14; ++l)
        if (E <= profile.upper_threshold(l) + 1e-14) return false;
    return true;
}

// Compressed form of K^{1/2} D K^{1/2} with K the multiband Gram kernel and D = diag(1/(E_l(k) - E)); its nonzero
// spectrum is that of the Birman-Schwinger operator V^{1/2}(H_0 - E)^{-1}V^{1/2} truncated to `bands`.
inline EffectiveKernel build_birman_schwinger(const MagneticProfile& profile, const Potential& V, double E,
                                              const std::vector<int>& bands, const KWindow& window,
                                              const KernelOptions& opt = {}) {
    if (!in_spectral_gap(profile, E)) throw spectral_position_error("energy lies inside a band of H_0");
    if (bands.empty()) throw std::invalid_argument("band set is empty");
    for (int b : bands)
        if (b < 1) throw std::domain_error("band index starts at 1");
    EffectiveKernel ek;
    ek.weighting = Weighting::BirmanSchwinger;
    ek.energy = E;
    ek.bands = bands;
    ek.n = bands.front();
    ek.k_nodes = detail::uniform_nodes(window, opt.k_spacing, ek.weights);
    const auto R = static_cast<Eigen::Index>(ek.k_nodes.size() * bands.size());
    if (V.is_zero()) {
        ek.matrix = Eigen::MatrixXd::Zero(R, R);
        return ek;
    }
    std::vector<double> energies;
    const Eigen::MatrixXd K =
        detail::gram(profile, V, ek.k_nodes, ek.weights, bands, ek.row_band, ek.row_node, energies, opt);
    // K = L L^T by pivoted Cholesky; L^T D L has the nonzero spectrum of K^{1/2} D K^{1/2} and
    // its size is the numerical rank of K, far below R for a localized V.
    const Eigen::MatrixXd L = detail::pivoted_cholesky(K, 1e-14);
    Eigen::VectorXd d(R);
    for (Eigen::Index r = 0; r < R; ++r) d[r] = 1.0 / (energies[r] - E);
    ek.matrix = L.transpose() * d.asDiagonal() * L;
    ek.matrix = 0.5 * (ek.matrix + ek.matrix.transpose()).eval();
    return ek;
}

// Number of eigenvalues of the symmetric matrix strictly above threshold.
inline int count_above(const EffectiveKernel& kernel, double threshold) {
    if (kernel.matrix.size() == 0) return 0;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(kernel.matrix, Eigen::EigenvaluesOnly);
    int c = 0;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i)
        if (es.eigenvalues()[i] > threshold) ++c;
    return c;
}

inline Eigen::VectorXd kernel_eigenvalues(const EffectiveKernel& kernel) {
    if (kernel.matrix.size() == 0) return {};
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(kernel.matrix, Eigen::EigenvaluesOnly);
    return es.eigenvalues();
}

// Window for Q_V* Q_V near the n-th upper threshold: from k = 0 (the x > 0 half line) to a K_max with
// upper - E_n(K_max) < lambda / 100 and x_{K_max} past the {V > lambda / 4} region.
inline KWindow counting_window(const MagneticProfile& profile, const Potential& V, int n, double lambda,
                               const FiberOptions& fopt = {}) {
    const double k_band = rho_inverse(profile, n, lambda / 100.0, fopt);
    const double x_reach = V.x_extent(0.25 * lambda) + 6.0 / std::sqrt(profile.b_minus());
    return KWindow{0.0, std::max(k_band, profile.a(x_reach))};
}

// Uniform k nodes with spacing h see V periodized in y with period 2pi / h. The largest h for which
// the images stay below `floor` wherever V > level: 2pi / h >= Y(level) + Y(floor).
inline double alias_free_spacing(const Potential& V, double level, double floor) {
    if (!(level > 0.0 && floor > 0.0 && floor <= level)) throw std::domain_error("need 0 < floor <= level");
    const double reach = V.y_extent(level) + V.y_extent(floor);
    return reach > 0.0 ? 2.0 * std::numbers::pi / reach : std::numeric_limits<double>::infinity();
}

struct GapCountOptions {
    int band_count = 6;        // bands 1..band_count enter the truncated sum
    double support_rel = 1e-4; // the k window covers |x| where the ridge exceeds support_rel * peak
    KernelOptions kernel{};
};

enum class PerturbationSign { Plus, Minus };  // H_0 + V or H_0 - V

// Eigenvalues of H_0 +/- V that cross E = upper_n + lambda as the coupling goes from 0 to 1.
// For H_0 - V these are the eigenvalues of T(E) above 1; for H_0 + V those of -T(E).
inline int gap_count(const MagneticProfile& profile, const Potential& V, int n, double lambda, PerturbationSign sign,
                     const GapCountOptions& opt = {}) {
    const double E = profile.upper_threshold(n) + lambda;
    if (!in_spectral_gap(profile, E)) throw spectral_position_error("upper threshold + lambda is not in a gap");
    if (V.is_zero()) return 0;
    std::vector<int> bands;
    for (int l = 1; l <= opt.band_count; ++l) bands.push_back(l);
    const double R = V.support_radius(opt.support_rel);
    const double margin = 4.0 * std::sqrt(profile.b_plus() * (2.0 * opt.band_count - 1.0));
    const KWindow w{profile.a(-R) - margin, profile.a(R) + margin};
    auto ek = build_birman_schwinger(profile, V, E, bands, w, opt.kernel);
    if (sign == PerturbationSign::Plus) ek.matrix = -ek.matrix;
    return count_above(ek, 1.0);
}

}  // namespace iwatsuka
