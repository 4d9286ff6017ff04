#pragma once

#include <cstddef>
#include <utility>
#include <vector>

namespace patternforge {

// n x n samples of a 2*pi-periodic function at t_i = -pi + 2*pi*i/n,
// carrying the square symmetries phi(t1,t2)=phi(t2,t1)=phi(-t1,t2).
struct SymGrid {
    int n = 0;
    std::vector<double> v; // row-major, v[i*n+j] = phi(t_i, t_j)

    SymGrid() = default;
    explicit SymGrid(int n_, double fill = 0.0) : n(n_), v(std::size_t(n_) * n_, fill) {}
    double& at(int i, int j) { return v[std::size_t(i) * n + j]; }
    double at(int i, int j) const { return v[std::size_t(i) * n + j]; }
    double coord(int i) const; // t_i
};

// max |v - v o g| over the 8 square symmetries
double symmetry_defect(const SymGrid& g);
// group-average projection onto the symmetric subspace (idempotent)
SymGrid symmetrize(const SymGrid& g);

// Coefficients against the orthonormal symmetric cosine basis, one entry per
// unordered pair (k1 <= k2), both <= kmax:
//   b_{0,0}   = 1/(2 pi)
//   b_{0,k}   = (cos k t1 + cos k t2) / (2 pi)
//   b_{k,k}   = cos k t1 cos k t2 / pi
//   b_{j,k}   = (cos j t1 cos k t2 + cos k t1 cos j t2) / (pi sqrt(2)), j<k
struct CosSpectrum {
    int kmax = 0;
    std::vector<double> c; // pair-ordered, see pair_index()

    CosSpectrum() = default;
    explicit CosSpectrum(int kmax_);
    static std::size_t pair_count(int kmax);
    static std::size_t pair_index(int k1, int k2, int kmax); // requires k1<=k2
    std::pair<int, int> pair_at(std::size_t idx) const;
    double& at(int k1, int k2);
    double at(int k1, int k2) const;
    double l2_norm() const; // = L2 norm of the field (orthonormal basis)
};

// Dense coefficients A[k1][k2] against cos(k1 t1) cos(k2 t2) (symmetric matrix).
struct CosTensor {
    int kmax = 0;
    std::vector<double> a;
    explicit CosTensor(int kmax_ = 0) : kmax(kmax_), a(std::size_t(kmax_ + 1) * (kmax_ + 1), 0.0) {}
    double& at(int k1, int k2) { return a[std::size_t(k1) * (kmax + 1) + k2]; }
    double at(int k1, int k2) const { return a[std::size_t(k1) * (kmax + 1) + k2]; }
};

// Exact on band-limited symmetric data with kmax <= n/2 - 1. Rejects grids
// whose symmetry defect exceeds 1e-8.
CosSpectrum analyze(const SymGrid& g, int kmax);
SymGrid synthesize(const CosSpectrum& s, int n);

CosTensor to_tensor(const CosSpectrum& s);
CosSpectrum from_tensor(const CosTensor& t);

// Point evaluation of the field described by a tensor at (x, y).
double eval_point(const CosTensor& t, double x, double y);

// Amplitude of the cos t1 + cos t2 component and the orthogonal remainder.
struct V1Projection {
    double amplitude;   // <u, vbar>/<vbar, vbar>, <vbar,vbar> = 4 pi^2
    SymGrid remainder;  // u - amplitude * vbar
};
V1Projection project_v1(const SymGrid& g);

// Spectral derivative fields of band-limited symmetric data.
struct GradientFields {
    SymGrid dx, dy; // components (not individually symmetric; swap-covariant)
};
GradientFields spectral_gradient(const CosSpectrum& s, int n);
// divergence of a vector field given on the grid, via full trig differentiation
SymGrid spectral_divergence(const SymGrid& fx, const SymGrid& fy);
SymGrid spectral_laplacian(const CosSpectrum& s, int n);

// Periodic spectral differentiation matrix applied along axis 0 or 1; exact
// for trig polynomials of degree < n/2.
SymGrid spectral_derivative(const SymGrid& g, int axis);

} // namespace patternforge
