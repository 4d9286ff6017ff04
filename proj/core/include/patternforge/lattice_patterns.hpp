#pragma once

#include "patternforge/bravais.hpp"
#include "patternforge/starshape.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace patternforge {

// Funk-Hecke eigenvalue of the kernel G_{kappa,N} on degree-k harmonics.
// Production path: reduced 1D quadratures. Oracle path: the defining double
// integral over S^{N-1} x S^{N-1} (slower, used for cross-validation).
double mu_k(int N, double kappa, int k);
double mu_k_oracle(int N, double kappa, int k);

struct CertificateError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct LatticeSpectrum {
    int N = 2;
    double kappa = 1.0;
    int k_max = 32;
    std::vector<double> mu;  // 0..k_max
    double gamma_n = 0.0;
    double mu_sup = 0.0;     // kernel-mass bound on sup_k mu_k
    double tail_bound = 0.0; // (lambda_{kmax+1}-lambda_1)/mu_sup
    bool tail_certified = false;

    double lambda_k(int k) const { return double(k) * (k + N - 2); }
    double sigma(double gamma, int k) const;
};

// gamma_N = min(lambda_1/mu_1, min_{2<=k<=k_max} (lambda_k-lambda_1)/(mu_k-mu_1))
// with the crude-mass tail certificate; throws CertificateError if k_max is
// too small to certify the tail.
LatticeSpectrum gamma_n(int N, double kappa, int k_max);

// Diagonal inverse of the even linearization: divides even-degree-k
// coefficients by sigma_gamma(k). Rejects odd input and near-singular sigma.
std::vector<double> harmonic_inverse(const StarBasis& basis, const LatticeSpectrum& sp,
                                     double gamma, const std::vector<double>& coeffs);

// ---- star-shape geometry (variational form of the first area variation)
std::vector<double> area_variation_density(const StarBasis& basis, const StarShape& s);
std::vector<double> star_mean_curvature(const StarBasis& basis, const StarShape& s);
double star_area(const StarBasis& basis, const StarShape& s);
// linearization of the mean curvature at s in direction (coefficients) w
std::vector<double> star_mc_linearized(const StarBasis& basis, const StarShape& s,
                                       const std::vector<double>& w);

// ---- interactions
struct LatticeQuad {
    int ang_panels = 14; // graded outer panels toward the target direction
    int ang_gl = 10;
    int rad_gl = 14;     // split radial GL (each side of the closest point)
    int lon = 32;        // N=3: azimuth nodes around the rotated pole
    int img_ang = 64;    // image integrals (smooth): angular nodes
    int img_rad = 16;    //                          radial GL nodes
};

// self interaction int_{B_phi} G_{kappa,N}(|theta phi(theta) - Z|) dZ on the grid
std::vector<double> self_interaction(const StarBasis& basis, const StarShape& s,
                                     double kappa, const LatticeQuad& q = {});
// boundary-integral derivative in direction w (coefficients)
std::vector<double> d_self_interaction(const StarBasis& basis, const StarShape& s,
                                       const std::vector<double>& w, double kappa,
                                       const LatticeQuad& q = {});

// closed forms of the round-shape self interaction (derived; oracle-validated)
double ball_self_potential(int N, double kappa, double R);

// sum over images p/eps, |p| <= cutoff_radius; empty lattice gives zero field
std::vector<double> lattice_interaction(const StarBasis& basis, const StarShape& s,
                                        const BravaisLattice& lat, double kappa,
                                        double eps, double cutoff_radius,
                                        const LatticeQuad& q = {});
std::vector<double> d_lattice_interaction(const StarBasis& basis, const StarShape& s,
                                          const std::vector<double>& w,
                                          const BravaisLattice& lat, double kappa,
                                          double eps, double cutoff_radius,
                                          const LatticeQuad& q = {});

// ---- first-order lattice fields
double c_n_constant(int N, double kappa); // int_{B^N} e^{-kappa y.e1} dy
// xi_eps (N=2) / zeta_eps (N=3) amplitude at shell radius l
double leading_amplitude(int N, double kappa, double eps, double l);
// U_eps or V_eps sampled on the basis grid
std::vector<double> first_order_field(const StarBasis& basis, const BravaisLattice& lat,
                                      double kappa, double eps);
// 1 - L_e^{-1}(gamma * even-projection of the first-order field)
StarShape first_order_shape(const StarBasis& basis, const BravaisLattice& lat,
                            double kappa, double gamma, double eps,
                            const LatticeSpectrum& sp, int kband);

struct NonconstancyReport {
    double aligned;       // field value at e1
    double perpendicular; // field value at e_N
    double ratio;
    std::string verdict;  // "non-constant" or "open (inconclusive at first order)"
};
NonconstancyReport nonconstancy_metrics(int N, const BravaisLattice& lat, double kappa,
                                        double eps);

// ---- full nonlinear solve Q(eps, 1+omega) = Q(0, 1) on even harmonics
struct LatticeSolveResult {
    StarShape shape;
    double residual_inf = 0.0;
    int newton_iters = 0;
    double deviation_inf = 0.0; // max |omega|
    double gamma_n_used = 0.0;
};
LatticeSolveResult newton_lattice_solve(const StarBasis& basis, const BravaisLattice& lat,
                                        double kappa, double gamma, double eps,
                                        const LatticeSpectrum& sp, int kband,
                                        double tol = 1e-8, const LatticeQuad& q = {});

} // namespace patternforge
