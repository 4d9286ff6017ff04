#pragma once

#include <map>
#include <stdexcept>
#include <string>

namespace patternforge {

struct SlabParams {
    double kappa;
    double gamma;
};

struct GammaWindow {
    double lower;
    double upper;
    bool nonempty; // lower < upper; fails for kappa^4 + kappa^2 >= 1
};

struct SpectrumReport {
    double lambda_star;
    std::map<int, double> sigma_at; // ell -> sigma_{lambda*,gamma}(ell)
    bool kernel_simple;             // sigma(0)>0, sigma(1)=0 the only zero
    bool range_coercive;            // strict increase for ell>=1, sigma/ell^2 -> 1
    bool transversal;               // d/dlambda sigma(1) < 0 at lambda*
    std::string failure; // offending detail when a flag is false
};

// Eigenvalue of the flat-slab linearization on modes with |k| = x (real x >= 0):
//   sigma(x) = x^2 - 2 pi gamma [ 1/k - 1/s - e^{-2 l s}/s - e^{-2 l k}/k ],
// s = sqrt(kappa^2 + x^2). Throws for lambda <= 0.
double sigma_value(const SlabParams& p, double lambda, double x);
double sigma_closed(const SlabParams& p, double lambda, int ell);
// analytic d/dlambda: -4 pi gamma (e^{-2 l s} + e^{-2 l k})
double dsigma_dlambda(const SlabParams& p, double lambda, double x);

// Anti-regression oracle: evaluates sigma at mode k=(k1,k2) from the raw
// plane integrals by 2D polar quadrature, independent of the closed form.
double sigma_oracle(const SlabParams& p, double lambda, int k1, int k2);

GammaWindow gamma_window(double kappa);

struct NoBifurcation : std::runtime_error {
    double limit_value; // lim_{lambda->inf} sigma(1) = 1 - 2 pi g (1/k - 1/sqrt(k^2+1))
    explicit NoBifurcation(double lim)
        : std::runtime_error("no bifurcation point: sigma(1) has no zero"),
          limit_value(lim) {}
};

// Unique zero of lambda -> sigma(lambda, 1); |sigma| < 1e-12 at the result.
// Throws NoBifurcation when gamma <= gamma_window(kappa).lower.
double lambda_star(const SlabParams& p);

// Tabulates the spectrum at lambda_star and checks the certificate flags,
// including the monotone-derivative sufficient condition at sampled x >= 1.
SpectrumReport spectral_certificate(const SlabParams& p, int ell_max);

} // namespace patternforge
