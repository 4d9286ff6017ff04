#pragma once

#include <string>
#include <vector>

namespace patternforge {

struct KernelParams {
    double kappa; // screening, inverse length; must be > 0
};

// e^{-kappa r}/r. Throws std::domain_error for r <= 0 or kappa <= 0.
double yukawa(double kappa, double r);

// Modified Bessel functions of the second kind, orders 0 and 1.
// Relative accuracy <= 1e-12 on (1e-8, 700); exact 0 once e^{-x} underflows.
double bessel_k0(double x);
double bessel_k1(double x);

struct KResult {
    double value;
    bool underflowed; // true when x was past the e^{-x} underflow threshold
};
KResult bessel_k(int order, double x);

// Dimension-dispatched kernel: N=2 -> 2*K0(kappa r), N=3 -> yukawa.
double g_kn(int dimension, double kappa, double r);

struct IdentityReport {
    std::string id;
    double kappa, alpha, beta, delta; // parameter sample (unused slots = 0)
    double lhs;                       // quadrature
    double rhs;                       // closed form
    double residual;                  // |lhs-rhs| / max(|rhs|, 1)
    bool converged;
};

// Evaluates the five kernel integral identities by quadrature against their
// closed forms. alpha must be > 0 where the closed form requires it.
std::vector<IdentityReport> identity_suite(double kappa, double alpha,
                                           double beta, double delta);

} // namespace patternforge
