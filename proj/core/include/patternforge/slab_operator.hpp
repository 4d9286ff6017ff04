#pragma once

#include "patternforge/periodic_field.hpp"
#include "patternforge/slab_spectrum.hpp"

#include <memory>
#include <stdexcept>
#include <vector>

namespace patternforge {

// Shape phi = lambda + u, u a symmetric band-limited perturbation.
struct SlabShape {
    double lambda = 1.0;
    CosSpectrum u; // perturbation, band kmax
    double min_phi(int n_probe = 128) const;
};

struct QuadratureSpec {
    int n_target = 64;     // evaluation grid per axis (even)
    int n_quad = 128;      // fine trapezoid grid per axis (multiple of n_target)
    double rho0 = 2.0;     // cutoff radius of the singular patch
    double cut_start = 0.5; // chi == 1 for r <= cut_start*rho0
    int patch_panels = 10; // geometric radial panels on [0, rho0]
    int patch_gl = 14;     // GL nodes per radial panel
    int patch_angular = 80;
    int inner_gl = 24;     // GL nodes for the thickness integrals Q(a, .)
    int cheb_b1 = 24;      // table order in b on [0, b1_max]
    int cheb_b2 = 18;      // table order in b on [b2_lo, b2_hi]
    double b1_max = 1.1;   // admissible |phi(s) - phi(t)|
    double tail_tol = 1e-13; // image-sum truncation (relative to kernel scale)
    double tolerance = 1e-8; // advertised accuracy target of field evaluations

    void validate() const;
};

struct QuadratureRangeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Lattice-summed kernel tables over one period cell. Built once per
// (kappa, spec, lambda range); shared read-only by all evaluations.
class NonlocalTables {
  public:
    NonlocalTables(double kappa, const QuadratureSpec& spec, double lambda_min,
                   double lambda_max);

    double kappa() const { return kappa_; }
    const QuadratureSpec& spec() const { return spec_; }
    double b2_lo() const { return b2_lo_; }
    double b2_hi() const { return b2_hi_; }

    // table evaluations at tau-grid node (i,j) of the fine grid
    double sga(int i, int j, double b) const;  // sum_m G(sqrt(a^2+b^2)) - chi m0
    double sgb(int i, int j, double b) const;  // sum_m G(sqrt(a^2+b^2)), b in b2 range
    double sqa(int i, int j, double b) const;  // sum_m Q(a,b) - chi m0 (odd in b)
    double sqbo(int i, int j, double b) const; // sum_m [Q(a,b)-Q(a,b_ref)]
    double sqbx(int i, int j, double b) const; // sum_m Q(a,b) - chi m0

    // thickness integral Q(a, b) = int_0^b G_kappa(sqrt(a^2+v^2)) dv, evaluated
    // via v = a sinh(w) (uniformly accurate down to a -> 0); odd in b.
    double q_exact(double a, double b) const;
    // int_{vlo}^{vhi} G_kappa(sqrt(a^2+v^2)) dv for 0 < vlo <= vhi (regular)
    double q_window(double a, double vlo, double vhi) const;
    double chi(double r) const;
    // wrapped distance of tau node (i,j)
    double wrapped_dist(int i, int j) const;

  private:
    double kappa_;
    QuadratureSpec spec_;
    double b2_lo_, b2_hi_, b_ref_;
    int nq_;
    std::vector<double> t_sga_, t_sgb_, t_sqa_, t_sqbo_, t_sqbx_; // [node][coef]
    std::vector<double> dist_;
    double eval(const std::vector<double>& t, int order, double lo, double hi,
                int i, int j, double b) const;
};

// Shared evaluation context for one (kappa, gamma) slab problem.
struct SlabContext {
    SlabParams params;
    QuadratureSpec quad;
    std::shared_ptr<const NonlocalTables> tables;

    SlabContext(const SlabParams& p, const QuadratureSpec& q, double lambda_min,
                double lambda_max);
};

// -div(grad phi / sqrt(1+|grad phi|^2)) sampled on the target grid; depends on
// u only (the base offset drops out of all derivatives).
SymGrid mean_curvature_graph(const CosSpectrum& u, int n);
// surface-area functional of the graph over one period cell
double graph_area(const CosSpectrum& u, int n);
// linearization of the mean curvature at u in direction w
SymGrid mean_curvature_linearized(const CosSpectrum& u, const CosSpectrum& w, int n);

// Closed flat value of the full operator: F(lambda) = gamma Vflat(lambda),
// Vflat(lambda) = (2 pi / kappa^2)(1 - e^{-2 kappa lambda}); F'(lambda) = sigma(0).
double flat_potential_closed(double kappa, double lambda);

// gamma-free interaction potential of the slab body evaluated on its upper
// face; at u = 0 reproduces flat_potential_closed(kappa, lambda)/1 by honest
// quadrature (no use of the closed form).
SymGrid yukawa_slab_potential(const SlabContext& ctx, const SlabShape& shape);

// G(lambda, u) = F(lambda+u) - F(lambda); identically zero at u = 0.
SymGrid residual_G(const SlabContext& ctx, double lambda, const CosSpectrum& u);

// action of DF(lambda+u) on w (linearized curvature + the two kernel integrals)
SymGrid jacobian_action(const SlabContext& ctx, const SlabShape& shape,
                        const CosSpectrum& w);

// diagonal action at the flat state: each coefficient times sigma(|k|)
CosSpectrum flat_action(const SlabParams& p, double lambda, const CosSpectrum& s);

} // namespace patternforge
