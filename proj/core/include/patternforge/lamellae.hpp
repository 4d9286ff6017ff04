#pragma once

#include "patternforge/slab_branch.hpp"
#include "patternforge/slab_operator.hpp"

#include <memory>

namespace patternforge {

struct LamellaePoint {
    double epsilon = 0.0;
    double s = 0.0;
    double delta = 1.0;        // lambda_{eps,s} = delta * lambda_star
    double lambda_eps_s = 0.0;
    CosSpectrum v;             // orthogonal to vbar
    double residual_inf = 0.0; // full equation, sup norm on the grid
    int newton_iters = 0;
};

// Lattice-summed kernel tables for the periodic stack of slabs with spacing
// 1/|eps| along the third axis. Image magnitudes above p_max (from the tail
// estimate with gap factor c_gap = 1 - 2 |eps| max phi) are dropped; images
// whose whole contribution falls below the tolerance are skipped early.
class StackTables {
  public:
    StackTables(const SlabContext& ctx, double epsilon, double phi_cap,
                double tol = 1e-12);

    double epsilon() const { return eps_; }
    int p_max() const { return p_max_; }
    const std::vector<int>& active() const { return active_; } // magnitudes kept
    double plane_offset(int l) const;                          // l / |eps|

    // sum_m [Q(|tau-m|, h) - Q(|tau-m|, c_l)], h in the window around c_l
    double stq(int l, int i, int j, double h) const;
    // sum_m G_kappa(sqrt(|tau-m|^2 + h^2))
    double stg(int l, int i, int j, double h) const;
    double window_lo(int l) const;
    double window_hi(int l) const;

  private:
    const SlabContext* ctx_;
    double eps_;
    int p_max_;
    int nq_;
    int order_;
    std::vector<int> active_;
    std::vector<std::vector<double>> tq_, tg_; // per magnitude: [node][coef]
    std::vector<double> lo_, hi_;
};

// Absolute stack interaction F^(eps, psi) on the target grid (gamma-free).
// eps = 0 returns the zero field (empty image sum).
SymGrid stack_interaction(const SlabContext& ctx, const SlabShape& shape,
                          double epsilon);

// Closed form of the flat-stack interaction, derived by reducing every image
// slab with the offset plane integral: (4 pi / kappa^2) sinh(2 kappa lambda)
// q/(1-q), q = e^{-kappa/|eps|}. Used as the oracle for the quadrature path.
double stack_flat_closed(double kappa, double lambda, double epsilon);

// Solve M(eps, s, delta, v) = 0 by Newton in (delta, v), lambda* held fixed
// from the eps = 0 spectrum. init_* seed the iteration (slab branch values).
LamellaePoint solve_lamellae(const SlabContext& ctx, double epsilon, double s,
                             double delta_init, const CosSpectrum& v_init,
                             const SolverOptions& opt = {});

} // namespace patternforge
