#pragma once

// Internal: cached linearization of the slab (or stacked-slab) operator at one
// Newton iterate. Trapezoid kernels are evaluated once per (target, fine node)
// and the singular patch is collapsed to a coefficient matrix, so a Krylov
// application reduces to dense products plus the curvature linearization.

#include "patternforge/lamellae.hpp"
#include "patternforge/slab_operator.hpp"

#include <utility>
#include <vector>

namespace patternforge {

class SlabLinearOp {
  public:
    SlabLinearOp(const SlabContext& ctx, const SlabShape& shape,
                 const StackTables* stack = nullptr);

    // pair coefficients of DF(phi)[w] (+ stack derivative when present)
    CosSpectrum apply(const CosSpectrum& w) const;

  private:
    void basis_row(double x, double y, std::vector<double>& out) const;
    SymGrid unfold(const std::vector<double>& vals) const;

    const SlabContext& ctx_;
    SlabShape shape_;
    std::vector<std::pair<int, int>> wedge_;
    int nt_, nq_, kmax_;
    std::size_t npairs_;
    std::vector<double> k1_, k2_, k1_row_, k2_row_;
    std::vector<double> patch_mat_, patch_sum_;
};

} // namespace patternforge
