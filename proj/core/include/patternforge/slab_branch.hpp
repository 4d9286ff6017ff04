#pragma once

#include "patternforge/slab_operator.hpp"

#include <functional>
#include <string>
#include <vector>

namespace patternforge {

struct BranchPoint {
    double s = 0.0;
    double lambda_s = 0.0;
    CosSpectrum v;              // orthogonal to vbar (no (0,1) component)
    double residual_inf = 0.0;  // sup norm of the full nonlinear residual
    double v_norm2 = 0.0;
    double tail_residual = 0.0; // coefficient mass beyond the solve band
    int newton_iters = 0;
    double h_value = 0.0;       // gamma * flat closed potential at lambda_s
};

struct Branch {
    SlabParams params;
    std::vector<BranchPoint> points; // sorted by s ascending
    std::string diagnostic;          // set when a side terminated early
};

struct SolverOptions {
    int kmax = 12;
    double newton_tol = 1e-8;
    int max_newton = 25;
    double krylov_tol = 1e-10;
    int max_krylov = 80;
    double s_max = 0.2;
    double lambda_jump_factor = 0.25; // continuity detector along the branch
};

struct SolverError : std::runtime_error {
    double last_residual;
    SolverError(const std::string& msg, double res)
        : std::runtime_error(msg), last_residual(res) {}
};

// Solve P1[G(lambda, s(vbar+v))] = 0 (paired with lambda) and the orthogonal
// block (paired with v) by Newton-Krylov with the flat-sigma preconditioner.
BranchPoint solve_at_s(const SlabContext& ctx, double s, double lambda_init,
                       const CosSpectrum& v_init, const SolverOptions& optel = {});

// March outward from s = 0 with the previous point as predictor. Accepts the
// grid in any order; points are solved in increasing |s| per sign.
Branch continue_branch(const SlabContext& ctx, std::vector<double> s_grid,
                       const SolverOptions& opt = {});

// dense GMRES without restarts on a user-supplied operator; right-preconditioned
struct GmresStats {
    int iterations;
    double rel_residual;
    bool converged;
};
GmresStats gmres(const std::function<std::vector<double>(const std::vector<double>&)>& apply,
                 const std::vector<double>& rhs,
                 const std::function<std::vector<double>(const std::vector<double>&)>& precond,
                 std::vector<double>& x, double rel_tol, int max_iter);

} // namespace patternforge
