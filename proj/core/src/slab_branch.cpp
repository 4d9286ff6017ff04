#include "patternforge/slab_branch.hpp"

#include "slab_linear_op.hpp"

#include "patternforge/quadrature.hpp"
#include "patternforge/threads.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace patternforge {

namespace {

constexpr double kTwoPi = 2.0 * M_PI;

double norm2(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

} // namespace

GmresStats gmres(const std::function<std::vector<double>(const std::vector<double>&)>& apply,
                 const std::vector<double>& rhs,
                 const std::function<std::vector<double>(const std::vector<double>&)>& precond,
                 std::vector<double>& x, double rel_tol, int max_iter) {
    const std::size_t n = rhs.size();
    x.assign(n, 0.0);
    const double bnorm = norm2(rhs);
    if (bnorm == 0.0) return {0, 0.0, true};

    std::vector<std::vector<double>> V; // Arnoldi basis
    std::vector<std::vector<double>> H; // Hessenberg columns H[j] has j+2 entries
    std::vector<double> cs, sn, g;
    V.push_back(rhs);
    for (double& t : V[0]) t /= bnorm;
    g.push_back(bnorm);

    int it = 0;
    double res = 1.0;
    for (; it < max_iter; ++it) {
        std::vector<double> w = apply(precond(V[it]));
        std::vector<double> h(it + 2, 0.0);
        for (int j = 0; j <= it; ++j) {
            double dot = 0.0;
            for (std::size_t i = 0; i < n; ++i) dot += w[i] * V[j][i];
            h[j] = dot;
            for (std::size_t i = 0; i < n; ++i) w[i] -= dot * V[j][i];
        }
        // single re-orthogonalization pass
        for (int j = 0; j <= it; ++j) {
            double dot = 0.0;
            for (std::size_t i = 0; i < n; ++i) dot += w[i] * V[j][i];
            h[j] += dot;
            for (std::size_t i = 0; i < n; ++i) w[i] -= dot * V[j][i];
        }
        h[it + 1] = norm2(w);
        if (h[it + 1] > 1e-300)
            for (double& t : w) t /= h[it + 1];
        // apply existing rotations
        for (int j = 0; j < it; ++j) {
            double t = cs[j] * h[j] + sn[j] * h[j + 1];
            h[j + 1] = -sn[j] * h[j] + cs[j] * h[j + 1];
            h[j] = t;
        }
        double denom = std::hypot(h[it], h[it + 1]);
        cs.push_back(h[it] / denom);
        sn.push_back(h[it + 1] / denom);
        h[it] = denom;
        h[it + 1] = 0.0;
        g.push_back(-sn[it] * g[it]);
        g[it] *= cs[it];
        H.push_back(h);
        V.push_back(std::move(w));
        res = std::abs(g[it + 1]) / bnorm;
        if (res < rel_tol) {
            ++it;
            break;
        }
    }
    // back substitution
    std::vector<double> y(it, 0.0);
    for (int j = it - 1; j >= 0; --j) {
        double acc = g[j];
        for (int k = j + 1; k < it; ++k) acc -= H[k][j] * y[k];
        y[j] = acc / H[j][j];
    }
    std::vector<double> z(n, 0.0);
    for (int j = 0; j < it; ++j)
        for (std::size_t i = 0; i < n; ++i) z[i] += y[j] * V[j][i];
    x = precond(z);
    return {it, res, res < rel_tol};
}

namespace {

double sup_norm(const SymGrid& g) {
    double m = 0.0;
    for (double v : g.v) m = std::max(m, std::abs(v));
    return m;
}

double tail_mass(const SymGrid& field, int kmax, int n) {
    int kt = std::min(2 * kmax, n / 2 - 1);
    CosSpectrum full = analyze(field, kt);
    double acc = 0.0;
    for (std::size_t i = 0; i < full.c.size(); ++i) {
        auto [k1, k2] = full.pair_at(i);
        if (k2 > kmax) acc += full.c[i] * full.c[i];
    }
    return std::sqrt(acc);
}

} // namespace

BranchPoint solve_at_s(const SlabContext& ctx, double s, double lambda_init,
                       const CosSpectrum& v_init, const SolverOptions& opt) {
    const GammaWindow w = gamma_window(ctx.params.kappa);
    if (!(ctx.params.gamma > w.lower && ctx.params.gamma < w.upper))
        throw std::domain_error("solve_at_s: gamma outside the admissible window");
    if (std::abs(s) > opt.s_max)
        throw std::domain_error("solve_at_s: |s| beyond configured s_max");

    BranchPoint pt;
    pt.s = s;
    if (s == 0.0) {
        pt.lambda_s = lambda_star(ctx.params);
        pt.v = CosSpectrum(opt.kmax);
        pt.residual_inf = 0.0;
        pt.newton_iters = 0;
        pt.h_value = ctx.params.gamma * flat_potential_closed(ctx.params.kappa, pt.lambda_s);
        return pt;
    }

    const int kmax = opt.kmax;
    const std::size_t npairs = CosSpectrum::pair_count(kmax);
    const std::size_t p01 = CosSpectrum::pair_index(0, 1, kmax);

    double lambda = lambda_init;
    CosSpectrum v = v_init.kmax == kmax ? v_init : CosSpectrum(kmax);
    if (v_init.kmax != kmax && v_init.kmax > 0) {
        for (std::size_t i = 0; i < v.c.size(); ++i) {
            auto [k1, k2] = v.pair_at(i);
            if (k1 <= v_init.kmax && k2 <= v_init.kmax) v.c[i] = v_init.at(k1, k2);
        }
    }
    v.c[p01] = 0.0;

    double resid = 0.0;
    SymGrid gfield;
    for (int iter = 0; iter <= opt.max_newton; ++iter) {
        // u = s (vbar + v)
        CosSpectrum u = v;
        u.c[p01] += kTwoPi; // vbar = 2 pi * b01
        for (double& c : u.c) c *= s;

        SlabShape shape{lambda, u};
        if (shape.min_phi() <= 0.0)
            throw SolverError("solve_at_s: shape degenerated (min phi <= 0)", resid);

        gfield = residual_G(ctx, lambda, u);
        resid = sup_norm(gfield);
        if (resid <= opt.newton_tol) {
            pt.lambda_s = lambda;
            pt.v = v;
            pt.residual_inf = resid;
            pt.newton_iters = iter;
            pt.v_norm2 = v.l2_norm();
            pt.tail_residual = tail_mass(gfield, kmax, ctx.quad.n_target);
            pt.h_value = ctx.params.gamma * flat_potential_closed(ctx.params.kappa, lambda);
            return pt;
        }
        if (iter == opt.max_newton) break;

        CosSpectrum m = analyze(gfield, kmax);
        for (double& c : m.c) c /= s;

        SlabLinearOp lin(ctx, shape);
        // lambda column: (DF(phi)[1] - F'(lambda) 1)/s; F'(lambda) = sigma(0)
        CosSpectrum one(kmax);
        one.c[CosSpectrum::pair_index(0, 0, kmax)] = kTwoPi;
        CosSpectrum lcol = lin.apply(one);
        lcol.c[CosSpectrum::pair_index(0, 0, kmax)] -=
            sigma_value(ctx.params, lambda, 0.0) * kTwoPi;
        for (double& c : lcol.c) c /= s;

        const double dls = dsigma_dlambda(ctx.params, lambda, 1.0);
        auto apply = [&](const std::vector<double>& d) {
            CosSpectrum wv(kmax);
            for (std::size_t i = 0; i < npairs; ++i) wv.c[i] = i == p01 ? 0.0 : d[i];
            CosSpectrum out = lin.apply(wv);
            const double dl = d[p01];
            for (std::size_t i = 0; i < npairs; ++i) out.c[i] += dl * lcol.c[i];
            return out.c;
        };
        auto precond = [&](const std::vector<double>& z) {
            std::vector<double> d(npairs);
            for (std::size_t i = 0; i < npairs; ++i) {
                if (i == p01) {
                    d[i] = z[i] / (kTwoPi * dls);
                } else {
                    auto [k1, k2] = CosSpectrum(kmax).pair_at(i);
                    double sg = sigma_value(ctx.params, lambda,
                                            std::hypot(double(k1), double(k2)));
                    d[i] = z[i] / sg;
                }
            }
            return d;
        };
        std::vector<double> rhs(npairs);
        for (std::size_t i = 0; i < npairs; ++i) rhs[i] = -m.c[i];
        std::vector<double> dx;
        GmresStats st = gmres(apply, rhs, precond, dx, opt.krylov_tol, opt.max_krylov);
        if (!st.converged && st.rel_residual > 1e-4)
            throw SolverError("solve_at_s: Krylov stagnation", resid);

        lambda += dx[p01];
        if (!(lambda > 0.0))
            throw SolverError("solve_at_s: lambda left the positive axis", resid);
        for (std::size_t i = 0; i < npairs; ++i)
            if (i != p01) v.c[i] += dx[i];
    }
    std::ostringstream os;
    os << "solve_at_s: Newton did not reach tol " << opt.newton_tol << " after "
       << opt.max_newton << " iterations (residual " << resid << ")";
    throw SolverError(os.str(), resid);
}

Branch continue_branch(const SlabContext& ctx, std::vector<double> s_grid,
                       const SolverOptions& opt) {
    std::sort(s_grid.begin(), s_grid.end());
    bool has_zero = false;
    for (double s : s_grid) has_zero |= s == 0.0;
    if (!has_zero)
        throw std::domain_error("continue_branch: the s grid must start at 0");

    Branch br;
    br.params = ctx.params;
    BranchPoint origin = solve_at_s(ctx, 0.0, 0.0, CosSpectrum(opt.kmax), opt);
    br.points.push_back(origin);

    auto march = [&](std::vector<double> side) {
        double lambda = origin.lambda_s;
        CosSpectrum v(opt.kmax);
        std::vector<BranchPoint> out;
        for (double s : side) {
            try {
                BranchPoint p = solve_at_s(ctx, s, lambda, v, opt);
                if (std::abs(p.lambda_s - lambda) >
                    opt.lambda_jump_factor * std::max(1.0, std::abs(lambda))) {
                    std::ostringstream os;
                    os << "branch jump detected at s=" << s;
                    br.diagnostic += os.str() + "; ";
                    break;
                }
                lambda = p.lambda_s;
                v = p.v;
                out.push_back(std::move(p));
            } catch (const SolverError& e) {
                std::ostringstream os;
                os << "branch terminated at s=" << s << ": " << e.what();
                br.diagnostic += os.str() + "; ";
                break;
            }
        }
        return out;
    };

    std::vector<double> pos, neg;
    for (double s : s_grid) {
        if (s > 0.0) pos.push_back(s);
        if (s < 0.0) neg.push_back(s);
    }
    std::sort(neg.begin(), neg.end(), [](double a, double b) { return a > b; });
    auto up = march(pos);
    auto dn = march(neg);
    for (auto& p : up) br.points.push_back(std::move(p));
    for (auto& p : dn) br.points.push_back(std::move(p));
    std::sort(br.points.begin(), br.points.end(),
              [](const BranchPoint& a, const BranchPoint& b) { return a.s < b.s; });
    return br;
}

} // namespace patternforge
