#include "slab_linear_op.hpp"

#include "patternforge/quadrature.hpp"
#include "patternforge/threads.hpp"

#include <cmath>

namespace patternforge {

namespace {
constexpr double kTwoPi = 2.0 * M_PI;
}

SlabLinearOp::SlabLinearOp(const SlabContext& ctx, const SlabShape& shape,
                           const StackTables* stack)
    : ctx_(ctx), shape_(shape) {
    const NonlocalTables& T = *ctx.tables;
    const QuadratureSpec& q = ctx.quad;
    const int nt = q.n_target, nq = q.n_quad, mult = nq / nt;
    nt_ = nt;
    nq_ = nq;
    npairs_ = CosSpectrum::pair_count(shape.u.kmax);
    kmax_ = shape.u.kmax;
    for (int a = 0; a <= nt / 2; ++a)
        for (int b = a; b <= nt / 2; ++b) wedge_.emplace_back(a, b);

    SymGrid uf = synthesize(shape.u, nq);
    CosTensor ut = to_tensor(shape.u);
    const double two_l = 2.0 * shape.lambda;
    const std::size_t nw = wedge_.size();
    k1_.assign(nw * std::size_t(nq) * nq, 0.0);
    k2_.assign(nw * std::size_t(nq) * nq, 0.0);
    k1_row_.assign(nw, 0.0);
    k2_row_.assign(nw, 0.0);
    patch_mat_.assign(nw * npairs_, 0.0);
    patch_sum_.assign(nw, 0.0);

    Rule1D rad = geometric_panels(0.0, q.rho0, q.patch_panels, q.patch_gl, 1.7, true);
    const int nth = q.patch_angular;
    const double wth = kTwoPi / nth;
    const bool stacked = stack != nullptr && !stack->active().empty();

    parallel_for(nw, [&](std::size_t wi) {
        auto [m1, m2] = wedge_[wi];
        const double tx = kTwoPi * m1 / nt, ty = kTwoPi * m2 / nt;
        const double utv = uf.v[std::size_t((m1 * mult + nq / 2) % nq) * nq +
                                ((m2 * mult + nq / 2) % nq)];
        double* K1 = &k1_[wi * std::size_t(nq) * nq];
        double* K2 = &k2_[wi * std::size_t(nq) * nq];
        const double h2 = (kTwoPi / nq) * (kTwoPi / nq);
        double s1 = 0.0, s2 = 0.0;
        for (int sj = 0; sj < nq; ++sj) {
            const int ti = ((m1 * mult - (sj - nq / 2)) % nq + nq) % nq;
            for (int sk = 0; sk < nq; ++sk) {
                const int tj = ((m2 * mult - (sk - nq / 2)) % nq + nq) % nq;
                const double us = uf.v[std::size_t(sj) * nq + sk];
                const double b1 = us - utv;
                const double b2 = two_l + us + utv;
                double a = T.sga(ti, tj, b1);
                double b = T.sgb(ti, tj, b2);
                if (stacked) {
                    for (int l : stack->active()) {
                        const double c = stack->plane_offset(l);
                        a += stack->stg(l, ti, tj, c - b1) + stack->stg(l, ti, tj, c + b1);
                        b += stack->stg(l, ti, tj, c - b2) + stack->stg(l, ti, tj, c + b2);
                    }
                }
                a *= h2;
                b *= h2;
                K1[std::size_t(sj) * nq + sk] = a;
                K2[std::size_t(sj) * nq + sk] = b;
                s1 += a;
                s2 += b;
            }
        }
        k1_row_[wi] = s1;
        k2_row_[wi] = s2;

        std::vector<double> brow(npairs_);
        double* pm = &patch_mat_[wi * npairs_];
        double psum = 0.0;
        for (std::size_t ri = 0; ri < rad.size(); ++ri) {
            const double r = rad.x[ri];
            const double c = T.chi(r);
            if (c <= 0.0) continue;
            const double base_w = rad.w[ri] * r * wth * c;
            for (int ai = 0; ai < nth; ++ai) {
                const double th = kTwoPi * ai / nth;
                const double sx = tx - r * std::cos(th);
                const double sy = ty - r * std::sin(th);
                const double us = eval_point(ut, sx, sy);
                const double d = std::hypot(r, us - utv);
                const double ker = base_w * std::exp(-T.kappa() * d) / d;
                basis_row(sx, sy, brow);
                for (std::size_t p = 0; p < npairs_; ++p) pm[p] += ker * brow[p];
                psum += ker;
            }
        }
        patch_sum_[wi] = psum;
    });
}

CosSpectrum SlabLinearOp::apply(const CosSpectrum& w) const {
    const int nq = nq_;
    SymGrid wf = synthesize(w, nq);
    std::vector<double> vals(wedge_.size());
    const int mult = nq_ / nt_;
    parallel_for(wedge_.size(), [&](std::size_t wi) {
        auto [m1, m2] = wedge_[wi];
        const double wt = wf.v[std::size_t((m1 * mult + nq / 2) % nq) * nq +
                               ((m2 * mult + nq / 2) % nq)];
        const double* K1 = &k1_[wi * std::size_t(nq) * nq];
        const double* K2 = &k2_[wi * std::size_t(nq) * nq];
        double acc = 0.0;
        const std::size_t nn = std::size_t(nq) * nq;
        for (std::size_t i = 0; i < nn; ++i) acc += wf.v[i] * (K1[i] + K2[i]);
        acc += wt * (k2_row_[wi] - k1_row_[wi]);
        const double* pm = &patch_mat_[wi * npairs_];
        double pacc = 0.0;
        for (std::size_t p = 0; p < npairs_; ++p) pacc += pm[p] * w.c[p];
        acc += pacc - wt * patch_sum_[wi];
        vals[wi] = acc;
    });
    SymGrid nl = unfold(vals);
    SymGrid mc = mean_curvature_linearized(shape_.u, w, nt_);
    for (std::size_t i = 0; i < nl.v.size(); ++i)
        nl.v[i] = mc.v[i] + ctx_.params.gamma * nl.v[i];
    return analyze(nl, kmax_);
}

SymGrid SlabLinearOp::unfold(const std::vector<double>& vals) const {
    SymGrid g(nt_);
    const int n = nt_;
    for (int i = 0; i < n; ++i) {
        int mi = std::abs(i - n / 2);
        for (int j = 0; j < n; ++j) {
            int mj = std::abs(j - n / 2);
            int a = std::min(mi, mj), b = std::max(mi, mj);
            std::size_t idx =
                std::size_t(a) * (n / 2 + 1) - std::size_t(a) * (a - 1) / 2 + (b - a);
            g.at(i, j) = vals[idx];
        }
    }
    return g;
}

void SlabLinearOp::basis_row(double x, double y, std::vector<double>& out) const {
    const int K = kmax_;
    const double cx1 = std::cos(x), cy1 = std::cos(y);
    thread_local std::vector<double> cx, cy;
    cx.assign(K + 1, 1.0);
    cy.assign(K + 1, 1.0);
    if (K >= 1) {
        cx[1] = cx1;
        cy[1] = cy1;
        for (int k = 2; k <= K; ++k) {
            cx[k] = 2.0 * cx1 * cx[k - 1] - cx[k - 2];
            cy[k] = 2.0 * cy1 * cy[k - 1] - cy[k - 2];
        }
    }
    const double inv2pi = 1.0 / kTwoPi, invpi = 1.0 / M_PI,
                 invpis2 = 1.0 / (M_PI * std::sqrt(2.0));
    std::size_t idx = 0;
    for (int k1 = 0; k1 <= K; ++k1)
        for (int k2 = k1; k2 <= K; ++k2, ++idx) {
            if (k1 == 0 && k2 == 0)
                out[idx] = inv2pi;
            else if (k1 == 0)
                out[idx] = (cx[k2] + cy[k2]) * inv2pi;
            else if (k1 == k2)
                out[idx] = cx[k1] * cy[k1] * invpi;
            else
                out[idx] = (cx[k1] * cy[k2] + cx[k2] * cy[k1]) * invpis2;
        }
}

} // namespace patternforge
