#include "patternforge/lamellae.hpp"

#include "patternforge/quadrature.hpp"
#include "patternforge/threads.hpp"
#include "slab_linear_op.hpp"

#include <cmath>
#include <sstream>

namespace patternforge {

namespace {

constexpr double kTwoPi = 2.0 * M_PI;

std::vector<std::pair<int, int>> make_wedge(int n) {
    std::vector<std::pair<int, int>> w;
    for (int a = 0; a <= n / 2; ++a)
        for (int b = a; b <= n / 2; ++b) w.emplace_back(a, b);
    return w;
}

SymGrid unfold_wedge(const std::vector<double>& vals, int n) {
    SymGrid g(n);
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

double sup_norm(const SymGrid& g) {
    double m = 0.0;
    for (double v : g.v) m = std::max(m, std::abs(v));
    return m;
}

} // namespace

double stack_flat_closed(double kappa, double lambda, double epsilon) {
    if (epsilon == 0.0) return 0.0;
    const double q = std::exp(-kappa / std::abs(epsilon));
    return 4.0 * M_PI / (kappa * kappa) * std::sinh(2.0 * kappa * lambda) * q / (1.0 - q);
}

StackTables::StackTables(const SlabContext& ctx, double epsilon, double phi_cap,
                         double tol)
    : ctx_(&ctx), eps_(std::abs(epsilon)) {
    const QuadratureSpec& q = ctx.quad;
    nq_ = q.n_quad;
    order_ = 14;
    if (eps_ == 0.0) {
        p_max_ = 0;
        return;
    }
    if (!(phi_cap > 0.0)) throw std::domain_error("StackTables: phi_cap must be > 0");
    if (eps_ >= 1.0 / (2.0 * phi_cap))
        throw std::domain_error("StackTables: slabs overlap (|eps| >= 1/(2 max phi))");

    const double kappa = ctx.params.kappa;
    const double c_gap = 1.0 - 2.0 * eps_ * phi_cap;
    p_max_ = std::max(1, static_cast<int>(std::ceil(
                             eps_ * (std::abs(std::log(tol)) + 30.0) / (kappa * c_gap))));

    const double H = 2.0 * phi_cap + 0.1;
    const NonlocalTables& T = *ctx.tables;
    const double a_max = (std::abs(std::log(q.tail_tol)) + 6.0) / kappa + 2.0;
    const int mspan = static_cast<int>(std::ceil((a_max + M_PI * std::sqrt(2.0)) / kTwoPi));
    const double h = kTwoPi / nq_;
    const int half = nq_ / 2;
    auto wedge = make_wedge(nq_);
    auto widx = [&](int a, int b) {
        return std::size_t(a) * (half + 1) - std::size_t(a) * (a - 1) / 2 + (b - a);
    };

    tq_.resize(p_max_ + 1);
    tg_.resize(p_max_ + 1);
    lo_.assign(p_max_ + 1, 0.0);
    hi_.assign(p_max_ + 1, 0.0);

    for (int l = 1; l <= p_max_; ++l) {
        const double c = l / eps_;
        // magnitude estimate of this image pair; skip once far below tolerance
        const double mag = 4.0 * M_PI / (kappa * kappa) *
                           std::sinh(2.0 * kappa * phi_cap) * std::exp(-kappa * c);
        if (mag < 1e-3 * tol && l > 1) break;
        lo_[l] = c - H;
        hi_[l] = c + H;
        if (lo_[l] <= 0.3)
            throw std::domain_error("StackTables: window reaches the plane (eps too large)");
        const auto nodes = ChebFit::cheb_points(lo_[l], hi_[l], order_);

        // radial interpolants per Chebyshev node
        struct Radial {
            std::vector<ChebFit> oct;
            double lo, hi;
            double operator()(double a) const {
                int k = std::max(0, std::min<int>(int(oct.size()) - 1,
                                                  int(std::floor(std::log2(a / lo)))));
                return oct[std::size_t(k)](std::min(a, hi));
            }
        };
        const double a_lo = 1e-4;
        auto make_radial = [&](const std::function<double(double)>& f) {
            Radial r;
            r.lo = a_lo;
            r.hi = a_max;
            double a = a_lo;
            while (a < a_max) {
                double b = std::min(2.0 * a, a_max);
                r.oct.emplace_back(f, a, b, 12);
                a = b;
            }
            return r;
        };
        std::vector<Radial> rq(order_), rg(order_);
        for (int j = 0; j < order_; ++j) {
            const double hn = nodes[j];
            rq[j] = make_radial([&](double a) {
                return hn >= c ? T.q_window(a, c, hn) : -T.q_window(a, hn, c);
            });
            rg[j] = make_radial(
                [&](double a) { return std::exp(-kappa * std::hypot(a, hn)) / std::hypot(a, hn); });
        }

        std::vector<std::vector<double>> wq(wedge.size()), wg(wedge.size());
        parallel_for(wedge.size(), [&](std::size_t wi) {
            auto [ma, mb] = wedge[wi];
            const double tx = ma * h, ty = mb * h;
            std::vector<double> sq(order_, 0.0), sg(order_, 0.0);
            for (int mx = -mspan; mx <= mspan; ++mx)
                for (int my = -mspan; my <= mspan; ++my) {
                    const double ax = tx - kTwoPi * mx, ay = ty - kTwoPi * my;
                    const double a = std::hypot(ax, ay);
                    if (a > a_max) continue;
                    if (a < a_lo) {
                        // on-node image: windows keep v away from zero
                        for (int j = 0; j < order_; ++j) {
                            const double hn = nodes[j];
                            sq[j] += hn >= c ? T.q_window(0.0, c, hn)
                                             : -T.q_window(0.0, hn, c);
                            sg[j] += std::exp(-kappa * std::abs(hn)) / std::abs(hn);
                        }
                        continue;
                    }
                    for (int j = 0; j < order_; ++j) {
                        sq[j] += rq[j](a);
                        sg[j] += rg[j](a);
                    }
                }
            wq[wi] = ChebFit::coeffs_from_samples(sq);
            wg[wi] = ChebFit::coeffs_from_samples(sg);
        });
        tq_[l].assign(std::size_t(nq_) * nq_ * order_, 0.0);
        tg_[l].assign(std::size_t(nq_) * nq_ * order_, 0.0);
        for (int i = 0; i < nq_; ++i) {
            int fi = std::min(i, nq_ - i);
            for (int j = 0; j < nq_; ++j) {
                int fj = std::min(j, nq_ - j);
                int a = std::min(fi, fj), b = std::max(fi, fj);
                const std::size_t src = widx(a, b);
                std::copy(wq[src].begin(), wq[src].end(),
                          &tq_[l][(std::size_t(i) * nq_ + j) * order_]);
                std::copy(wg[src].begin(), wg[src].end(),
                          &tg_[l][(std::size_t(i) * nq_ + j) * order_]);
            }
        }
        active_.push_back(l);
    }
}

double StackTables::plane_offset(int l) const { return l / eps_; }
double StackTables::window_lo(int l) const { return lo_[l]; }
double StackTables::window_hi(int l) const { return hi_[l]; }

double StackTables::stq(int l, int i, int j, double h) const {
    const double* c = &tq_[l][(std::size_t(i) * nq_ + j) * order_];
    return cheb_eval(c, order_, lo_[l], hi_[l], h);
}

double StackTables::stg(int l, int i, int j, double h) const {
    const double* c = &tg_[l][(std::size_t(i) * nq_ + j) * order_];
    return cheb_eval(c, order_, lo_[l], hi_[l], h);
}

namespace {

// gamma-free stack field: absolute when `flat_ref` is NaN, otherwise the
// difference against the flat reference level flat_ref.
SymGrid stack_field(const SlabContext& ctx, const StackTables& st, double lambda,
                    const CosSpectrum& u, double flat_ref) {
    const QuadratureSpec& q = ctx.quad;
    const int nt = q.n_target, nq = q.n_quad, mult = nq / nt;
    const double h2 = (kTwoPi / nq) * (kTwoPi / nq);
    auto wedge = make_wedge(nt);
    std::vector<double> vals(wedge.size(), 0.0);
    if (st.active().empty()) return unfold_wedge(vals, nt);

    SymGrid uf = synthesize(u, nq);
    const bool diff = !std::isnan(flat_ref);

    // flat columns per active image: [STQ(c+2L) - STQ(c-2L)] at every tau node
    std::vector<std::vector<double>> flat_cols;
    if (diff) {
        for (int l : st.active()) {
            const double c = st.plane_offset(l);
            std::vector<double> col(std::size_t(nq) * nq);
            for (int i = 0; i < nq; ++i)
                for (int j = 0; j < nq; ++j)
                    col[std::size_t(i) * nq + j] =
                        st.stq(l, i, j, c + 2.0 * flat_ref) -
                        st.stq(l, i, j, c - 2.0 * flat_ref);
            flat_cols.push_back(std::move(col));
        }
    }

    parallel_for(wedge.size(), [&](std::size_t wi) {
        auto [m1, m2] = wedge[wi];
        const double ut = uf.v[std::size_t((m1 * mult + nq / 2) % nq) * nq +
                               ((m2 * mult + nq / 2) % nq)];
        const double psi_t = lambda + ut;
        double acc = 0.0;
        for (int sj = 0; sj < nq; ++sj) {
            const int ti = ((m1 * mult - (sj - nq / 2)) % nq + nq) % nq;
            for (int sk = 0; sk < nq; ++sk) {
                const int tj = ((m2 * mult - (sk - nq / 2)) % nq + nq) % nq;
                const double psi_s = lambda + uf.v[std::size_t(sj) * nq + sk];
                double term = 0.0;
                for (std::size_t li = 0; li < st.active().size(); ++li) {
                    const int l = st.active()[li];
                    const double c = st.plane_offset(l);
                    term += st.stq(l, ti, tj, c - psi_t + psi_s) -
                            st.stq(l, ti, tj, c - psi_t - psi_s) +
                            st.stq(l, ti, tj, c + psi_t + psi_s) -
                            st.stq(l, ti, tj, c + psi_t - psi_s);
                    if (diff) term -= flat_cols[li][std::size_t(ti) * nq + tj];
                }
                acc += term;
            }
        }
        vals[wi] = acc * h2;
    });
    return unfold_wedge(vals, nt);
}

} // namespace

SymGrid stack_interaction(const SlabContext& ctx, const SlabShape& shape,
                          double epsilon) {
    if (epsilon == 0.0) return SymGrid(ctx.quad.n_target, 0.0);
    const double phi_cap = shape.lambda + 0.5 * ctx.quad.b1_max;
    StackTables st(ctx, epsilon, phi_cap, ctx.quad.tolerance * 1e-4);
    return stack_field(ctx, st, shape.lambda, shape.u,
                       std::numeric_limits<double>::quiet_NaN());
}

LamellaePoint solve_lamellae(const SlabContext& ctx, double epsilon, double s,
                             double delta_init, const CosSpectrum& v_init,
                             const SolverOptions& opt) {
    const double lam_star = lambda_star(ctx.params);
    if (!(delta_init > 0.5 && delta_init < 1.5))
        throw std::domain_error("solve_lamellae: delta must start in (1/2, 3/2)");

    const int kmax = opt.kmax;
    const std::size_t npairs = CosSpectrum::pair_count(kmax);
    const std::size_t p01 = CosSpectrum::pair_index(0, 1, kmax);

    const double phi_cap = 1.55 * lam_star + 0.6 * ctx.quad.b1_max;
    StackTables st(ctx, epsilon, phi_cap, 1e-12);

    double delta = delta_init;
    CosSpectrum v = v_init.kmax == kmax ? v_init : CosSpectrum(kmax);
    v.c[p01] = 0.0;

    LamellaePoint pt;
    pt.epsilon = epsilon;
    pt.s = s;

    auto full_residual = [&](double dlt, const CosSpectrum& vv) {
        const double lambda = dlt * lam_star;
        CosSpectrum u = vv;
        u.c[p01] += kTwoPi;
        for (double& c : u.c) c *= s;
        SymGrid g = residual_G(ctx, lambda, u);
        if (!st.active().empty()) {
            SymGrid sd = stack_field(ctx, st, lambda, u, lambda);
            for (std::size_t i = 0; i < g.v.size(); ++i)
                g.v[i] += ctx.params.gamma * sd.v[i];
        }
        return g;
    };

    if (s == 0.0) throw std::domain_error("solve_lamellae: s must be nonzero");

    double resid = 0.0;
    for (int iter = 0; iter <= opt.max_newton; ++iter) {
        SymGrid g = full_residual(delta, v);
        resid = sup_norm(g);
        if (resid <= opt.newton_tol) {
            pt.delta = delta;
            pt.lambda_eps_s = delta * lam_star;
            pt.v = v;
            pt.residual_inf = resid;
            pt.newton_iters = iter;
            return pt;
        }
        if (iter == opt.max_newton) break;

        CosSpectrum m = analyze(g, kmax);
        for (double& c : m.c) c /= s;

        const double lambda = delta * lam_star;
        CosSpectrum u = v;
        u.c[p01] += kTwoPi;
        for (double& c : u.c) c *= s;
        SlabShape shape{lambda, u};
        SlabLinearOp lin(ctx, shape, &st);

        // delta column by central differences of the full residual / s
        const double hd = 1e-6;
        SymGrid gp = full_residual(delta + hd, v);
        SymGrid gm = full_residual(delta - hd, v);
        CosSpectrum dcol = analyze(gp, kmax);
        CosSpectrum dcm = analyze(gm, kmax);
        for (std::size_t i = 0; i < dcol.c.size(); ++i)
            dcol.c[i] = (dcol.c[i] - dcm.c[i]) / (2.0 * hd * s);

        const double dls = lam_star * dsigma_dlambda(ctx.params, lambda, 1.0);
        auto apply = [&](const std::vector<double>& d) {
            CosSpectrum wv(kmax);
            for (std::size_t i = 0; i < npairs; ++i) wv.c[i] = i == p01 ? 0.0 : d[i];
            CosSpectrum out = lin.apply(wv);
            for (std::size_t i = 0; i < npairs; ++i) out.c[i] += d[p01] * dcol.c[i];
            return out.c;
        };
        auto precond = [&](const std::vector<double>& z) {
            std::vector<double> d(npairs);
            for (std::size_t i = 0; i < npairs; ++i) {
                if (i == p01) {
                    d[i] = z[i] / (kTwoPi * dls);
                } else {
                    auto [k1, k2] = CosSpectrum(kmax).pair_at(i);
                    d[i] = z[i] / sigma_value(ctx.params, lambda,
                                              std::hypot(double(k1), double(k2)));
                }
            }
            return d;
        };
        std::vector<double> rhs(npairs);
        for (std::size_t i = 0; i < npairs; ++i) rhs[i] = -m.c[i];
        std::vector<double> dx;
        GmresStats gs = gmres(apply, rhs, precond, dx, opt.krylov_tol, opt.max_krylov);
        if (!gs.converged && gs.rel_residual > 1e-4)
            throw SolverError("solve_lamellae: Krylov stagnation", resid);

        delta += dx[p01];
        if (!(delta > 0.5 && delta < 1.5))
            throw SolverError("solve_lamellae: delta left (1/2, 3/2)", resid);
        for (std::size_t i = 0; i < npairs; ++i)
            if (i != p01) v.c[i] += dx[i];
    }
    std::ostringstream os;
    os << "solve_lamellae: Newton did not converge (residual " << resid << ")";
    throw SolverError(os.str(), resid);
}

} // namespace patternforge
