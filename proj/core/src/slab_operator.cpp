#include "patternforge/slab_operator.hpp"

#include "patternforge/kernels.hpp"
#include "patternforge/quadrature.hpp"
#include "patternforge/threads.hpp"

#include <cmath>
#include <sstream>

namespace patternforge {

namespace {

constexpr double kTwoPi = 2.0 * M_PI;

double gkern(double kappa, double r) { return std::exp(-kappa * r) / r; }

// wedge of the D4-symmetric target grid: m(i) = i - n/2 indexes t = 2 pi m / n
struct Wedge {
    int n;
    std::vector<std::pair<int, int>> m; // (m1 <= m2), m in 0..n/2
    explicit Wedge(int n_) : n(n_) {
        for (int m1 = 0; m1 <= n / 2; ++m1)
            for (int m2 = m1; m2 <= n / 2; ++m2) m.emplace_back(m1, m2);
    }
    // unfold wedge values to the full grid
    SymGrid unfold(const std::vector<double>& vals) const {
        SymGrid g(n);
        for (int i = 0; i < n; ++i) {
            int mi = std::abs(i - n / 2);
            for (int j = 0; j < n; ++j) {
                int mj = std::abs(j - n / 2);
                int a = std::min(mi, mj), b = std::max(mi, mj);
                std::size_t idx = std::size_t(a) * (n / 2 + 1) - std::size_t(a) * (a - 1) / 2 + (b - a);
                g.at(i, j) = vals[idx];
            }
        }
        return g;
    }
};

struct PatchRule {
    std::vector<double> r, wr; // radial nodes/weights (includes polar r dr)
    std::vector<double> cth, sth;
    double wth;
};

PatchRule make_patch(const QuadratureSpec& q) {
    PatchRule p;
    Rule1D rad = geometric_panels(0.0, q.rho0, q.patch_panels, q.patch_gl, 1.7, true);
    p.r = rad.x;
    p.wr.resize(rad.size());
    for (std::size_t i = 0; i < rad.size(); ++i) p.wr[i] = rad.w[i] * rad.x[i];
    p.cth.resize(q.patch_angular);
    p.sth.resize(q.patch_angular);
    for (int a = 0; a < q.patch_angular; ++a) {
        double th = kTwoPi * a / q.patch_angular;
        p.cth[a] = std::cos(th);
        p.sth[a] = std::sin(th);
    }
    p.wth = kTwoPi / q.patch_angular;
    return p;
}

// evaluate two cosine tensors at the same point, sharing the recurrences
void eval_point2(const CosTensor& A, const CosTensor& B, double x, double y,
                 double& va, double& vb) {
    const int K = A.kmax;
    const double cx1 = std::cos(x), cy1 = std::cos(y);
    double cxm2, cxm1;
    std::vector<double> cy(K + 1);
    cy[0] = 1.0;
    if (K >= 1) cy[1] = cy1;
    for (int k = 2; k <= K; ++k) cy[k] = 2.0 * cy1 * cy[k - 1] - cy[k - 2];
    va = vb = 0.0;
    cxm2 = 1.0;
    cxm1 = cx1;
    for (int k1 = 0; k1 <= K; ++k1) {
        double cxk;
        if (k1 == 0)
            cxk = 1.0;
        else if (k1 == 1)
            cxk = cx1;
        else {
            cxk = 2.0 * cx1 * cxm1 - cxm2;
            cxm2 = cxm1;
            cxm1 = cxk;
        }
        double ra = 0.0, rb = 0.0;
        const double* arow = &A.a[std::size_t(k1) * (K + 1)];
        const double* brow = &B.a[std::size_t(k1) * (K + 1)];
        for (int k2 = 0; k2 <= K; ++k2) {
            ra += arow[k2] * cy[k2];
            rb += brow[k2] * cy[k2];
        }
        va += cxk * ra;
        vb += cxk * rb;
    }
}

} // namespace

void QuadratureSpec::validate() const {
    if (n_target < 16 || n_target % 2 != 0)
        throw std::invalid_argument("QuadratureSpec: n_target must be even >= 16");
    if (n_quad % n_target != 0)
        throw std::invalid_argument("QuadratureSpec: n_quad must be a multiple of n_target");
    if (rho0 <= 0.0 || rho0 >= M_PI)
        throw std::invalid_argument("QuadratureSpec: rho0 must lie in (0, pi)");
    if (cut_start <= 0.0 || cut_start >= 1.0)
        throw std::invalid_argument("QuadratureSpec: cut_start in (0,1)");
}

double SlabShape::min_phi(int n_probe) const {
    SymGrid g = synthesize(u, n_probe);
    double m = g.v[0];
    for (double x : g.v) m = std::min(m, x);
    return lambda + m;
}

// ---------------------------------------------------------------------------
// NonlocalTables

double NonlocalTables::chi(double r) const {
    const double a = spec_.cut_start * spec_.rho0;
    return 1.0 - smoothstep7((r - a) / (spec_.rho0 - a));
}

double NonlocalTables::wrapped_dist(int i, int j) const {
    return dist_[std::size_t(i) * nq_ + j];
}

double NonlocalTables::q_exact(double a, double b) const {
    if (b == 0.0) return 0.0;
    const double sgn = b < 0.0 ? -1.0 : 1.0;
    const double bb = std::abs(b);
    if (a <= 0.0) throw std::domain_error("q_exact: a must be > 0");
    // v = a sinh(w): integral becomes int_0^W exp(-kappa a cosh w) dw
    const double W = std::asinh(bb / a);
    const Rule1D& gl = gauss_legendre(spec_.inner_gl);
    const int npan = W > 3.0 ? 3 : 1;
    double acc = 0.0;
    for (int p = 0; p < npan; ++p) {
        const double lo = W * p / npan, hi = W * (p + 1) / npan;
        const double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
        for (std::size_t i = 0; i < gl.size(); ++i) {
            const double w = mid + half * gl.x[i];
            acc += half * gl.w[i] * std::exp(-kappa_ * a * std::cosh(w));
        }
    }
    return sgn * acc;
}

double NonlocalTables::q_window(double a, double vlo, double vhi) const {
    const Rule1D& gl = gauss_legendre(spec_.inner_gl);
    const double mid = 0.5 * (vlo + vhi), half = 0.5 * (vhi - vlo);
    double acc = 0.0;
    for (std::size_t i = 0; i < gl.size(); ++i) {
        const double v = mid + half * gl.x[i];
        const double s = std::sqrt(a * a + v * v);
        acc += gl.w[i] * std::exp(-kappa_ * s) / s;
    }
    return half * acc;
}

NonlocalTables::NonlocalTables(double kappa, const QuadratureSpec& spec,
                               double lambda_min, double lambda_max)
    : kappa_(kappa), spec_(spec) {
    spec_.validate();
    if (!(kappa > 0.0)) throw std::domain_error("kappa must be > 0");
    if (!(lambda_min > 0.0 && lambda_max >= lambda_min))
        throw std::domain_error("bad lambda range");
    nq_ = spec_.n_quad;
    b2_lo_ = std::max(0.05, 2.0 * lambda_min - spec_.b1_max);
    b2_hi_ = 2.0 * lambda_max + spec_.b1_max;
    b_ref_ = 0.5 * (b2_lo_ + b2_hi_);

    const int J1 = spec_.cheb_b1, J2 = spec_.cheb_b2;
    const auto b1_nodes = ChebFit::cheb_points(0.0, spec_.b1_max, J1);
    const auto b2_nodes = ChebFit::cheb_points(b2_lo_, b2_hi_, J2);

    // image cutoff radius: kernel magnitude below tail_tol relative to scale
    const double a_max = (std::abs(std::log(spec_.tail_tol)) + 6.0) / kappa_ + 2.0;
    const int mspan = static_cast<int>(std::ceil((a_max + M_PI * std::sqrt(2.0)) / kTwoPi));

    dist_.resize(std::size_t(nq_) * nq_);
    t_sga_.assign(std::size_t(nq_) * nq_ * J1, 0.0);
    t_sqa_.assign(std::size_t(nq_) * nq_ * J1, 0.0);
    t_sgb_.assign(std::size_t(nq_) * nq_ * J2, 0.0);
    t_sqbo_.assign(std::size_t(nq_) * nq_ * J2, 0.0);
    t_sqbx_.assign(std::size_t(nq_) * nq_ * J2, 0.0);

    const double h = kTwoPi / nq_;
    for (int i = 0; i < nq_; ++i)
        for (int j = 0; j < nq_; ++j) {
            double dx = std::remainder(i * h, kTwoPi);
            double dy = std::remainder(j * h, kTwoPi);
            dist_[std::size_t(i) * nq_ + j] = std::hypot(dx, dy);
        }

    // radial interpolants of a -> Q(a, b_node) and a -> G(sqrt(a^2+b^2));
    // octave panels cover [a_lo, a_max]
    const double a_lo = 0.45 * spec_.cut_start * spec_.rho0;
    struct Radial {
        std::vector<ChebFit> oct;
        double lo, hi;
        double operator()(double a) const {
            int k = std::max(0, std::min<int>(int(oct.size()) - 1,
                                              int(std::floor(std::log2(a / lo)))));
            return oct[std::size_t(k)](std::min(a, hi));
        }
    };
    auto make_radial = [&](const std::function<double(double)>& f) {
        Radial r;
        r.lo = a_lo;
        r.hi = a_max;
        double a = a_lo;
        while (a < a_max) {
            double b = std::min(2.0 * a, a_max);
            r.oct.emplace_back(f, a, b, 14);
            a = b;
        }
        return r;
    };

    std::vector<Radial> rq1(J1), rg1(J1), rq2(J2), rg2(J2), rqd2(J2);
    for (int jn = 0; jn < J1; ++jn) {
        const double b = b1_nodes[jn];
        rq1[jn] = make_radial([&](double a) { return q_exact(a, b); });
        rg1[jn] = make_radial([&](double a) { return gkern(kappa_, std::hypot(a, b)); });
    }
    for (int jn = 0; jn < J2; ++jn) {
        const double b = b2_nodes[jn];
        rq2[jn] = make_radial([&](double a) { return q_exact(a, b); });
        rg2[jn] = make_radial([&](double a) { return gkern(kappa_, std::hypot(a, b)); });
        rqd2[jn] = make_radial([&](double a) {
            return b >= b_ref_ ? q_window(a, b_ref_, b) : -q_window(a, b, b_ref_);
        });
    }

    // build on the wedge (i <= j <= nq/2 in folded index), then mirror
    const int half = nq_ / 2;
    std::vector<std::pair<int, int>> wedge;
    for (int a = 0; a <= half; ++a)
        for (int b = a; b <= half; ++b) wedge.emplace_back(a, b);

    std::vector<std::vector<double>> wsamp(wedge.size());
    parallel_for(wedge.size(), [&](std::size_t wi) {
        auto [ma, mb] = wedge[wi];
        const double tx = ma * h, ty = mb * h;
        std::vector<double> s1(J1, 0.0), sq1(J1, 0.0), s2(J2, 0.0), sq2(J2, 0.0),
            sqx2(J2, 0.0);
        for (int mx = -mspan; mx <= mspan; ++mx)
            for (int my = -mspan; my <= mspan; ++my) {
                const double ax = tx - kTwoPi * mx, ay = ty - kTwoPi * my;
                const double a = std::hypot(ax, ay);
                if (a > a_max) continue;
                if (a < a_lo) continue; // the singular image; handled below
                for (int jn = 0; jn < J1; ++jn) {
                    s1[jn] += rg1[jn](a);
                    sq1[jn] += rq1[jn](a);
                }
                for (int jn = 0; jn < J2; ++jn) {
                    s2[jn] += rg2[jn](a);
                    sqx2[jn] += rq2[jn](a);
                    sq2[jn] += rqd2[jn](a);
                }
            }
        // subtract chi(d) * m0 kernel where the nearest image lies beyond a_lo
        const double d = std::hypot(std::remainder(tx, kTwoPi), std::remainder(ty, kTwoPi));
        if (d >= a_lo) {
            const double c = chi(d);
            if (c > 0.0) {
                for (int jn = 0; jn < J1; ++jn) {
                    s1[jn] -= c * gkern(kappa_, std::hypot(d, b1_nodes[jn]));
                    sq1[jn] -= c * q_exact(d, b1_nodes[jn]);
                }
                for (int jn = 0; jn < J2; ++jn)
                    sqx2[jn] -= c * q_exact(d, b2_nodes[jn]);
            }
        } else {
            // nearest image below a_lo: chi = 1 there, so the m0 term of the
            // b1-range and absolute-Q tables cancels exactly and was skipped;
            // the smooth b2 kernels still need their m0 contribution. The
            // windowed form stays regular even at d = 0.
            for (int jn = 0; jn < J2; ++jn) {
                s2[jn] += gkern(kappa_, std::hypot(d, b2_nodes[jn]));
                sq2[jn] += b2_nodes[jn] >= b_ref_
                               ? q_window(d, b_ref_, b2_nodes[jn])
                               : -q_window(d, b2_nodes[jn], b_ref_);
            }
        }
        std::vector<double> all;
        auto append = [&](std::vector<double>& v) {
            auto c = ChebFit::coeffs_from_samples(v);
            all.insert(all.end(), c.begin(), c.end());
        };
        append(s1);
        append(sq1);
        append(s2);
        append(sq2);
        append(sqx2);
        wsamp[wi] = std::move(all);
    });

    // scatter to the full tau grid
    auto widx = [&](int a, int b) {
        return std::size_t(a) * (half + 1) - std::size_t(a) * (a - 1) / 2 + (b - a);
    };
    for (int i = 0; i < nq_; ++i) {
        int fi = std::min(i, nq_ - i);
        for (int j = 0; j < nq_; ++j) {
            int fj = std::min(j, nq_ - j);
            int a = std::min(fi, fj), b = std::max(fi, fj);
            const std::vector<double>& src = wsamp[widx(a, b)];
            std::size_t node = std::size_t(i) * nq_ + j;
            const double* p = src.data();
            std::copy(p, p + J1, &t_sga_[node * J1]);
            p += J1;
            std::copy(p, p + J1, &t_sqa_[node * J1]);
            p += J1;
            std::copy(p, p + J2, &t_sgb_[node * J2]);
            p += J2;
            std::copy(p, p + J2, &t_sqbo_[node * J2]);
            p += J2;
            std::copy(p, p + J2, &t_sqbx_[node * J2]);
        }
    }
}

double NonlocalTables::eval(const std::vector<double>& t, int order, double lo,
                            double hi, int i, int j, double b) const {
    const double* c = &t[(std::size_t(i) * nq_ + j) * order];
    return cheb_eval(c, order, lo, hi, b);
}

double NonlocalTables::sga(int i, int j, double b) const {
    return eval(t_sga_, spec_.cheb_b1, 0.0, spec_.b1_max, i, j, std::abs(b));
}
double NonlocalTables::sqa(int i, int j, double b) const {
    if (b == 0.0) return 0.0; // odd in b
    double v = eval(t_sqa_, spec_.cheb_b1, 0.0, spec_.b1_max, i, j, std::abs(b));
    return b < 0.0 ? -v : v;
}
double NonlocalTables::sgb(int i, int j, double b) const {
    return eval(t_sgb_, spec_.cheb_b2, b2_lo_, b2_hi_, i, j, b);
}
double NonlocalTables::sqbo(int i, int j, double b) const {
    return eval(t_sqbo_, spec_.cheb_b2, b2_lo_, b2_hi_, i, j, b);
}
double NonlocalTables::sqbx(int i, int j, double b) const {
    return eval(t_sqbx_, spec_.cheb_b2, b2_lo_, b2_hi_, i, j, b);
}

SlabContext::SlabContext(const SlabParams& p, const QuadratureSpec& q,
                         double lambda_min, double lambda_max)
    : params(p), quad(q) {
    tables = std::make_shared<NonlocalTables>(p.kappa, q, lambda_min, lambda_max);
}

// ---------------------------------------------------------------------------
// curvature of the graph

namespace {

struct DerivGrids {
    SymGrid x, y, xx, xy, yy;
};

DerivGrids derivative_grids(const CosSpectrum& u, int n) {
    CosTensor A = to_tensor(u);
    const int K = u.kmax;
    // build sin/cos synthesis directly (exact on the band)
    DerivGrids d{SymGrid(n), SymGrid(n), SymGrid(n), SymGrid(n), SymGrid(n)};
    std::vector<double> ct(std::size_t(n) * (K + 1)), st(std::size_t(n) * (K + 1));
    for (int i = 0; i < n; ++i) {
        double t = -M_PI + kTwoPi * i / n;
        for (int k = 0; k <= K; ++k) {
            ct[std::size_t(i) * (K + 1) + k] = std::cos(k * t);
            st[std::size_t(i) * (K + 1) + k] = std::sin(k * t);
        }
    }
    auto C = [&](int i, int k) { return ct[std::size_t(i) * (K + 1) + k]; };
    auto S = [&](int i, int k) { return st[std::size_t(i) * (K + 1) + k]; };
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double gx = 0, gy = 0, gxx = 0, gxy = 0, gyy = 0;
            for (int k1 = 0; k1 <= K; ++k1)
                for (int k2 = 0; k2 <= K; ++k2) {
                    const double a = A.at(k1, k2);
                    if (a == 0.0) continue;
                    gx += a * (-k1) * S(i, k1) * C(j, k2);
                    gy += a * C(i, k1) * (-k2) * S(j, k2);
                    gxx += a * (-double(k1) * k1) * C(i, k1) * C(j, k2);
                    gyy += a * C(i, k1) * (-double(k2) * k2) * C(j, k2);
                    gxy += a * k1 * S(i, k1) * k2 * S(j, k2);
                }
            d.x.at(i, j) = gx;
            d.y.at(i, j) = gy;
            d.xx.at(i, j) = gxx;
            d.xy.at(i, j) = gxy;
            d.yy.at(i, j) = gyy;
        }
    return d;
}

} // namespace

SymGrid mean_curvature_graph(const CosSpectrum& u, int n) {
    DerivGrids d = derivative_grids(u, n);
    SymGrid out(n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const double px = d.x.at(i, j), py = d.y.at(i, j);
            const double w2 = 1.0 + px * px + py * py;
            const double P = d.xx.at(i, j) * (1.0 + py * py) -
                             2.0 * px * py * d.xy.at(i, j) +
                             d.yy.at(i, j) * (1.0 + px * px);
            out.at(i, j) = -P / (w2 * std::sqrt(w2));
        }
    return out;
}

double graph_area(const CosSpectrum& u, int n) {
    DerivGrids d = derivative_grids(u, n);
    double acc = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            acc += std::sqrt(1.0 + d.x.at(i, j) * d.x.at(i, j) +
                             d.y.at(i, j) * d.y.at(i, j));
    return acc * (kTwoPi / n) * (kTwoPi / n);
}

SymGrid mean_curvature_linearized(const CosSpectrum& u, const CosSpectrum& w, int n) {
    DerivGrids du = derivative_grids(u, n);
    DerivGrids dw = derivative_grids(w, n);
    SymGrid out(n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const double px = du.x.at(i, j), py = du.y.at(i, j);
            const double pxx = du.xx.at(i, j), pxy = du.xy.at(i, j), pyy = du.yy.at(i, j);
            const double wx = dw.x.at(i, j), wy = dw.y.at(i, j);
            const double wxx = dw.xx.at(i, j), wxy = dw.xy.at(i, j), wyy = dw.yy.at(i, j);
            const double W2 = 1.0 + px * px + py * py;
            const double W = std::sqrt(W2);
            const double P = pxx * (1.0 + py * py) - 2.0 * px * py * pxy +
                             pyy * (1.0 + px * px);
            const double dP = wxx * (1.0 + py * py) + pxx * 2.0 * py * wy -
                              2.0 * (wx * py * pxy + px * wy * pxy + px * py * wxy) +
                              wyy * (1.0 + px * px) + pyy * 2.0 * px * wx;
            const double dW2 = 2.0 * (px * wx + py * wy);
            out.at(i, j) = -dP / (W2 * W) + 1.5 * P * dW2 / (W2 * W2 * W);
        }
    return out;
}

double flat_potential_closed(double kappa, double lambda) {
    return kTwoPi / (kappa * kappa) * (1.0 - std::exp(-2.0 * kappa * lambda));
}

// ---------------------------------------------------------------------------
// nonlocal field assembly

namespace {

struct FineShape {
    std::vector<double> u; // u on the fine grid
    CosTensor ut;          // tensor of u for point evaluation
    int nq;
};

FineShape fine_values(const SlabContext& ctx, const CosSpectrum& u) {
    FineShape f;
    f.nq = ctx.quad.n_quad;
    f.ut = to_tensor(u);
    SymGrid g = synthesize(u, f.nq);
    f.u = std::move(g.v);
    return f;
}

enum class NonlocalKind { ResidualDiff, PotentialAbs };

// Assemble the gamma-free nonlocal field (difference vs flat, or absolute) on
// the target wedge and unfold. `lambda` is the flat reference level.
SymGrid nonlocal_field(const SlabContext& ctx, double lambda, const CosSpectrum& u,
                       NonlocalKind kind) {
    const NonlocalTables& T = *ctx.tables;
    const QuadratureSpec& q = ctx.quad;
    const int nt = q.n_target, nq = q.n_quad, mult = nq / nt;
    const double h2 = (kTwoPi / nq) * (kTwoPi / nq);

    const double two_l = 2.0 * lambda;
    if (two_l < T.b2_lo() || two_l > T.b2_hi())
        throw QuadratureRangeError("lambda outside the table range");

    FineShape fs = fine_values(ctx, u);
    double umax = 0.0;
    for (double x : fs.u) umax = std::max(umax, std::abs(x));
    if (2.0 * umax > q.b1_max)
        throw QuadratureRangeError("perturbation exceeds the b1 table range");
    if (two_l + 2.0 * umax > T.b2_hi() || two_l - 2.0 * umax < T.b2_lo())
        throw QuadratureRangeError("phi(s)+phi(t) leaves the b2 table range");

    // flat reference column sqbo(tau; 2 lambda) per tau node
    std::vector<double> flat_col;
    if (kind == NonlocalKind::ResidualDiff) {
        flat_col.resize(std::size_t(nq) * nq);
        for (int i = 0; i < nq; ++i)
            for (int j = 0; j < nq; ++j)
                flat_col[std::size_t(i) * nq + j] = T.sqbo(i, j, two_l);
    }

    const Wedge wedge(nt);
    const PatchRule patch = make_patch(q);
    std::vector<double> vals(wedge.m.size());

    parallel_for(wedge.m.size(), [&](std::size_t wi) {
        auto [m1, m2] = wedge.m[wi];
        const double tx = kTwoPi * m1 / nt, ty = kTwoPi * m2 / nt;
        // target t = 2 pi m / nt sits on fine node (nq/2 + m*mult) mod nq
        const double ut = fs.u[std::size_t((m1 * mult + nq / 2) % nq) * nq +
                               ((m2 * mult + nq / 2) % nq)];
        double acc = 0.0;
        for (int sj = 0; sj < nq; ++sj) {
            // fine node sj has coordinate -pi + 2 pi sj / nq
            // tau_x index: (t_x - s_x)/h mod nq = (m1*mult - (sj - nq/2)) mod nq
            for (int sk = 0; sk < nq; ++sk) {
                const double us = fs.u[std::size_t(sj) * nq + sk];
                const int ti = ((m1 * mult - (sj - nq / 2)) % nq + nq) % nq;
                const int tj = ((m2 * mult - (sk - nq / 2)) % nq + nq) % nq;
                const double b1 = us - ut;
                const double b2 = two_l + us + ut;
                if (kind == NonlocalKind::ResidualDiff) {
                    acc += T.sqa(ti, tj, b1) +
                           (T.sqbo(ti, tj, b2) - flat_col[std::size_t(ti) * nq + tj]);
                } else {
                    acc += T.sqa(ti, tj, b1) + T.sqbx(ti, tj, b2);
                }
            }
        }
        acc *= h2;
        // singular patch: chi(r) * [Q(r, b1) (+ Q(r, b2) for the absolute case)]
        for (std::size_t ri = 0; ri < patch.r.size(); ++ri) {
            const double r = patch.r[ri];
            const double c = T.chi(r);
            if (c <= 0.0) continue;
            const double wgt = patch.wr[ri] * patch.wth * c;
            for (std::size_t ai = 0; ai < patch.cth.size(); ++ai) {
                const double sx = tx - r * patch.cth[ai];
                const double sy = ty - r * patch.sth[ai];
                const double us = eval_point(fs.ut, sx, sy);
                double val = T.q_exact(r, us - ut);
                if (kind == NonlocalKind::PotentialAbs)
                    val += T.q_exact(r, two_l + us + ut);
                acc += wgt * val;
            }
        }
        vals[wi] = acc;
    });
    return wedge.unfold(vals);
}

} // namespace

SymGrid yukawa_slab_potential(const SlabContext& ctx, const SlabShape& shape) {
    if (shape.min_phi() <= 0.0)
        throw std::domain_error("yukawa_slab_potential: min phi must be > 0");
    return nonlocal_field(ctx, shape.lambda, shape.u, NonlocalKind::PotentialAbs);
}

SymGrid residual_G(const SlabContext& ctx, double lambda, const CosSpectrum& u) {
    SlabShape s{lambda, u};
    if (s.min_phi() <= 0.0)
        throw std::domain_error("residual_G: lambda + u must stay positive");
    SymGrid nl = nonlocal_field(ctx, lambda, u, NonlocalKind::ResidualDiff);
    SymGrid mc = mean_curvature_graph(u, ctx.quad.n_target);
    for (std::size_t i = 0; i < nl.v.size(); ++i)
        nl.v[i] = mc.v[i] + ctx.params.gamma * nl.v[i];
    return nl;
}

SymGrid jacobian_action(const SlabContext& ctx, const SlabShape& shape,
                        const CosSpectrum& w) {
    const NonlocalTables& T = *ctx.tables;
    const QuadratureSpec& q = ctx.quad;
    const int nt = q.n_target, nq = q.n_quad, mult = nq / nt;
    const double h2 = (kTwoPi / nq) * (kTwoPi / nq);
    const double two_l = 2.0 * shape.lambda;

    FineShape fu = fine_values(ctx, shape.u);
    FineShape fw = fine_values(ctx, w);

    const Wedge wedge(nt);
    const PatchRule patch = make_patch(q);
    std::vector<double> vals(wedge.m.size());

    parallel_for(wedge.m.size(), [&](std::size_t wi) {
        auto [m1, m2] = wedge.m[wi];
        const double tx = kTwoPi * m1 / nt, ty = kTwoPi * m2 / nt;
        const std::size_t tfi = std::size_t((m1 * mult + nq / 2) % nq);
        const std::size_t tfj = std::size_t((m2 * mult + nq / 2) % nq);
        const double ut = fu.u[tfi * nq + tfj];
        const double wt = fw.u[tfi * nq + tfj];
        double acc = 0.0;
        for (int sj = 0; sj < nq; ++sj)
            for (int sk = 0; sk < nq; ++sk) {
                const double us = fu.u[std::size_t(sj) * nq + sk];
                const double ws = fw.u[std::size_t(sj) * nq + sk];
                const int ti = ((m1 * mult - (sj - nq / 2)) % nq + nq) % nq;
                const int tj = ((m2 * mult - (sk - nq / 2)) % nq + nq) % nq;
                acc += (ws - wt) * T.sga(ti, tj, us - ut) +
                       (ws + wt) * T.sgb(ti, tj, two_l + us + ut);
            }
        acc *= h2;
        for (std::size_t ri = 0; ri < patch.r.size(); ++ri) {
            const double r = patch.r[ri];
            const double c = T.chi(r);
            if (c <= 0.0) continue;
            const double wgt = patch.wr[ri] * patch.wth * c;
            for (std::size_t ai = 0; ai < patch.cth.size(); ++ai) {
                const double sx = tx - r * patch.cth[ai];
                const double sy = ty - r * patch.sth[ai];
                double us, ws;
                eval_point2(fu.ut, fw.ut, sx, sy, us, ws);
                const double b1 = us - ut;
                acc += wgt * (ws - wt) * gkern(T.kappa(), std::hypot(r, b1));
            }
        }
        vals[wi] = acc;
    });
    SymGrid nl = wedge.unfold(vals);
    SymGrid mc = mean_curvature_linearized(shape.u, w, nt);
    for (std::size_t i = 0; i < nl.v.size(); ++i)
        nl.v[i] = mc.v[i] + ctx.params.gamma * nl.v[i];
    return nl;
}

CosSpectrum flat_action(const SlabParams& p, double lambda, const CosSpectrum& s) {
    CosSpectrum out = s;
    for (std::size_t idx = 0; idx < out.c.size(); ++idx) {
        auto [k1, k2] = out.pair_at(idx);
        out.c[idx] *= sigma_value(p, lambda, std::hypot(double(k1), double(k2)));
    }
    return out;
}

} // namespace patternforge
