#include "patternforge/lattice_patterns.hpp"

#include "patternforge/slab_branch.hpp"

#include "patternforge/kernels.hpp"
#include "patternforge/quadrature.hpp"
#include "patternforge/threads.hpp"

#include <cmath>
#include <sstream>

namespace patternforge {

namespace {

constexpr double kTwoPi = 2.0 * M_PI;

double legendre_p(int k, double x) {
    if (k == 0) return 1.0;
    double p0 = 1.0, p1 = x;
    for (int j = 1; j < k; ++j) {
        double p2 = ((2.0 * j + 1.0) * x * p1 - j * p0) / (j + 1.0);
        p0 = p1;
        p1 = p2;
    }
    return p1;
}

double gk(int N, double kappa, double r) {
    return N == 2 ? 2.0 * bessel_k0(kappa * r) : std::exp(-kappa * r) / r;
}

struct Vec3 {
    double x, y, z;
};
Vec3 operator-(const Vec3& a, const Vec3& b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }

} // namespace

// ---------------------------------------------------------------------------
// Funk-Hecke eigenvalues

double mu_k(int N, double kappa, int k) {
    if (k < 0) throw std::domain_error("mu_k: k must be >= 0");
    if (k == 0) return 0.0;
    if (N == 2) {
        // 2 int_0^pi (1 - cos k t) 2 K0(2 kappa sin(t/2)) dt
        Rule1D rule = geometric_panels(0.0, 0.5, 20, 10, 1.8, true);
        const int nfar = std::max(16, 2 * k);
        for (int i = 0; i < nfar; ++i) {
            Rule1D p = gauss_legendre_on(10, 0.5 + (M_PI - 0.5) * i / nfar,
                                         0.5 + (M_PI - 0.5) * (i + 1) / nfar);
            rule.x.insert(rule.x.end(), p.x.begin(), p.x.end());
            rule.w.insert(rule.w.end(), p.w.begin(), p.w.end());
        }
        double acc = 0.0;
        for (std::size_t i = 0; i < rule.size(); ++i) {
            const double t = rule.x[i];
            acc += rule.w[i] * (1.0 - std::cos(k * t)) *
                   2.0 * bessel_k0(2.0 * kappa * std::sin(0.5 * t));
        }
        return 2.0 * acc;
    }
    if (N == 3) {
        // 4 pi int_0^1 (1 - P_k(1 - 2 x^2)) e^{-2 kappa x} dx
        const int npan = std::max(6, k / 4);
        double acc = 0.0;
        for (int p = 0; p < npan; ++p) {
            Rule1D r = gauss_legendre_on(16, double(p) / npan, double(p + 1) / npan);
            for (std::size_t i = 0; i < r.size(); ++i) {
                const double x = r.x[i];
                acc += r.w[i] * (1.0 - legendre_p(k, 1.0 - 2.0 * x * x)) *
                       std::exp(-2.0 * kappa * x);
            }
        }
        return 4.0 * M_PI * acc;
    }
    throw std::domain_error("mu_k: N must be 2 or 3");
}

double mu_k_oracle(int N, double kappa, int k) {
    if (k == 0) return 0.0;
    if (N == 2) {
        // (1/(2 pi)) iint (cos k x - cos k y)^2 2 K0(2 kappa |sin((x-y)/2)|)
        const int nx = 96 + 16 * k;
        Rule1D du = geometric_panels(0.0, M_PI, 14, 8, 1.8, true);
        double acc = 0.0;
        for (int i = 0; i < nx; ++i) {
            const double x = kTwoPi * i / nx;
            double inner = 0.0;
            for (std::size_t j = 0; j < du.size(); ++j) {
                const double u = du.x[j];
                const double ker = 2.0 * bessel_k0(2.0 * kappa * std::sin(0.5 * u));
                const double a = std::cos(k * x) - std::cos(k * (x + u));
                const double b = std::cos(k * x) - std::cos(k * (x - u));
                inner += du.w[j] * (a * a + b * b) * ker;
            }
            acc += kTwoPi / nx * inner;
        }
        return acc / (2.0 * M_PI);
    }
    if (N == 3) {
        // (1/2) iint (Y(th) - Y(sg))^2 G(|th - sg|), zonal Y = Pbar_k(cos th)
        auto ybar = [&](double z) {
            // orthonormal zonal harmonic: sqrt((2k+1)/(4 pi)) P_k(z)
            return std::sqrt((2.0 * k + 1.0) / (4.0 * M_PI)) * legendre_p(k, z);
        };
        const Rule1D& glat = gauss_legendre(48);
        Rule1D psi = geometric_panels(0.0, M_PI, 14, 8, 1.8, true);
        const int nb = 48;
        double acc = 0.0;
        for (std::size_t li = 0; li < glat.size(); ++li) {
            const double z = glat.x[li]; // cos theta of the outer point
            const double sz = std::sqrt(1.0 - z * z);
            const double yth = ybar(z);
            double inner = 0.0;
            for (std::size_t pi_ = 0; pi_ < psi.size(); ++pi_) {
                const double ps = psi.x[pi_];
                const double cp = std::cos(ps), sp = std::sin(ps);
                const double dist = 2.0 * std::sin(0.5 * ps);
                const double ker = std::exp(-kappa * dist) / dist * sp;
                double ring = 0.0;
                for (int b = 0; b < nb; ++b) {
                    const double be = kTwoPi * b / nb;
                    // sigma = cos(ps) th + sin(ps) (cos be e1p + sin be e2p);
                    // z-component of sigma for a zonal Y: cos(ps) z + sin(ps) sin(th) cos(be)
                    const double zs = cp * z + sp * sz * std::cos(be);
                    const double d = yth - ybar(zs);
                    ring += d * d;
                }
                inner += psi.w[pi_] * ker * ring * (kTwoPi / nb);
            }
            acc += glat.w[li] * kTwoPi * inner; // outer azimuth of a zonal integrand
        }
        return 0.5 * acc;
    }
    throw std::domain_error("mu_k_oracle: N must be 2 or 3");
}

double LatticeSpectrum::sigma(double gamma, int k) const {
    if (k < 0 || k > k_max) throw std::domain_error("sigma: k out of tabulated range");
    return lambda_k(k) - lambda_k(1) - gamma * (mu[k] - mu[1]);
}

LatticeSpectrum gamma_n(int N, double kappa, int k_max) {
    if (k_max < 8) throw std::domain_error("gamma_n: k_max must be >= 8");
    LatticeSpectrum sp;
    sp.N = N;
    sp.kappa = kappa;
    sp.k_max = k_max;
    sp.mu.resize(k_max + 1);
    for (int k = 0; k <= k_max; ++k) sp.mu[k] = mu_k(N, kappa, k);

    double g = sp.lambda_k(1) / sp.mu[1];
    for (int k = 2; k <= k_max; ++k)
        g = std::min(g, (sp.lambda_k(k) - sp.lambda_k(1)) / (sp.mu[k] - sp.mu[1]));
    sp.gamma_n = g;

    // crude mass bound: mu_k <= 2 int_{S^{N-1}} G(|e - s|) ds
    if (N == 3) {
        sp.mu_sup = 2.0 * kTwoPi / kappa * (1.0 - std::exp(-2.0 * kappa));
    } else {
        Rule1D rule = geometric_panels(0.0, M_PI, 20, 12, 1.7, true);
        double acc = 0.0;
        for (std::size_t i = 0; i < rule.size(); ++i)
            acc += rule.w[i] * 2.0 * bessel_k0(2.0 * kappa * std::sin(0.5 * rule.x[i]));
        sp.mu_sup = 2.0 * (2.0 * acc);
    }
    sp.tail_bound = (sp.lambda_k(k_max + 1) - sp.lambda_k(1)) / sp.mu_sup;
    sp.tail_certified = sp.tail_bound >= sp.gamma_n;
    if (!sp.tail_certified) {
        std::ostringstream os;
        os << "gamma_n: tail certificate fails at k_max=" << k_max << " (bound "
           << sp.tail_bound << " < candidate " << sp.gamma_n << "); double k_max";
        throw CertificateError(os.str());
    }
    return sp;
}

std::vector<double> harmonic_inverse(const StarBasis& basis, const LatticeSpectrum& sp,
                                     double gamma, const std::vector<double>& coeffs) {
    if (!(gamma > 0.0 && gamma < sp.gamma_n))
        throw std::domain_error("harmonic_inverse: gamma must lie in (0, gamma_N)");
    if (basis.odd_mass(coeffs) > 1e-10)
        throw std::domain_error("harmonic_inverse: input has odd-degree content");
    std::vector<double> out(coeffs);
    for (std::size_t i = 0; i < out.size(); ++i) {
        const int k = basis.degree_of(i);
        if (k % 2 == 1) {
            out[i] = 0.0;
            continue;
        }
        if (k > sp.k_max) {
            if (out[i] != 0.0)
                throw std::domain_error("harmonic_inverse: band exceeds table");
            continue;
        }
        const double s = sp.sigma(gamma, k);
        if (std::abs(s) < 1e-12)
            throw std::domain_error("harmonic_inverse: near-singular sigma");
        out[i] /= s;
    }
    return out;
}

// ---------------------------------------------------------------------------
// geometry

namespace {

struct GeometryGrids {
    std::vector<double> phi, w2; // phi and |grad phi|^2 on the grid
    std::vector<double> g1, g2;  // gradient components
    std::vector<double> lap;     // Laplace-Beltrami of phi
};

GeometryGrids geometry(const StarBasis& basis, const std::vector<double>& coeff) {
    GeometryGrids g;
    g.phi = basis.synth(coeff);
    basis.gradient(coeff, g.g1, g.g2);
    g.lap = basis.synth(basis.laplacian(coeff));
    g.w2.resize(g.phi.size());
    for (std::size_t i = 0; i < g.phi.size(); ++i) {
        double gg = g.g1[i] * g.g1[i];
        if (!g.g2.empty()) gg += g.g2[i] * g.g2[i];
        g.w2[i] = g.phi[i] * g.phi[i] + gg;
    }
    return g;
}

} // namespace

std::vector<double> area_variation_density(const StarBasis& basis, const StarShape& s) {
    const int N = basis.ambient();
    GeometryGrids G = geometry(basis, s.coeff);
    const std::size_t n = G.phi.size();
    // g = phi^{N-2}/W; density = -(g lap phi + grad g . grad phi)
    //                          + (N-2) phi^{N-3} W + phi^{N-1}/W
    std::vector<double> gfun(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double W = std::sqrt(G.w2[i]);
        gfun[i] = (N == 2 ? 1.0 : G.phi[i]) / W;
    }
    std::vector<double> gc = basis.analyze(gfun);
    std::vector<double> dg1, dg2;
    basis.gradient(gc, dg1, dg2);
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double W = std::sqrt(G.w2[i]);
        double graddot = dg1[i] * G.g1[i];
        if (!dg2.empty()) graddot += dg2[i] * G.g2[i];
        double density = -(gfun[i] * G.lap[i] + graddot) + G.phi[i] * (N == 2 ? 1.0 : G.phi[i]) / W;
        if (N == 3) density += W; // (N-2) phi^{N-3} W with N = 3
        out[i] = density;
    }
    return out;
}

std::vector<double> star_mean_curvature(const StarBasis& basis, const StarShape& s) {
    std::vector<double> d = area_variation_density(basis, s);
    std::vector<double> phi = basis.synth(s.coeff);
    const int N = basis.ambient();
    for (std::size_t i = 0; i < d.size(); ++i)
        d[i] /= (N == 2 ? phi[i] : phi[i] * phi[i]);
    return d;
}

double star_area(const StarBasis& basis, const StarShape& s) {
    GeometryGrids G = geometry(basis, s.coeff);
    double acc = 0.0;
    for (std::size_t i = 0; i < G.phi.size(); ++i) {
        const double W = std::sqrt(G.w2[i]);
        const double gamma = (basis.ambient() == 2 ? 1.0 : G.phi[i]) * W;
        acc += basis.weight(i) * gamma;
    }
    return acc;
}

std::vector<double> star_mc_linearized(const StarBasis& basis, const StarShape& s,
                                       const std::vector<double>& wc) {
    const int N = basis.ambient();
    GeometryGrids G = geometry(basis, s.coeff);
    GeometryGrids Gw = geometry(basis, wc);
    const std::size_t n = G.phi.size();

    std::vector<double> gfun(n), dW(n), dg(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double W = std::sqrt(G.w2[i]);
        double gdot = G.g1[i] * Gw.g1[i];
        if (!G.g2.empty()) gdot += G.g2[i] * Gw.g2[i];
        dW[i] = (G.phi[i] * Gw.phi[i] + gdot) / W;
        const double phin2 = N == 2 ? 1.0 : G.phi[i];
        gfun[i] = phin2 / W;
        const double dphin2 = N == 2 ? 0.0 : Gw.phi[i];
        dg[i] = dphin2 / W - phin2 * dW[i] / (W * W);
    }
    std::vector<double> gc = basis.analyze(gfun);
    std::vector<double> dgc = basis.analyze(dg);
    std::vector<double> gg1, gg2, dgg1, dgg2;
    basis.gradient(gc, gg1, gg2);
    basis.gradient(dgc, dgg1, dgg2);

    std::vector<double> phi = G.phi;
    std::vector<double> density(n), ddensity(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double W = std::sqrt(G.w2[i]);
        double graddot = gg1[i] * G.g1[i];
        double dgraddot = dgg1[i] * G.g1[i] + gg1[i] * Gw.g1[i];
        if (!gg2.empty()) {
            graddot += gg2[i] * G.g2[i];
            dgraddot += dgg2[i] * G.g2[i] + gg2[i] * Gw.g2[i];
        }
        density[i] = -(gfun[i] * G.lap[i] + graddot) +
                     phi[i] * (N == 2 ? 1.0 : phi[i]) / W + (N == 3 ? W : 0.0);
        double d = -(dg[i] * G.lap[i] + gfun[i] * Gw.lap[i] + dgraddot);
        if (N == 2) {
            d += Gw.phi[i] / W - phi[i] * dW[i] / (W * W);
        } else {
            d += 2.0 * phi[i] * Gw.phi[i] / W - phi[i] * phi[i] * dW[i] / (W * W) + dW[i];
        }
        ddensity[i] = d;
    }
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double phin1 = N == 2 ? phi[i] : phi[i] * phi[i];
        out[i] = ddensity[i] / phin1 -
                 double(N - 1) * density[i] * Gw.phi[i] / (phin1 * phi[i]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// interactions

namespace {

// evaluation with ambient tangential gradient at an arbitrary direction
struct EvalGrad {
    double value;
    Vec3 grad; // tangential gradient in ambient coordinates
};

EvalGrad eval_with_gradient(const StarBasis& basis, const std::vector<double>& c,
                            const Vec3& d) {
    EvalGrad out{0.0, {0.0, 0.0, 0.0}};
    if (basis.ambient() == 2) {
        const double th = std::atan2(d.y, d.x);
        const int K = basis.kmax();
        const double ck = 1.0 / std::sqrt(M_PI);
        double val = c[0] / std::sqrt(kTwoPi), der = 0.0;
        for (int k = 1; k <= K; ++k) {
            const double a = c[basis.index(k, 0)], b = c[basis.index(k, 1)];
            if (a == 0.0 && b == 0.0) continue;
            const double cc = std::cos(k * th), ss = std::sin(k * th);
            val += ck * (a * cc + b * ss);
            der += ck * k * (-a * ss + b * cc);
        }
        out.value = val;
        out.grad = {-d.y * der, d.x * der, 0.0}; // der * tangent
        return out;
    }
    // N = 3: value, d/dtheta, (1/sin) d/dphi via the Legendre recurrences
    const double z = std::min(1.0, std::max(-1.0, d.z));
    const double sz = std::sqrt(std::max(1e-300, 1.0 - z * z));
    const double ph = std::atan2(d.y, d.x);
    const int K = basis.kmax();
    const double r2 = std::sqrt(2.0);
    double val = 0.0, dth = 0.0, dph_over_sin = 0.0;
    double pmm = std::sqrt(1.0 / (4.0 * M_PI));
    for (int m = 0; m <= K; ++m) {
        if (m > 0) pmm *= sz * std::sqrt((2.0 * m + 1.0) / (2.0 * m));
        double p2 = 0.0, p1 = pmm;
        const double cm = std::cos(m * ph), sm = std::sin(m * ph);
        for (int k = m; k <= K; ++k) {
            double p;
            if (k == m)
                p = p1;
            else if (k == m + 1)
                p = z * std::sqrt(2.0 * m + 3.0) * p1;
            else {
                const double ak =
                    std::sqrt((4.0 * k * k - 1.0) / (double(k) * k - double(m) * m));
                const double bk = std::sqrt((double(k - 1) * (k - 1) - double(m) * m) /
                                            (4.0 * double(k - 1) * (k - 1) - 1.0));
                p = ak * (z * p1 - bk * p2);
            }
            const double plow = (k > m) ? p1 : 0.0;
            if (k > m) {
                p2 = p1;
                p1 = p;
            }
            const double e = (k > 0) ? std::sqrt((2.0 * k + 1.0) / (2.0 * k - 1.0) *
                                                 (double(k) * k - double(m) * m))
                                     : 0.0;
            const double dp = (k * z * p - e * plow) / sz;
            double ac, as;
            if (m == 0) {
                ac = c[basis.index(k, 0)];
                val += ac * p;
                dth += ac * dp;
            } else {
                ac = c[basis.index(k, m)];
                as = c[basis.index(k, -m)];
                val += r2 * p * (ac * cm + as * sm);
                dth += r2 * dp * (ac * cm + as * sm);
                dph_over_sin += r2 * (p * m / sz) * (-ac * sm + as * cm);
            }
        }
    }
    out.value = val;
    // e_theta = (z cos, z sin, -s), e_phi = (-sin, cos, 0) with (cos,sin) of ph
    const double cph = std::cos(ph), sph = std::sin(ph);
    out.grad = {dth * z * cph - dph_over_sin * sph, dth * z * sph + dph_over_sin * cph,
                -dth * sz};
    return out;
}

// rotated outer rule around a target direction; returns unit sigma directions
struct OuterNode {
    Vec3 sigma;
    double weight; // includes the surface measure factor
};

std::vector<OuterNode> outer_nodes(const StarBasis& basis, const Vec3& th,
                                   const LatticeQuad& q) {
    std::vector<OuterNode> out;
    if (basis.ambient() == 2) {
        Rule1D al = geometric_panels(0.0, M_PI, q.ang_panels, q.ang_gl, 1.8, true);
        out.reserve(2 * al.size());
        for (int sgn : {+1, -1})
            for (std::size_t i = 0; i < al.size(); ++i) {
                const double a = sgn * al.x[i];
                const double c = std::cos(a), s = std::sin(a);
                out.push_back({{c * th.x - s * th.y, s * th.x + c * th.y, 0.0}, al.w[i]});
            }
        return out;
    }
    // frame perpendicular to th
    Vec3 e1 = std::abs(th.z) < 0.9 ? Vec3{0, 0, 1} : Vec3{1, 0, 0};
    const double pr = dot(e1, th);
    e1 = {e1.x - pr * th.x, e1.y - pr * th.y, e1.z - pr * th.z};
    const double n1 = norm(e1);
    e1 = {e1.x / n1, e1.y / n1, e1.z / n1};
    Vec3 e2 = {th.y * e1.z - th.z * e1.y, th.z * e1.x - th.x * e1.z,
               th.x * e1.y - th.y * e1.x};
    Rule1D ps = geometric_panels(0.0, M_PI, q.ang_panels, q.ang_gl, 1.8, true);
    out.reserve(ps.size() * q.lon);
    for (std::size_t i = 0; i < ps.size(); ++i) {
        const double cp = std::cos(ps.x[i]), sp = std::sin(ps.x[i]);
        const double w = ps.w[i] * sp * (kTwoPi / q.lon);
        for (int b = 0; b < q.lon; ++b) {
            const double be = kTwoPi * b / q.lon;
            const double cb = std::cos(be), sb = std::sin(be);
            Vec3 sg = {cp * th.x + sp * (cb * e1.x + sb * e2.x),
                       cp * th.y + sp * (cb * e1.y + sb * e2.y),
                       cp * th.z + sp * (cb * e1.z + sb * e2.z)};
            out.push_back({sg, w});
        }
    }
    return out;
}

} // namespace

double ball_self_potential(int N, double kappa, double R) {
    if (N == 3) {
        return 4.0 * M_PI / (kappa * kappa) -
               4.0 * M_PI * (kappa * R + 1.0) * std::exp(-kappa * R) *
                   std::sinh(kappa * R) / (kappa * kappa * kappa * R);
    }
    // kernel 2 K0: u(R) = 4 pi / k^2 - (4 pi R / k) K1(kR) I0(kR)
    // I0 via its power/large-x series through the identity I0 = (K-free) ...
    // use the series directly
    auto bessel_i0 = [](double x) {
        if (x < 15.0) {
            double q = 0.25 * x * x, term = 1.0, acc = 1.0;
            for (int k = 1; k < 60; ++k) {
                term *= q / (double(k) * k);
                acc += term;
                if (term < 1e-18 * acc) break;
            }
            return acc;
        }
        // asymptotic with correction terms
        double inv = 1.0 / (8.0 * x);
        double series = 1.0 + inv + 4.5 * inv * inv + 37.5 * inv * inv * inv;
        return std::exp(x) / std::sqrt(kTwoPi * x) * series;
    };
    return 4.0 * M_PI / (kappa * kappa) -
           4.0 * M_PI * R / kappa * bessel_k1(kappa * R) * bessel_i0(kappa * R);
}

std::vector<double> self_interaction(const StarBasis& basis, const StarShape& s,
                                     double kappa, const LatticeQuad& q) {
    const int N = basis.ambient();
    if (s.min_radius(basis) <= 0.0)
        throw std::domain_error("self_interaction: min phi must be > 0");
    const std::size_t nt = basis.grid_size();
    std::vector<double> out(nt, 0.0);
    std::vector<double> phig = basis.synth(s.coeff);
    const Rule1D& gl = gauss_legendre(q.rad_gl);

    parallel_for(nt, [&](std::size_t ti) {
        const auto da = basis.dir(ti);
        const Vec3 th{da[0], da[1], da[2]};
        const double Rt = phig[ti];
        auto nodes = outer_nodes(basis, th, q);
        double acc = 0.0;
        for (const auto& nd : nodes) {
            const double Rs = basis.eval(s.coeff, {nd.sigma.x, nd.sigma.y, nd.sigma.z});
            const double cosg = dot(th, nd.sigma);
            const double rstar = std::min(std::max(Rt * cosg, 0.0), Rs);
            double inner = 0.0;
            for (auto [lo, hi] : {std::pair{0.0, rstar}, {rstar, Rs}}) {
                if (hi <= lo) continue;
                const double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
                for (std::size_t i = 0; i < gl.size(); ++i) {
                    const double r = mid + half * gl.x[i];
                    const double d =
                        std::sqrt(std::max(1e-300, Rt * Rt + r * r - 2.0 * Rt * r * cosg));
                    const double jac = N == 2 ? r : r * r;
                    inner += half * gl.w[i] * gk(N, kappa, d) * jac;
                }
            }
            acc += nd.weight * inner;
        }
        out[ti] = acc;
    });
    return out;
}

std::vector<double> d_self_interaction(const StarBasis& basis, const StarShape& s,
                                       const std::vector<double>& w, double kappa,
                                       const LatticeQuad& q) {
    const int N = basis.ambient();
    const std::size_t nt = basis.grid_size();
    std::vector<double> out(nt, 0.0);
    std::vector<double> phig = basis.synth(s.coeff);
    std::vector<double> wg = basis.synth(w);

    parallel_for(nt, [&](std::size_t ti) {
        const auto da = basis.dir(ti);
        const Vec3 th{da[0], da[1], da[2]};
        const double Rt = phig[ti];
        const double wt = wg[ti];
        const Vec3 xt{th.x * Rt, th.y * Rt, th.z * Rt};
        auto nodes = outer_nodes(basis, th, q);
        double acc = 0.0;
        for (const auto& nd : nodes) {
            EvalGrad ps = eval_with_gradient(basis, s.coeff, nd.sigma);
            EvalGrad ww = eval_with_gradient(basis, w, nd.sigma);
            const double Rs = ps.value;
            // nu * Gamma = (phi sigma - grad phi) phi^{N-2}
            const double phin2 = N == 2 ? 1.0 : Rs;
            const Vec3 nugam = {(Rs * nd.sigma.x - ps.grad.x) * phin2,
                                (Rs * nd.sigma.y - ps.grad.y) * phin2,
                                (Rs * nd.sigma.z - ps.grad.z) * phin2};
            const Vec3 Fs{nd.sigma.x * Rs, nd.sigma.y * Rs, nd.sigma.z * Rs};
            const double d = norm(Fs - xt);
            if (d < 1e-12) continue;
            const Vec3 vec = {ww.value * nd.sigma.x - wt * th.x,
                              ww.value * nd.sigma.y - wt * th.y,
                              ww.value * nd.sigma.z - wt * th.z};
            acc += nd.weight * dot(vec, nugam) * gk(N, kappa, d);
        }
        out[ti] = acc;
    });
    return out;
}

std::vector<double> lattice_interaction(const StarBasis& basis, const StarShape& s,
                                        const BravaisLattice& lat, double kappa,
                                        double eps, double cutoff_radius,
                                        const LatticeQuad& q) {
    const int N = basis.ambient();
    lat.validate();
    if (lat.N != N) throw std::domain_error("lattice_interaction: ambient mismatch");
    const std::size_t nt = basis.grid_size();
    std::vector<double> out(nt, 0.0);
    if (lat.M == 0 || eps == 0.0) return out;
    auto pts = lat.points_within(cutoff_radius);
    if (pts.empty()) return out;
    std::vector<double> phig = basis.synth(s.coeff);
    double phimax = 0.0;
    for (double v : phig) phimax = std::max(phimax, v);
    if (lat.min_norm() / std::abs(eps) <= 2.0 * phimax)
        throw std::domain_error("lattice_interaction: images overlap the base shape");

    const Rule1D& gl = gauss_legendre(q.img_rad);
    // smooth integrals: product rule over the basis grid directions x radius
    parallel_for(nt, [&](std::size_t ti) {
        const auto da = basis.dir(ti);
        const Vec3 th{da[0], da[1], da[2]};
        const double Rt = phig[ti];
        const Vec3 xt{th.x * Rt, th.y * Rt, th.z * Rt};
        double acc = 0.0;
        for (std::size_t si = 0; si < basis.grid_size(); ++si) {
            const auto sa = basis.dir(si);
            const Vec3 sg{sa[0], sa[1], sa[2]};
            const double Rs = phig[si];
            const double wq = basis.weight(si);
            double inner = 0.0;
            for (std::size_t i = 0; i < gl.size(); ++i) {
                const double r = 0.5 * Rs * (gl.x[i] + 1.0);
                const double jac = (N == 2 ? r : r * r) * 0.5 * Rs;
                const Vec3 y{sg.x * r, sg.y * r, sg.z * r};
                double k = 0.0;
                for (const auto& p : pts) {
                    const Vec3 c{p[0] / std::abs(eps), p[1] / std::abs(eps),
                                 p[2] / std::abs(eps)};
                    const double d = norm(xt - y - c);
                    k += gk(N, kappa, d);
                }
                inner += gl.w[i] * jac * k;
            }
            acc += wq * inner;
        }
        out[ti] = acc;
    });
    return out;
}

std::vector<double> d_lattice_interaction(const StarBasis& basis, const StarShape& s,
                                          const std::vector<double>& w,
                                          const BravaisLattice& lat, double kappa,
                                          double eps, double cutoff_radius,
                                          const LatticeQuad&) {
    const int N = basis.ambient();
    const std::size_t nt = basis.grid_size();
    std::vector<double> out(nt, 0.0);
    if (lat.M == 0 || eps == 0.0) return out;
    auto pts = lat.points_within(cutoff_radius);
    if (pts.empty()) return out;
    std::vector<double> phig = basis.synth(s.coeff);
    std::vector<double> wg = basis.synth(w);
    std::vector<double> g1, g2;
    basis.gradient(s.coeff, g1, g2);

    parallel_for(nt, [&](std::size_t ti) {
        const auto da = basis.dir(ti);
        const Vec3 th{da[0], da[1], da[2]};
        const double Rt = phig[ti];
        const double wt = wg[ti];
        const Vec3 xt{th.x * Rt, th.y * Rt, th.z * Rt};
        double acc = 0.0;
        for (std::size_t si = 0; si < basis.grid_size(); ++si) {
            const auto sa = basis.dir(si);
            const Vec3 sg{sa[0], sa[1], sa[2]};
            const double Rs = phig[si];
            // tangential gradient in ambient coordinates on the grid
            Vec3 grad;
            if (N == 2) {
                grad = {-sg.y * g1[si], sg.x * g1[si], 0.0};
            } else {
                const double z = sg.z, sz = std::sqrt(std::max(1e-300, 1.0 - z * z));
                const double ph = std::atan2(sg.y, sg.x);
                const double cph = std::cos(ph), sph = std::sin(ph);
                grad = {g1[si] * z * cph - g2[si] * sph, g1[si] * z * sph + g2[si] * cph,
                        -g1[si] * sz};
            }
            const double phin2 = N == 2 ? 1.0 : Rs;
            const Vec3 nugam = {(Rs * sg.x - grad.x) * phin2, (Rs * sg.y - grad.y) * phin2,
                                (Rs * sg.z - grad.z) * phin2};
            const Vec3 vec = {wg[si] * sg.x - wt * th.x, wg[si] * sg.y - wt * th.y,
                              wg[si] * sg.z - wt * th.z};
            const Vec3 Fs{sg.x * Rs, sg.y * Rs, sg.z * Rs};
            double k = 0.0;
            for (const auto& p : pts) {
                const Vec3 c{p[0] / std::abs(eps), p[1] / std::abs(eps),
                             p[2] / std::abs(eps)};
                k += gk(N, kappa, norm(xt - Fs - c));
            }
            acc += basis.weight(si) * dot(vec, nugam) * k;
        }
        out[ti] = acc;
    });
    return out;
}

// ---------------------------------------------------------------------------
// first-order fields

double c_n_constant(int N, double kappa) {
    // slice the ball perpendicular to e1; t = cos(u) removes the sqrt endpoint
    // singularity of the N = 2 cross-section
    const Rule1D gl = gauss_legendre_on(64, 0.0, M_PI);
    double acc = 0.0;
    for (std::size_t i = 0; i < gl.size(); ++i) {
        const double u = gl.x[i];
        const double s = std::sin(u);
        const double cross = N == 2 ? 2.0 * s : M_PI * s * s;
        acc += gl.w[i] * s * cross * std::exp(-kappa * std::cos(u));
    }
    return acc;
}

double leading_amplitude(int N, double kappa, double eps, double l) {
    // leading far-field of one image: kernel asymptotics at distance l/eps
    // times the body factor c_N. For N = 2, 2 K0(k d) ~ sqrt(2 pi/(k d)) e^{-k d}
    // gives c2 sqrt(2 pi eps/(k l)); for N = 3 the kernel is e^{-k d}/d.
    const double cN = c_n_constant(N, kappa);
    if (N == 2)
        return cN * std::sqrt(2.0 * M_PI * eps / (kappa * l)) *
               std::exp(-kappa * l / eps);
    return cN * (eps / l) * std::exp(-kappa * l / eps);
}

std::vector<double> first_order_field(const StarBasis& basis, const BravaisLattice& lat,
                                      double kappa, double eps) {
    const int N = basis.ambient();
    lat.validate();
    if (lat.N != N) throw std::domain_error("first_order_field: ambient mismatch");
    const std::size_t nt = basis.grid_size();
    std::vector<double> out(nt, 0.0);
    if (lat.M == 0 || eps == 0.0) return out;
    const double dmin = lat.min_norm();
    const double rcut = dmin + 40.0 * eps / kappa;
    auto pts = lat.points_within(rcut);
    for (std::size_t ti = 0; ti < nt; ++ti) {
        const auto da = basis.dir(ti);
        double acc = 0.0;
        for (const auto& p : pts) {
            const double l = std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]);
            const double proj = (da[0] * p[0] + da[1] * p[1] + da[2] * p[2]) / l;
            acc += std::cosh(kappa * proj) * leading_amplitude(N, kappa, eps, l);
        }
        out[ti] = acc;
    }
    return out;
}

StarShape first_order_shape(const StarBasis& basis, const BravaisLattice& lat,
                            double kappa, double gamma, double eps,
                            const LatticeSpectrum& sp, int kband) {
    std::vector<double> field = first_order_field(basis, lat, kappa, eps);
    std::vector<double> c = basis.analyze(field);
    // the field is even by the +-p symmetry; enforce before inverting
    basis.project_even(c);
    for (std::size_t i = 0; i < c.size(); ++i) {
        if (basis.degree_of(i) > kband) c[i] = 0.0;
        c[i] *= gamma;
    }
    std::vector<double> corr = harmonic_inverse(basis, sp, gamma, c);
    StarShape out = round_shape(basis, kband, 1.0);
    for (std::size_t i = 0; i < out.coeff.size(); ++i) out.coeff[i] -= corr[i];
    return out;
}

NonconstancyReport nonconstancy_metrics(int N, const BravaisLattice& lat, double kappa,
                                        double eps) {
    lat.validate();
    NonconstancyReport rep;
    if (lat.M == N) {
        rep.aligned = rep.perpendicular = rep.ratio = 0.0;
        rep.verdict = "open (inconclusive at first order)";
        return rep;
    }
    // field values along e1 (in-lattice) and e_N (perpendicular)
    const double dmin = lat.min_norm();
    const double rcut = dmin + 40.0 * eps / kappa;
    auto pts = lat.points_within(rcut);
    auto field_at = [&](const Vec3& th) {
        double acc = 0.0;
        for (const auto& p : pts) {
            const double l = std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]);
            const double proj = (th.x * p[0] + th.y * p[1] + th.z * p[2]) / l;
            acc += std::cosh(kappa * proj) * leading_amplitude(N, kappa, eps, l);
        }
        return acc;
    };
    rep.aligned = field_at({1.0, 0.0, 0.0});
    rep.perpendicular = field_at(N == 2 ? Vec3{0.0, 1.0, 0.0} : Vec3{0.0, 0.0, 1.0});
    rep.ratio = rep.aligned / rep.perpendicular;
    rep.verdict = std::abs(rep.ratio - 1.0) > 1e-9 ? "non-constant" : "constant at first order";
    return rep;
}

// ---------------------------------------------------------------------------
// full nonlinear solve

LatticeSolveResult newton_lattice_solve(const StarBasis& basis, const BravaisLattice& lat,
                                        double kappa, double gamma, double eps,
                                        const LatticeSpectrum& sp, int kband,
                                        double tol, const LatticeQuad& q) {
    if (!(gamma > 0.0 && gamma < sp.gamma_n))
        throw std::domain_error("newton_lattice_solve: gamma must lie in (0, gamma_N)");
    const int N = basis.ambient();
    const std::size_t nt = basis.grid_size();
    const double cutoff = lat.M > 0 ? lat.min_norm() + 40.0 * eps / kappa : 0.0;

    // even-degree unknown indices up to kband
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < basis.dim(); ++i)
        if (basis.degree_of(i) % 2 == 0 && basis.degree_of(i) <= kband) idx.push_back(i);

    StarShape shape = round_shape(basis, kband, 1.0);
    // reference: Q(0,1) with the same quadrature (theta-averaged round value)
    std::vector<double> f0_round = self_interaction(basis, shape, kappa, q);
    double qref = 0.0;
    {
        double wsum = 0.0;
        for (std::size_t i = 0; i < nt; ++i) {
            qref += basis.weight(i) * f0_round[i];
            wsum += basis.weight(i);
        }
        qref = double(N - 1) + gamma * qref / wsum;
    }

    auto residual_field = [&](const StarShape& sh) {
        std::vector<double> r = star_mean_curvature(basis, sh);
        std::vector<double> f0 = self_interaction(basis, sh, kappa, q);
        std::vector<double> fl = lattice_interaction(basis, sh, lat, kappa, eps, cutoff, q);
        for (std::size_t i = 0; i < nt; ++i)
            r[i] += gamma * (f0[i] + fl[i]) - qref;
        return r;
    };

    LatticeSolveResult res;
    res.gamma_n_used = sp.gamma_n;
    double resid = 0.0;
    const int max_newton = 25;
    for (int iter = 0; iter <= max_newton; ++iter) {
        std::vector<double> r = residual_field(shape);
        resid = 0.0;
        for (double v : r) resid = std::max(resid, std::abs(v));
        if (resid <= tol) {
            res.shape = shape;
            res.residual_inf = resid;
            res.newton_iters = iter;
            std::vector<double> g = basis.synth(shape.coeff);
            double dev = 0.0;
            for (double v : g) dev = std::max(dev, std::abs(v - 1.0));
            res.deviation_inf = dev;
            return res;
        }
        if (iter == max_newton) break;

        std::vector<double> rc_full = basis.analyze(r);
        std::vector<double> rhs(idx.size());
        for (std::size_t i = 0; i < idx.size(); ++i) rhs[i] = -rc_full[idx[i]];

        auto apply = [&](const std::vector<double>& d) {
            std::vector<double> wc(basis.dim(), 0.0);
            for (std::size_t i = 0; i < idx.size(); ++i) wc[idx[i]] = d[i];
            std::vector<double> a = star_mc_linearized(basis, shape, wc);
            std::vector<double> b = d_self_interaction(basis, shape, wc, kappa, q);
            std::vector<double> c =
                d_lattice_interaction(basis, shape, wc, lat, kappa, eps, cutoff, q);
            for (std::size_t i = 0; i < nt; ++i) a[i] += gamma * (b[i] + c[i]);
            std::vector<double> ac = basis.analyze(a);
            std::vector<double> out(idx.size());
            for (std::size_t i = 0; i < idx.size(); ++i) out[i] = ac[idx[i]];
            return out;
        };
        // diagonal sigma preconditioner on even degrees
        auto precond = [&](const std::vector<double>& z) {
            std::vector<double> d(z.size());
            for (std::size_t i = 0; i < idx.size(); ++i)
                d[i] = z[i] / sp.sigma(gamma, basis.degree_of(idx[i]));
            return d;
        };
        std::vector<double> dx;
        gmres(apply, rhs, precond, dx, 1e-12, std::min<int>(int(idx.size()), 60));
        for (std::size_t i = 0; i < idx.size(); ++i) shape.coeff[idx[i]] += dx[i];
        if (shape.min_radius(basis) <= 0.0)
            throw std::runtime_error("newton_lattice_solve: shape degenerated");
    }
    std::ostringstream os;
    os << "newton_lattice_solve: no convergence (residual " << resid << ")";
    throw std::runtime_error(os.str());
}

} // namespace patternforge
