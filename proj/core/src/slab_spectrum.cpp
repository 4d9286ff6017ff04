#include "patternforge/slab_spectrum.hpp"

#include "patternforge/quadrature.hpp"

#include <cmath>
#include <sstream>

namespace patternforge {

namespace {

void check_params(const SlabParams& p) {
    if (!(p.kappa > 0.0)) throw std::domain_error("kappa must be > 0");
    if (!(p.gamma >= 0.0)) throw std::domain_error("gamma must be >= 0");
}

} // namespace

double sigma_value(const SlabParams& p, double lambda, double x) {
    check_params(p);
    if (!(lambda > 0.0)) throw std::domain_error("lambda must be > 0");
    const double k = p.kappa;
    const double s = std::sqrt(k * k + x * x);
    const double bracket = 1.0 / k - 1.0 / s - std::exp(-2.0 * lambda * s) / s -
                           std::exp(-2.0 * lambda * k) / k;
    return x * x - 2.0 * M_PI * p.gamma * bracket;
}

double sigma_closed(const SlabParams& p, double lambda, int ell) {
    if (ell < 0) throw std::domain_error("ell must be >= 0");
    return sigma_value(p, lambda, static_cast<double>(ell));
}

double dsigma_dlambda(const SlabParams& p, double lambda, double x) {
    check_params(p);
    if (!(lambda > 0.0)) throw std::domain_error("lambda must be > 0");
    const double k = p.kappa;
    const double s = std::sqrt(k * k + x * x);
    return -4.0 * M_PI * p.gamma *
           (std::exp(-2.0 * lambda * s) + std::exp(-2.0 * lambda * k));
}

double sigma_oracle(const SlabParams& p, double lambda, int k1, int k2) {
    check_params(p);
    if (!(lambda > 0.0)) throw std::domain_error("lambda must be > 0");
    const double kap = p.kappa;
    const double kn = std::hypot(double(k1), double(k2));
    const double R = (30.0 + 28.0) / kap; // e^{-kap R} tail below 5e-26 of scale
    // radial rule: panels sized to the oscillation of cos(k.r)
    const double half_period = kn > 0.5 ? M_PI / kn : R;
    int npan = std::max(24, static_cast<int>(std::ceil(R / std::min(half_period, 2.0 / kap))) + 8);
    Rule1D rad;
    {
        double w = R / npan;
        for (int i = 0; i < npan; ++i) {
            Rule1D pnl = gauss_legendre_on(8, i * w, (i + 1) * w);
            rad.x.insert(rad.x.end(), pnl.x.begin(), pnl.x.end());
            rad.w.insert(rad.w.end(), pnl.w.begin(), pnl.w.end());
        }
    }
    const int nth = std::max(64, 2 * static_cast<int>(std::ceil(kn * R)) + 16);
    const double wth = 2.0 * M_PI / nth;

    double i1 = 0.0, i2 = 0.0;
    for (int a = 0; a < nth; ++a) {
        const double th = a * wth;
        const double c1 = std::cos(th), c2 = std::sin(th);
        double acc1 = 0.0, acc2 = 0.0;
        for (std::size_t i = 0; i < rad.size(); ++i) {
            const double r = rad.x[i], w = rad.w[i];
            const double prod = std::cos(k1 * r * c1) * std::cos(k2 * r * c2);
            // G_k(r) r = e^{-kap r}
            acc1 += w * (1.0 - prod) * std::exp(-kap * r);
            const double s = std::sqrt(r * r + 4.0 * lambda * lambda);
            acc2 += w * (1.0 + prod) * r * std::exp(-kap * s) / s;
        }
        i1 += wth * acc1;
        i2 += wth * acc2;
    }
    return kn * kn - p.gamma * i1 + p.gamma * i2;
}

GammaWindow gamma_window(double kappa) {
    if (!(kappa > 0.0)) throw std::domain_error("kappa must be > 0");
    GammaWindow w;
    w.lower = 1.0 / (2.0 * M_PI) / (1.0 / kappa - 1.0 / std::sqrt(kappa * kappa + 1.0));
    w.upper = std::pow(kappa * kappa + 1.0, 1.5) / (2.0 * M_PI);
    w.nonempty = w.lower < w.upper;
    return w;
}

double lambda_star(const SlabParams& p) {
    check_params(p);
    const GammaWindow w = gamma_window(p.kappa);
    const double limit =
        1.0 - 2.0 * M_PI * p.gamma *
                  (1.0 / p.kappa - 1.0 / std::sqrt(p.kappa * p.kappa + 1.0));
    if (p.gamma <= w.lower || limit >= 0.0) throw NoBifurcation(limit);

    // sigma(.,1) is strictly decreasing in lambda; bracket then safeguarded Newton
    double lo = 1e-6;
    double hi = 1.0;
    while (sigma_value(p, hi, 1.0) > 0.0) {
        hi *= 2.0;
        if (hi > 1e8) throw NoBifurcation(limit);
    }
    if (sigma_value(p, lo, 1.0) < 0.0) lo = 1e-12;
    double x = 0.5 * (lo + hi);
    for (int it = 0; it < 200; ++it) {
        double f = sigma_value(p, x, 1.0);
        if (std::abs(f) < 1e-13) break;
        if (f > 0.0)
            lo = x;
        else
            hi = x;
        double d = dsigma_dlambda(p, x, 1.0);
        double xn = x - f / d;
        x = (xn > lo && xn < hi) ? xn : 0.5 * (lo + hi);
    }
    return x;
}

SpectrumReport spectral_certificate(const SlabParams& p, int ell_max) {
    if (ell_max < 8) throw std::domain_error("ell_max must be >= 8");
    const GammaWindow w = gamma_window(p.kappa);
    if (!(p.gamma > w.lower && p.gamma < w.upper)) {
        std::ostringstream os;
        os << "gamma " << p.gamma << " outside the admissible window (" << w.lower
           << ", " << w.upper << ")";
        throw std::domain_error(os.str());
    }
    SpectrumReport rep;
    rep.lambda_star = lambda_star(p);
    for (int ell = 0; ell <= ell_max; ++ell)
        rep.sigma_at[ell] = sigma_closed(p, rep.lambda_star, ell);

    rep.kernel_simple = true;
    rep.range_coercive = true;
    rep.transversal = dsigma_dlambda(p, rep.lambda_star, 1.0) < 0.0;
    std::ostringstream fail;

    if (!(rep.sigma_at[0] > 0.0)) {
        rep.kernel_simple = false;
        fail << "sigma(0) <= 0; ";
    }
    if (std::abs(rep.sigma_at[1]) > 1e-10) {
        rep.kernel_simple = false;
        fail << "sigma(1) != 0; ";
    }
    for (int ell = 1; ell < ell_max; ++ell)
        if (!(rep.sigma_at[ell + 1] > rep.sigma_at[ell])) {
            rep.range_coercive = false;
            fail << "sigma not increasing at ell=" << ell + 1 << "; ";
            break;
        }
    if (std::abs(rep.sigma_at[ell_max] / (double(ell_max) * ell_max) - 1.0) > 0.5) {
        rep.range_coercive = false;
        fail << "sigma(ell)/ell^2 far from 1 at ell_max; ";
    }
    // monotone-derivative sufficient condition at sampled x >= 1:
    // 1 - pi g (1+e^{-2 l s})/s^3 - 2 pi g l e^{-2 l s}/s^2 > 0, s = sqrt(k^2+x^2)
    for (double x = 1.0; x <= ell_max; x += 0.25) {
        const double s2 = p.kappa * p.kappa + x * x;
        const double s = std::sqrt(s2);
        const double e = std::exp(-2.0 * rep.lambda_star * s);
        const double gp = 1.0 - M_PI * p.gamma * (1.0 + e) / (s2 * s) -
                          2.0 * M_PI * p.gamma * rep.lambda_star * e / s2;
        if (!(gp > 0.0)) {
            rep.range_coercive = false;
            fail << "monotonicity condition fails at x=" << x << "; ";
            break;
        }
    }
    rep.failure = fail.str();
    return rep;
}

} // namespace patternforge
