#include "patternforge/kernels.hpp"

#include "patternforge/quadrature.hpp"

#include <cmath>
#include <functional>
#include <stdexcept>

namespace patternforge {

namespace {

constexpr double kUnderflowX = 705.0; // exp(-706) rounds to subnormal/0 territory

// Small-x series (x <= 2), standard I/K expansions with harmonic numbers.
double k0_series(double x) {
    const double q = 0.25 * x * x;
    const double lg = std::log(0.5 * x);
    const double euler = 0.57721566490153286060651209008240;
    double term = 1.0, i0 = 1.0, sum = 0.0, hk = 0.0;
    for (int k = 1; k < 40; ++k) {
        term *= q / (static_cast<double>(k) * k);
        hk += 1.0 / k;
        i0 += term;
        sum += term * hk;
        if (term < 1e-18 * i0) break;
    }
    return -(lg + euler) * i0 + sum;
}

double k1_series(double x) {
    const double q = 0.25 * x * x;
    const double lg = std::log(0.5 * x);
    const double euler = 0.57721566490153286060651209008240;
    // I1(x) = (x/2) sum q^k/(k!(k+1)!)
    // K1(x) = 1/x + lg*I1(x) - (x/4) sum [psi(k+1)+psi(k+2)] q^k/(k!(k+1)!)
    double term = 1.0;                    // q^k/(k!(k+1)!)
    double i1 = 1.0;
    double psum = 1.0 - 2.0 * euler;      // psi(1)+psi(2)
    double sum = term * psum;
    for (int k = 1; k < 40; ++k) {
        term *= q / (static_cast<double>(k) * (k + 1.0));
        psum += 1.0 / k + 1.0 / (k + 1.0);
        i1 += term;
        sum += term * psum;
        if (term < 1e-18) break;
    }
    i1 *= 0.5 * x;
    return 1.0 / x + lg * i1 - 0.25 * x * sum;
}

// Large-x route: K_nu(x) = (e^{-x}/sqrt(x)) * I_nu where, with s = u^2,
//   I_0 = 2 int_0^inf e^{-u^2} (u^2/x + 2)^{-1/2} du
//   I_1 = 2 int_0^inf e^{-u^2} u^2 (u^2/x + 2)^{+1/2} du
// Fixed nodes on [0, 8]; weights carry e^{-u^2}.
struct TailRule {
    std::vector<double> u2; // u^2
    std::vector<double> w;  // weight * e^{-u^2}
};

const TailRule& tail_rule() {
    static const TailRule r = [] {
        TailRule t;
        Rule1D gl = gauss_legendre_on(48, 0.0, 8.0);
        t.u2.resize(gl.size());
        t.w.resize(gl.size());
        for (std::size_t i = 0; i < gl.size(); ++i) {
            t.u2[i] = gl.x[i] * gl.x[i];
            t.w[i] = 2.0 * gl.w[i] * std::exp(-t.u2[i]);
        }
        return t;
    }();
    return r;
}

double k0_large(double x) {
    const TailRule& t = tail_rule();
    double acc = 0.0;
    for (std::size_t i = 0; i < t.u2.size(); ++i)
        acc += t.w[i] / std::sqrt(t.u2[i] / x + 2.0);
    return std::exp(-x) / std::sqrt(x) * acc;
}

double k1_large(double x) {
    const TailRule& t = tail_rule();
    double acc = 0.0;
    for (std::size_t i = 0; i < t.u2.size(); ++i)
        acc += t.w[i] * t.u2[i] * std::sqrt(t.u2[i] / x + 2.0);
    return std::exp(-x) / std::sqrt(x) * acc;
}

void check_positive(double x, const char* what) {
    if (!(x > 0.0)) throw std::domain_error(std::string(what) + " must be > 0");
}

} // namespace

double yukawa(double kappa, double r) {
    check_positive(kappa, "kappa");
    check_positive(r, "r");
    return std::exp(-kappa * r) / r;
}

double bessel_k0(double x) {
    check_positive(x, "x");
    if (x >= kUnderflowX) return 0.0;
    return x <= 2.0 ? k0_series(x) : k0_large(x);
}

double bessel_k1(double x) {
    check_positive(x, "x");
    if (x >= kUnderflowX) return 0.0;
    return x <= 2.0 ? k1_series(x) : k1_large(x);
}

KResult bessel_k(int order, double x) {
    if (order != 0 && order != 1)
        throw std::domain_error("bessel_k: order must be 0 or 1");
    check_positive(x, "x");
    if (x >= kUnderflowX) return {0.0, true};
    return {order == 0 ? bessel_k0(x) : bessel_k1(x), false};
}

double g_kn(int dimension, double kappa, double r) {
    check_positive(kappa, "kappa");
    check_positive(r, "r");
    if (dimension == 2) return 2.0 * bessel_k0(kappa * r);
    if (dimension == 3) return yukawa(kappa, r);
    throw std::domain_error("g_kn: dimension must be 2 or 3");
}

namespace {

// Truncation radius so the exponential tail is below tol of the value.
double trunc_radius(double decay, double tol) {
    return (30.0 + std::abs(std::log(tol))) / decay;
}

struct QuadResult {
    double value;
    bool converged;
};

// int_0^R f with composite GL panels: deep geometric grading near 0 (the
// integrands may be log-singular or sharply peaked there), then uniform panels
// sized to both the cos(beta r) oscillation and the kernel decay scale.
QuadResult line_integral(const std::function<double(double)>& f, double R,
                         double beta, double scale) {
    const double s0 = std::min(1.0, 0.5 * R);
    Rule1D rule = geometric_panels(0.0, s0, 40, 12, 2.0, true);
    const double half_period = beta > 1e-9 ? M_PI / beta : R;
    const double w = std::min({0.5 * half_period, 0.8 * scale, R});
    const int nfar = std::min(8000, std::max(8, static_cast<int>(std::ceil((R - s0) / w))));
    const double wf = (R - s0) / nfar;
    for (int i = 0; i < nfar; ++i) {
        Rule1D p = gauss_legendre_on(12, s0 + i * wf, s0 + (i + 1) * wf);
        rule.x.insert(rule.x.end(), p.x.begin(), p.x.end());
        rule.w.insert(rule.w.end(), p.w.begin(), p.w.end());
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < rule.size(); ++i) acc += rule.w[i] * f(rule.x[i]);
    return {acc, true};
}

} // namespace

std::vector<IdentityReport> identity_suite(double kappa, double alpha,
                                           double beta, double delta) {
    check_positive(kappa, "kappa");
    if (alpha < 0 || beta < 0 || delta < 0)
        throw std::domain_error("identity_suite: alpha, beta, delta must be >= 0");
    const double tol = 1e-12;
    std::vector<IdentityReport> out;

    auto push = [&](const std::string& id, double lhs, double rhs, bool ok) {
        IdentityReport r;
        r.id = id;
        r.kappa = kappa;
        r.alpha = alpha;
        r.beta = beta;
        r.delta = delta;
        r.lhs = lhs;
        r.rhs = rhs;
        r.residual = std::abs(lhs - rhs) / std::max(std::abs(rhs), 1.0);
        r.converged = ok;
        out.push_back(r);
    };

    // 1) int_R cos(b r) G_k(sqrt(r^2+a^2)) dr = 2 K0(a sqrt(k^2+b^2)), a > 0
    {
        if (alpha <= 0.0) throw std::domain_error("identity_suite: alpha must be > 0");
        double R = trunc_radius(kappa, tol);
        auto f = [&](double r) {
            double s = std::hypot(r, alpha);
            return 2.0 * std::cos(beta * r) * std::exp(-kappa * s) / s;
        };
        auto q = line_integral(f, R, beta, 1.0 / kappa);
        push("cos-yukawa-line", q.value, 2.0 * bessel_k0(alpha * std::hypot(kappa, beta)), q.converged);
    }
    // 2) int_R cos(b r) K0(|r| sqrt(k^2+a^2)) dr = pi / sqrt(k^2+b^2+a^2)
    {
        double m = std::hypot(kappa, alpha);
        double R = trunc_radius(m, tol);
        auto f = [&](double r) { return 2.0 * std::cos(beta * r) * bessel_k0(r * m); };
        auto q = line_integral(f, R, beta, 1.0 / m);
        push("cos-besselk0-line", q.value, M_PI / std::sqrt(kappa * kappa + beta * beta + alpha * alpha), q.converged);
    }
    // 3) int_{R^2} G_k(|x|) dx = 2 pi / k  (polar form, measure r dr)
    {
        double R = trunc_radius(kappa, tol);
        auto f = [&](double r) { return 2.0 * M_PI * std::exp(-kappa * r); };
        auto q = line_integral(f, R, 0.0, 1.0 / kappa);
        push("yukawa-plane", q.value, 2.0 * M_PI / kappa, q.converged);
    }
    // 4) int_R cos(b r) K0(sqrt(r^2+d^2) sqrt(a^2+k^2)) dr
    //    = pi exp(-d sqrt(b^2+a^2+k^2)) / sqrt(b^2+a^2+k^2)
    {
        double m = std::hypot(alpha, kappa);
        double R = trunc_radius(m, tol);
        auto f = [&](double r) {
            return 2.0 * std::cos(beta * r) * bessel_k0(std::hypot(r, delta) * m);
        };
        auto q = line_integral(f, R, beta, 1.0 / m);
        double s = std::sqrt(beta * beta + alpha * alpha + kappa * kappa);
        push("cos-besselk0-offset", q.value, M_PI * std::exp(-delta * s) / s, q.converged);
    }
    // 5) int_{R^2} G_k(sqrt(|x|^2+d^2)) dx = 2 pi exp(-d k)/k
    {
        double R = trunc_radius(kappa, tol);
        auto f = [&](double r) {
            double s = std::hypot(r, delta);
            return 2.0 * M_PI * r * std::exp(-kappa * s) / s;
        };
        auto q = line_integral(f, R, 0.0, 1.0 / kappa);
        push("yukawa-plane-offset", q.value, 2.0 * M_PI * std::exp(-delta * kappa) / kappa, q.converged);
    }
    return out;
}

} // namespace patternforge
