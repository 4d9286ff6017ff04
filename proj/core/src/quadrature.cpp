#include "patternforge/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>

namespace patternforge {

namespace {

Rule1D compute_gauss_legendre(int n) {
    if (n < 1) throw std::invalid_argument("gauss_legendre: n must be >= 1");
    Rule1D r;
    r.x.resize(n);
    r.w.resize(n);
    const int m = (n + 1) / 2;
    for (int i = 0; i < m; ++i) {
        // Tricomi initial guess, then Newton on P_n.
        double z = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = 0.0;
            for (int j = 0; j < n; ++j) {
                double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1.0);
            }
            pp = n * (z * p0 - p1) / (z * z - 1.0);
            double dz = p0 / pp;
            z -= dz;
            if (std::abs(dz) < 1e-15) break;
        }
        r.x[i] = -z;
        r.x[n - 1 - i] = z;
        r.w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
        r.w[n - 1 - i] = r.w[i];
    }
    return r;
}

} // namespace

const Rule1D& gauss_legendre(int n) {
    static std::mutex mu;
    static std::map<int, Rule1D> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, compute_gauss_legendre(n)).first;
    return it->second;
}

Rule1D gauss_legendre_on(int n, double a, double b) {
    const Rule1D& base = gauss_legendre(n);
    Rule1D r;
    r.x.resize(base.size());
    r.w.resize(base.size());
    const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    for (std::size_t i = 0; i < base.size(); ++i) {
        r.x[i] = mid + half * base.x[i];
        r.w[i] = half * base.w[i];
    }
    return r;
}

Rule1D geometric_panels(double a, double b, int npan, int ngl, double ratio,
                        bool toward_a) {
    if (!(b > a)) throw std::invalid_argument("geometric_panels: empty interval");
    std::vector<double> widths(npan);
    double sum = 0.0, w = 1.0;
    for (int i = 0; i < npan; ++i, w *= ratio) {
        widths[i] = w;
        sum += w;
    }
    for (auto& x : widths) x *= (b - a) / sum;
    if (!toward_a) std::reverse(widths.begin(), widths.end());
    Rule1D r;
    double lo = a;
    for (int i = 0; i < npan; ++i) {
        Rule1D p = gauss_legendre_on(ngl, lo, lo + widths[i]);
        r.x.insert(r.x.end(), p.x.begin(), p.x.end());
        r.w.insert(r.w.end(), p.w.begin(), p.w.end());
        lo += widths[i];
    }
    return r;
}

std::vector<double> ChebFit::cheb_points(double a, double b, int n) {
    std::vector<double> pts(n);
    const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    for (int k = 0; k < n; ++k)
        pts[k] = mid + half * std::cos(M_PI * (k + 0.5) / n);
    return pts;
}

std::vector<double> ChebFit::coeffs_from_samples(const std::vector<double>& fx) {
    const int n = static_cast<int>(fx.size());
    std::vector<double> c(n, 0.0);
    for (int j = 0; j < n; ++j) {
        double acc = 0.0;
        for (int k = 0; k < n; ++k)
            acc += fx[k] * std::cos(M_PI * j * (k + 0.5) / n);
        c[j] = 2.0 / n * acc;
    }
    c[0] *= 0.5;
    return c;
}

ChebFit::ChebFit(const std::function<double(double)>& f, double a, double b, int n)
    : a_(a), b_(b) {
    auto pts = cheb_points(a, b, n);
    std::vector<double> fx(n);
    for (int k = 0; k < n; ++k) fx[k] = f(pts[k]);
    c_ = coeffs_from_samples(fx);
}

double cheb_eval(const double* c, int n, double a, double b, double x) {
    const double t = (2.0 * x - a - b) / (b - a);
    const double t2 = 2.0 * t;
    double d = 0.0, dd = 0.0;
    for (int j = n - 1; j >= 1; --j) {
        double sv = d;
        d = t2 * d - dd + c[j];
        dd = sv;
    }
    return t * d - dd + c[0];
}

double ChebFit::operator()(double x) const {
    return cheb_eval(c_.data(), static_cast<int>(c_.size()), a_, b_, x);
}

double smoothstep7(double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    // S7(x) = x^8 * sum_{k=0}^{7} C(7+k,k) C(15,7-k) (-x)^k
    static const double a[8] = {6435.0,   -40040.0, 108108.0, -163800.0,
                                150150.0, -83160.0, 25740.0,  -3432.0};
    double acc = a[7];
    for (int k = 6; k >= 0; --k) acc = acc * x + a[k];
    double x2 = x * x, x4 = x2 * x2;
    return x4 * x4 * acc;
}

} // namespace patternforge
