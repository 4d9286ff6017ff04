#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace patternforge {

struct Rule1D {
    std::vector<double> x;
    std::vector<double> w;
    std::size_t size() const { return x.size(); }
};

// Gauss-Legendre nodes/weights on [-1, 1]. Cached per n, thread-safe.
const Rule1D& gauss_legendre(int n);

// Gauss-Legendre rule mapped to [a, b].
Rule1D gauss_legendre_on(int n, double a, double b);

// Composite rule: npan geometric panels covering [a, b], widths growing by
// `ratio` away from the `toward_a` endpoint, GL(ngl) on each panel.
Rule1D geometric_panels(double a, double b, int npan, int ngl, double ratio,
                        bool toward_a = true);

template <class F>
double integrate(const Rule1D& r, F&& f) {
    double acc = 0.0;
    for (std::size_t i = 0; i < r.x.size(); ++i) acc += r.w[i] * f(r.x[i]);
    return acc;
}

// Chebyshev interpolant of f on [a, b] (first-kind nodes, Clenshaw eval).
class ChebFit {
  public:
    ChebFit() = default;
    ChebFit(const std::function<double(double)>& f, double a, double b, int n);
    double operator()(double x) const;
    double a() const { return a_; }
    double b() const { return b_; }
    const std::vector<double>& coeffs() const { return c_; }
    // Build coefficients from samples at the standard n Chebyshev points
    // x_k = cos(pi (k+1/2)/n) mapped to [a,b], sample order k = 0..n-1.
    static std::vector<double> coeffs_from_samples(const std::vector<double>& fx);
    static std::vector<double> cheb_points(double a, double b, int n);
    ChebFit(std::vector<double> coeffs, double a, double b)
        : c_(std::move(coeffs)), a_(a), b_(b) {}

  private:
    std::vector<double> c_;
    double a_ = -1.0, b_ = 1.0;
};

// Clenshaw evaluation of a Chebyshev series on [a,b] at x.
double cheb_eval(const double* c, int n, double a, double b, double x);

// C^7 polynomial smoothstep: 0 for x<=0, 1 for x>=1, degree-15 bridge.
double smoothstep7(double x);

} // namespace patternforge
