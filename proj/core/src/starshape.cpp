#include "patternforge/starshape.hpp"

#include "patternforge/quadrature.hpp"

#include <cmath>
#include <stdexcept>

namespace patternforge {

namespace {
constexpr double kTwoPi = 2.0 * M_PI;
}

std::size_t StarBasis::plm_index(int lat, int k, int m) const {
    // packed triangular layout per latitude: offset(k) = k(k+1)/2 + m
    return (std::size_t(lat) * (kmax_ + 1) * (kmax_ + 2)) / 2 +
           std::size_t(k) * (k + 1) / 2 + m;
}

StarBasis::StarBasis(int N, int res1, int res2) : n_(N), res1_(res1), res2_(res2) {
    if (N == 2) {
        if (res1 < 16) throw std::invalid_argument("StarBasis: ntheta too small");
        kmax_ = res1 / 2 - 1;
        dim_ = 2 * std::size_t(kmax_) + 1;
        gsize_ = res1;
        w_.assign(gsize_, kTwoPi / res1);
    } else if (N == 3) {
        if (res2 == 0) res2 = 2 * res1;
        res2_ = res2;
        if (res1 < 8 || res2 < 16) throw std::invalid_argument("StarBasis: grid too small");
        kmax_ = std::min(res1 - 2, (res2 - 2) / 2);
        dim_ = std::size_t(kmax_ + 1) * (kmax_ + 1);
        gsize_ = std::size_t(res1) * res2;
        const Rule1D& gl = gauss_legendre(res1);
        xlat_ = gl.x;
        w_.resize(gsize_);
        for (int i = 0; i < res1; ++i)
            for (int j = 0; j < res2; ++j)
                w_[std::size_t(i) * res2 + j] = gl.w[i] * (kTwoPi / res2);
        // normalized associated Legendre tables and their theta-derivatives
        plm_.resize(std::size_t(res1) * (kmax_ + 1) * (kmax_ + 2) / 2);
        dplm_.resize(plm_.size());
        for (int i = 0; i < res1; ++i) {
            const double x = xlat_[i];
            const double s = std::sqrt(1.0 - x * x); // sin(theta), > 0 at GL nodes
            // P bar recurrences
            std::vector<double> prev2(kmax_ + 1, 0.0), prev1(kmax_ + 1, 0.0),
                cur(kmax_ + 1, 0.0);
            // diagonal terms P^m_m
            std::vector<double> pmm(kmax_ + 1);
            pmm[0] = std::sqrt(1.0 / (4.0 * M_PI));
            for (int m = 1; m <= kmax_; ++m)
                pmm[m] = pmm[m - 1] * s * std::sqrt((2.0 * m + 1.0) / (2.0 * m));
            for (int m = 0; m <= kmax_; ++m) {
                double pk2 = 0.0;           // P bar_{k-2}^m
                double pk1 = pmm[m];        // P bar_m^m
                plm_[plm_index(i, m, m)] = pk1;
                for (int k = m + 1; k <= kmax_; ++k) {
                    double pk;
                    if (k == m + 1) {
                        pk = x * std::sqrt(2.0 * m + 3.0) * pk1;
                    } else {
                        const double ak = std::sqrt((4.0 * k * k - 1.0) /
                                                    (double(k) * k - double(m) * m));
                        const double bk =
                            std::sqrt((double(k - 1) * (k - 1) - double(m) * m) /
                                      (4.0 * double(k - 1) * (k - 1) - 1.0));
                        pk = ak * (x * pk1 - bk * pk2);
                    }
                    plm_[plm_index(i, k, m)] = pk;
                    pk2 = pk1;
                    pk1 = pk;
                }
            }
            // d/dtheta P bar_k^m = (k x P bar_k^m - e_k^m P bar_{k-1}^m)/sin,
            // e_k^m = sqrt((2k+1)/(2k-1) (k^2-m^2))
            for (int m = 0; m <= kmax_; ++m)
                for (int k = m; k <= kmax_; ++k) {
                    double low = (k > m) ? plm_[plm_index(i, k - 1, m)] : 0.0;
                    double e = (k > 0) ? std::sqrt((2.0 * k + 1.0) / (2.0 * k - 1.0) *
                                                   (double(k) * k - double(m) * m))
                                       : 0.0;
                    dplm_[plm_index(i, k, m)] =
                        (k * x * plm_[plm_index(i, k, m)] - e * low) / s;
                }
        }
    } else {
        throw std::invalid_argument("StarBasis: N must be 2 or 3");
    }
}

std::array<double, 3> StarBasis::dir(std::size_t i) const {
    if (n_ == 2) {
        double th = kTwoPi * double(i) / res1_;
        return {std::cos(th), std::sin(th), 0.0};
    }
    const std::size_t lat = i / res2_, lon = i % res2_;
    const double x = xlat_[lat], s = std::sqrt(1.0 - x * x);
    const double ph = kTwoPi * double(lon) / res2_;
    return {s * std::cos(ph), s * std::sin(ph), x};
}

std::size_t StarBasis::index(int k, int m) const {
    if (n_ == 2) {
        if (k == 0) return 0;
        return std::size_t(2 * k - 1) + (m != 0 ? 1 : 0);
    }
    // N=3 layout: degree blocks; within block: m=0, then (cos,sin) pairs
    std::size_t off = std::size_t(k) * k;
    if (m == 0) return off;
    int am = std::abs(m);
    return off + 2 * std::size_t(am) - 1 + (m < 0 ? 1 : 0);
}

int StarBasis::degree_of(std::size_t idx) const {
    if (n_ == 2) return idx == 0 ? 0 : int((idx + 1) / 2);
    return int(std::floor(std::sqrt(double(idx))));
}

std::vector<double> StarBasis::synth(const std::vector<double>& c) const {
    std::vector<double> g(gsize_, 0.0);
    if (n_ == 2) {
        const double c0 = 1.0 / std::sqrt(kTwoPi), ck = 1.0 / std::sqrt(M_PI);
        for (std::size_t i = 0; i < gsize_; ++i) {
            double th = kTwoPi * double(i) / res1_;
            double acc = c[0] * c0;
            for (int k = 1; k <= kmax_; ++k) {
                acc += c[index(k, 0)] * ck * std::cos(k * th);
                acc += c[index(k, 1)] * ck * std::sin(k * th);
            }
            g[i] = acc;
        }
        return g;
    }
    const double r2 = std::sqrt(2.0);
    for (int i = 0; i < res1_; ++i)
        for (int j = 0; j < res2_; ++j) {
            const double ph = kTwoPi * double(j) / res2_;
            double acc = 0.0;
            for (int k = 0; k <= kmax_; ++k) {
                acc += c[index(k, 0)] * plm_[plm_index(i, k, 0)];
                for (int m = 1; m <= k; ++m) {
                    const double p = r2 * plm_[plm_index(i, k, m)];
                    acc += p * (c[index(k, m)] * std::cos(m * ph) +
                                c[index(k, -m)] * std::sin(m * ph));
                }
            }
            g[std::size_t(i) * res2_ + j] = acc;
        }
    return g;
}

std::vector<double> StarBasis::analyze(const std::vector<double>& g) const {
    std::vector<double> c(dim_, 0.0);
    if (n_ == 2) {
        const double c0 = 1.0 / std::sqrt(kTwoPi), ck = 1.0 / std::sqrt(M_PI);
        for (std::size_t i = 0; i < gsize_; ++i) {
            double th = kTwoPi * double(i) / res1_;
            const double wv = w_[i] * g[i];
            c[0] += wv * c0;
            for (int k = 1; k <= kmax_; ++k) {
                c[index(k, 0)] += wv * ck * std::cos(k * th);
                c[index(k, 1)] += wv * ck * std::sin(k * th);
            }
        }
        return c;
    }
    const double r2 = std::sqrt(2.0);
    for (int i = 0; i < res1_; ++i)
        for (int j = 0; j < res2_; ++j) {
            const double ph = kTwoPi * double(j) / res2_;
            const double wv = w_[std::size_t(i) * res2_ + j] * g[std::size_t(i) * res2_ + j];
            for (int k = 0; k <= kmax_; ++k) {
                c[index(k, 0)] += wv * plm_[plm_index(i, k, 0)];
                for (int m = 1; m <= k; ++m) {
                    const double p = r2 * plm_[plm_index(i, k, m)];
                    c[index(k, m)] += wv * p * std::cos(m * ph);
                    c[index(k, -m)] += wv * p * std::sin(m * ph);
                }
            }
        }
    return c;
}

double StarBasis::eval(const std::vector<double>& c, const std::array<double, 3>& d) const {
    if (n_ == 2) {
        const double th = std::atan2(d[1], d[0]);
        const double c0 = 1.0 / std::sqrt(kTwoPi), ck = 1.0 / std::sqrt(M_PI);
        double acc = c[0] * c0;
        for (int k = 1; k <= kmax_; ++k)
            acc += ck * (c[index(k, 0)] * std::cos(k * th) +
                         c[index(k, 1)] * std::sin(k * th));
        return acc;
    }
    // normalized Legendre recurrence at x = d.z
    const double x = d[2];
    const double s = std::sqrt(std::max(0.0, 1.0 - x * x));
    const double ph = std::atan2(d[1], d[0]);
    const double r2 = std::sqrt(2.0);
    double acc = 0.0;
    std::vector<double> pm(kmax_ + 1), pk1(kmax_ + 1), pk2(kmax_ + 1);
    double pmm = std::sqrt(1.0 / (4.0 * M_PI));
    for (int m = 0; m <= kmax_; ++m) {
        if (m > 0) pmm *= s * std::sqrt((2.0 * m + 1.0) / (2.0 * m));
        double p2 = 0.0, p1 = pmm;
        for (int k = m; k <= kmax_; ++k) {
            double p;
            if (k == m)
                p = p1;
            else if (k == m + 1)
                p = x * std::sqrt(2.0 * m + 3.0) * p1;
            else {
                const double ak =
                    std::sqrt((4.0 * k * k - 1.0) / (double(k) * k - double(m) * m));
                const double bk = std::sqrt((double(k - 1) * (k - 1) - double(m) * m) /
                                            (4.0 * double(k - 1) * (k - 1) - 1.0));
                p = ak * (x * p1 - bk * p2);
            }
            if (k > m) {
                p2 = p1;
                p1 = p;
            }
            if (m == 0)
                acc += c[index(k, 0)] * p;
            else
                acc += r2 * p * (c[index(k, m)] * std::cos(m * ph) +
                                 c[index(k, -m)] * std::sin(m * ph));
        }
    }
    return acc;
}

void StarBasis::gradient(const std::vector<double>& c, std::vector<double>& g1,
                         std::vector<double>& g2) const {
    if (n_ == 2) {
        g1.assign(gsize_, 0.0);
        g2.clear();
        const double ck = 1.0 / std::sqrt(M_PI);
        for (std::size_t i = 0; i < gsize_; ++i) {
            double th = kTwoPi * double(i) / res1_;
            double acc = 0.0;
            for (int k = 1; k <= kmax_; ++k)
                acc += ck * k * (-c[index(k, 0)] * std::sin(k * th) +
                                 c[index(k, 1)] * std::cos(k * th));
            g1[i] = acc;
        }
        return;
    }
    g1.assign(gsize_, 0.0);
    g2.assign(gsize_, 0.0);
    const double r2 = std::sqrt(2.0);
    for (int i = 0; i < res1_; ++i) {
        const double s = std::sqrt(1.0 - xlat_[i] * xlat_[i]);
        for (int j = 0; j < res2_; ++j) {
            const double ph = kTwoPi * double(j) / res2_;
            double a1 = 0.0, a2 = 0.0;
            for (int k = 0; k <= kmax_; ++k) {
                a1 += c[index(k, 0)] * dplm_[plm_index(i, k, 0)];
                for (int m = 1; m <= k; ++m) {
                    const double pd = r2 * dplm_[plm_index(i, k, m)];
                    const double pv = r2 * plm_[plm_index(i, k, m)] * m / s;
                    const double cc = std::cos(m * ph), ss = std::sin(m * ph);
                    a1 += pd * (c[index(k, m)] * cc + c[index(k, -m)] * ss);
                    a2 += pv * (-c[index(k, m)] * ss + c[index(k, -m)] * cc);
                }
            }
            g1[std::size_t(i) * res2_ + j] = a1;
            g2[std::size_t(i) * res2_ + j] = a2;
        }
    }
}

std::vector<double> StarBasis::laplacian(const std::vector<double>& c) const {
    std::vector<double> out(c);
    for (std::size_t i = 0; i < dim_; ++i) {
        int k = degree_of(i);
        out[i] *= -double(k) * (k + n_ - 2);
    }
    return out;
}

double StarBasis::odd_mass(const std::vector<double>& c) const {
    double m = 0.0;
    for (std::size_t i = 0; i < dim_ && i < c.size(); ++i)
        if (degree_of(i) % 2 == 1) m = std::max(m, std::abs(c[i]));
    return m;
}

void StarBasis::project_even(std::vector<double>& c) const {
    for (std::size_t i = 0; i < dim_ && i < c.size(); ++i)
        if (degree_of(i) % 2 == 1) c[i] = 0.0;
}

double StarShape::min_radius(const StarBasis& basis) const {
    auto g = basis.synth(coeff);
    double m = g[0];
    for (double v : g) m = std::min(m, v);
    return m;
}

StarShape round_shape(const StarBasis& basis, int kband, double R) {
    StarShape s;
    s.N = basis.ambient();
    s.kband = kband;
    s.coeff.assign(basis.dim(), 0.0);
    // constant R: coefficient of the constant basis function
    s.coeff[0] = R * (s.N == 2 ? std::sqrt(kTwoPi) : std::sqrt(4.0 * M_PI));
    return s;
}

} // namespace patternforge
