#include "patternforge/periodic_field.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>

namespace patternforge {

namespace {

constexpr double kTwoPi = 2.0 * M_PI;

int wrap(int i, int n) {
    int r = i % n;
    return r < 0 ? r + n : r;
}

// index maps for the 8 square symmetries on grid indices: -t_i = t_{(n-i) mod n}
// modulo the period, so the cell-registered grid is closed under all of them.
struct D4Ops {
    // each op maps (i,j) -> (i',j')
    static std::pair<int, int> apply(int op, int i, int j, int n) {
        const int mi = wrap(n - i, n), mj = wrap(n - j, n);
        switch (op) {
            case 0: return {i, j};
            case 1: return {j, i};
            case 2: return {mi, j};
            case 3: return {i, mj};
            case 4: return {mi, mj};
            case 5: return {j, mi};
            case 6: return {mj, i};
            default: return {mj, mi};
        }
    }
};

// cos/sin tables: col k of C is cos(k t_i)
struct TrigTables {
    std::vector<double> c, s; // (n) x (kmax+1)
    int n, kmax;
    double cosv(int i, int k) const { return c[std::size_t(i) * (kmax + 1) + k]; }
    double sinv(int i, int k) const { return s[std::size_t(i) * (kmax + 1) + k]; }
};

TrigTables make_tables(int n, int kmax) {
    TrigTables t;
    t.n = n;
    t.kmax = kmax;
    t.c.resize(std::size_t(n) * (kmax + 1));
    t.s.resize(std::size_t(n) * (kmax + 1));
    for (int i = 0; i < n; ++i) {
        double ti = -M_PI + kTwoPi * i / n;
        for (int k = 0; k <= kmax; ++k) {
            t.c[std::size_t(i) * (kmax + 1) + k] = std::cos(k * ti);
            t.s[std::size_t(i) * (kmax + 1) + k] = std::sin(k * ti);
        }
    }
    return t;
}

const TrigTables& tables(int n, int kmax) {
    static std::mutex mu;
    static std::map<std::pair<int, int>, TrigTables> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto key = std::make_pair(n, kmax);
    auto it = cache.find(key);
    if (it == cache.end()) it = cache.emplace(key, make_tables(n, kmax)).first;
    return it->second;
}

void check_grid(const SymGrid& g) {
    if (g.n < 16 || g.n % 2 != 0)
        throw std::invalid_argument("SymGrid: n must be even and >= 16");
    if (g.v.size() != std::size_t(g.n) * g.n)
        throw std::invalid_argument("SymGrid: bad storage size");
}

} // namespace

double SymGrid::coord(int i) const { return -M_PI + kTwoPi * i / n; }

double symmetry_defect(const SymGrid& g) {
    check_grid(g);
    double worst = 0.0;
    for (int i = 0; i < g.n; ++i)
        for (int j = 0; j < g.n; ++j) {
            double v0 = g.at(i, j);
            for (int op = 1; op < 8; ++op) {
                auto [a, b] = D4Ops::apply(op, i, j, g.n);
                worst = std::max(worst, std::abs(v0 - g.at(a, b)));
            }
        }
    return worst;
}

SymGrid symmetrize(const SymGrid& g) {
    check_grid(g);
    SymGrid out(g.n);
    for (int i = 0; i < g.n; ++i)
        for (int j = 0; j < g.n; ++j) {
            double acc = 0.0;
            for (int op = 0; op < 8; ++op) {
                auto [a, b] = D4Ops::apply(op, i, j, g.n);
                acc += g.at(a, b);
            }
            out.at(i, j) = acc / 8.0;
        }
    return out;
}

CosSpectrum::CosSpectrum(int kmax_) : kmax(kmax_), c(pair_count(kmax_), 0.0) {}

std::size_t CosSpectrum::pair_count(int kmax) {
    return std::size_t(kmax + 1) * (kmax + 2) / 2;
}

std::size_t CosSpectrum::pair_index(int k1, int k2, int kmax) {
    // ordered by k1 ascending, then k2 = k1..kmax
    // offset(k1) = sum_{j<k1} (kmax+1-j)
    std::size_t off = std::size_t(k1) * (kmax + 1) - std::size_t(k1) * (k1 - 1) / 2;
    return off + (k2 - k1);
}

std::pair<int, int> CosSpectrum::pair_at(std::size_t idx) const {
    for (int k1 = 0; k1 <= kmax; ++k1) {
        std::size_t cnt = kmax + 1 - k1;
        if (idx < cnt) return {k1, k1 + static_cast<int>(idx)};
        idx -= cnt;
    }
    throw std::out_of_range("CosSpectrum::pair_at");
}

double& CosSpectrum::at(int k1, int k2) {
    if (k1 > k2) std::swap(k1, k2);
    return c[pair_index(k1, k2, kmax)];
}

double CosSpectrum::at(int k1, int k2) const {
    if (k1 > k2) std::swap(k1, k2);
    return c[pair_index(k1, k2, kmax)];
}

double CosSpectrum::l2_norm() const {
    double acc = 0.0;
    for (double x : c) acc += x * x;
    return std::sqrt(acc);
}

CosSpectrum analyze(const SymGrid& g, int kmax) {
    check_grid(g);
    if (kmax > g.n / 2 - 1)
        throw std::invalid_argument("analyze: kmax must be <= n/2 - 1");
    if (symmetry_defect(g) > 1e-8)
        throw std::invalid_argument("analyze: grid violates the square symmetries");
    const int n = g.n;
    const TrigTables& tt = tables(n, kmax);
    const double h2 = kTwoPi / n * (kTwoPi / n);
    // C[k1][k2] = h^2 sum_{ij} v_ij cos(k1 t_i) cos(k2 t_j), via two passes
    std::vector<double> tmp(std::size_t(n) * (kmax + 1), 0.0); // tmp[i][k2]
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double vij = g.at(i, j);
            for (int k2 = 0; k2 <= kmax; ++k2)
                tmp[std::size_t(i) * (kmax + 1) + k2] += vij * tt.cosv(j, k2);
        }
    CosTensor C(kmax);
    for (int k1 = 0; k1 <= kmax; ++k1)
        for (int i = 0; i < n; ++i) {
            double w = tt.cosv(i, k1);
            for (int k2 = 0; k2 <= kmax; ++k2)
                C.at(k1, k2) += w * tmp[std::size_t(i) * (kmax + 1) + k2];
        }
    for (double& x : C.a) x *= h2;

    CosSpectrum out(kmax);
    const double pi = M_PI;
    for (std::size_t idx = 0; idx < out.c.size(); ++idx) {
        auto [k1, k2] = out.pair_at(idx);
        if (k1 == 0 && k2 == 0)
            out.c[idx] = C.at(0, 0) / (kTwoPi);
        else if (k1 == 0)
            out.c[idx] = (C.at(0, k2) + C.at(k2, 0)) / (kTwoPi);
        else if (k1 == k2)
            out.c[idx] = C.at(k1, k1) / pi;
        else
            out.c[idx] = (C.at(k1, k2) + C.at(k2, k1)) / (pi * std::sqrt(2.0));
    }
    return out;
}

CosTensor to_tensor(const CosSpectrum& s) {
    CosTensor t(s.kmax);
    const double pi = M_PI;
    for (std::size_t idx = 0; idx < s.c.size(); ++idx) {
        auto [k1, k2] = s.pair_at(idx);
        double c = s.c[idx];
        if (k1 == 0 && k2 == 0)
            t.at(0, 0) = c / kTwoPi;
        else if (k1 == 0)
            t.at(0, k2) = t.at(k2, 0) = c / kTwoPi;
        else if (k1 == k2)
            t.at(k1, k1) = c / pi;
        else
            t.at(k1, k2) = t.at(k2, k1) = c / (pi * std::sqrt(2.0));
    }
    return t;
}

CosSpectrum from_tensor(const CosTensor& t) {
    CosSpectrum s(t.kmax);
    const double pi = M_PI;
    for (std::size_t idx = 0; idx < s.c.size(); ++idx) {
        auto [k1, k2] = s.pair_at(idx);
        if (k1 == 0 && k2 == 0)
            s.c[idx] = t.at(0, 0) * kTwoPi;
        else if (k1 == 0)
            s.c[idx] = t.at(0, k2) * kTwoPi;
        else if (k1 == k2)
            s.c[idx] = t.at(k1, k1) * pi;
        else
            s.c[idx] = t.at(k1, k2) * pi * std::sqrt(2.0);
    }
    return s;
}

SymGrid synthesize(const CosSpectrum& s, int n) {
    if (n < 16 || n % 2 != 0)
        throw std::invalid_argument("synthesize: n must be even and >= 16");
    if (s.kmax > n / 2 - 1)
        throw std::invalid_argument("synthesize: band exceeds n/2 - 1");
    CosTensor A = to_tensor(s);
    const TrigTables& tt = tables(n, s.kmax);
    const int K = s.kmax;
    SymGrid g(n);
    std::vector<double> tmp(std::size_t(n) * (K + 1), 0.0); // tmp[i][k2] = sum_k1 A c(i,k1)
    for (int i = 0; i < n; ++i)
        for (int k1 = 0; k1 <= K; ++k1) {
            double w = tt.cosv(i, k1);
            for (int k2 = 0; k2 <= K; ++k2)
                tmp[std::size_t(i) * (K + 1) + k2] += w * A.at(k1, k2);
        }
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double acc = 0.0;
            for (int k2 = 0; k2 <= K; ++k2)
                acc += tmp[std::size_t(i) * (K + 1) + k2] * tt.cosv(j, k2);
            g.at(i, j) = acc;
        }
    return g;
}

double eval_point(const CosTensor& t, double x, double y) {
    const int K = t.kmax;
    const double cx1 = std::cos(x), cy1 = std::cos(y);
    std::vector<double> cx(K + 1), cy(K + 1);
    cx[0] = 1.0;
    cy[0] = 1.0;
    if (K >= 1) {
        cx[1] = cx1;
        cy[1] = cy1;
        for (int k = 2; k <= K; ++k) {
            cx[k] = 2.0 * cx1 * cx[k - 1] - cx[k - 2];
            cy[k] = 2.0 * cy1 * cy[k - 1] - cy[k - 2];
        }
    }
    double acc = 0.0;
    for (int k1 = 0; k1 <= K; ++k1) {
        double row = 0.0;
        for (int k2 = 0; k2 <= K; ++k2) row += t.at(k1, k2) * cy[k2];
        acc += cx[k1] * row;
    }
    return acc;
}

V1Projection project_v1(const SymGrid& g) {
    check_grid(g);
    // <u, vbar> via trapezoid (exact for band < n-1)
    const int n = g.n;
    const double h2 = kTwoPi / n * (kTwoPi / n);
    double ip = 0.0;
    for (int i = 0; i < n; ++i) {
        double ci = std::cos(g.coord(i));
        for (int j = 0; j < n; ++j) ip += g.at(i, j) * (ci + std::cos(g.coord(j)));
    }
    ip *= h2;
    const double vbar2 = 4.0 * M_PI * M_PI;
    V1Projection p;
    p.amplitude = ip / vbar2;
    p.remainder = g;
    for (int i = 0; i < n; ++i) {
        double ci = std::cos(g.coord(i));
        for (int j = 0; j < n; ++j)
            p.remainder.at(i, j) -= p.amplitude * (ci + std::cos(g.coord(j)));
    }
    return p;
}

GradientFields spectral_gradient(const CosSpectrum& s, int n) {
    CosTensor A = to_tensor(s);
    const int K = s.kmax;
    const TrigTables& tt = tables(n, K);
    GradientFields gf{SymGrid(n), SymGrid(n)};
    // d/dx: -sum k1 A[k1][k2] sin(k1 x) cos(k2 y)
    std::vector<double> tmp(std::size_t(n) * (K + 1), 0.0);
    for (int i = 0; i < n; ++i)
        for (int k1 = 0; k1 <= K; ++k1) {
            double w = -k1 * tt.sinv(i, k1);
            for (int k2 = 0; k2 <= K; ++k2)
                tmp[std::size_t(i) * (K + 1) + k2] += w * A.at(k1, k2);
        }
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double acc = 0.0;
            for (int k2 = 0; k2 <= K; ++k2)
                acc += tmp[std::size_t(i) * (K + 1) + k2] * tt.cosv(j, k2);
            gf.dx.at(i, j) = acc;
        }
    // d/dy by symmetry of the tensor: swap role of axes
    std::fill(tmp.begin(), tmp.end(), 0.0);
    for (int i = 0; i < n; ++i)
        for (int k1 = 0; k1 <= K; ++k1) {
            double w = tt.cosv(i, k1);
            for (int k2 = 0; k2 <= K; ++k2)
                tmp[std::size_t(i) * (K + 1) + k2] += w * A.at(k1, k2);
        }
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double acc = 0.0;
            for (int k2 = 1; k2 <= K; ++k2)
                acc += tmp[std::size_t(i) * (K + 1) + k2] * (-k2 * tt.sinv(j, k2));
            gf.dy.at(i, j) = acc;
        }
    return gf;
}

SymGrid spectral_laplacian(const CosSpectrum& s, int n) {
    CosSpectrum lap = s;
    for (std::size_t idx = 0; idx < lap.c.size(); ++idx) {
        auto [k1, k2] = lap.pair_at(idx);
        lap.c[idx] *= -double(k1) * k1 - double(k2) * k2;
    }
    return synthesize(lap, n);
}

namespace {

// dense periodic differentiation matrix row application, exact for band < n/2
const std::vector<double>& diff_matrix(int n) {
    static std::mutex mu;
    static std::map<int, std::vector<double>> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(n);
    if (it == cache.end()) {
        std::vector<double> d(std::size_t(n) * n, 0.0);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                if (i != j) {
                    int k = i - j;
                    double sgn = (k % 2 == 0) ? 1.0 : -1.0;
                    d[std::size_t(i) * n + j] =
                        0.5 * sgn / std::tan(0.5 * (kTwoPi * k / n));
                }
        it = cache.emplace(n, std::move(d)).first;
    }
    return it->second;
}

} // namespace

SymGrid spectral_derivative(const SymGrid& g, int axis) {
    check_grid(g);
    const int n = g.n;
    const auto& D = diff_matrix(n);
    SymGrid out(n);
    if (axis == 0) {
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                double acc = 0.0;
                for (int k = 0; k < n; ++k) acc += D[std::size_t(i) * n + k] * g.at(k, j);
                out.at(i, j) = acc;
            }
    } else {
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                double acc = 0.0;
                for (int k = 0; k < n; ++k) acc += D[std::size_t(j) * n + k] * g.at(i, k);
                out.at(i, j) = acc;
            }
    }
    return out;
}

SymGrid spectral_divergence(const SymGrid& fx, const SymGrid& fy) {
    SymGrid a = spectral_derivative(fx, 0);
    SymGrid b = spectral_derivative(fy, 1);
    for (std::size_t i = 0; i < a.v.size(); ++i) a.v[i] += b.v[i];
    return a;
}

} // namespace patternforge
