#include "patternforge/bravais.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace patternforge {

namespace {

double dot3(const std::array<double, 3>& a, const std::array<double, 3>& b) {
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

double norm3(const std::array<double, 3>& a) { return std::sqrt(dot3(a, a)); }

// smallest eigenvalue of the (M x M) Gram matrix, M <= 3, via Jacobi sweeps
double min_gram_eigenvalue(const std::vector<std::array<double, 3>>& basis) {
    const int m = static_cast<int>(basis.size());
    double g[3][3] = {{0}};
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) g[i][j] = dot3(basis[i], basis[j]);
    for (int sweep = 0; sweep < 32; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < m; ++p)
            for (int q = p + 1; q < m; ++q) off += g[p][q] * g[p][q];
        if (off < 1e-28) break;
        for (int p = 0; p < m; ++p)
            for (int q = p + 1; q < m; ++q) {
                if (std::abs(g[p][q]) < 1e-300) continue;
                double theta = 0.5 * std::atan2(2.0 * g[p][q], g[q][q] - g[p][p]);
                double c = std::cos(theta), s = std::sin(theta);
                for (int k = 0; k < m; ++k) {
                    double akp = g[k][p], akq = g[k][q];
                    g[k][p] = c * akp - s * akq;
                    g[k][q] = s * akp + c * akq;
                }
                for (int k = 0; k < m; ++k) {
                    double apk = g[p][k], aqk = g[q][k];
                    g[p][k] = c * apk - s * aqk;
                    g[q][k] = s * apk + c * aqk;
                }
            }
    }
    double mn = g[0][0];
    for (int i = 1; i < m; ++i) mn = std::min(mn, g[i][i]);
    return mn;
}

} // namespace

BravaisLattice BravaisLattice::line(int N, double a) {
    BravaisLattice l;
    l.N = N;
    l.M = 1;
    l.basis = {{a, 0.0, 0.0}};
    return l;
}

BravaisLattice BravaisLattice::square(int N, double a) {
    BravaisLattice l;
    l.N = N;
    l.M = 2;
    l.basis = {{a, 0.0, 0.0}, {0.0, a, 0.0}};
    return l;
}

BravaisLattice BravaisLattice::cubic(double a) {
    BravaisLattice l;
    l.N = 3;
    l.M = 3;
    l.basis = {{a, 0.0, 0.0}, {0.0, a, 0.0}, {0.0, 0.0, a}};
    return l;
}

BravaisLattice BravaisLattice::empty(int N) {
    BravaisLattice l;
    l.N = N;
    l.M = 0;
    return l;
}

void BravaisLattice::validate() const {
    if (N != 2 && N != 3) throw std::invalid_argument("BravaisLattice: N must be 2 or 3");
    if (M < 0 || M > N) throw std::invalid_argument("BravaisLattice: need 0 <= M <= N");
    if (static_cast<int>(basis.size()) != M)
        throw std::invalid_argument("BravaisLattice: basis size != M");
    for (const auto& b : basis)
        if (N == 2 && b[2] != 0.0)
            throw std::invalid_argument("BravaisLattice: N=2 vectors must lie in the plane");
    if (M > 0 && min_gram_eigenvalue(basis) < 1e-12)
        throw std::invalid_argument("BravaisLattice: basis is linearly dependent");
}

std::vector<std::array<double, 3>> BravaisLattice::points_within(double radius) const {
    validate();
    std::vector<std::array<double, 3>> pts;
    if (M == 0 || radius <= 0.0) return pts;
    const double sv = std::sqrt(min_gram_eigenvalue(basis));
    const int bound = static_cast<int>(std::ceil(radius / sv)) + 1;
    const int b1 = bound, b2 = M >= 2 ? bound : 0, b3 = M >= 3 ? bound : 0;
    for (int i = -b1; i <= b1; ++i)
        for (int j = -b2; j <= b2; ++j)
            for (int k = -b3; k <= b3; ++k) {
                if (i == 0 && j == 0 && k == 0) continue;
                std::array<double, 3> p = {0.0, 0.0, 0.0};
                for (int d = 0; d < 3; ++d) {
                    p[d] = i * basis[0][d];
                    if (M >= 2) p[d] += j * basis[1][d];
                    if (M >= 3) p[d] += k * basis[2][d];
                }
                if (norm3(p) <= radius) pts.push_back(p);
            }
    std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) {
        double na = norm3(a), nb = norm3(b);
        if (na != nb) return na < nb;
        return a < b;
    });
    return pts;
}

std::vector<std::pair<double, int>> BravaisLattice::shells(double radius) const {
    auto pts = points_within(radius);
    std::map<long long, std::pair<double, int>> sh;
    for (const auto& p : pts) {
        double r = norm3(p);
        long long key = static_cast<long long>(std::llround(r * 1e9));
        auto& e = sh[key];
        e.first = r;
        e.second += 1;
    }
    std::vector<std::pair<double, int>> out;
    for (auto& [k, v] : sh) out.push_back(v);
    return out;
}

double BravaisLattice::min_norm() const {
    if (M == 0) return 0.0;
    double best = 0.0;
    for (int tries = 1; tries < 16; ++tries) {
        auto pts = points_within(tries * std::max({norm3(basis[0]),
                                                   M >= 2 ? norm3(basis[1]) : 0.0,
                                                   M >= 3 ? norm3(basis[2]) : 0.0}));
        if (!pts.empty()) {
            best = norm3(pts[0]);
            break;
        }
    }
    return best;
}

} // namespace patternforge
