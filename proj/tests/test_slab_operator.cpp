#include "doctest.h"

#include "patternforge/slab_operator.hpp"

#include <cmath>
#include <memory>
#include <random>
#include <stdexcept>

using namespace patternforge;

namespace {

const SlabParams kRef{0.5, 0.18};
const double kLambdaStar = 2.2290696688139712;

const SlabContext& ctx() {
    static SlabContext c = [] {
        QuadratureSpec q;
        return SlabContext(kRef, q, 0.5 * kLambdaStar, 1.6 * kLambdaStar);
    }();
    return c;
}

CosSpectrum basis_pair(int kmax, int k1, int k2, double amp = 1.0) {
    CosSpectrum s(kmax);
    s.at(k1, k2) = amp;
    return s;
}

double sup(const SymGrid& g) {
    double m = 0.0;
    for (double v : g.v) m = std::max(m, std::abs(v));
    return m;
}

CosSpectrum random_small(int kmax, unsigned seed, double amp) {
    CosSpectrum s(kmax);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    for (std::size_t i = 0; i < s.c.size(); ++i) {
        auto [k1, k2] = s.pair_at(i);
        s.c[i] = amp * nd(rng) / (1.0 + k1 * k1 + k2 * k2);
    }
    return s;
}

} // namespace

TEST_CASE("mean curvature of graphs") {
    const int n = 64;
    // flat graph
    CosSpectrum flat(8);
    auto mc0 = mean_curvature_graph(flat, n);
    CHECK(sup(mc0) < 1e-14);
    // phi = lambda + eps cos t1: leading order eps cos t1
    for (double eps : {1e-3, 1e-4}) {
        CosSpectrum s(8);
        s.at(0, 1) = eps; // (cos t1 + cos t2) * eps / (2pi tensor factor)... use pair
        SymGrid mc = mean_curvature_graph(s, n);
        SymGrid lin = spectral_laplacian(s, n);
        double worst = 0.0;
        for (std::size_t i = 0; i < mc.v.size(); ++i)
            worst = std::max(worst, std::abs(mc.v[i] + lin.v[i]));
        CHECK(worst < 10.0 * eps * eps * eps / (2 * M_PI)); // cubic remainder
    }
    // variational oracle: d/dt A(u + t w) = <MC(u), w>
    CosSpectrum u = random_small(8, 5, 0.3);
    CosSpectrum w = random_small(8, 9, 1.0);
    const double h = 1e-5;
    CosSpectrum up = u, um = u;
    for (std::size_t i = 0; i < u.c.size(); ++i) {
        up.c[i] += h * w.c[i];
        um.c[i] -= h * w.c[i];
    }
    double fd = (graph_area(up, n) - graph_area(um, n)) / (2 * h);
    SymGrid mc = mean_curvature_graph(u, n);
    SymGrid wg = synthesize(w, n);
    double ip = 0.0;
    const double h2 = std::pow(2 * M_PI / n, 2);
    for (std::size_t i = 0; i < mc.v.size(); ++i) ip += mc.v[i] * wg.v[i] * h2;
    CHECK(std::abs(fd - ip) / std::max(1.0, std::abs(ip)) < 1e-6);
}

TEST_CASE("pure mean curvature is mean-free on the torus") {
    CosSpectrum u = random_small(10, 77, 0.25);
    SymGrid mc = mean_curvature_graph(u, 64);
    double mean = 0.0;
    for (double v : mc.v) mean += v;
    mean *= std::pow(2.0 * M_PI / 64, 2);
    CHECK(std::abs(mean) < 1e-10);
}

TEST_CASE("flat potential: honest quadrature vs closed form") {
    SlabShape shape{1.0, CosSpectrum(8)};
    SymGrid V = yukawa_slab_potential(ctx(), shape);
    const double closed = flat_potential_closed(kRef.kappa, 1.0);
    // theta-constant and matching to well under the 1e-4 criterion
    double lo = V.v[0], hi = V.v[0];
    for (double v : V.v) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    CHECK(hi - lo < 1e-8 * closed);
    CHECK(std::abs(V.v[0] - closed) / closed < 1e-7);
}

TEST_CASE("tail robustness: doubling the image cutoff does not move the potential") {
    QuadratureSpec q;
    q.tail_tol = 1e-9;
    SlabContext loose(kRef, q, 0.5 * kLambdaStar, 1.6 * kLambdaStar);
    QuadratureSpec q2 = q;
    q2.tail_tol = 1e-15;
    SlabContext tight(kRef, q2, 0.5 * kLambdaStar, 1.6 * kLambdaStar);
    SlabShape shape{kLambdaStar, random_small(8, 3, 0.2)};
    double a = sup(yukawa_slab_potential(loose, shape));
    double b = sup(yukawa_slab_potential(tight, shape));
    CHECK(std::abs(a - b) < 1e-7);
}

TEST_CASE("residual vanishes identically at u = 0") {
    SymGrid g = residual_G(ctx(), kLambdaStar, CosSpectrum(12));
    CHECK(sup(g) == 0.0);
}

TEST_CASE("flat jacobian action is diagonal with sigma eigenvalues") {
    SlabShape flat{kLambdaStar, CosSpectrum(12)};
    for (auto [k1, k2] : {std::pair{0, 0}, {0, 1}, {1, 1}, {0, 2}, {1, 2}, {2, 3},
                          {0, 5}, {3, 4}, {0, 8}, {5, 5}, {0, 12}}) {
        CosSpectrum e = basis_pair(12, k1, k2);
        SymGrid out = jacobian_action(ctx(), flat, e);
        CosSpectrum oc = analyze(out, 12);
        const double sig = sigma_value(kRef, kLambdaStar, std::hypot(double(k1), double(k2)));
        CAPTURE(k1);
        CAPTURE(k2);
        CHECK(std::abs(oc.at(k1, k2) - sig) < 1e-6 * std::max(1.0, std::abs(sig)));
        double leak = 0.0;
        for (std::size_t i = 0; i < oc.c.size(); ++i) {
            auto [a, b] = oc.pair_at(i);
            if (a != std::min(k1, k2) || b != std::max(k1, k2))
                leak = std::max(leak, std::abs(oc.c[i]));
        }
        CHECK(leak < 1e-8);
    }
}

TEST_CASE("flat_action matches the closed diagonal") {
    CosSpectrum s = random_small(10, 17, 1.0);
    CosSpectrum out = flat_action(kRef, kLambdaStar, s);
    // e_(1,0)-pair at lambda* is annihilated
    CosSpectrum e01 = basis_pair(10, 0, 1);
    CHECK(std::abs(flat_action(kRef, kLambdaStar, e01).at(0, 1)) < 1e-10);
    // gamma = 0: action = |k|^2 c_k
    CosSpectrum g0 = flat_action({0.7, 0.0}, 1.0, s);
    for (std::size_t i = 0; i < s.c.size(); ++i) {
        auto [k1, k2] = s.pair_at(i);
        CHECK(g0.c[i] == doctest::Approx((k1 * k1 + k2 * k2) * s.c[i]).epsilon(1e-14));
    }
    // spot value sigma(0)
    CosSpectrum e00 = basis_pair(10, 0, 0);
    CHECK(flat_action(kRef, kLambdaStar, e00).at(0, 0) ==
          doctest::Approx(0.4868999252203556).epsilon(1e-9));
    (void)out;
}

TEST_CASE("jacobian matches central differences of the residual") {
    const int kmax = 8;
    CosSpectrum u = random_small(kmax, 21, 0.15);
    CosSpectrum w = random_small(kmax, 22, 1.0);
    SlabShape shape{kLambdaStar, u};
    SymGrid jl = jacobian_action(ctx(), shape, w);
    const double h = 1e-4;
    CosSpectrum up = u, um = u;
    for (std::size_t i = 0; i < u.c.size(); ++i) {
        up.c[i] += h * w.c[i];
        um.c[i] -= h * w.c[i];
    }
    SymGrid gp = residual_G(ctx(), kLambdaStar, up);
    SymGrid gm = residual_G(ctx(), kLambdaStar, um);
    double worst = 0.0;
    for (std::size_t i = 0; i < jl.v.size(); ++i)
        worst = std::max(worst, std::abs((gp.v[i] - gm.v[i]) / (2 * h) - jl.v[i]));
    CHECK(worst < 1e-5);
}

TEST_CASE("residual linearization slope at lambda*") {
    // ||G(lambda*, s vbar)||_inf = O(s^2) since sigma(1) = 0
    CosSpectrum vbar(8);
    vbar.at(0, 1) = 2.0 * M_PI;
    double prev = 0.0;
    int step = 0;
    for (double s : {1e-2, 1e-3}) {
        CosSpectrum u = vbar;
        for (double& c : u.c) c *= s;
        double r = sup(residual_G(ctx(), kLambdaStar, u));
        if (step == 0) {
            CHECK(r < 1e-2); // comfortably linear-small at s = 1e-2
        } else {
            CHECK(r < prev / 50.0); // quadratic decay
        }
        prev = r;
        ++step;
    }
}

TEST_CASE("outputs inherit the square symmetries") {
    CosSpectrum u = random_small(8, 31, 0.2);
    SlabShape shape{kLambdaStar, u};
    CHECK(symmetry_defect(residual_G(ctx(), kLambdaStar, u)) < 1e-10);
    CHECK(symmetry_defect(jacobian_action(ctx(), shape, basis_pair(8, 1, 2))) < 1e-10);
}

TEST_CASE("translation equivariance of the potential") {
    // shifting the perturbation by a full period leaves values unchanged;
    // realized through the periodicity of the fine-grid synthesis
    CosSpectrum u = random_small(6, 41, 0.2);
    SlabShape shape{kLambdaStar, u};
    SymGrid V = yukawa_slab_potential(ctx(), shape);
    // the grid itself is the period cell; check V matches its own D4 orbit
    CHECK(symmetry_defect(V) < 1e-10);
}

TEST_CASE("quadrature range guards") {
    CosSpectrum big(4);
    big.at(0, 1) = 4.0; // far beyond the b1 window
    CHECK_THROWS_AS(residual_G(ctx(), kLambdaStar, big), QuadratureRangeError);
    CHECK_THROWS_AS(residual_G(ctx(), 0.1, CosSpectrum(4)), QuadratureRangeError);
}
