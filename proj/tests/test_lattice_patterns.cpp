#include "doctest.h"

#include "patternforge/lattice_patterns.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

using namespace patternforge;

namespace {

std::vector<double> random_even(const StarBasis& b, int kband, unsigned seed, double amp) {
    std::vector<double> c(b.dim(), 0.0);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    for (std::size_t i = 0; i < b.dim(); ++i) {
        int k = b.degree_of(i);
        if (k % 2 == 0 && k <= kband) c[i] = amp * nd(rng) / (1.0 + k * k);
    }
    return c;
}

} // namespace

TEST_CASE("mu_k: reduced formulas vs the defining double integral") {
    for (int N : {2, 3}) {
        CHECK(mu_k(N, 1.0, 0) == 0.0);
        for (int k : {1, 2, 4, 8}) {
            double red = mu_k(N, 1.0, k);
            double orc = mu_k_oracle(N, 1.0, k);
            CAPTURE(N);
            CAPTURE(k);
            CHECK(std::abs(red - orc) < 1e-4 * std::max(1.0, std::abs(orc)));
        }
        // increasing toward the kernel mass
        double prev = 0.0;
        for (int k = 0; k <= 10; ++k) {
            double m = mu_k(N, 1.0, k);
            if (k > 0) CHECK(m > prev);
            prev = m;
        }
    }
    // N=3 spot value: mu_1 = pi int_0^2 r^2 e^{-r} dr
    CHECK(mu_k(3, 1.0, 1) == doctest::Approx(2.031501991303223).epsilon(1e-10));
}

TEST_CASE("gamma_n and the sigma table") {
    LatticeSpectrum sp = gamma_n(2, 0.5, 32);
    CHECK(sp.gamma_n == doctest::Approx(0.14314616901194616).epsilon(1e-6));
    CHECK(sp.tail_certified);
    CHECK(sp.gamma_n > 0.0);
    // sigma(1) = 0 for every gamma (structural)
    for (double g : {0.01, 0.05, 0.1})
        CHECK(std::abs(sp.sigma(g, 1)) < 1e-12);
    // sigma(0) < 0 for gamma < lambda_1/mu_1; sigma(k) > 0 for k >= 2
    const double gam = 0.5 * sp.gamma_n;
    CHECK(sp.sigma(gam, 0) < 0.0);
    for (int k = 2; k <= 32; ++k) CHECK(sp.sigma(gam, k) > 0.0);
    // gamma = 0: sigma(k) = lambda_k - lambda_1
    for (int k : {0, 2, 5}) CHECK(sp.sigma(0.0, k) == doctest::Approx(sp.lambda_k(k) - sp.lambda_k(1)));
    // N = 3 table as well
    LatticeSpectrum sp3 = gamma_n(3, 1.0, 32);
    CHECK(sp3.tail_certified);
    CHECK(sp3.gamma_n > 0.0);
    CHECK_THROWS_AS(gamma_n(2, 0.5, 7), std::domain_error);
}

TEST_CASE("harmonic_inverse is the diagonal inverse on even bands") {
    StarBasis b(2, 128);
    LatticeSpectrum sp = gamma_n(2, 0.5, 32);
    const double gam = 0.5 * sp.gamma_n;
    auto f = random_even(b, 10, 3, 1.0);
    auto inv = harmonic_inverse(b, sp, gam, f);
    for (std::size_t i = 0; i < f.size(); ++i) {
        int k = b.degree_of(i);
        if (k % 2 || k > 10) continue;
        CHECK(inv[i] * sp.sigma(gam, k) == doctest::Approx(f[i]).epsilon(1e-12).scale(1.0));
    }
    // Y0 spot check
    std::vector<double> y0(b.dim(), 0.0);
    y0[0] = 1.0;
    CHECK(harmonic_inverse(b, sp, gam, y0)[0] ==
          doctest::Approx(1.0 / sp.sigma(gam, 0)).epsilon(1e-14));
    // odd input rejected
    std::vector<double> odd(b.dim(), 0.0);
    odd[b.index(3, 0)] = 1.0;
    CHECK_THROWS_AS(harmonic_inverse(b, sp, gam, odd), std::domain_error);
}

TEST_CASE("star mean curvature on round shapes") {
    StarBasis b2(2, 128);
    StarShape r2 = round_shape(b2, 8, 2.0);
    auto h2 = star_mean_curvature(b2, r2);
    auto d2 = area_variation_density(b2, r2);
    for (std::size_t i = 0; i < b2.grid_size(); i += 13) {
        CHECK(h2[i] == doctest::Approx(0.5).epsilon(1e-10));   // (N-1)/R
        CHECK(d2[i] == doctest::Approx(1.0).epsilon(1e-10));   // (N-1) R^{N-2}
    }
    StarBasis b3(3, 24, 48);
    StarShape r3 = round_shape(b3, 8, 2.0);
    auto h3 = star_mean_curvature(b3, r3);
    auto d3 = area_variation_density(b3, r3);
    for (std::size_t i = 0; i < b3.grid_size(); i += 101) {
        CHECK(h3[i] == doctest::Approx(1.0).epsilon(1e-10));
        CHECK(d3[i] == doctest::Approx(2.0 * 2.0).epsilon(1e-10));
    }
    // identity density = H * phi^{N-1}
    auto u = random_even(b3, 6, 11, 0.05);
    StarShape s{3, 6, u};
    s.coeff[0] += std::sqrt(4.0 * M_PI);
    auto h = star_mean_curvature(b3, s);
    auto d = area_variation_density(b3, s);
    auto phig = b3.synth(s.coeff);
    for (std::size_t i = 0; i < b3.grid_size(); i += 97)
        CHECK(d[i] == doctest::Approx(h[i] * phig[i] * phig[i]).epsilon(1e-11));
}

TEST_CASE("variational oracle for the density") {
    for (int N : {2, 3}) {
        StarBasis b = N == 2 ? StarBasis(2, 128) : StarBasis(3, 24, 48);
        auto u = random_even(b, 6, 23, 0.04);
        StarShape s{N, 6, u};
        s.coeff[0] += (N == 2 ? std::sqrt(2.0 * M_PI) : std::sqrt(4.0 * M_PI));
        auto w = random_even(b, 6, 29, 1.0);
        const double h = 1e-6;
        StarShape sp_ = s, sm = s;
        for (std::size_t i = 0; i < w.size(); ++i) {
            sp_.coeff[i] += h * w[i];
            sm.coeff[i] -= h * w[i];
        }
        double fd = (star_area(b, sp_) - star_area(b, sm)) / (2 * h);
        auto dens = area_variation_density(b, s);
        auto wg = b.synth(w);
        double ip = 0.0;
        for (std::size_t i = 0; i < b.grid_size(); ++i)
            ip += b.weight(i) * dens[i] * wg[i];
        CAPTURE(N);
        CHECK(std::abs(fd - ip) / std::max(1.0, std::abs(ip)) < 1e-6);
    }
}

TEST_CASE("mc linearization matches finite differences") {
    for (int N : {2, 3}) {
        StarBasis b = N == 2 ? StarBasis(2, 128) : StarBasis(3, 24, 48);
        auto u = random_even(b, 6, 31, 0.05);
        StarShape s{N, 6, u};
        s.coeff[0] += (N == 2 ? std::sqrt(2.0 * M_PI) : std::sqrt(4.0 * M_PI));
        auto w = random_even(b, 6, 37, 1.0);
        auto lin = star_mc_linearized(b, s, w);
        const double h = 1e-6;
        StarShape sp_ = s, sm = s;
        for (std::size_t i = 0; i < w.size(); ++i) {
            sp_.coeff[i] += h * w[i];
            sm.coeff[i] -= h * w[i];
        }
        auto hp = star_mean_curvature(b, sp_);
        auto hm = star_mean_curvature(b, sm);
        double worst = 0.0;
        for (std::size_t i = 0; i < b.grid_size(); ++i)
            worst = std::max(worst, std::abs((hp[i] - hm[i]) / (2 * h) - lin[i]));
        CAPTURE(N);
        CHECK(worst < 1e-6);
    }
}

TEST_CASE("self interaction of round shapes against closed forms") {
    // N = 3, kappa = 1, unit ball: 4 pi e^{-2}
    StarBasis b3(3, 24, 48);
    StarShape r3 = round_shape(b3, 8, 1.0);
    auto v3 = self_interaction(b3, r3, 1.0);
    const double exact3 = 4.0 * M_PI * std::exp(-2.0);
    double lo = v3[0], hi = v3[0];
    for (double v : v3) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    CHECK(std::abs(v3[0] - exact3) < 1e-7);
    CHECK(hi - lo < 1e-9); // theta-constant
    CHECK(ball_self_potential(3, 1.0, 1.0) == doctest::Approx(exact3).epsilon(1e-14));

    // N = 2, kappa = 0.5, unit disk: 4 pi/k^2 - (4 pi R/k) K1 I0
    StarBasis b2(2, 128);
    StarShape r2 = round_shape(b2, 8, 1.0);
    auto v2 = self_interaction(b2, r2, 0.5);
    const double exact2 = ball_self_potential(2, 0.5, 1.0);
    CHECK(exact2 == doctest::Approx(5.991706186007789).epsilon(1e-10));
    CHECK(std::abs(v2[0] - exact2) < 1e-8);

    // dilation derivative: w = const phi matches d/dR of the round value
    std::vector<double> wdil(b2.dim(), 0.0);
    wdil[0] = std::sqrt(2.0 * M_PI); // w = 1 = phi at R=1
    auto dv = d_self_interaction(b2, r2, wdil, 0.5);
    const double hr = 1e-5;
    double fd = (ball_self_potential(2, 0.5, 1.0 + hr) -
                 ball_self_potential(2, 0.5, 1.0 - hr)) /
                (2 * hr);
    CHECK(dv[0] == doctest::Approx(fd).epsilon(1e-6));
}

TEST_CASE("boundary derivative matches finite differences of the volume integral") {
    for (int N : {2, 3}) {
        StarBasis b = N == 2 ? StarBasis(2, 128) : StarBasis(3, 24, 48);
        const double kap = N == 2 ? 0.5 : 1.0;
        auto u = random_even(b, 4, 41, 0.04);
        StarShape s{N, 4, u};
        s.coeff[0] += (N == 2 ? std::sqrt(2.0 * M_PI) : std::sqrt(4.0 * M_PI));
        auto w = random_even(b, 4, 43, 1.0);
        LatticeQuad fine;
        fine.ang_panels = 18;
        fine.ang_gl = 12;
        fine.rad_gl = 18;
        fine.lon = 48;
        auto dv = d_self_interaction(b, s, w, kap, fine);
        const double h = 1e-4;
        StarShape sp_ = s, sm = s;
        for (std::size_t i = 0; i < w.size(); ++i) {
            sp_.coeff[i] += h * w[i];
            sm.coeff[i] -= h * w[i];
        }
        auto vp = self_interaction(b, sp_, kap, fine);
        auto vm = self_interaction(b, sm, kap, fine);
        double worst = 0.0;
        for (std::size_t i = 0; i < b.grid_size(); i += (N == 2 ? 7 : 53))
            worst = std::max(worst, std::abs((vp[i] - vm[i]) / (2 * h) - dv[i]));
        CAPTURE(N);
        CHECK(worst < 1e-5);
    }
}

TEST_CASE("lattice interaction: decay, tail robustness, empty lattice") {
    StarBasis b(2, 128);
    StarShape r = round_shape(b, 8, 1.0);
    auto lat = BravaisLattice::line(2);
    const double kap = 0.5;
    // empty lattice -> zero field
    auto z = lattice_interaction(b, r, BravaisLattice::empty(2), kap, 0.05, 10.0);
    for (double v : z) CHECK(v == 0.0);
    // exponential decay in 1/eps
    std::vector<double> eps = {0.05, 0.075, 0.1};
    std::vector<double> vals;
    for (double e : eps) {
        auto f = lattice_interaction(b, r, lat, kap, e, 1.0 + 40.0 * e / kap);
        double m = 0.0;
        for (double v : f) m = std::max(m, v);
        vals.push_back(m);
    }
    // log-linear in 1/eps with slope about -kappa (1 - 2 eps phi) within 25%
    double slope = (std::log(vals[2]) - std::log(vals[0])) / (1.0 / eps[2] - 1.0 / eps[0]);
    CHECK(slope < 0.0);
    CHECK(std::abs(-slope / kap - 1.0) < 0.25);
    // cutoff doubling changes nothing measurable
    auto f1 = lattice_interaction(b, r, lat, kap, 0.05, 1.0 + 40.0 * 0.05 / kap);
    auto f2 = lattice_interaction(b, r, lat, kap, 0.05, 2.0 * (1.0 + 40.0 * 0.05 / kap));
    double d = 0.0;
    for (std::size_t i = 0; i < f1.size(); ++i) d = std::max(d, std::abs(f1[i] - f2[i]));
    CHECK(d < 1e-12);
    // overlap rejected
    CHECK_THROWS_AS(lattice_interaction(b, r, lat, kap, 0.6, 5.0), std::domain_error);
}

TEST_CASE("first-order fields and nonconstancy") {
    const double kap = 0.5, eps = 0.05;
    // cylinders, line lattice: ratio is exactly cosh(kappa)
    auto nc = nonconstancy_metrics(2, BravaisLattice::line(2), kap, eps);
    CHECK(nc.ratio == doctest::Approx(std::cosh(kap)).epsilon(1e-10));
    CHECK(nc.verdict == "non-constant");
    // spheres, M = 2: aligned exceeds perpendicular
    auto nc2 = nonconstancy_metrics(3, BravaisLattice::square(3), 1.0, eps);
    CHECK(nc2.aligned > nc2.perpendicular);
    CHECK(nc2.verdict == "non-constant");
    // M = N: open
    auto nc3 = nonconstancy_metrics(3, BravaisLattice::cubic(), 1.0, eps);
    CHECK(nc3.verdict.find("open") != std::string::npos);
    auto nc4 = nonconstancy_metrics(2, BravaisLattice::square(2), kap, eps);
    CHECK(nc4.verdict.find("open") != std::string::npos);
    // c_N constants against closed forms (derived: cross-section reduction)
    // c_2 = 2 pi I1(k)/k, c_3 = 4 pi (k cosh k - sinh k)/k^3
    const double c3 = 4.0 * M_PI * (kap * std::cosh(kap) - std::sinh(kap)) /
                      (kap * kap * kap);
    CHECK(c_n_constant(3, kap) == doctest::Approx(c3).epsilon(1e-12));
    CHECK(c_n_constant(2, 0.5) == doctest::Approx(3.2407954208747305).epsilon(1e-10));
    // the +-p pairing makes the field automatically even
    {
        StarBasis be(2, 128);
        auto f = first_order_field(be, BravaisLattice::line(2), kap, 0.05);
        auto cf = be.analyze(f);
        double scale = 0.0;
        for (double v : cf) scale = std::max(scale, std::abs(v));
        CHECK(be.odd_mass(cf) < 1e-12 + 1e-10 * scale);
    }
    // amplitude decay: field -> 0 like e^{-kappa d_min/eps}
    StarBasis b(2, 128);
    auto f1 = first_order_field(b, BravaisLattice::line(2), kap, 0.04);
    auto f2 = first_order_field(b, BravaisLattice::line(2), kap, 0.05);
    double m1 = 0.0, m2 = 0.0;
    for (double v : f1) m1 = std::max(m1, v);
    for (double v : f2) m2 = std::max(m2, v);
    double cfit = std::log(m2 / m1) / (1.0 / 0.04 - 1.0 / 0.05);
    CHECK(cfit == doctest::Approx(kap).epsilon(0.05));
}

TEST_CASE("first-order shape is nonconstant and decays") {
    StarBasis b(2, 128);
    LatticeSpectrum sp = gamma_n(2, 0.5, 32);
    const double gam = 0.5 * sp.gamma_n;
    auto lat = BravaisLattice::line(2);
    StarShape s1 = first_order_shape(b, lat, 0.5, gam, 0.05, sp, 12);
    auto g1 = b.synth(s1.coeff);
    double lo = g1[0], hi = g1[0];
    for (double v : g1) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    CHECK(hi - lo > 0.0); // strictly nonconstant
    // empty lattice: constant 1
    StarShape s0 = first_order_shape(b, BravaisLattice::empty(2), 0.5, gam, 0.05, sp, 12);
    auto g0 = b.synth(s0.coeff);
    for (std::size_t i = 0; i < b.grid_size(); i += 17)
        CHECK(g0[i] == doctest::Approx(1.0).epsilon(1e-14));
    // deviation decays like e^{-kappa/eps}
    StarShape s2 = first_order_shape(b, lat, 0.5, gam, 0.04, sp, 12);
    auto g2 = b.synth(s2.coeff);
    double d1 = 0.0, d2 = 0.0;
    for (double v : g1) d1 = std::max(d1, std::abs(v - 1.0));
    for (double v : g2) d2 = std::max(d2, std::abs(v - 1.0));
    CHECK(d2 < d1);
}

TEST_CASE("newton lattice solve: cylinders on a line lattice") {
    StarBasis b(2, 128);
    LatticeSpectrum sp = gamma_n(2, 0.5, 32);
    const double gam = 0.5 * sp.gamma_n;
    auto lat = BravaisLattice::line(2);
    // tiny epsilon: lattice term below tolerance, round shape already solves
    auto sol0 = newton_lattice_solve(b, lat, 0.5, gam, 0.005, sp, 12, 1e-8);
    CHECK(sol0.newton_iters == 0);
    CHECK(sol0.deviation_inf == 0.0);
    // eps = 0.05: nontrivial solve, compare against the first-order prediction
    auto sol = newton_lattice_solve(b, lat, 0.5, gam, 0.05, sp, 12, 1e-10);
    CHECK(sol.residual_inf < 1e-10);
    CHECK(sol.deviation_inf > 1e-8);
    StarShape fo = first_order_shape(b, lat, 0.5, gam, 0.05, sp, 12);
    auto fg = b.synth(fo.coeff);
    double fdev = 0.0;
    for (double v : fg) fdev = std::max(fdev, std::abs(v - 1.0));
    CHECK(sol.deviation_inf / fdev == doctest::Approx(1.0).epsilon(0.05));
    // solved shape is even and nonconstant
    CHECK(b.odd_mass(sol.shape.coeff) < 1e-10);
}

TEST_CASE("newton lattice solve: spheres smoke test") {
    StarBasis b(3, 16, 32);
    LatticeSpectrum sp = gamma_n(3, 1.0, 32);
    const double gam = 0.5 * sp.gamma_n;
    auto lat = BravaisLattice::line(3);
    LatticeQuad q;
    q.ang_panels = 10;
    q.ang_gl = 8;
    q.lon = 24;
    auto sol = newton_lattice_solve(b, lat, 1.0, gam, 0.004, sp, 8, 1e-7, q);
    CHECK(sol.residual_inf < 1e-7);
}
